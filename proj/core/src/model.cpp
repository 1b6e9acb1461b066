#include "puq/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <type_traits>

#include <nlohmann/json.hpp>

#include "puq/errors.hpp"

namespace puq {

using json = nlohmann::json;

TinyCnn::TinyCnn(const TinyCnnConfig& config) : cfg(config) {
  conv_out = conv_out_dim(cfg.input_side, cfg.filter, cfg.padding, cfg.stride);
  pool_out = conv_out_dim(conv_out, kPoolWindow, 0, kPoolStride);
  kernels.assign(cfg.kernels, Matrix(cfg.filter, cfg.filter));
  gamma.assign(cfg.kernels, 1.0);
  beta.assign(cfg.kernels, 0.0);
  fc = Matrix(cfg.classes, cfg.kernels * pool_out * pool_out);
  fc_bias.assign(cfg.classes, 0.0);
}

namespace {

void fill_gaussian(std::span<double> dst, double stddev, RngStream& rng) {
  for (double& v : dst) v = stddev * rng.gaussian();
}

}  // namespace

Model make_model(ModelKind kind, std::size_t classes, std::size_t input_dim, std::size_t hidden,
                 RngStream& rng) {
  switch (kind) {
    case ModelKind::Linear: {
      LinearModel m(classes, input_dim);
      fill_gaussian(m.W.flat(), 1.0 / std::sqrt(static_cast<double>(input_dim)), rng);
      return m;
    }
    case ModelKind::Mlp: {
      MlpModel m(classes, input_dim, hidden);
      fill_gaussian(m.W1.flat(), 1.0 / std::sqrt(static_cast<double>(input_dim)), rng);
      fill_gaussian(m.W2.flat(), 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
      return m;
    }
    case ModelKind::Cnn: {
      TinyCnnConfig cfg;
      cfg.classes = classes;
      TinyCnn m(cfg);
      const double kstd = 1.0 / static_cast<double>(cfg.filter);  // 1/sqrt(F*F)
      for (Matrix& k : m.kernels) fill_gaussian(k.flat(), kstd, rng);
      fill_gaussian(m.fc.flat(), 1.0 / std::sqrt(static_cast<double>(m.fc.cols())), rng);
      return m;
    }
  }
  throw InternalError("make_model: unknown kind");
}

std::string model_id(const Model& model) {
  return std::visit(
      [](const auto& m) -> std::string {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>) {
          return "linear-" + std::to_string(m.W.rows()) + "x" + std::to_string(m.W.cols());
        } else if constexpr (std::is_same_v<T, MlpModel>) {
          return "mlp-" + std::to_string(m.W2.rows()) + "x" + std::to_string(m.W1.rows()) + "x" +
                 std::to_string(m.W1.cols());
        } else {
          return "cnn-k" + std::to_string(m.cfg.kernels) + "f" + std::to_string(m.cfg.filter);
        }
      },
      model);
}

std::size_t param_count(const Model& model) {
  return std::visit(
      [](const auto& m) -> std::size_t {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>) {
          return m.W.size();
        } else if constexpr (std::is_same_v<T, MlpModel>) {
          return m.W1.size() + m.b1.size() + m.W2.size() + m.b2.size();
        } else {
          return m.kernels.size() * m.cfg.filter * m.cfg.filter + m.gamma.size() +
                 m.beta.size() + m.fc.size() + m.fc_bias.size();
        }
      },
      model);
}

namespace {

void append(Vector& out, std::span<const double> src) { out.insert(out.end(), src.begin(), src.end()); }

std::span<const double> take(std::span<const double>& rest, std::size_t n) {
  if (rest.size() < n) throw InvalidInput("set_flat_params: parameter vector too short");
  auto head = rest.first(n);
  rest = rest.subspan(n);
  return head;
}

void copy_into(std::span<double> dst, std::span<const double> src) {
  std::memcpy(dst.data(), src.data(), src.size() * sizeof(double));
}

}  // namespace

Vector flat_params(const Model& model) {
  Vector out;
  out.reserve(param_count(model));
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>) {
          append(out, m.W.flat());
        } else if constexpr (std::is_same_v<T, MlpModel>) {
          append(out, m.W1.flat());
          append(out, m.b1);
          append(out, m.W2.flat());
          append(out, m.b2);
        } else {
          for (const Matrix& k : m.kernels) append(out, k.flat());
          append(out, m.gamma);
          append(out, m.beta);
          append(out, m.fc.flat());
          append(out, m.fc_bias);
        }
      },
      model);
  return out;
}

void set_flat_params(Model& model, std::span<const double> values) {
  if (values.size() != param_count(model)) {
    throw InvalidInput("set_flat_params: expected " + std::to_string(param_count(model)) +
                       " values, got " + std::to_string(values.size()));
  }
  std::span<const double> rest = values;
  std::visit(
      [&](auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>) {
          copy_into(m.W.flat(), take(rest, m.W.size()));
        } else if constexpr (std::is_same_v<T, MlpModel>) {
          copy_into(m.W1.flat(), take(rest, m.W1.size()));
          copy_into(m.b1, take(rest, m.b1.size()));
          copy_into(m.W2.flat(), take(rest, m.W2.size()));
          copy_into(m.b2, take(rest, m.b2.size()));
        } else {
          for (Matrix& k : m.kernels) copy_into(k.flat(), take(rest, k.size()));
          copy_into(m.gamma, take(rest, m.gamma.size()));
          copy_into(m.beta, take(rest, m.beta.size()));
          copy_into(m.fc.flat(), take(rest, m.fc.size()));
          copy_into(m.fc_bias, take(rest, m.fc_bias.size()));
        }
      },
      model);
}

namespace {

void check_flat_input(std::size_t expected, const Matrix& image, const char* what) {
  if (image.size() != expected) {
    throw InvalidInput(std::string(what) + ": expected input of " + std::to_string(expected) +
                       " values, got " + std::to_string(image.rows()) + "x" +
                       std::to_string(image.cols()));
  }
}

// The CNN forward pass keeps enough intermediates for backprop.
struct CnnTrace {
  std::vector<Matrix> conv;      // K maps, conv_out^2
  std::vector<Vector> norm_hat;  // x-hat per map (pre-affine)
  std::vector<double> inv_std;   // per map
  std::vector<Vector> norm_out;  // gamma*x-hat + beta (GELU input)
  Vector pooled;                 // flattened K * pool_out^2
  Vector logits;
};

CnnTrace cnn_forward_trace(const TinyCnn& m, const Matrix& image) {
  if (image.rows() != m.cfg.input_side || image.cols() != m.cfg.input_side) {
    throw InvalidInput("cnn forward: expected " + std::to_string(m.cfg.input_side) + "x" +
                       std::to_string(m.cfg.input_side) + " image, got " +
                       std::to_string(image.rows()) + "x" + std::to_string(image.cols()));
  }
  CnnTrace t;
  t.conv = conv2d(image, m.kernels, m.cfg.stride, m.cfg.padding);
  const std::size_t area = m.conv_out * m.conv_out;
  t.norm_hat.resize(m.kernels.size());
  t.inv_std.resize(m.kernels.size());
  t.norm_out.resize(m.kernels.size());
  t.pooled.reserve(m.kernels.size() * m.pool_out * m.pool_out);

  for (std::size_t k = 0; k < m.kernels.size(); ++k) {
    auto a = t.conv[k].flat();
    double mu = 0.0;
    for (double v : a) mu += v;
    mu /= static_cast<double>(area);
    double var = 0.0;
    for (double v : a) var += (v - mu) * (v - mu);
    var /= static_cast<double>(area);
    const double inv_std = 1.0 / std::sqrt(var + 1e-5);
    t.inv_std[k] = inv_std;

    Vector hat(area), out(area);
    Matrix activated(m.conv_out, m.conv_out);
    auto act = activated.flat();
    for (std::size_t i = 0; i < area; ++i) {
      hat[i] = (a[i] - mu) * inv_std;
      out[i] = m.gamma[k] * hat[i] + m.beta[k];
      act[i] = activate(Activation::Gelu, out[i]);
    }
    t.norm_hat[k] = std::move(hat);
    t.norm_out[k] = std::move(out);

    Matrix pooled = avg_pool(activated, TinyCnn::kPoolWindow, TinyCnn::kPoolStride);
    append(t.pooled, pooled.flat());
  }
  t.logits = matvec(m.fc, t.pooled);
  for (std::size_t c = 0; c < t.logits.size(); ++c) t.logits[c] += m.fc_bias[c];
  return t;
}

struct MlpTrace {
  Vector z1;  // pre-activation hidden
  Vector a1;  // relu(z1)
  Vector logits;
};

MlpTrace mlp_forward_trace(const MlpModel& m, const Matrix& image) {
  check_flat_input(m.W1.cols(), image, "mlp forward");
  MlpTrace t;
  t.z1 = matvec(m.W1, image.flat());
  t.a1.resize(t.z1.size());
  for (std::size_t i = 0; i < t.z1.size(); ++i) {
    t.z1[i] += m.b1[i];
    t.a1[i] = t.z1[i] > 0.0 ? t.z1[i] : 0.0;
  }
  t.logits = matvec(m.W2, t.a1);
  for (std::size_t c = 0; c < t.logits.size(); ++c) t.logits[c] += m.b2[c];
  return t;
}

}  // namespace

ProbVector forward(const Model& model, const Matrix& image) {
  return std::visit(
      [&](const auto& m) -> ProbVector {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>) {
          check_flat_input(m.W.cols(), image, "linear forward");
          return softmax(matvec(m.W, image.flat()));
        } else if constexpr (std::is_same_v<T, MlpModel>) {
          return softmax(mlp_forward_trace(m, image).logits);
        } else {
          return softmax(cnn_forward_trace(m, image).logits);
        }
      },
      model);
}

namespace {

constexpr double kProbFloor = 1e-12;

// delta = yhat - onehot(y); returns the sample's cross-entropy term and
// whether the argmax hit.
std::pair<double, bool> logit_delta(const Vector& logits, ClassIndex label, Vector& delta) {
  if (label >= logits.size()) {
    throw InvalidInput("gradients: label " + std::to_string(label) + " is not below the model's " +
                       std::to_string(logits.size()) + " classes");
  }
  const ProbVector probs = softmax(logits);
  delta.resize(probs.size());
  for (std::size_t c = 0; c < probs.size(); ++c) delta[c] = probs[c];
  delta[label] -= 1.0;
  const double loss = -std::log(std::max(probs[label], kProbFloor));
  const bool hit = argmax(probs.values()) == label;
  return {loss, hit};
}

GradResult linear_gradients(const LinearModel& m, const LabeledDataset& ds,
                            std::span<const std::size_t> batch) {
  GradResult res;
  res.grad.assign(m.W.size(), 0.0);
  Vector delta;
  for (std::size_t idx : batch) {
    const Matrix& img = ds.images[idx];
    check_flat_input(m.W.cols(), img, "linear gradients");
    const auto [loss, hit] = logit_delta(matvec(m.W, img.flat()), ds.labels[idx], delta);
    res.loss += loss;
    res.correct += hit ? 1 : 0;
    auto x = img.flat();
    for (std::size_t c = 0; c < m.W.rows(); ++c) {
      double* row = res.grad.data() + c * m.W.cols();
      const double d = delta[c];
      if (d == 0.0) continue;
      for (std::size_t j = 0; j < m.W.cols(); ++j) row[j] += d * x[j];
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& g : res.grad) g *= inv;
  res.loss *= inv;
  return res;
}

GradResult mlp_gradients(const MlpModel& m, const LabeledDataset& ds,
                         std::span<const std::size_t> batch) {
  const std::size_t n_w1 = m.W1.size(), n_b1 = m.b1.size(), n_w2 = m.W2.size();
  GradResult res;
  res.grad.assign(param_count(Model(m)), 0.0);
  double* gW1 = res.grad.data();
  double* gb1 = gW1 + n_w1;
  double* gW2 = gb1 + n_b1;
  double* gb2 = gW2 + n_w2;

  Vector delta2, delta1(m.W1.rows());
  for (std::size_t idx : batch) {
    const Matrix& img = ds.images[idx];
    const MlpTrace t = mlp_forward_trace(m, img);
    const auto [loss, hit] = logit_delta(t.logits, ds.labels[idx], delta2);
    res.loss += loss;
    res.correct += hit ? 1 : 0;

    for (std::size_t c = 0; c < m.W2.rows(); ++c) {
      const double d = delta2[c];
      gb2[c] += d;
      double* row = gW2 + c * m.W2.cols();
      for (std::size_t h = 0; h < m.W2.cols(); ++h) row[h] += d * t.a1[h];
    }
    for (std::size_t h = 0; h < m.W1.rows(); ++h) {
      double acc = 0.0;
      for (std::size_t c = 0; c < m.W2.rows(); ++c) acc += m.W2(c, h) * delta2[c];
      delta1[h] = t.z1[h] > 0.0 ? acc : 0.0;
    }
    auto x = img.flat();
    for (std::size_t h = 0; h < m.W1.rows(); ++h) {
      const double d = delta1[h];
      gb1[h] += d;
      if (d == 0.0) continue;
      double* row = gW1 + h * m.W1.cols();
      for (std::size_t j = 0; j < m.W1.cols(); ++j) row[j] += d * x[j];
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& g : res.grad) g *= inv;
  res.loss *= inv;
  return res;
}

GradResult cnn_gradients(const TinyCnn& m, const LabeledDataset& ds,
                         std::span<const std::size_t> batch) {
  const std::size_t K = m.kernels.size();
  const std::size_t ksize = m.cfg.filter * m.cfg.filter;
  const std::size_t area = m.conv_out * m.conv_out;
  const std::size_t pool_area = m.pool_out * m.pool_out;

  GradResult res;
  res.grad.assign(param_count(Model(m)), 0.0);
  double* gKernels = res.grad.data();
  double* gGamma = gKernels + K * ksize;
  double* gBeta = gGamma + K;
  double* gFc = gBeta + K;
  double* gFcBias = gFc + m.fc.size();

  Vector delta;
  for (std::size_t idx : batch) {
    const Matrix& img = ds.images[idx];
    const CnnTrace t = cnn_forward_trace(m, img);
    const auto [loss, hit] = logit_delta(t.logits, ds.labels[idx], delta);
    res.loss += loss;
    res.correct += hit ? 1 : 0;

    // fc layer
    Vector d_pooled(t.pooled.size(), 0.0);
    for (std::size_t c = 0; c < m.fc.rows(); ++c) {
      const double d = delta[c];
      gFcBias[c] += d;
      double* row = gFc + c * m.fc.cols();
      for (std::size_t j = 0; j < m.fc.cols(); ++j) {
        row[j] += d * t.pooled[j];
        d_pooled[j] += m.fc(c, j) * d;
      }
    }

    for (std::size_t k = 0; k < K; ++k) {
      // average pool spreads each gradient evenly over its window
      Vector d_act(area, 0.0);
      const double inv_win = 1.0 / static_cast<double>(TinyCnn::kPoolWindow * TinyCnn::kPoolWindow);
      for (std::size_t pr = 0; pr < m.pool_out; ++pr) {
        for (std::size_t pc = 0; pc < m.pool_out; ++pc) {
          const double d = d_pooled[k * pool_area + pr * m.pool_out + pc] * inv_win;
          for (std::size_t wr = 0; wr < TinyCnn::kPoolWindow; ++wr) {
            for (std::size_t wc = 0; wc < TinyCnn::kPoolWindow; ++wc) {
              d_act[(pr * TinyCnn::kPoolStride + wr) * m.conv_out +
                    (pc * TinyCnn::kPoolStride + wc)] += d;
            }
          }
        }
      }

      // GELU, then the scalar-affine layer norm
      Vector d_norm_out(area);
      for (std::size_t i = 0; i < area; ++i) {
        d_norm_out[i] = d_act[i] * activate_grad(Activation::Gelu, t.norm_out[k][i]);
      }
      double d_gamma = 0.0, d_beta = 0.0, mean_dhat = 0.0, mean_dhat_hat = 0.0;
      Vector d_hat(area);
      for (std::size_t i = 0; i < area; ++i) {
        d_gamma += d_norm_out[i] * t.norm_hat[k][i];
        d_beta += d_norm_out[i];
        d_hat[i] = d_norm_out[i] * m.gamma[k];
        mean_dhat += d_hat[i];
        mean_dhat_hat += d_hat[i] * t.norm_hat[k][i];
      }
      gGamma[k] += d_gamma;
      gBeta[k] += d_beta;
      mean_dhat /= static_cast<double>(area);
      mean_dhat_hat /= static_cast<double>(area);

      Vector d_conv(area);
      for (std::size_t i = 0; i < area; ++i) {
        d_conv[i] = t.inv_std[k] * (d_hat[i] - mean_dhat - t.norm_hat[k][i] * mean_dhat_hat);
      }

      // convolution kernel gradient
      double* gk = gKernels + k * ksize;
      const long pad = static_cast<long>(m.cfg.padding);
      for (std::size_t orow = 0; orow < m.conv_out; ++orow) {
        for (std::size_t ocol = 0; ocol < m.conv_out; ++ocol) {
          const double d = d_conv[orow * m.conv_out + ocol];
          if (d == 0.0) continue;
          const long base_r = static_cast<long>(orow * m.cfg.stride) - pad;
          const long base_c = static_cast<long>(ocol * m.cfg.stride) - pad;
          for (std::size_t kr = 0; kr < m.cfg.filter; ++kr) {
            const long r = base_r + static_cast<long>(kr);
            if (r < 0 || r >= static_cast<long>(img.rows())) continue;
            for (std::size_t kc = 0; kc < m.cfg.filter; ++kc) {
              const long c = base_c + static_cast<long>(kc);
              if (c < 0 || c >= static_cast<long>(img.cols())) continue;
              gk[kr * m.cfg.filter + kc] +=
                  d * img(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
            }
          }
        }
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& g : res.grad) g *= inv;
  res.loss *= inv;
  return res;
}

}  // namespace

GradResult gradients(const Model& model, const LabeledDataset& ds,
                     std::span<const std::size_t> batch) {
  if (batch.empty()) throw InvalidInput("gradients: empty batch");
  return std::visit(
      [&](const auto& m) -> GradResult {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>) {
          return linear_gradients(m, ds, batch);
        } else if constexpr (std::is_same_v<T, MlpModel>) {
          return mlp_gradients(m, ds, batch);
        } else {
          return cnn_gradients(m, ds, batch);
        }
      },
      model);
}

namespace {

constexpr char kCheckpointMagic[8] = {'P', 'U', 'Q', 'M', 'O', 'D', 'L', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

json arch_json(const Model& model) {
  return std::visit(
      [](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>) {
          return {{"type", "linear"}, {"classes", m.W.rows()}, {"input_dim", m.W.cols()}};
        } else if constexpr (std::is_same_v<T, MlpModel>) {
          return {{"type", "mlp"},
                  {"classes", m.W2.rows()},
                  {"input_dim", m.W1.cols()},
                  {"hidden", m.W1.rows()}};
        } else {
          return {{"type", "cnn"},    {"classes", m.cfg.classes},
                  {"kernels", m.cfg.kernels}, {"filter", m.cfg.filter},
                  {"stride", m.cfg.stride},   {"padding", m.cfg.padding},
                  {"input_side", m.cfg.input_side}};
        }
      },
      model);
}

Model model_from_arch(const json& arch) {
  const std::string type = arch.at("type");
  if (type == "linear") {
    return LinearModel(arch.at("classes"), arch.at("input_dim"));
  }
  if (type == "mlp") {
    return MlpModel(arch.at("classes"), arch.at("input_dim"), arch.at("hidden"));
  }
  if (type == "cnn") {
    TinyCnnConfig cfg;
    cfg.classes = arch.at("classes");
    cfg.kernels = arch.at("kernels");
    cfg.filter = arch.at("filter");
    cfg.stride = arch.at("stride");
    cfg.padding = arch.at("padding");
    cfg.input_side = arch.at("input_side");
    return TinyCnn(cfg);
  }
  throw FormatError("checkpoint: unknown architecture type '" + type + "'");
}

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big) {
    auto* p = reinterpret_cast<unsigned char*>(&value);
    std::reverse(p, p + sizeof(T));
  }
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw FormatError("checkpoint: truncated file");
  if constexpr (std::endian::native == std::endian::big) {
    auto* p = reinterpret_cast<unsigned char*>(&value);
    std::reverse(p, p + sizeof(T));
  }
  return value;
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_le(out, kCheckpointVersion);
  const std::string arch = arch_json(model).dump();
  write_le(out, static_cast<std::uint32_t>(arch.size()));
  out.write(arch.data(), static_cast<std::streamsize>(arch.size()));
  const Vector params = flat_params(model);
  write_le(out, static_cast<std::uint64_t>(params.size()));
  for (double v : params) write_le(out, v);
  if (!out) throw IoError("write failed for " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw FormatError("checkpoint: bad magic in " + path);
  }
  const auto version = read_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto arch_len = read_le<std::uint32_t>(in);
  std::string arch_str(arch_len, '\0');
  in.read(arch_str.data(), arch_len);
  if (!in) throw FormatError("checkpoint: truncated architecture descriptor");
  json arch;
  try {
    arch = json::parse(arch_str);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: bad architecture descriptor: ") + e.what());
  }
  Model model = model_from_arch(arch);
  const auto count = read_le<std::uint64_t>(in);
  if (count != param_count(model)) {
    throw FormatError("checkpoint: architecture expects " + std::to_string(param_count(model)) +
                      " parameters, file has " + std::to_string(count));
  }
  Vector params(count);
  for (double& v : params) v = read_le<double>(in);
  set_flat_params(model, params);
  return model;
}

}  // namespace puq
