#include "puq/nn_ops.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "puq/errors.hpp"

namespace puq {

std::size_t conv_out_dim(std::size_t input, std::size_t filter, std::size_t padding,
                         std::size_t stride) {
  if (input < 1 || filter < 1) throw InvalidInput("conv_out_dim: input and filter must be >= 1");
  if (stride < 1) throw InvalidInput("conv_out_dim: stride must be >= 1");
  if (filter > input + 2 * padding) {
    throw InvalidInput("conv_out_dim: filter " + std::to_string(filter) +
                       " exceeds padded input " + std::to_string(input + 2 * padding));
  }
  const std::size_t span = input - filter + 2 * padding;
  if (span % stride != 0) {
    throw ConfigError("conv_out_dim: (" + std::to_string(input) + " - " + std::to_string(filter) +
                      " + 2*" + std::to_string(padding) + ") is not divisible by stride " +
                      std::to_string(stride));
  }
  return span / stride + 1;
}

namespace {

double padded_at(const Matrix& image, long r, long c) {
  if (r < 0 || c < 0 || r >= static_cast<long>(image.rows()) ||
      c >= static_cast<long>(image.cols())) {
    return 0.0;
  }
  return image(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
}

}  // namespace

std::vector<Matrix> conv2d(const Matrix& image, const std::vector<Matrix>& kernels,
                           std::size_t stride, std::size_t padding) {
  if (kernels.empty()) throw InvalidInput("conv2d: no kernels");
  if (image.rows() != image.cols()) {
    throw InvalidInput("conv2d: expected square image, got " + std::to_string(image.rows()) +
                       "x" + std::to_string(image.cols()));
  }
  const std::size_t filter = kernels[0].rows();
  for (const Matrix& k : kernels) {
    if (k.rows() != filter || k.cols() != filter) {
      throw InvalidInput("conv2d: kernels must be square and uniformly sized");
    }
  }
  const std::size_t out = conv_out_dim(image.rows(), filter, padding, stride);

  std::vector<Matrix> maps;
  maps.reserve(kernels.size());
  for (const Matrix& kernel : kernels) {
    Matrix map(out, out);
    for (std::size_t orow = 0; orow < out; ++orow) {
      for (std::size_t ocol = 0; ocol < out; ++ocol) {
        const long base_r = static_cast<long>(orow * stride) - static_cast<long>(padding);
        const long base_c = static_cast<long>(ocol * stride) - static_cast<long>(padding);
        double acc = 0.0;
        for (std::size_t kr = 0; kr < filter; ++kr) {
          for (std::size_t kc = 0; kc < filter; ++kc) {
            acc += kernel(kr, kc) * padded_at(image, base_r + static_cast<long>(kr),
                                              base_c + static_cast<long>(kc));
          }
        }
        map(orow, ocol) = acc;
      }
    }
    maps.push_back(std::move(map));
  }
  return maps;
}

Matrix avg_pool(const Matrix& map, std::size_t window, std::size_t stride) {
  if (map.rows() != map.cols()) {
    throw InvalidInput("avg_pool: expected square map, got " + std::to_string(map.rows()) + "x" +
                       std::to_string(map.cols()));
  }
  const std::size_t out = conv_out_dim(map.rows(), window, 0, stride);
  Matrix pooled(out, out);
  for (std::size_t orow = 0; orow < out; ++orow) {
    for (std::size_t ocol = 0; ocol < out; ++ocol) {
      double acc = 0.0;
      for (std::size_t wr = 0; wr < window; ++wr) {
        for (std::size_t wc = 0; wc < window; ++wc) {
          acc += map(orow * stride + wr, ocol * stride + wc);
        }
      }
      pooled(orow, ocol) = acc / static_cast<double>(window * window);
    }
  }
  return pooled;
}

Vector layer_norm(std::span<const double> a, std::span<const double> gamma,
                  std::span<const double> beta, double eps) {
  if (a.empty()) throw InvalidInput("layer_norm: empty input");
  if (a.size() != gamma.size() || a.size() != beta.size()) {
    throw InvalidInput("layer_norm: length mismatch (a=" + std::to_string(a.size()) +
                       ", gamma=" + std::to_string(gamma.size()) +
                       ", beta=" + std::to_string(beta.size()) + ")");
  }
  const double n = static_cast<double>(a.size());
  double mu = 0.0;
  for (double v : a) mu += v;
  mu /= n;
  double var = 0.0;
  for (double v : a) var += (v - mu) * (v - mu);
  var /= n;
  const double inv_std = 1.0 / std::sqrt(var + eps);

  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = gamma[i] * (a[i] - mu) * inv_std + beta[i];
  }
  return out;
}

double activate(Activation kind, double x) {
  switch (kind) {
    case Activation::Relu:
      return x > 0.0 ? x : 0.0;
    case Activation::Sigmoid:
      return 1.0 / (1.0 + std::exp(-x));
    case Activation::Gelu:
      return x * 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0);
  }
  throw InternalError("activate: unknown kind");
}

double activate_grad(Activation kind, double x) {
  switch (kind) {
    case Activation::Relu:
      return x > 0.0 ? 1.0 : 0.0;
    case Activation::Sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-x));
      return s * (1.0 - s);
    }
    case Activation::Gelu: {
      const double cdf = 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0);
      const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
      return cdf + x * pdf;
    }
  }
  throw InternalError("activate_grad: unknown kind");
}

}  // namespace puq
