#include "puq/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <thread>

#include <nlohmann/json.hpp>

#include "puq/errors.hpp"
#include "puq/svg.hpp"

namespace puq {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string fmt_sigma(double sigma) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", sigma);
  return buf;
}

std::string kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Linear: return "linear";
    case ModelKind::Mlp: return "mlp";
    case ModelKind::Cnn: return "cnn";
  }
  throw InternalError("kind_name: unknown kind");
}

ModelKind parse_kind(const std::string& s) {
  if (s == "linear") return ModelKind::Linear;
  if (s == "mlp") return ModelKind::Mlp;
  if (s == "cnn") return ModelKind::Cnn;
  throw ConfigError("model: unknown value '" + s + "' (expected linear, mlp or cnn)");
}

std::string resolve_data_file(const std::string& dir, const std::string& name) {
  const fs::path plain = fs::path(dir) / name;
  if (fs::exists(plain)) return plain.string();
  const fs::path gz = fs::path(dir) / (name + ".gz");
  if (fs::exists(gz)) return gz.string();
  throw IoError("cannot find " + name + " (or .gz) under " + dir);
}

struct DataPaths {
  std::string train_images, train_labels, test_images, test_labels;
};

DataPaths resolve_data_paths(const ExperimentConfig& cfg, bool need_train) {
  DataPaths p;
  p.train_images = cfg.train_images;
  p.train_labels = cfg.train_labels;
  p.test_images = cfg.test_images;
  p.test_labels = cfg.test_labels;
  if (!cfg.data_dir.empty()) {
    if (need_train && p.train_images.empty()) {
      p.train_images = resolve_data_file(cfg.data_dir, "train-images-idx3-ubyte");
    }
    if (need_train && p.train_labels.empty()) {
      p.train_labels = resolve_data_file(cfg.data_dir, "train-labels-idx1-ubyte");
    }
    if (p.test_images.empty()) p.test_images = resolve_data_file(cfg.data_dir, "t10k-images-idx3-ubyte");
    if (p.test_labels.empty()) p.test_labels = resolve_data_file(cfg.data_dir, "t10k-labels-idx1-ubyte");
  }
  if (p.test_images.empty() || p.test_labels.empty()) {
    throw ConfigError("data: no test set configured (set data_dir or test_images/test_labels)");
  }
  if (need_train && (p.train_images.empty() || p.train_labels.empty())) {
    throw ConfigError("data: no training set configured (set data_dir or train_images/train_labels)");
  }
  return p;
}

void refuse_existing(const fs::path& target, bool force) {
  if (!force && fs::exists(target)) {
    throw IoError("output " + target.string() + " already exists (use --force to overwrite)");
  }
}

template <typename T>
T require_field(const json& j, const std::string& key, const char* type_name) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field '" + key + "' is not a " + type_name);
  }
}

}  // namespace

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }

  static const std::vector<std::string> known = {
      "data_dir", "train_images", "train_labels", "test_images", "test_labels",
      "model", "epochs", "batch_size", "hidden", "adam",
      "sigmas", "lambdas", "iters", "modes",
      "master_seed", "num_bins", "min_count", "independent_draws", "corr_pooling",
      "out_dir", "jobs", "full", "subset", "force"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw ConfigError("config: unknown field '" + it.key() + "'");
    }
  }

  ExperimentConfig cfg;
  if (j.contains("data_dir")) cfg.data_dir = require_field<std::string>(j, "data_dir", "string");
  if (j.contains("train_images")) cfg.train_images = require_field<std::string>(j, "train_images", "string");
  if (j.contains("train_labels")) cfg.train_labels = require_field<std::string>(j, "train_labels", "string");
  if (j.contains("test_images")) cfg.test_images = require_field<std::string>(j, "test_images", "string");
  if (j.contains("test_labels")) cfg.test_labels = require_field<std::string>(j, "test_labels", "string");
  if (j.contains("model")) cfg.model = parse_kind(require_field<std::string>(j, "model", "string"));
  if (j.contains("epochs")) cfg.epochs = require_field<std::size_t>(j, "epochs", "non-negative integer");
  if (j.contains("batch_size")) cfg.batch_size = require_field<std::size_t>(j, "batch_size", "non-negative integer");
  if (j.contains("hidden")) cfg.hidden = require_field<std::size_t>(j, "hidden", "non-negative integer");
  if (j.contains("adam")) {
    const json& a = j["adam"];
    if (a.contains("lr")) cfg.adam.lr = require_field<double>(a, "lr", "number");
    if (a.contains("beta1")) cfg.adam.beta1 = require_field<double>(a, "beta1", "number");
    if (a.contains("beta2")) cfg.adam.beta2 = require_field<double>(a, "beta2", "number");
    if (a.contains("eps")) cfg.adam.eps = require_field<double>(a, "eps", "number");
  }
  if (j.contains("sigmas")) cfg.sigmas = require_field<std::vector<double>>(j, "sigmas", "number array");
  if (j.contains("lambdas")) cfg.lambdas = require_field<std::vector<double>>(j, "lambdas", "number array");
  if (j.contains("iters")) cfg.iters = require_field<std::size_t>(j, "iters", "non-negative integer");
  if (j.contains("modes")) {
    cfg.modes.clear();
    for (const auto& m : require_field<std::vector<std::string>>(j, "modes", "string array")) {
      cfg.modes.push_back(parse_mode(m));
    }
  }
  if (j.contains("master_seed")) cfg.master_seed = require_field<std::uint64_t>(j, "master_seed", "non-negative integer");
  if (j.contains("num_bins")) cfg.num_bins = require_field<std::size_t>(j, "num_bins", "non-negative integer");
  if (j.contains("min_count")) cfg.min_count = require_field<std::size_t>(j, "min_count", "non-negative integer");
  if (j.contains("independent_draws")) cfg.independent_draws = require_field<bool>(j, "independent_draws", "boolean");
  if (j.contains("corr_pooling")) {
    const std::string p = require_field<std::string>(j, "corr_pooling", "string");
    if (p == "pooled") {
      cfg.corr_pooling = CorrPooling::PooledDraws;
    } else if (p == "per_sample") {
      cfg.corr_pooling = CorrPooling::PerSampleMean;
    } else {
      throw ConfigError("corr_pooling: unknown value '" + p + "' (expected pooled or per_sample)");
    }
  }
  if (j.contains("out_dir")) cfg.out_dir = require_field<std::string>(j, "out_dir", "string");
  if (j.contains("jobs")) cfg.jobs = require_field<std::size_t>(j, "jobs", "non-negative integer");
  if (j.contains("full")) cfg.full = require_field<bool>(j, "full", "boolean");
  if (j.contains("subset")) cfg.subset = require_field<long long>(j, "subset", "integer");
  if (j.contains("force")) cfg.force = require_field<bool>(j, "force", "boolean");
  return cfg;
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.sigmas.empty()) throw ConfigError("sigmas: must not be empty");
  for (double s : cfg.sigmas) {
    if (!(s >= 0.0)) throw ConfigError("sigmas: value " + std::to_string(s) + " must be >= 0");
  }
  if (cfg.lambdas.empty()) throw ConfigError("lambdas: must not be empty");
  for (double l : cfg.lambdas) {
    if (!(l >= 0.0)) throw ConfigError("lambdas: value " + std::to_string(l) + " must be >= 0");
  }
  if (cfg.iters < 1) throw ConfigError("iters: must be >= 1");
  if (cfg.modes.empty()) throw ConfigError("modes: must not be empty");
  if (cfg.epochs < 1) throw ConfigError("epochs: must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("batch_size: must be >= 1");
  if (cfg.hidden < 1) throw ConfigError("hidden: must be >= 1");
  if (cfg.num_bins < 1) throw ConfigError("num_bins: must be >= 1");
  if (cfg.subset < -1 || cfg.subset == 0) throw ConfigError("subset: must be -1 (auto) or positive");
  if (!(cfg.adam.lr > 0.0)) throw ConfigError("adam.lr: must be > 0");
  if (!(cfg.adam.beta1 >= 0.0 && cfg.adam.beta1 < 1.0)) throw ConfigError("adam.beta1: must be in [0,1)");
  if (!(cfg.adam.beta2 >= 0.0 && cfg.adam.beta2 < 1.0)) throw ConfigError("adam.beta2: must be in [0,1)");
  if (!(cfg.adam.eps > 0.0)) throw ConfigError("adam.eps: must be > 0");
  if (cfg.out_dir.empty()) throw ConfigError("out_dir: must not be empty");
}

std::string resolved_config_json(const ExperimentConfig& cfg) {
  json j;
  j["data_dir"] = cfg.data_dir;
  j["train_images"] = cfg.train_images;
  j["train_labels"] = cfg.train_labels;
  j["test_images"] = cfg.test_images;
  j["test_labels"] = cfg.test_labels;
  j["model"] = kind_name(cfg.model);
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["hidden"] = cfg.hidden;
  j["adam"] = {{"lr", cfg.adam.lr}, {"beta1", cfg.adam.beta1}, {"beta2", cfg.adam.beta2}, {"eps", cfg.adam.eps}};
  j["sigmas"] = cfg.sigmas;
  j["lambdas"] = cfg.lambdas;
  j["iters"] = cfg.iters;
  std::vector<std::string> mode_names;
  for (PerturbMode m : cfg.modes) mode_names.push_back(to_string(m));
  j["modes"] = mode_names;
  j["master_seed"] = cfg.master_seed;
  j["num_bins"] = cfg.num_bins;
  j["min_count"] = cfg.min_count;
  j["independent_draws"] = cfg.independent_draws;
  j["corr_pooling"] = cfg.corr_pooling == CorrPooling::PooledDraws ? "pooled" : "per_sample";
  j["out_dir"] = cfg.out_dir;
  j["jobs"] = cfg.jobs;
  j["full"] = cfg.full;
  j["subset"] = cfg.subset;
  j["force"] = cfg.force;
  return j.dump(2) + "\n";
}

std::size_t resolved_subset_size(const ExperimentConfig& cfg, std::size_t test_size) {
  if (cfg.full) return test_size;
  if (cfg.subset > 0) return std::min(static_cast<std::size_t>(cfg.subset), test_size);
  if (cfg.model == ModelKind::Cnn) return std::min<std::size_t>(2000, test_size);
  return test_size;
}

namespace {

std::string log_file_name(PerturbMode mode, double sigma) {
  return "pred_" + to_string(mode) + "_s" + fmt_sigma(sigma) + ".csv";
}

std::string point_dir_name(PerturbMode mode, double sigma) {
  return to_string(mode) + "_s" + fmt_sigma(sigma);
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

/// Seeded, sorted sample of k distinct indices out of n.
std::vector<std::size_t> subset_indices(std::size_t n, std::size_t k, std::uint64_t master_seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (k >= n) return idx;
  RngStream rng(master_seed, {static_cast<std::uint32_t>(StreamPurpose::Subset), 0, 0, 0});
  // partial Fisher-Yates: first k entries become the sample
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

LabeledDataset select_subset(const LabeledDataset& ds, const std::vector<std::size_t>& indices) {
  LabeledDataset out;
  out.num_classes = ds.num_classes;
  out.images.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    out.images.push_back(ds.images[i]);
    out.labels.push_back(ds.labels[i]);
  }
  return out;
}

}  // namespace

TrainStageResult run_train(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const DataPaths paths = resolve_data_paths(cfg, /*need_train=*/true);

  const fs::path out_dir(cfg.out_dir);
  fs::create_directories(out_dir);
  refuse_existing(out_dir / "model.ckpt", cfg.force);

  const LabeledDataset train_ds = load_idx_pair(paths.train_images, paths.train_labels);
  const LabeledDataset test_ds = load_idx_pair(paths.test_images, paths.test_labels);

  const std::size_t input_dim = train_ds.images.empty() ? 0 : train_ds.images[0].size();
  RngStream init_rng(cfg.master_seed, {static_cast<std::uint32_t>(StreamPurpose::WeightInit), 0, 0, 0});
  Model model = make_model(cfg.model, train_ds.num_classes, input_dim, cfg.hidden, init_rng);

  RngStream shuffle_rng(cfg.master_seed, {static_cast<std::uint32_t>(StreamPurpose::Shuffle), 0, 0, 0});
  TrainResult trained = train(std::move(model), train_ds, cfg.epochs, cfg.batch_size, cfg.adam,
                              shuffle_rng);

  TrainStageResult result;
  result.test_accuracy = accuracy(trained.model, test_ds);
  result.history = std::move(trained.history);
  result.model = std::move(trained.model);

  save_checkpoint(result.model, (out_dir / "model.ckpt").string());
  {
    std::ofstream hist(out_dir / "training_history.csv");
    if (!hist) throw IoError("cannot write training history");
    hist << "epoch,loss,accuracy\n";
    char buf[64];
    for (std::size_t e = 0; e < result.history.size(); ++e) {
      std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", e + 1, result.history[e].loss,
                    result.history[e].accuracy);
      hist << buf;
    }
  }
  write_text_file(out_dir / "config.resolved.json", resolved_config_json(cfg));

  std::cout << "trained " << model_id(result.model) << " for " << cfg.epochs
            << " epochs, test accuracy " << result.test_accuracy << "\n";
  return result;
}

PerturbStageResult run_perturb(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const DataPaths paths = resolve_data_paths(cfg, /*need_train=*/false);
  const fs::path out_dir(cfg.out_dir);
  const fs::path ckpt = out_dir / "model.ckpt";
  if (!fs::exists(ckpt)) {
    throw IoError("no checkpoint at " + ckpt.string() + " (run the train stage first)");
  }
  const fs::path log_dir = out_dir / "logs";
  refuse_existing(log_dir, cfg.force);
  fs::create_directories(log_dir);

  const Model model = load_checkpoint(ckpt.string());
  const ModelKind loaded_kind = std::holds_alternative<LinearModel>(model) ? ModelKind::Linear
                                : std::holds_alternative<MlpModel>(model) ? ModelKind::Mlp
                                                                          : ModelKind::Cnn;
  if (loaded_kind != cfg.model) {
    throw ConfigError("checkpoint " + ckpt.string() + " holds a " + model_id(model) +
                      " model but the config asks for '" + kind_name(cfg.model) + "'");
  }
  const LabeledDataset test_ds = load_idx_pair(paths.test_images, paths.test_labels);
  const std::size_t eval_size = resolved_subset_size(cfg, test_ds.size());
  const std::vector<std::size_t> subset_ids = subset_indices(test_ds.size(), eval_size, cfg.master_seed);
  const LabeledDataset subset_ds =
      eval_size == test_ds.size() ? LabeledDataset{} : select_subset(test_ds, subset_ids);
  const LabeledDataset& eval_ds = eval_size == test_ds.size() ? test_ds : subset_ds;

  PerturbStageResult result;
  result.alpha = accuracy(model, eval_ds);

  struct Task {
    std::size_t sigma_index;
    double sigma;
    PerturbMode mode;
  };
  std::vector<Task> tasks;
  for (std::size_t si = 0; si < cfg.sigmas.size(); ++si) {
    for (PerturbMode mode : cfg.modes) tasks.push_back({si, cfg.sigmas[si], mode});
  }

  std::vector<std::string> files(tasks.size());
  std::vector<std::exception_ptr> failures(tasks.size());
  std::atomic<std::size_t> next{0};
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t jobs = std::min(cfg.jobs == 0 ? hw : cfg.jobs, tasks.size());

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        const Task& t = tasks[i];
        const StreamPurpose purpose = t.mode == PerturbMode::Weight ? StreamPurpose::WeightNoise
                                                                    : StreamPurpose::InputNoise;
        RngStream rng(cfg.master_seed, {static_cast<std::uint32_t>(purpose),
                                        static_cast<std::uint32_t>(t.sigma_index), 0, 0});
        PassOptions opts;
        opts.independent_draws = cfg.independent_draws;
        const PredictionLog log =
            run_perturbed_pass(model, eval_ds, t.sigma, t.mode, cfg.iters, rng, opts);
        const fs::path file = log_dir / log_file_name(t.mode, t.sigma);
        write_prediction_log_csv(log, file.string());
        files[i] = file.string();
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w + 1 < jobs; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }
  result.log_paths = std::move(files);

  json manifest;
  manifest["alpha"] = result.alpha;
  manifest["model"] = model_id(model);
  manifest["n"] = cfg.iters;
  manifest["master_seed"] = cfg.master_seed;
  manifest["num_classes"] = test_ds.num_classes;
  manifest["sigmas"] = cfg.sigmas;
  std::vector<std::string> mode_names;
  for (PerturbMode m : cfg.modes) mode_names.push_back(to_string(m));
  manifest["modes"] = mode_names;
  manifest["eval_samples"] = eval_size;
  if (eval_size != test_ds.size()) manifest["subset_ids"] = subset_ids;
  write_text_file(log_dir / "manifest.json", manifest.dump(2) + "\n");
  write_text_file(out_dir / "config.resolved.json", resolved_config_json(cfg));

  std::cout << "perturb pass complete: alpha " << result.alpha << " over " << eval_size
            << " samples, " << tasks.size() << " grid points\n";
  return result;
}

std::vector<MetricRow> run_metrics(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const fs::path out_dir(cfg.out_dir);
  const fs::path log_dir = out_dir / "logs";
  const fs::path manifest_path = log_dir / "manifest.json";
  if (!fs::exists(manifest_path)) {
    throw IoError("no manifest at " + manifest_path.string() + " (run the perturb stage first)");
  }
  refuse_existing(out_dir / "metrics.csv", cfg.force);

  json manifest;
  {
    std::ifstream in(manifest_path);
    try {
      manifest = json::parse(in);
    } catch (const json::exception& e) {
      throw FormatError("manifest " + manifest_path.string() + " is not valid JSON: " + e.what());
    }
  }
  const double alpha = manifest.at("alpha");
  const std::size_t num_classes = manifest.at("num_classes");

  std::vector<PredictionLog> logs;
  for (double sigma : cfg.sigmas) {
    for (PerturbMode mode : cfg.modes) {
      const fs::path file = log_dir / log_file_name(mode, sigma);
      if (!fs::exists(file)) {
        throw InvalidInput("missing prediction log for sigma=" + fmt_sigma(sigma) + " mode=" +
                           to_string(mode) + " (" + file.string() + ")");
      }
      PredictionLog log = read_prediction_log_csv(file.string());
      log.sigma = sigma;
      log.mode = mode;
      logs.push_back(std::move(log));
    }
  }

  const fs::path eac_dir = out_dir / "eac";
  for (const PredictionLog& log : logs) {
    const fs::path dir = eac_dir / point_dir_name(log.mode, log.sigma);
    fs::create_directories(dir);
    const auto stats = sample_stats(log);
    const auto bins = binned_conditional_accuracy(stats, num_classes, cfg.num_bins, cfg.min_count);
    const auto line = regression_line(bins);
    const auto classes = per_class_eac(stats, num_classes);
    write_samples_csv(stats, (dir / "samples.csv").string());
    write_bins_csv(bins, (dir / "bins.csv").string());
    write_eac_class_csv(classes, (dir / "eac_class.csv").string());
    const std::string title = "sigma=" + fmt_sigma(log.sigma) + " mode=" + to_string(log.mode);
    emit_eac_scatter(stats, bins, line, num_classes, title, (dir / "eac_scatter.svg").string());
    emit_eac_bars(classes, title, (dir / "eac_bars.svg").string());
  }

  const std::vector<MetricRow> rows = metric_grid(logs, cfg.lambdas, alpha, cfg.corr_pooling);
  write_metrics_csv(rows, cfg.lambdas, (out_dir / "metrics.csv").string());

  for (const MetricRow& r : rows) {
    std::cout << "sigma=" << fmt_sigma(r.sigma) << " mode=" << to_string(r.mode)
              << " alpha_sigma=" << r.alpha_sigma << " pi=" << r.pi << " corr=" << r.corr << "\n";
  }
  return rows;
}

std::vector<MetricRow> run_experiment(const ExperimentConfig& cfg) {
  run_train(cfg);
  run_perturb(cfg);
  return run_metrics(cfg);
}

}  // namespace puq
