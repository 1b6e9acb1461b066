#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "puq/metrics.hpp"
#include "puq/model.hpp"
#include "puq/perturb.hpp"
#include "puq/train.hpp"

namespace puq {

/// Full experiment description. One JSON document mirrors this struct
/// field for field; CLI flags override file values. The resolved snapshot
/// written next to the outputs materializes every default, so a run is
/// reproducible from the snapshot plus the data files alone.
struct ExperimentConfig {
  // Data: either data_dir with the canonical MNIST file names (plain or
  // .gz), or the four explicit paths.
  std::string data_dir;
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;

  ModelKind model = ModelKind::Linear;
  std::size_t epochs = 10;
  // 256 reproduces the published noise-sensitivity table; smaller batches
  // take ~4x more optimizer steps, which inflates the trained weight norm
  // and with it the input-noise accuracy drop.
  std::size_t batch_size = 256;
  std::size_t hidden = 128;  // MLP only
  AdamConfig adam;

  std::vector<double> sigmas{0.1, 0.5, 1.0, 10.0};
  std::vector<double> lambdas{0.1, 0.5, 1.0, 2.0};
  std::size_t iters = 10;  // draws per (sigma, mode)
  std::vector<PerturbMode> modes{PerturbMode::Weight, PerturbMode::Input};

  std::uint64_t master_seed = 42;
  std::size_t num_bins = 20;
  std::size_t min_count = 5;
  bool independent_draws = false;
  CorrPooling corr_pooling = CorrPooling::PooledDraws;

  std::string out_dir = "out";
  std::size_t jobs = 0;  // 0 = hardware concurrency
  bool full = false;     // evaluate the whole test set regardless of model
  long long subset = -1; // -1 = auto (cnn: 2000, others: full); >0 = that many samples
  bool force = false;
};

ExperimentConfig load_config_file(const std::string& path);
void validate_config(const ExperimentConfig& cfg);

/// JSON snapshot with every default materialized.
std::string resolved_config_json(const ExperimentConfig& cfg);

/// Number of evaluation samples the grid will use, after applying the
/// subset/full/auto rules against the test set size.
std::size_t resolved_subset_size(const ExperimentConfig& cfg, std::size_t test_size);

struct TrainStageResult {
  Model model;
  std::vector<EpochStats> history;
  double test_accuracy = 0.0;
};

/// Trains the configured model and writes model.ckpt,
/// training_history.csv and config.resolved.json into out_dir.
TrainStageResult run_train(const ExperimentConfig& cfg);

struct PerturbStageResult {
  double alpha = 0.0;
  std::vector<std::string> log_paths;  // grid order: sigma outer, mode inner
};

/// Loads model.ckpt, selects the evaluation subset, computes alpha on it,
/// and runs every (sigma, mode) pass, up to `jobs` in parallel. Each grid
/// point derives its own RNG streams, so results are schedule
/// independent. Writes logs/pred_<mode>_s<sigma>.csv and logs/manifest.json.
PerturbStageResult run_perturb(const ExperimentConfig& cfg);

/// Consumes the logs directory: per grid point writes samples.csv,
/// bins.csv, eac_class.csv and the two SVGs under eac/<mode>_s<sigma>/,
/// plus the top-level metrics.csv.
std::vector<MetricRow> run_metrics(const ExperimentConfig& cfg);

/// train + perturb + metrics.
std::vector<MetricRow> run_experiment(const ExperimentConfig& cfg);

}  // namespace puq
