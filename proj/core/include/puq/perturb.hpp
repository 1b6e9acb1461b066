#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "puq/dataset.hpp"
#include "puq/model.hpp"

namespace puq {

/// Where the Gaussian noise goes: every trainable parameter, or the input
/// image (clamped back into [0,1]).
enum class PerturbMode { Weight, Input };

std::string to_string(PerturbMode mode);
PerturbMode parse_mode(const std::string& s);

/// Raw material for every metric: per sample, the n perturbed argmax
/// predictions and the n probabilities assigned to the true class.
struct PredictionLog {
  struct Sample {
    std::uint32_t id = 0;  // index into the originating dataset
    ClassIndex true_label = 0;
    std::vector<ClassIndex> preds;
    std::vector<double> true_probs;
  };

  std::vector<Sample> samples;
  double sigma = 0.0;
  PerturbMode mode = PerturbMode::Weight;
  std::size_t draws = 0;  // n
  std::string model_tag;
  std::uint64_t master_seed = 0;
  /// How many perturbed models the pass built; n with shared draws,
  /// n * |dataset| with independent draws, 0 in input mode.
  std::size_t model_perturbations = 0;
};

/// Adds an independent sigma * N(0,1) offset to every trainable scalar.
/// Returns a new model; sigma = 0 returns a bit-exact copy.
Model perturb_params(const Model& model, double sigma, RngStream& rng);

/// x + sigma * N entrywise, then clamped to [0,1].
Matrix perturb_input(const Matrix& image, double sigma, RngStream& rng);

struct PassOptions {
  /// Weight mode only: give every sample its own fresh weight draws
  /// instead of sharing the n draws across the dataset.
  bool independent_draws = false;
  /// Samples per RNG chunk; results do not depend on this value's
  /// scheduling, only on the (draw, chunk) stream layout.
  std::size_t chunk_size = 512;
};

/// Monte-Carlo sampling pass. Weight mode draws n perturbed models, each
/// evaluated over the whole dataset, so the draws are shared across
/// samples; input mode pushes n independently-noised copies of each image
/// through the unperturbed model. Streams derive from
/// (master seed, purpose+sigma-index carried by `rng`, draw, chunk), so
/// the pass is deterministic and chunk-schedule independent.
PredictionLog run_perturbed_pass(const Model& model, const LabeledDataset& ds, double sigma,
                                 PerturbMode mode, std::size_t draws, const RngStream& rng,
                                 const PassOptions& options = {});

/// CSV with header id,true_label,pred_0..pred_{n-1},prob_0..prob_{n-1}.
/// Probabilities use round-trippable formatting.
void write_prediction_log_csv(const PredictionLog& log, const std::string& path);
PredictionLog read_prediction_log_csv(const std::string& path);

}  // namespace puq
