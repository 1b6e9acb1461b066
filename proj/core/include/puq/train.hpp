#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "puq/dataset.hpp"
#include "puq/model.hpp"

namespace puq {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment accumulators plus the completed-step counter.
struct AdamState {
  Vector m;
  Vector v;
  std::uint64_t t = 0;
  AdamConfig cfg;

  explicit AdamState(std::size_t n, AdamConfig config = {})
      : m(n, 0.0), v(n, 0.0), cfg(config) {}
};

/// One bias-corrected Adam update in place; increments state.t.
void adam_step(Vector& params, std::span<const double> grads, AdamState& state);

/// Batch-average cross-entropy, -(1/N) sum ln p[label]. Probabilities are
/// floored at 1e-12 before the log so saturated softmax outputs stay finite.
double cross_entropy(const std::vector<ProbVector>& preds, const std::vector<ClassIndex>& labels);

/// Fraction of samples whose argmax prediction matches the label.
double accuracy(const Model& model, const LabeledDataset& ds);

struct EpochStats {
  double loss = 0.0;      // mean batch loss over the epoch
  double accuracy = 0.0;  // fraction correct across the epoch's forward passes
};

struct TrainResult {
  Model model;
  std::vector<EpochStats> history;
};

/// Mini-batch training with a seeded per-epoch shuffle. Deterministic for
/// a fixed (model, dataset, rng) triple.
TrainResult train(Model model, const LabeledDataset& ds, std::size_t epochs,
                  std::size_t batch_size, const AdamConfig& adam, RngStream rng);

}  // namespace puq
