#include "puq/train.hpp"

#include <cmath>
#include <numeric>

#include "puq/errors.hpp"
#include "puq/ops.hpp"

namespace puq {

void adam_step(Vector& params, std::span<const double> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw InvalidInput("adam_step: size mismatch (params=" + std::to_string(params.size()) +
                       ", grads=" + std::to_string(grads.size()) +
                       ", state=" + std::to_string(state.m.size()) + ")");
  }
  state.t += 1;
  const double b1 = state.cfg.beta1;
  const double b2 = state.cfg.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    const double m_hat = state.m[i] / corr1;
    const double v_hat = state.v[i] / corr2;
    params[i] -= state.cfg.lr * m_hat / (std::sqrt(v_hat) + state.cfg.eps);
  }
}

double cross_entropy(const std::vector<ProbVector>& preds, const std::vector<ClassIndex>& labels) {
  if (preds.empty()) throw InvalidInput("cross_entropy: empty batch");
  if (preds.size() != labels.size()) {
    throw InvalidInput("cross_entropy: " + std::to_string(preds.size()) + " predictions vs " +
                       std::to_string(labels.size()) + " labels");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] >= preds[i].size()) {
      throw InvalidInput("cross_entropy: label " + std::to_string(labels[i]) + " out of range");
    }
    total -= std::log(std::max(preds[i][labels[i]], 1e-12));
  }
  return total / static_cast<double>(preds.size());
}

double accuracy(const Model& model, const LabeledDataset& ds) {
  if (ds.size() == 0) throw InvalidInput("accuracy: empty dataset");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (argmax(forward(model, ds.images[i]).values()) == ds.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

TrainResult train(Model model, const LabeledDataset& ds, std::size_t epochs,
                  std::size_t batch_size, const AdamConfig& adam, RngStream rng) {
  if (ds.size() == 0) throw InvalidInput("train: empty dataset");
  if (epochs < 1) throw InvalidInput("train: epochs must be >= 1");
  if (batch_size == 0) throw InvalidInput("train: batch_size must be >= 1");

  AdamState state(param_count(model), adam);
  Vector params = flat_params(model);

  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  result.history.reserve(epochs);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    RngStream shuffle_rng = rng.child(static_cast<std::uint32_t>(epoch));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t len = std::min(batch_size, order.size() - start);
      const GradResult g =
          gradients(model, ds, std::span<const std::size_t>(order.data() + start, len));
      adam_step(params, g.grad, state);
      set_flat_params(model, params);
      loss_sum += g.loss;
      correct += g.correct;
      ++batches;
    }
    result.history.push_back(EpochStats{
        loss_sum / static_cast<double>(batches),
        static_cast<double>(correct) / static_cast<double>(order.size()),
    });
  }
  result.model = std::move(model);
  return result;
}

}  // namespace puq
