#include "puq/ops.hpp"

#include <algorithm>
#include <cmath>

#include "puq/errors.hpp"

namespace puq {

ProbVector::ProbVector(Vector probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw InvalidInput("ProbVector: empty");
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw InvalidInput("ProbVector: entry " + std::to_string(p) + " outside [0,1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw InvalidInput("ProbVector: entries sum to " + std::to_string(sum));
  }
}

ProbVector softmax(std::span<const double> logits) {
  if (logits.empty()) throw InvalidInput("softmax: empty input");
  double mx = logits[0];
  for (double v : logits) {
    if (!std::isfinite(v)) throw InvalidInput("softmax: non-finite logit");
    mx = std::max(mx, v);
  }
  Vector out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return ProbVector(std::move(out));
}

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw InvalidInput("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

Matrix clamp_unit(const Matrix& m) {
  Matrix out = m;
  for (double& v : out.flat()) v = std::min(1.0, std::max(0.0, v));
  return out;
}

}  // namespace puq
