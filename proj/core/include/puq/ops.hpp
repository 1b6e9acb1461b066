#pragma once

#include <span>

#include "puq/matrix.hpp"

namespace puq {

/// Probability vector over classes: entries in [0,1], summing to 1 within
/// 1e-9. Checked at construction.
class ProbVector {
 public:
  explicit ProbVector(Vector probs);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  const Vector& values() const { return probs_; }

 private:
  Vector probs_;
};

/// Numerically stable softmax: subtracts the max logit before
/// exponentiation, so arbitrarily large logits cannot overflow.
/// Order-preserving. Throws InvalidInput on empty or non-finite input.
ProbVector softmax(std::span<const double> logits);

/// Index of the largest entry; ties break to the lowest index so repeated
/// runs count identical prediction histograms.
std::size_t argmax(std::span<const double> v);

/// Every entry mapped to min(1, max(0, value)). Idempotent.
Matrix clamp_unit(const Matrix& m);

}  // namespace puq
