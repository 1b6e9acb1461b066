#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "puq/dataset.hpp"
#include "puq/matrix.hpp"
#include "puq/nn_ops.hpp"
#include "puq/ops.hpp"
#include "puq/rng.hpp"

namespace puq {

/// Multinomial regression: logits = W x, no bias, softmax on top.
struct LinearModel {
  Matrix W;  // classes x input_dim

  LinearModel() = default;
  LinearModel(std::size_t classes, std::size_t input_dim) : W(classes, input_dim) {}
};

/// One ReLU hidden layer.
struct MlpModel {
  Matrix W1;  // hidden x input
  Vector b1;
  Matrix W2;  // classes x hidden
  Vector b2;

  MlpModel() = default;
  MlpModel(std::size_t classes, std::size_t input_dim, std::size_t hidden)
      : W1(hidden, input_dim), b1(hidden, 0.0), W2(classes, hidden), b2(classes, 0.0) {}
};

struct TinyCnnConfig {
  std::size_t kernels = 8;
  std::size_t filter = 5;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t input_side = 28;
  std::size_t classes = 10;
};

/// conv -> per-map layer norm (scalar gamma/beta per feature map) -> GELU
/// -> 2x2 average pool, stride 2 -> flatten -> fully connected -> softmax.
/// Both spatial reductions go through conv_out_dim, so a geometry with a
/// non-integral output is rejected at construction.
struct TinyCnn {
  TinyCnnConfig cfg;
  std::vector<Matrix> kernels;  // K of filter x filter
  Vector gamma;                 // K, init 1
  Vector beta;                  // K, init 0
  Matrix fc;                    // classes x (K * pool_out^2)
  Vector fc_bias;               // classes

  std::size_t conv_out = 0;
  std::size_t pool_out = 0;
  static constexpr std::size_t kPoolWindow = 2;
  static constexpr std::size_t kPoolStride = 2;

  TinyCnn() = default;
  explicit TinyCnn(const TinyCnnConfig& config);
};

using Model = std::variant<LinearModel, MlpModel, TinyCnn>;

enum class ModelKind { Linear, Mlp, Cnn };

/// Builds a model with seeded Gaussian init: weights N(0, 1/sqrt(fan_in)),
/// biases zero, layer-norm gamma one.
Model make_model(ModelKind kind, std::size_t classes, std::size_t input_dim, std::size_t hidden,
                 RngStream& rng);

/// Short architecture tag, e.g. "linear-10x784".
std::string model_id(const Model& model);

/// Number of trainable scalars.
std::size_t param_count(const Model& model);

/// Every trainable scalar in a fixed, documented order:
///   linear : W row-major
///   mlp    : W1 row-major, b1, W2 row-major, b2
///   cnn    : kernels in index order (each row-major), gamma, beta,
///            fc row-major, fc_bias
/// set_flat_params is the exact inverse.
Vector flat_params(const Model& model);
void set_flat_params(Model& model, std::span<const double> values);

/// Class probabilities for one image. Throws InvalidInput when the image
/// shape does not match the model input.
ProbVector forward(const Model& model, const Matrix& image);

struct GradResult {
  Vector grad;          // flat, same order as flat_params
  double loss = 0.0;    // batch-average cross-entropy
  std::size_t correct = 0;  // argmax hits within the batch
};

/// Analytic gradient of the batch-average cross-entropy over the given
/// dataset rows. Hand-derived backprop per architecture.
GradResult gradients(const Model& model, const LabeledDataset& ds,
                     std::span<const std::size_t> batch);

/// Versioned binary checkpoint: magic, format version, JSON architecture
/// descriptor, then the flat parameter vector as little-endian doubles.
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace puq
