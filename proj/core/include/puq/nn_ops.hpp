#pragma once

#include <span>
#include <vector>

#include "puq/matrix.hpp"

namespace puq {

/// Output side length of a square convolution/pooling window:
/// O = (I - F + 2P)/S + 1. Throws ConfigError when the division does not
/// come out integral, so invalid architectures are rejected when built
/// instead of being silently floored.
std::size_t conv_out_dim(std::size_t input, std::size_t filter, std::size_t padding,
                         std::size_t stride);

/// Valid cross-correlation of one single-channel image with K kernels,
/// zero-padded by `padding`. Each output entry is the dot product of the
/// kernel with the image window at that position.
std::vector<Matrix> conv2d(const Matrix& image, const std::vector<Matrix>& kernels,
                           std::size_t stride, std::size_t padding);

/// Mean over each window x window region stepped by `stride`.
Matrix avg_pool(const Matrix& map, std::size_t window, std::size_t stride);

/// out_i = gamma_i * (a_i - mu)/sqrt(var + eps) + beta_i, with mu and the
/// population variance taken over `a`.
Vector layer_norm(std::span<const double> a, std::span<const double> gamma,
                  std::span<const double> beta, double eps = 1e-5);

enum class Activation { Relu, Sigmoid, Gelu };

/// GELU uses the exact normal-CDF form x * Phi(x), not the tanh
/// approximation.
double activate(Activation kind, double x);

/// Derivative of activate with respect to x.
double activate_grad(Activation kind, double x);

}  // namespace puq
