#pragma once

#include <array>
#include <cstdint>
#include <random>

#include "puq/matrix.hpp"

namespace puq {

/// What a stream of random numbers is consumed for. Baked into the stream
/// identity so no two uses of the same master seed ever share variates.
enum class StreamPurpose : std::uint32_t {
  WeightInit = 1,
  Shuffle = 2,
  WeightNoise = 3,
  InputNoise = 4,
  Blobs = 5,
  Subset = 6,
};

/// Identity of one random stream: (purpose, sigma-index, draw-index,
/// chunk-index). Unused slots stay zero.
struct StreamId {
  std::uint32_t purpose = 0;
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  std::uint32_t k = 0;
};

/// Deterministic random stream. The same (master_seed, StreamId) pair
/// yields the same variate sequence on every run: the engine is
/// mt19937_64 seeded through std::seed_seq, both of which are specified
/// bit-for-bit by the standard. Gaussians come from a fixed Box-Muller
/// transform, so the sequence is reproducible up to libm rounding.
///
/// Streams are cheap to construct and never shared between threads; each
/// parallel work unit derives its own via child().
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, StreamId id);

  std::uint64_t master_seed() const { return master_seed_; }
  StreamId id() const { return id_; }

  /// Same master seed and purpose/i, with the (draw, chunk) slots replaced.
  RngStream child(std::uint32_t draw, std::uint32_t chunk = 0) const;

  std::uint64_t next_u64();

  /// Uniform in [0, n) by rejection; no modulo bias.
  std::uint64_t uniform_below(std::uint64_t n);

  /// Standard normal draw.
  double gaussian();

  /// In-place Fisher-Yates shuffle with this stream.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t master_seed_;
  StreamId id_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// rows x cols matrix of i.i.d. standard normal draws from `rng`.
Matrix gaussian_matrix(std::size_t rows, std::size_t cols, RngStream& rng);

}  // namespace puq
