#include "puq/rng.hpp"

#include <cmath>
#include <numbers>

#include "puq/errors.hpp"

namespace puq {

namespace {

std::mt19937_64 make_engine(std::uint64_t master_seed, StreamId id) {
  // seed_seq input words are 32-bit; split the master seed.
  std::seed_seq seq{
      static_cast<std::uint32_t>(master_seed & 0xffffffffu),
      static_cast<std::uint32_t>(master_seed >> 32),
      id.purpose, id.i, id.j, id.k,
  };
  return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t master_seed, StreamId id)
    : master_seed_(master_seed), id_(id), engine_(make_engine(master_seed, id)) {}

RngStream RngStream::child(std::uint32_t draw, std::uint32_t chunk) const {
  StreamId cid = id_;
  cid.j = draw;
  cid.k = chunk;
  return RngStream(master_seed_, cid);
}

std::uint64_t RngStream::next_u64() { return engine_(); }

std::uint64_t RngStream::uniform_below(std::uint64_t n) {
  if (n == 0) throw InvalidInput("uniform_below: n must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return v % n;
}

double RngStream::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller. The 53-bit mapping lands u1 in (0, 1], keeping log(u1) finite.
  const double u1 = static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, RngStream& rng) {
  if (rows < 1 || cols < 1) {
    throw InvalidInput("gaussian_matrix: rows and cols must be at least 1");
  }
  Matrix m(rows, cols);
  for (double& v : m.flat()) v = rng.gaussian();
  return m;
}

}  // namespace puq
