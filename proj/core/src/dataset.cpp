#include "puq/dataset.hpp"

#include <zlib.h>

#include <cmath>
#include <fstream>

#include "puq/errors.hpp"
#include "puq/ops.hpp"

namespace puq {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
         (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
         (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
         static_cast<std::uint32_t>(bytes[offset + 3]);
}

std::string hex_magic(std::uint32_t magic) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "0x%08x", magic);
  return buf;
}

void check_header(std::span<const std::uint8_t> bytes, std::uint32_t want_magic,
                  std::size_t header_len, const char* what) {
  if (bytes.size() < header_len) {
    throw FormatError(std::string(what) + ": header needs " + std::to_string(header_len) +
                      " bytes, file has " + std::to_string(bytes.size()));
  }
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != want_magic) {
    throw FormatError(std::string(what) + ": expected magic " + hex_magic(want_magic) +
                      ", found " + hex_magic(magic));
  }
}

}  // namespace

RawImages parse_idx_images(std::span<const std::uint8_t> bytes) {
  check_header(bytes, kImageMagic, 16, "parse_idx_images");
  const std::size_t count = read_be32(bytes, 4);
  const std::size_t rows = read_be32(bytes, 8);
  const std::size_t cols = read_be32(bytes, 12);
  const std::size_t expected = 16 + count * rows * cols;
  if (bytes.size() != expected) {
    throw FormatError("parse_idx_images: expected " + std::to_string(expected) +
                      " bytes for " + std::to_string(count) + " images, got " +
                      std::to_string(bytes.size()));
  }
  RawImages out;
  out.rows = rows;
  out.cols = cols;
  out.pixels.reserve(count);
  const std::uint8_t* p = bytes.data() + 16;
  for (std::size_t i = 0; i < count; ++i, p += rows * cols) {
    out.pixels.emplace_back(p, p + rows * cols);
  }
  return out;
}

std::vector<ClassIndex> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  check_header(bytes, kLabelMagic, 8, "parse_idx_labels");
  const std::size_t count = read_be32(bytes, 4);
  const std::size_t expected = 8 + count;
  if (bytes.size() != expected) {
    throw FormatError("parse_idx_labels: expected " + std::to_string(expected) +
                      " bytes for " + std::to_string(count) + " labels, got " +
                      std::to_string(bytes.size()));
  }
  std::vector<ClassIndex> labels;
  labels.reserve(count);
  for (std::size_t i = 0; i < count; ++i) labels.push_back(bytes[8 + i]);
  return labels;
}

std::vector<std::uint8_t> read_maybe_gzip(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 2 || bytes[0] != 0x1f || bytes[1] != 0x8b) return bytes;

  // gzip stream: inflate with the 16+MAX_WBITS window so zlib handles the
  // gzip wrapper itself.
  z_stream strm{};
  if (inflateInit2(&strm, 16 + MAX_WBITS) != Z_OK) {
    throw IoError("zlib init failed for " + path);
  }
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> buf(1 << 16);
  strm.next_in = bytes.data();
  strm.avail_in = static_cast<uInt>(bytes.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    strm.next_out = buf.data();
    strm.avail_out = static_cast<uInt>(buf.size());
    rc = inflate(&strm, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&strm);
      throw FormatError("corrupt gzip stream in " + path);
    }
    out.insert(out.end(), buf.data(), buf.data() + (buf.size() - strm.avail_out));
  }
  inflateEnd(&strm);
  return out;
}

LabeledDataset make_dataset(const RawImages& raw_images, const std::vector<ClassIndex>& raw_labels,
                            std::size_t num_classes) {
  if (raw_images.pixels.size() != raw_labels.size()) {
    throw InvalidInput("make_dataset: " + std::to_string(raw_images.pixels.size()) +
                       " images vs " + std::to_string(raw_labels.size()) + " labels");
  }
  LabeledDataset ds;
  ds.num_classes = num_classes;
  ds.images.reserve(raw_images.pixels.size());
  ds.labels.reserve(raw_labels.size());
  for (std::size_t i = 0; i < raw_labels.size(); ++i) {
    if (raw_labels[i] >= num_classes) {
      throw InvalidInput("make_dataset: label " + std::to_string(raw_labels[i]) + " at index " +
                         std::to_string(i) + " is not below " + std::to_string(num_classes));
    }
    Matrix img(raw_images.rows, raw_images.cols);
    auto flat = img.flat();
    for (std::size_t p = 0; p < flat.size(); ++p) {
      flat[p] = static_cast<double>(raw_images.pixels[i][p]) / 255.0;
    }
    ds.images.push_back(std::move(img));
    ds.labels.push_back(raw_labels[i]);
  }
  return ds;
}

LabeledDataset load_idx_pair(const std::string& images_path, const std::string& labels_path,
                             std::size_t num_classes) {
  const auto image_bytes = read_maybe_gzip(images_path);
  const auto label_bytes = read_maybe_gzip(labels_path);
  return make_dataset(parse_idx_images(image_bytes), parse_idx_labels(label_bytes), num_classes);
}

LabeledDataset synthetic_blobs(std::size_t num_classes, std::size_t dims, std::size_t per_class,
                               double separation, RngStream& rng) {
  if (num_classes < 2) throw InvalidInput("synthetic_blobs: need at least 2 classes");
  if (dims < 1) throw InvalidInput("synthetic_blobs: need at least 1 dimension");
  if (!(separation > 0.0)) throw InvalidInput("synthetic_blobs: separation must be positive");

  // Class directions: basis vectors, sign-flipped on each reuse. Keeps the
  // centers pairwise far apart without drawing random directions that
  // could happen to be nearly parallel.
  std::vector<Vector> centers(num_classes, Vector(dims, 0.0));
  for (std::size_t c = 0; c < num_classes; ++c) {
    const std::size_t axis = c % dims;
    const double sign = (c / dims) % 2 == 0 ? 1.0 : -1.0;
    centers[c][axis] = sign * separation;
  }

  // Affine map into [0,1]: centers sit within +-separation and the noise
  // is unit-scale, so [-(sep+5), sep+5] covers essentially all mass.
  const double lo = -(separation + 5.0);
  const double hi = separation + 5.0;

  LabeledDataset ds;
  ds.num_classes = num_classes;
  ds.images.reserve(num_classes * per_class);
  ds.labels.reserve(num_classes * per_class);
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t s = 0; s < per_class; ++s) {
      Matrix img(dims, 1);
      auto flat = img.flat();
      for (std::size_t d = 0; d < dims; ++d) {
        const double v = centers[c][d] + rng.gaussian();
        flat[d] = std::min(1.0, std::max(0.0, (v - lo) / (hi - lo)));
      }
      ds.images.push_back(std::move(img));
      ds.labels.push_back(static_cast<ClassIndex>(c));
    }
  }
  return ds;
}

}  // namespace puq
