#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "puq/matrix.hpp"
#include "puq/rng.hpp"

namespace puq {

/// Images paired with integer class labels. Pixels live in [0,1].
/// MNIST images are stored 28x28; since Matrix data is contiguous
/// row-major, the same buffer doubles as the flattened 784-vector the
/// linear and MLP paths consume.
struct LabeledDataset {
  std::vector<Matrix> images;
  std::vector<ClassIndex> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return images.size(); }
};

/// Raw byte images straight out of an IDX file, before normalization.
struct RawImages {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::vector<std::uint8_t>> pixels;
};

/// Parses an IDX image file (magic 0x00000803). Throws FormatError naming
/// the expected and found magic, or the expected and actual byte counts on
/// truncation.
RawImages parse_idx_images(std::span<const std::uint8_t> bytes);

/// Parses an IDX label file (magic 0x00000801).
std::vector<ClassIndex> parse_idx_labels(std::span<const std::uint8_t> bytes);

/// Reads a file, transparently inflating it when it starts with the gzip
/// prefix 0x1f 0x8b.
std::vector<std::uint8_t> read_maybe_gzip(const std::string& path);

/// Pairs raw images with labels, dividing pixel bytes by 255 into [0,1].
/// Plain /255 only; the perturbation stage clamps noisy inputs back to
/// [0,1], which presumes unit-interval pixels.
LabeledDataset make_dataset(const RawImages& raw_images, const std::vector<ClassIndex>& raw_labels,
                            std::size_t num_classes);

/// Convenience: load an images/labels IDX pair from disk.
LabeledDataset load_idx_pair(const std::string& images_path, const std::string& labels_path,
                             std::size_t num_classes = 10);

/// Synthetic Gaussian blob dataset for oracle tests. Class c sits at a
/// fixed unit-norm direction scaled by `separation` with unit isotropic
/// noise; samples are affinely rescaled into the unit interval and
/// clamped, so they behave like pixel data. Images are d x 1.
LabeledDataset synthetic_blobs(std::size_t num_classes, std::size_t dims, std::size_t per_class,
                               double separation, RngStream& rng);

}  // namespace puq
