#pragma once

#include <optional>
#include <span>
#include <string>

#include "puq/metrics.hpp"

namespace puq {

/// Entropy-accuracy-certainty scatter: one point per sample at
/// (entropy, mean_correct), colored by certainty; filled crosses at the
/// bin midpoints; a dashed regression line when one exists. Axes are
/// fixed to [0, ln C] x [0, 1] regardless of the data. Output is a
/// static, byte-deterministic SVG.
void emit_eac_scatter(std::span<const SampleStats> stats, std::span<const EntropyBin> bins,
                      const std::optional<RegressionLine>& regression, std::size_t num_classes,
                      const std::string& title, const std::string& path);

/// Grouped bars per class: entropy as % of max, accuracy %, certainty %.
/// Values outside [0,100] are clipped with a warning on stderr.
void emit_eac_bars(std::span<const PerClassRow> rows, const std::string& title,
                   const std::string& path);

}  // namespace puq
