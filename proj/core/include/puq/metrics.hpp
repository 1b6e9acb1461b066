#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "puq/perturb.hpp"

namespace puq {

/// Per-sample summary of a PredictionLog entry.
struct SampleStats {
  std::uint32_t id = 0;
  ClassIndex true_label = 0;
  double entropy = 0.0;       // nats, in [0, ln C]
  double mean_correct = 0.0;  // fraction of the n draws that hit the label
  double certainty = 0.0;     // mean probability assigned to the true class
};

struct EntropyBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;    // samples whose entropy falls in [lo, hi)
  double accuracy = 0.0;    // pooled per-draw correctness of those samples
};

struct RegressionLine {
  double slope = 0.0;
  double intercept = 0.0;
};

/// One Table-style row for a (sigma, mode) grid point.
struct MetricRow {
  double sigma = 0.0;
  PerturbMode mode = PerturbMode::Weight;
  double alpha = 0.0;        // unperturbed accuracy
  double alpha_sigma = 0.0;  // pooled perturbed accuracy
  double pi = 0.0;           // alpha - alpha_sigma
  double corr = 0.0;         // corr(per-draw correctness, sample entropy)
  std::vector<double> psis;  // alpha_sigma - corr * lambda, per lambda
};

struct PerClassRow {
  ClassIndex label = 0;
  std::size_t count = 0;
  double entropy_pct = 0.0;  // 100 * mean entropy / ln C; NaN when count == 0
  double accuracy = 0.0;     // mean of mean_correct; NaN when count == 0
  double certainty = 0.0;    // NaN when count == 0
};

/// Plug-in Shannon entropy of the empirical class proportions, natural
/// log, with 0 ln 0 taken as 0. No finite-n bias correction is applied.
double empirical_entropy(std::span<const ClassIndex> preds, std::size_t num_classes);

/// pi = alpha - alpha_sigma. May be negative when perturbation helps;
/// passed through unchanged.
double perturbation_index(double alpha, double alpha_sigma);

/// Standard Pearson coefficient. Zero variance on either side returns 0
/// by convention, which makes the sigma = 0 pipeline degenerate cleanly.
double pearson_corr(std::span<const double> xs, std::span<const double> ys);

/// psi = alpha_sigma - corr * lambda.
double psi(double alpha_sigma, double corr, double lambda);

/// Mean probability assigned to the true class over the n draws.
double certainty(std::span<const double> true_probs);

std::vector<SampleStats> sample_stats(const PredictionLog& log);

enum class CorrPooling {
  /// Every (sample, draw) pair contributes one (correctness, entropy)
  /// point; samples share their entropy across their n points.
  PooledDraws,
  /// One (mean correctness, entropy) point per sample.
  PerSampleMean,
};

struct AlphaCorr {
  double alpha_sigma = 0.0;
  double corr = 0.0;
};

AlphaCorr alpha_and_corr(std::span<const SampleStats> stats,
                         CorrPooling pooling = CorrPooling::PooledDraws);

/// Equal-width bins over [0, ln C]; the last bin is right-closed. Bins
/// with fewer than min_count samples are omitted from the result.
std::vector<EntropyBin> binned_conditional_accuracy(std::span<const SampleStats> stats,
                                                    std::size_t num_classes,
                                                    std::size_t num_bins = 20,
                                                    std::size_t min_count = 5);

/// Unweighted least squares of bin accuracy against bin midpoint entropy.
/// Fewer than 2 bins yields nullopt rather than an error.
std::optional<RegressionLine> regression_line(std::span<const EntropyBin> bins);

/// Per-class averages; classes with no samples get count 0 and NaN fields.
std::vector<PerClassRow> per_class_eac(std::span<const SampleStats> stats,
                                       std::size_t num_classes);

/// One MetricRow per log, in input order. `alpha` is the unperturbed
/// accuracy on the same dataset the logs were sampled from.
std::vector<MetricRow> metric_grid(std::span<const PredictionLog> logs,
                                   std::span<const double> lambdas, double alpha,
                                   CorrPooling pooling = CorrPooling::PooledDraws);

void write_samples_csv(std::span<const SampleStats> stats, const std::string& path);
void write_bins_csv(std::span<const EntropyBin> bins, const std::string& path);
void write_eac_class_csv(std::span<const PerClassRow> rows, const std::string& path);
void write_metrics_csv(std::span<const MetricRow> rows, std::span<const double> lambdas,
                       const std::string& path);

}  // namespace puq
