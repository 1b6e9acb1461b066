#include "puq/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "puq/errors.hpp"

namespace puq {

double empirical_entropy(std::span<const ClassIndex> preds, std::size_t num_classes) {
  if (preds.empty()) throw InvalidInput("empirical_entropy: no predictions");
  std::vector<std::size_t> counts(num_classes, 0);
  for (ClassIndex p : preds) {
    if (p >= num_classes) {
      throw InvalidInput("empirical_entropy: prediction " + std::to_string(p) +
                         " is not below " + std::to_string(num_classes));
    }
    ++counts[p];
  }
  const double n = static_cast<double>(preds.size());
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

double perturbation_index(double alpha, double alpha_sigma) { return alpha - alpha_sigma; }

double pearson_corr(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw InvalidInput("pearson_corr: " + std::to_string(xs.size()) + " xs vs " +
                       std::to_string(ys.size()) + " ys");
  }
  if (xs.size() < 2) throw InvalidInput("pearson_corr: need at least 2 points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double psi(double alpha_sigma, double corr, double lambda) {
  if (lambda < 0.0) throw InvalidInput("psi: lambda must be >= 0");
  return alpha_sigma - corr * lambda;
}

double certainty(std::span<const double> true_probs) {
  if (true_probs.empty()) throw InvalidInput("certainty: no probabilities");
  double sum = 0.0;
  for (double p : true_probs) sum += p;
  return sum / static_cast<double>(true_probs.size());
}

std::vector<SampleStats> sample_stats(const PredictionLog& log) {
  // The entropy value does not depend on the class count (absent classes
  // contribute nothing), so a per-sample upper bound is enough here.
  std::vector<SampleStats> stats;
  stats.reserve(log.samples.size());
  for (const auto& s : log.samples) {
    SampleStats st;
    st.id = s.id;
    st.true_label = s.true_label;
    std::size_t c = s.true_label + 1;
    for (ClassIndex p : s.preds) c = std::max<std::size_t>(c, p + 1);
    st.entropy = empirical_entropy(s.preds, c);
    std::size_t hits = 0;
    for (ClassIndex p : s.preds) {
      if (p == s.true_label) ++hits;
    }
    st.mean_correct = static_cast<double>(hits) / static_cast<double>(s.preds.size());
    st.certainty = certainty(s.true_probs);
    stats.push_back(st);
  }
  return stats;
}

AlphaCorr alpha_and_corr(std::span<const SampleStats> stats, CorrPooling pooling) {
  if (stats.size() < 2) throw InvalidInput("alpha_and_corr: need at least 2 samples");
  AlphaCorr out;

  if (pooling == CorrPooling::PerSampleMean) {
    std::vector<double> correct(stats.size()), entropy(stats.size());
    double alpha = 0.0;
    for (std::size_t i = 0; i < stats.size(); ++i) {
      correct[i] = stats[i].mean_correct;
      entropy[i] = stats[i].entropy;
      alpha += stats[i].mean_correct;
    }
    out.alpha_sigma = alpha / static_cast<double>(stats.size());
    out.corr = pearson_corr(correct, entropy);
    return out;
  }

  // Pooled over (sample, draw) pairs. Every sample contributes n points
  // sharing one entropy value, and correctness is 0/1, so the pooled
  // Pearson terms collapse to per-sample means: E[bh] comes from
  // mean_correct * entropy and Var[b] = a(1 - a) because b^2 = b.
  const double n = static_cast<double>(stats.size());
  double a = 0.0, h = 0.0, hh = 0.0, bh = 0.0;
  for (const auto& s : stats) {
    a += s.mean_correct;
    h += s.entropy;
    hh += s.entropy * s.entropy;
    bh += s.mean_correct * s.entropy;
  }
  a /= n;
  h /= n;
  hh /= n;
  bh /= n;
  out.alpha_sigma = a;
  const double var_b = a * (1.0 - a);
  const double var_h = hh - h * h;
  const double cov = bh - a * h;
  if (var_b <= 0.0 || var_h <= 0.0) {
    out.corr = 0.0;
  } else {
    out.corr = cov / std::sqrt(var_b * var_h);
  }
  return out;
}

std::vector<EntropyBin> binned_conditional_accuracy(std::span<const SampleStats> stats,
                                                    std::size_t num_classes, std::size_t num_bins,
                                                    std::size_t min_count) {
  if (stats.empty()) throw InvalidInput("binned_conditional_accuracy: no samples");
  if (num_bins < 1) throw InvalidInput("binned_conditional_accuracy: need at least 1 bin");
  const double h_max = std::log(static_cast<double>(num_classes));
  const double width = h_max / static_cast<double>(num_bins);

  std::vector<std::size_t> counts(num_bins, 0);
  std::vector<double> correct_sum(num_bins, 0.0);
  for (const auto& s : stats) {
    std::size_t b = width > 0.0 ? static_cast<std::size_t>(s.entropy / width) : 0;
    if (b >= num_bins) b = num_bins - 1;  // right-closed last bin
    ++counts[b];
    correct_sum[b] += s.mean_correct;
  }

  std::vector<EntropyBin> bins;
  for (std::size_t b = 0; b < num_bins; ++b) {
    if (counts[b] < min_count) continue;
    EntropyBin bin;
    bin.lo = width * static_cast<double>(b);
    bin.hi = width * static_cast<double>(b + 1);
    bin.count = counts[b];
    bin.accuracy = correct_sum[b] / static_cast<double>(counts[b]);
    bins.push_back(bin);
  }
  return bins;
}

std::optional<RegressionLine> regression_line(std::span<const EntropyBin> bins) {
  if (bins.size() < 2) return std::nullopt;
  const double n = static_cast<double>(bins.size());
  double mx = 0.0, my = 0.0;
  for (const auto& b : bins) {
    mx += (b.lo + b.hi) / 2.0;
    my += b.accuracy;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& b : bins) {
    const double dx = (b.lo + b.hi) / 2.0 - mx;
    sxx += dx * dx;
    sxy += dx * (b.accuracy - my);
  }
  if (sxx <= 0.0) return std::nullopt;
  RegressionLine line;
  line.slope = sxy / sxx;
  line.intercept = my - line.slope * mx;
  return line;
}

std::vector<PerClassRow> per_class_eac(std::span<const SampleStats> stats,
                                       std::size_t num_classes) {
  const double h_max = std::log(static_cast<double>(num_classes));
  std::vector<PerClassRow> rows(num_classes);
  std::vector<double> h_sum(num_classes, 0.0), a_sum(num_classes, 0.0), c_sum(num_classes, 0.0);
  for (const auto& s : stats) {
    if (s.true_label >= num_classes) {
      throw InvalidInput("per_class_eac: label " + std::to_string(s.true_label) +
                         " is not below " + std::to_string(num_classes));
    }
    auto& row = rows[s.true_label];
    ++row.count;
    h_sum[s.true_label] += s.entropy;
    a_sum[s.true_label] += s.mean_correct;
    c_sum[s.true_label] += s.certainty;
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    rows[c].label = static_cast<ClassIndex>(c);
    if (rows[c].count == 0) {
      rows[c].entropy_pct = std::numeric_limits<double>::quiet_NaN();
      rows[c].accuracy = std::numeric_limits<double>::quiet_NaN();
      rows[c].certainty = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double n = static_cast<double>(rows[c].count);
    rows[c].entropy_pct = 100.0 * (h_sum[c] / n) / h_max;
    rows[c].accuracy = a_sum[c] / n;
    rows[c].certainty = c_sum[c] / n;
  }
  return rows;
}

std::vector<MetricRow> metric_grid(std::span<const PredictionLog> logs,
                                   std::span<const double> lambdas, double alpha,
                                   CorrPooling pooling) {
  if (logs.empty()) throw InvalidInput("metric_grid: no logs");
  std::vector<MetricRow> rows;
  rows.reserve(logs.size());
  for (const auto& log : logs) {
    const auto stats = sample_stats(log);
    const AlphaCorr ac = alpha_and_corr(stats, pooling);
    MetricRow row;
    row.sigma = log.sigma;
    row.mode = log.mode;
    row.alpha = alpha;
    row.alpha_sigma = ac.alpha_sigma;
    row.pi = perturbation_index(alpha, ac.alpha_sigma);
    row.corr = ac.corr;
    row.psis.reserve(lambdas.size());
    for (double lambda : lambdas) row.psis.push_back(psi(ac.alpha_sigma, ac.corr, lambda));
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_or_blank(double v) { return std::isnan(v) ? std::string() : fmt(v); }

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

}  // namespace

void write_samples_csv(std::span<const SampleStats> stats, const std::string& path) {
  auto out = open_out(path);
  out << "id,true_label,entropy,mean_correct,certainty\n";
  for (const auto& s : stats) {
    out << s.id << "," << s.true_label << "," << fmt(s.entropy) << "," << fmt(s.mean_correct)
        << "," << fmt(s.certainty) << "\n";
  }
}

void write_bins_csv(std::span<const EntropyBin> bins, const std::string& path) {
  auto out = open_out(path);
  out << "lo,hi,count,accuracy\n";
  for (const auto& b : bins) {
    out << fmt(b.lo) << "," << fmt(b.hi) << "," << b.count << "," << fmt(b.accuracy) << "\n";
  }
}

void write_eac_class_csv(std::span<const PerClassRow> rows, const std::string& path) {
  auto out = open_out(path);
  out << "class,count,entropy_pct,accuracy,certainty\n";
  for (const auto& r : rows) {
    out << r.label << "," << r.count << "," << fmt_or_blank(r.entropy_pct) << ","
        << fmt_or_blank(r.accuracy) << "," << fmt_or_blank(r.certainty) << "\n";
  }
}

void write_metrics_csv(std::span<const MetricRow> rows, std::span<const double> lambdas,
                       const std::string& path) {
  auto out = open_out(path);
  out << "sigma,mode,alpha,alpha_sigma,pi,corr";
  for (double l : lambdas) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", l);
    out << ",psi_" << buf;
  }
  out << "\n";
  for (const auto& r : rows) {
    char sigma_buf[32];
    std::snprintf(sigma_buf, sizeof(sigma_buf), "%g", r.sigma);
    out << sigma_buf << "," << to_string(r.mode) << "," << fmt(r.alpha) << ","
        << fmt(r.alpha_sigma) << "," << fmt(r.pi) << "," << fmt(r.corr);
    for (double p : r.psis) out << "," << fmt(p);
    out << "\n";
  }
}

}  // namespace puq
