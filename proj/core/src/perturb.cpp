#include "puq/perturb.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "puq/errors.hpp"
#include "puq/ops.hpp"

namespace puq {

std::string to_string(PerturbMode mode) {
  return mode == PerturbMode::Weight ? "weight" : "input";
}

PerturbMode parse_mode(const std::string& s) {
  if (s == "weight") return PerturbMode::Weight;
  if (s == "input") return PerturbMode::Input;
  throw ConfigError("unknown perturbation mode '" + s + "' (expected weight or input)");
}

Model perturb_params(const Model& model, double sigma, RngStream& rng) {
  if (sigma < 0.0) throw InvalidInput("perturb_params: sigma must be >= 0");
  Model out = model;
  if (sigma == 0.0) return out;
  Vector params = flat_params(out);
  for (double& p : params) p += sigma * rng.gaussian();
  set_flat_params(out, params);
  return out;
}

Matrix perturb_input(const Matrix& image, double sigma, RngStream& rng) {
  if (sigma < 0.0) throw InvalidInput("perturb_input: sigma must be >= 0");
  if (sigma == 0.0) return image;
  Matrix out = image;
  for (double& v : out.flat()) {
    v = std::min(1.0, std::max(0.0, v + sigma * rng.gaussian()));
  }
  return out;
}

namespace {

void record(PredictionLog::Sample& sample, std::size_t draw, const ProbVector& probs) {
  if (sample.true_label >= probs.size()) {
    throw InvalidInput("run_perturbed_pass: label " + std::to_string(sample.true_label) +
                       " is not below the model's " + std::to_string(probs.size()) + " classes");
  }
  sample.preds[draw] = static_cast<ClassIndex>(argmax(probs.values()));
  sample.true_probs[draw] = probs[sample.true_label];
}

}  // namespace

PredictionLog run_perturbed_pass(const Model& model, const LabeledDataset& ds, double sigma,
                                 PerturbMode mode, std::size_t draws, const RngStream& rng,
                                 const PassOptions& options) {
  if (draws < 1) throw InvalidInput("run_perturbed_pass: need at least 1 draw");
  if (ds.size() == 0) throw InvalidInput("run_perturbed_pass: empty dataset");
  if (sigma < 0.0) throw InvalidInput("run_perturbed_pass: sigma must be >= 0");

  PredictionLog log;
  log.sigma = sigma;
  log.mode = mode;
  log.draws = draws;
  log.model_tag = model_id(model);
  log.master_seed = rng.master_seed();
  log.samples.resize(ds.size());
  for (std::size_t s = 0; s < ds.size(); ++s) {
    log.samples[s].id = static_cast<std::uint32_t>(s);
    log.samples[s].true_label = ds.labels[s];
    log.samples[s].preds.assign(draws, 0);
    log.samples[s].true_probs.assign(draws, 0.0);
  }

  const std::size_t chunk = options.chunk_size == 0 ? ds.size() : options.chunk_size;
  const std::size_t num_chunks = (ds.size() + chunk - 1) / chunk;

  if (mode == PerturbMode::Weight && !options.independent_draws) {
    // One perturbed model per draw, shared across every sample.
    for (std::size_t d = 0; d < draws; ++d) {
      RngStream draw_rng = rng.child(static_cast<std::uint32_t>(d));
      const Model noisy = perturb_params(model, sigma, draw_rng);
      ++log.model_perturbations;
      for (std::size_t s = 0; s < ds.size(); ++s) {
        record(log.samples[s], d, forward(noisy, ds.images[s]));
      }
    }
    return log;
  }

  for (std::size_t c = 0; c < num_chunks; ++c) {
    const std::size_t lo = c * chunk;
    const std::size_t hi = std::min(lo + chunk, ds.size());
    for (std::size_t d = 0; d < draws; ++d) {
      RngStream chunk_rng = rng.child(static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(c));
      for (std::size_t s = lo; s < hi; ++s) {
        if (mode == PerturbMode::Weight) {
          const Model noisy = perturb_params(model, sigma, chunk_rng);
          ++log.model_perturbations;
          record(log.samples[s], d, forward(noisy, ds.images[s]));
        } else {
          const Matrix noisy = perturb_input(ds.images[s], sigma, chunk_rng);
          record(log.samples[s], d, forward(model, noisy));
        }
      }
    }
  }
  return log;
}

void write_prediction_log_csv(const PredictionLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "id,true_label";
  for (std::size_t d = 0; d < log.draws; ++d) out << ",pred_" << d;
  for (std::size_t d = 0; d < log.draws; ++d) out << ",prob_" << d;
  out << "\n";
  char buf[32];
  for (const auto& s : log.samples) {
    out << s.id << "," << s.true_label;
    for (ClassIndex p : s.preds) out << "," << p;
    for (double p : s.true_probs) {
      std::snprintf(buf, sizeof(buf), "%.17g", p);
      out << "," << buf;
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed for " + path);
}

namespace {

// std::stod rejects denormals with out_of_range; saturated softmax outputs
// at high sigma produce exactly those, so parse with strtod instead.
double parse_prob(const std::string& cell, const std::string& path) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin) {
    throw FormatError("prediction log " + path + ": '" + cell + "' is not a number");
  }
  return v;
}

}  // namespace

PredictionLog read_prediction_log_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("prediction log " + path + " is empty");

  // Infer n from the header: id,true_label + n preds + n probs.
  std::size_t columns = 1;
  for (char ch : line) {
    if (ch == ',') ++columns;
  }
  if (columns < 4 || (columns - 2) % 2 != 0) {
    throw FormatError("prediction log " + path + ": malformed header '" + line + "'");
  }
  const std::size_t draws = (columns - 2) / 2;

  PredictionLog log;
  log.draws = draws;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    PredictionLog::Sample s;
    auto next = [&](const char* what) {
      if (!std::getline(row, cell, ',')) {
        throw FormatError("prediction log " + path + ": missing " + what + " in row '" + line + "'");
      }
      return cell;
    };
    s.id = static_cast<std::uint32_t>(std::stoul(next("id")));
    s.true_label = static_cast<ClassIndex>(std::stoul(next("true_label")));
    s.preds.reserve(draws);
    s.true_probs.reserve(draws);
    for (std::size_t d = 0; d < draws; ++d) {
      s.preds.push_back(static_cast<ClassIndex>(std::stoul(next("pred"))));
    }
    for (std::size_t d = 0; d < draws; ++d) s.true_probs.push_back(parse_prob(next("prob"), path));
    log.samples.push_back(std::move(s));
  }
  return log;
}

}  // namespace puq
