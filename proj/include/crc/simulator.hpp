#pragma once

#include "crc/ensemble.hpp"
#include "crc/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace crc::sim {

/// Z = T gamma + L alpha + eps with L | T ~ N(T eta, Psi), eps ~ N(0, sigma^2 I).
/// Simple has no latent term; Uncorrelated has eta = 0.
enum class Model { Simple, Uncorrelated, Correlated };

const char* to_string(Model m) noexcept;
Model model_from_string(const std::string& name);

struct SimConfig {
  Model model = Model::Correlated;
  Index n = 100;
  Index p = 2000;
  Index r = 3;
  RowVectorXd gamma;  // empty: 1/sqrt(3) on the first three coordinates
  RowVectorXd eta;    // empty: 1/sqrt(3) each for Correlated, 0 otherwise
  MatrixXd psi;       // empty: identity
  double sigma = 1.0;
  std::uint64_t alpha_seed = 1;
  std::uint64_t data_seed = 2;

  /// Copy with every defaulted field filled in. Throws ConfigError.
  SimConfig resolved() const;
};

struct SimDataset {
  RowMatrix z;        // n x p
  LabelVector t;
  MatrixXd l;         // n x r, empty for Simple
  RowMatrix s;        // n x p, T gamma + eps; empty unless requested
  RowMatrix alpha;    // r x p, empty for Simple
};

/// Labels alternate -1, +1, -1, ... so every even n is balanced.
SimDataset generate(const SimConfig& cfg, bool keep_truth = true);

struct BayesRates {
  double s = 0.5;   // Phi(sqrt(gamma' gamma) / sigma)
  double l = 0.5;   // Phi(sqrt(eta' Psi^-1 eta))
  double sl = 0.5;  // Phi(sqrt(gamma' gamma / sigma^2 + eta' Psi^-1 eta))
};

BayesRates bayes_rates(const SimConfig& cfg);

// ---- Replicated benchmarks ------------------------------------------------

enum class Classifier { CRC, CRCS, CRCL, DLDA };

const char* to_string(Classifier c) noexcept;
Classifier classifier_from_string(const std::string& name);

struct BenchCell {
  Model model = Model::Correlated;
  Index n = 100;
  Index p = 2000;
};

struct BenchConfig {
  std::vector<BenchCell> cells;
  int replicates = 20;
  std::vector<Classifier> classifiers{Classifier::CRC, Classifier::CRCS, Classifier::CRCL, Classifier::DLDA};
  Index test_size = 1000;
  std::uint64_t seed = 1;
  // Draw alpha once per (p, seed) and share it across replicates and cells
  // instead of redrawing it with every replicate.
  bool fixed_alpha = false;
  SimConfig base;  // model parameters other than model, n and p
  CrcConfig crc;
};

struct BenchRecord {
  Model model = Model::Correlated;
  Index n = 0;
  Index p = 0;
  Classifier classifier = Classifier::CRC;
  int replicate = 0;
  double accuracy = 0.0;
  Index n_features_selected = 0;
  std::uint64_t seed = 0;
};

struct BenchSummary {
  Model model = Model::Correlated;
  Index n = 0;
  Index p = 0;
  Classifier classifier = Classifier::CRC;
  double mean_accuracy = 0.0;
  double standard_error = 0.0;
  int replicates = 0;
  double median_features = 0.0;
};

struct BenchResult {
  std::vector<BenchRecord> records;
  std::vector<BenchSummary> summary;
  std::vector<std::string> diagnostics;  // failed replicates

  /// Summary row for one cell and classifier, if any replicate succeeded.
  std::optional<BenchSummary> find(Model model, Index n, Index p, Classifier c) const;
};

/// Called after each replicate with (cell index, replicate index).
using BenchProgress = std::function<void(std::size_t, int)>;

/// Seed of the training data for a replicate; the test set and, unless
/// alpha is fixed, the loadings derive from it.
std::uint64_t replicate_seed(std::uint64_t base, const BenchCell& cell, int replicate) noexcept;

BenchResult run_benchmark(const BenchConfig& cfg, const BenchProgress& progress = {});

std::vector<BenchSummary> summarize(const std::vector<BenchRecord>& records);

/// CSV bodies (header line included, no provenance comments).
std::string records_csv(const std::vector<BenchRecord>& records);
std::string summary_csv(const std::vector<BenchSummary>& summary);

}  // namespace crc::sim
