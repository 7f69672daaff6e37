#include "crc/simulator.hpp"

#include "crc/baselines.hpp"
#include "crc/kernels.hpp"
#include "crc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <tuple>

namespace crc::sim {

namespace {

constexpr std::uint32_t kAlphaStream = 0;
constexpr std::uint32_t kLatentStream = 1;
constexpr std::uint32_t kNoiseStream = 2;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

const char* to_string(Model m) noexcept {
  switch (m) {
    case Model::Simple: return "simple";
    case Model::Uncorrelated: return "uncorrelated";
    case Model::Correlated: return "correlated";
  }
  return "?";
}

Model model_from_string(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "simple") return Model::Simple;
  if (s == "uncorrelated") return Model::Uncorrelated;
  if (s == "correlated") return Model::Correlated;
  fail(ErrorKind::ConfigError, "unknown model '" + name + "' (simple, uncorrelated, correlated)");
}

const char* to_string(Classifier c) noexcept {
  switch (c) {
    case Classifier::CRC: return "CRC";
    case Classifier::CRCS: return "CRC-S";
    case Classifier::CRCL: return "CRC-L";
    case Classifier::DLDA: return "DLDA";
  }
  return "?";
}

Classifier classifier_from_string(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (s == "CRC") return Classifier::CRC;
  if (s == "CRC-S" || s == "CRCS") return Classifier::CRCS;
  if (s == "CRC-L" || s == "CRCL") return Classifier::CRCL;
  if (s == "DLDA") return Classifier::DLDA;
  fail(ErrorKind::ConfigError, "unknown classifier '" + name + "' (CRC, CRC-S, CRC-L, DLDA)");
}

SimConfig SimConfig::resolved() const {
  SimConfig c = *this;
  if (c.n < 4 || c.n % 2 != 0) fail(ErrorKind::ConfigError, "n must be even and at least 4");
  if (c.p < 3) fail(ErrorKind::ConfigError, "p must be at least 3");
  if (!(c.sigma > 0.0) || !std::isfinite(c.sigma)) fail(ErrorKind::ConfigError, "sigma must be positive");
  if (c.gamma.size() == 0) {
    c.gamma = RowVectorXd::Zero(c.p);
    c.gamma.head(3).setConstant(1.0 / std::sqrt(3.0));
  }
  if (c.gamma.size() != c.p || !c.gamma.allFinite()) fail(ErrorKind::ConfigError, "gamma must have p finite entries");

  if (c.model == Model::Simple) {
    c.r = 0;
    c.eta.resize(0);
    c.psi.resize(0, 0);
    return c;
  }
  if (c.r < 1 || c.r >= c.n - 1) fail(ErrorKind::ConfigError, "latent dimension must satisfy 1 <= r < n - 1");
  if (c.eta.size() == 0) {
    c.eta = RowVectorXd::Zero(c.r);
    if (c.model == Model::Correlated) c.eta.setConstant(1.0 / std::sqrt(3.0));
  }
  if (c.eta.size() != c.r) fail(ErrorKind::ConfigError, "eta must have r entries");
  if (c.model == Model::Uncorrelated && !c.eta.isZero(0.0)) {
    fail(ErrorKind::ConfigError, "the uncorrelated model has eta = 0");
  }
  if (c.psi.size() == 0) c.psi = MatrixXd::Identity(c.r, c.r);
  if (c.psi.rows() != c.r || c.psi.cols() != c.r || !c.psi.isApprox(c.psi.transpose())) {
    fail(ErrorKind::ConfigError, "psi must be a symmetric r x r matrix");
  }
  if (Eigen::LLT<MatrixXd>(c.psi).info() != Eigen::Success) {
    fail(ErrorKind::ConfigError, "psi must be positive definite");
  }
  return c;
}

SimDataset generate(const SimConfig& raw_cfg, bool keep_truth) {
  const SimConfig c = raw_cfg.resolved();
  const Index n = c.n;
  const Index p = c.p;

  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i % 2 == 0 ? -1 : 1;

  SimDataset d;
  d.t = LabelVector(labels);
  d.z.resize(n, p);
  if (keep_truth) d.s.resize(n, p);

  const rng::Stream noise(c.data_seed, kNoiseStream);
  if (c.model != Model::Simple) {
    const rng::Stream alpha_stream(c.alpha_seed, kAlphaStream);
    d.alpha.resize(c.r, p);
    for (Index k = 0; k < c.r; ++k) {
      alpha_stream.fill_normal_parallel(static_cast<std::uint32_t>(k), d.alpha.row(k).data(),
                                        static_cast<std::uint64_t>(p));
    }
    const rng::Stream latent(c.data_seed, kLatentStream);
    const MatrixXd chol = Eigen::LLT<MatrixXd>(c.psi).matrixL();
    d.l.resize(n, c.r);
    for (Index i = 0; i < n; ++i) {
      VectorXd e(c.r);
      latent.fill_normal_serial(static_cast<std::uint32_t>(i), e.data(), static_cast<std::uint64_t>(c.r));
      d.l.row(i) = d.t[i] * c.eta + (chol * e).transpose();
    }
  }

#pragma omp parallel for schedule(static) num_threads(kernels::max_threads())
  for (Index i = 0; i < n; ++i) {
    auto zi = d.z.row(i);
    noise.fill_normal_serial(static_cast<std::uint32_t>(i), zi.data(), static_cast<std::uint64_t>(p));
    zi = c.sigma * zi + d.t[i] * c.gamma;
    if (keep_truth) d.s.row(i) = zi;
    if (c.model != Model::Simple) zi += d.l.row(i) * d.alpha;
  }
  return d;
}

BayesRates bayes_rates(const SimConfig& raw_cfg) {
  const SimConfig c = raw_cfg.resolved();
  const double gg = c.gamma.squaredNorm() / (c.sigma * c.sigma);
  double ee = 0.0;
  if (c.model != Model::Simple) ee = c.eta * c.psi.ldlt().solve(c.eta.transpose());
  return {normal_cdf(std::sqrt(gg)), normal_cdf(std::sqrt(ee)), normal_cdf(std::sqrt(gg + ee))};
}

// ---- Benchmarks -----------------------------------------------------------

std::optional<BenchSummary> BenchResult::find(Model model, Index n, Index p, Classifier c) const {
  for (const auto& s : summary) {
    if (s.model == model && s.n == n && s.p == p && s.classifier == c) return s;
  }
  return std::nullopt;
}

std::uint64_t replicate_seed(std::uint64_t base, const BenchCell& cell, int replicate) noexcept {
  std::uint64_t s = rng::mix_seed(base, static_cast<std::uint64_t>(cell.model));
  s = rng::mix_seed(s, static_cast<std::uint64_t>(cell.n));
  s = rng::mix_seed(s, static_cast<std::uint64_t>(cell.p));
  return rng::mix_seed(s, static_cast<std::uint64_t>(replicate));
}

namespace {

constexpr Index kPredictBlock = 250;

double crc_accuracies(const FittedCRC& m, const SimDataset& test, double& acc_s, double& acc_l) {
  Index right = 0, right_s = 0, right_l = 0;
  const Index k = test.z.rows();
  for (Index r0 = 0; r0 < k; r0 += kPredictBlock) {
    const Index b = std::min(kPredictBlock, k - r0);
    const RowMatrix block = test.z.middleRows(r0, b);
    const auto preds = predict_batch(m, block);
    for (Index i = 0; i < b; ++i) {
      const auto& pr = preds[static_cast<std::size_t>(i)];
      const int truth = test.t[r0 + i];
      right += pr.label == truth;
      right_s += pr.crcs_label == truth;
      right_l += pr.crcl_label == truth;
    }
  }
  acc_s = static_cast<double>(right_s) / static_cast<double>(k);
  acc_l = static_cast<double>(right_l) / static_cast<double>(k);
  return static_cast<double>(right) / static_cast<double>(k);
}

double baseline_accuracy(const DldaBaselineModel& m, const SimDataset& test) {
  Index right = 0;
  for (Index i = 0; i < test.z.rows(); ++i) right += m.predict(test.z.row(i)) == test.t[i];
  return static_cast<double>(right) / static_cast<double>(test.z.rows());
}

bool wants(const BenchConfig& cfg, Classifier c) {
  return std::find(cfg.classifiers.begin(), cfg.classifiers.end(), c) != cfg.classifiers.end();
}

}  // namespace

BenchResult run_benchmark(const BenchConfig& cfg, const BenchProgress& progress) {
  if (cfg.replicates < 1) fail(ErrorKind::ConfigError, "replicates must be positive");
  if (cfg.test_size < 2 || cfg.test_size % 2 != 0) fail(ErrorKind::ConfigError, "test size must be even");
  if (cfg.classifiers.empty()) fail(ErrorKind::ConfigError, "no classifiers requested");
  const bool need_crc = wants(cfg, Classifier::CRC) || wants(cfg, Classifier::CRCS) || wants(cfg, Classifier::CRCL);

  BenchResult out;
  for (std::size_t ci = 0; ci < cfg.cells.size(); ++ci) {
    const BenchCell& cell = cfg.cells[ci];
    for (int rep = 0; rep < cfg.replicates; ++rep) {
      const std::uint64_t seed = replicate_seed(cfg.seed, cell, rep);
      SimConfig train_cfg = cfg.base;
      train_cfg.model = cell.model;
      train_cfg.n = cell.n;
      train_cfg.p = cell.p;
      train_cfg.data_seed = seed;
      train_cfg.alpha_seed = cfg.fixed_alpha ? rng::mix_seed(cfg.seed ^ 0xA1FAull, static_cast<std::uint64_t>(cell.p))
                                             : rng::mix_seed(seed, 0xA1FAull);
      SimConfig test_cfg = train_cfg;
      test_cfg.n = cfg.test_size;
      test_cfg.data_seed = rng::mix_seed(seed, 0x7E57ull);

      auto record = [&](Classifier c, double acc, Index features) {
        if (!wants(cfg, c)) return;
        out.records.push_back({cell.model, cell.n, cell.p, c, rep, acc, features, seed});
      };
      auto failed = [&](const char* what, const Error& e) {
        std::ostringstream msg;
        msg << to_string(cell.model) << " n=" << cell.n << " p=" << cell.p << " replicate " << rep << " " << what
            << ": " << e.what();
        out.diagnostics.push_back(msg.str());
      };

      try {
        SimDataset train = generate(train_cfg, false);
        const SimDataset test = generate(test_cfg, false);
        if (need_crc) {
          try {
            const FittedCRC m = fit_crc(train.z, train.t, cfg.crc);
            double acc_s = 0.0, acc_l = 0.0;
            const double acc = crc_accuracies(m, test, acc_s, acc_l);
            record(Classifier::CRC, acc, m.chosen_N());
            record(Classifier::CRCS, acc_s, m.chosen_N());
            record(Classifier::CRCL, acc_l, cell.p);
          } catch (const Error& e) {
            failed("CRC", e);
          }
        }
        if (wants(cfg, Classifier::DLDA)) {
          try {
            BaselineConfig bc;
            bc.grid = cfg.crc.grid;
            const DldaBaselineModel m = fit_dlda_baseline(std::move(train.z), train.t, bc);
            record(Classifier::DLDA, baseline_accuracy(m, test), m.trace.chosen_N);
          } catch (const Error& e) {
            failed("DLDA", e);
          }
        }
      } catch (const Error& e) {
        failed("simulation", e);
      }
      if (progress) progress(ci, rep);
    }
  }
  out.summary = summarize(out.records);
  return out;
}

std::vector<BenchSummary> summarize(const std::vector<BenchRecord>& records) {
  using Key = std::tuple<int, Index, Index, int>;
  std::vector<Key> order;
  std::map<Key, std::vector<const BenchRecord*>> groups;
  for (const auto& r : records) {
    const Key k{static_cast<int>(r.model), r.n, r.p, static_cast<int>(r.classifier)};
    auto [it, fresh] = groups.try_emplace(k);
    if (fresh) order.push_back(k);
    it->second.push_back(&r);
  }

  std::vector<BenchSummary> out;
  for (const auto& k : order) {
    const auto& g = groups[k];
    BenchSummary s;
    s.model = g.front()->model;
    s.n = g.front()->n;
    s.p = g.front()->p;
    s.classifier = g.front()->classifier;
    s.replicates = static_cast<int>(g.size());
    double sum = 0.0;
    for (const auto* r : g) sum += r->accuracy;
    s.mean_accuracy = sum / static_cast<double>(g.size());
    if (g.size() > 1) {
      double ss = 0.0;
      for (const auto* r : g) ss += (r->accuracy - s.mean_accuracy) * (r->accuracy - s.mean_accuracy);
      s.standard_error = std::sqrt(ss / static_cast<double>(g.size() - 1)) / std::sqrt(static_cast<double>(g.size()));
    }
    std::vector<double> feats;
    for (const auto* r : g) feats.push_back(static_cast<double>(r->n_features_selected));
    std::sort(feats.begin(), feats.end());
    const std::size_t h = feats.size() / 2;
    s.median_features = feats.size() % 2 ? feats[h] : 0.5 * (feats[h - 1] + feats[h]);
    out.push_back(s);
  }
  return out;
}

std::string records_csv(const std::vector<BenchRecord>& records) {
  std::string out = "model,n,p,classifier,replicate,accuracy,n_features_selected,seed\n";
  char line[256];
  for (const auto& r : records) {
    std::snprintf(line, sizeof line, "%s,%lld,%lld,%s,%d,%.6f,%lld,%llu\n", to_string(r.model),
                  static_cast<long long>(r.n), static_cast<long long>(r.p), to_string(r.classifier), r.replicate,
                  r.accuracy, static_cast<long long>(r.n_features_selected),
                  static_cast<unsigned long long>(r.seed));
    out += line;
  }
  return out;
}

std::string summary_csv(const std::vector<BenchSummary>& summary) {
  std::string out = "model,n,p,classifier,replicates,mean_accuracy,standard_error,median_features\n";
  char line[256];
  for (const auto& s : summary) {
    std::snprintf(line, sizeof line, "%s,%lld,%lld,%s,%d,%.6f,%.6f,%.1f\n", to_string(s.model),
                  static_cast<long long>(s.n), static_cast<long long>(s.p), to_string(s.classifier), s.replicates,
                  s.mean_accuracy, s.standard_error, s.median_features);
    out += line;
  }
  return out;
}

}  // namespace crc::sim
