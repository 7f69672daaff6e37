// crc: train, apply and evaluate the cross-residualization classifier.

#include "crc/baselines.hpp"
#include "crc/dataset.hpp"
#include "crc/ensemble.hpp"
#include "crc/io.hpp"
#include "crc/kernels.hpp"
#include "crc/rng.hpp"
#include "crc/simulator.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <unistd.h>

#ifndef CRC_VERSION
#define CRC_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using crc::ErrorKind;
using crc::Index;

namespace {

constexpr const char* kOutputs = "Outputs";

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigError:
      return 2;
    case ErrorKind::InvalidData:
    case ErrorKind::TooFewSamples:
    case ErrorKind::ShapeError:
    case ErrorKind::NonFiniteInput:
    case ErrorKind::RaggedRows:
    case ErrorKind::UnknownLabel:
    case ErrorKind::DuplicateId:
    case ErrorKind::NonNumericCell:
    case ErrorKind::SplitInfeasible:
    case ErrorKind::FoldClassEmpty:
      return 3;
    case ErrorKind::DegenerateGram:
    case ErrorKind::DowndateSingular:
    case ErrorKind::DegenerateContrast:
    case ErrorKind::CrcLSingular:
      return 4;
    case ErrorKind::IoError:
    case ErrorKind::VersionMismatch:
    case ErrorKind::CorruptModel:
      return 5;
  }
  return 1;
}

// Effective configuration of one subcommand: every option except outputs,
// with its parsed or default value. Used for the provenance header.
struct Provenance {
  std::uint64_t seed = 0;
  std::vector<std::string> config;

  std::string hash() const {
    std::string all;
    for (const auto& c : config) all += c + "\n";
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08x", crc::io::crc32(all));
    return buf;
  }

  std::vector<std::string> header(const std::string& command) const {
    std::vector<std::string> h{"crc " CRC_VERSION " " + command, "seed: " + std::to_string(seed),
                               "config_hash: " + hash()};
    for (const auto& c : config) h.push_back("config: " + c);
    return h;
  }

  std::string comment_block(const std::string& command) const {
    std::string s;
    for (const auto& line : header(command)) s += "# " + line + "\n";
    return s;
  }
};

Provenance provenance(const CLI::App& sub, std::uint64_t seed) {
  Provenance p;
  p.seed = seed;
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_group() == kOutputs || opt->get_lnames().empty() || opt->get_lnames()[0] == "help") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : " ") + r;
    } else {
      value = opt->get_default_str();
    }
    p.config.push_back(opt->get_lnames()[0] + "=" + value);
  }
  return p;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void note(const std::string& s) { std::cerr << "crc: " << s << "\n"; }

// Rewrites one status line on a terminal, prints plain lines otherwise.
void progress(const std::string& s) {
  static const bool tty = isatty(STDERR_FILENO) != 0;
  if (tty) {
    std::cerr << "\r" << s << std::flush;
  } else {
    std::cerr << s << "\n";
  }
}

void end_progress() {
  if (isatty(STDERR_FILENO) != 0) std::cerr << "\n";
}

// ---- Shared data options ----------------------------------------------------

struct DataArgs {
  std::string matrix;
  std::string labels;
  std::string label_column;
  std::string group_column;
  std::string positive_label;

  void add(CLI::App* app) {
    app->add_option("--matrix", matrix, "CSV/TSV matrix (header of feature ids, first column sample ids) or CRM1 cache")
        ->required();
    auto* l = app->add_option("--labels", labels, "Labels file with columns sample_id,label[,group]");
    auto* c = app->add_option("--label-column", label_column, "Read labels from this matrix column instead");
    l->excludes(c);
    app->add_option("--group-column", group_column, "Read subject groups from this matrix column");
    app->add_option("--positive-label", positive_label, "Raw label mapped to +1 (default: second in sorted order)");
  }

  crc::data::Dataset load(bool require_labels) const {
    crc::data::LoadOptions o;
    o.label_column = label_column;
    o.group_column = group_column;
    o.positive_label = positive_label;
    o.require_labels = require_labels;
    return crc::data::load_dataset(matrix, labels, o);
  }
};

struct FitArgs {
  std::vector<Index> grid;
  bool no_projection = false;

  void add(CLI::App* app) {
    app->add_option("--grid", grid, "Candidate feature counts for CRC-S (default: 2^0, 2^0.5, ... capped at p)");
    app->add_flag("--no-projection", no_projection, "Disable the leave-one-out projection correction in CRC-S");
  }
  crc::CrcConfig config() const {
    crc::CrcConfig c;
    c.grid = grid;
    c.project = !no_projection;
    return c;
  }
};

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  DataArgs data;
  FitArgs fit;
  std::uint64_t seed = 1;
  std::string model;
  std::string report;
};

double loo_accuracy(const crc::FittedCRC& m, int which) {
  Index right = 0;
  for (Index i = 0; i < m.n(); ++i) {
    const double sl = m.loo_score_pairs(i, 0);
    const double ss = m.loo_score_pairs(i, 1);
    const double v = which == 0 ? m.meta.combined(sl, ss) : which == 1 ? m.crcs_alone.apply(ss) : m.crcl_alone.apply(sl);
    right += crc::sign_label(v) == m.labels[i];
  }
  return static_cast<double>(right) / static_cast<double>(m.n());
}

int run_train(const TrainArgs& a, const CLI::App& sub) {
  const Provenance prov = provenance(sub, a.seed);
  auto ds = a.data.load(true);
  crc::FittedCRC m = crc::fit_crc(ds.matrix, *ds.labels, a.fit.config());
  m.label_names = {ds.negative_label, ds.positive_label};
  crc::save_model(m, a.model);

  nlohmann::ordered_json r;
  r["version"] = CRC_VERSION;
  r["config_hash"] = prov.hash();
  r["config"] = prov.config;
  r["n"] = m.n();
  r["p"] = m.p();
  r["labels"] = {{"negative", ds.negative_label},
                 {"positive", ds.positive_label},
                 {"n_negative", m.labels.n1()},
                 {"n_positive", m.labels.n2()}};
  r["lambda"] = m.lambda;
  r["chosen_N"] = m.chosen_N();
  r["grid"] = m.trace.grid;
  r["estimated_errors"] = m.trace.estimated_errors;
  r["meta"] = {{"b0", m.meta.b0}, {"b_crcs", m.meta.b1}, {"b_crcl", m.meta.b2},
               {"prior_negative", m.meta.prior1}, {"prior_positive", m.meta.prior2}};
  r["loo_accuracy"] = {{"CRC", loo_accuracy(m, 0)}, {"CRC-S", loo_accuracy(m, 1)}, {"CRC-L", loo_accuracy(m, 2)}};
  r["diagnostics"] = m.diagnostics;
  if (!a.report.empty()) crc::io::write_file_atomic(a.report, r.dump(2) + "\n");

  std::cout << "trained on n=" << m.n() << " p=" << m.p() << ": chosen N=" << m.chosen_N()
            << ", lambda=" << fmt(m.lambda) << ", LOO accuracy CRC=" << fmt(loo_accuracy(m, 0)) << "\n";
  for (const auto& d : m.diagnostics) note(d);
  return 0;
}

// ---- predict ----------------------------------------------------------------

struct PredictArgs {
  std::string model;
  DataArgs data;
  std::string out;
};

int run_predict(const PredictArgs& a, const CLI::App& sub) {
  const Provenance prov = provenance(sub, 0);
  const crc::FittedCRC m = crc::load_model(a.model);
  const bool labeled = !a.data.labels.empty() || !a.data.label_column.empty();
  const auto ds = a.data.load(false);
  if (ds.cols() != m.p()) {
    crc::fail(ErrorKind::ShapeError, "matrix has " + std::to_string(ds.cols()) + " features, model expects " +
                                         std::to_string(m.p()));
  }
  const auto preds = crc::predict_batch(m, ds.matrix);

  std::string csv = prov.comment_block("predict");
  csv += "sample_id,label,s_l,s_s,combined\n";
  Index right = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& p = preds[i];
    const std::string& name = p.label > 0 ? m.label_names[1] : m.label_names[0];
    csv += ds.sample_ids[i] + "," + name + "," + fmt(p.s_l) + "," + fmt(p.s_s) + "," + fmt(p.combined) + "\n";
    if (labeled) right += ds.raw_labels[i] == name;
  }
  crc::io::write_file_atomic(a.out, csv);
  if (labeled) {
    std::cout << "accuracy " << fmt(static_cast<double>(right) / static_cast<double>(preds.size())) << " on "
              << preds.size() << " samples\n";
  }
  return 0;
}

// ---- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string model = "correlated";
  Index n = 100;
  Index p = 2000;
  Index r = 3;
  double sigma = 1.0;
  std::uint64_t seed = 1;
  std::uint64_t alpha_seed = 0;
  std::string out;
  std::string labels_out;
};

int run_simulate(const SimulateArgs& a, const CLI::App& sub) {
  const Provenance prov = provenance(sub, a.seed);
  crc::sim::SimConfig cfg;
  cfg.model = crc::sim::model_from_string(a.model);
  cfg.n = a.n;
  cfg.p = a.p;
  cfg.r = a.r;
  cfg.sigma = a.sigma;
  cfg.data_seed = a.seed;
  cfg.alpha_seed = a.alpha_seed != 0 ? a.alpha_seed : crc::rng::mix_seed(a.seed, 0xA1FAull);
  auto d = crc::sim::generate(cfg, false);

  crc::data::Table t;
  t.values = std::move(d.z);
  char buf[32];
  for (Index i = 0; i < a.n; ++i) {
    std::snprintf(buf, sizeof buf, "s%05lld", static_cast<long long>(i + 1));
    t.row_ids.emplace_back(buf);
  }
  for (Index j = 0; j < a.p; ++j) {
    std::snprintf(buf, sizeof buf, "f%06lld", static_cast<long long>(j + 1));
    t.column_ids.emplace_back(buf);
  }
  auto header = prov.header("simulate");
  header.push_back(std::string("generator: ") + crc::rng::kGeneratorName);
  if (fs::path(a.out).extension() == ".crm") {
    crc::data::write_matrix_cache(a.out, t);
  } else {
    crc::io::write_file_atomic(a.out, crc::data::table_csv(t, header));
  }
  if (!a.labels_out.empty()) {
    std::string csv;
    for (const auto& h : header) csv += "# " + h + "\n";
    csv += "sample_id,label\n";
    for (Index i = 0; i < a.n; ++i) csv += t.row_ids[static_cast<std::size_t>(i)] + "," + (d.t[i] > 0 ? "1" : "-1") + "\n";
    crc::io::write_file_atomic(a.labels_out, csv);
  }
  const auto rates = crc::sim::bayes_rates(cfg);
  std::cout << "Bayes rates: S " << fmt(rates.s) << ", L " << fmt(rates.l) << ", S+L " << fmt(rates.sl) << "\n";
  return 0;
}

// ---- bench ------------------------------------------------------------------

struct BenchArgs {
  std::vector<std::string> models{"correlated"};
  std::vector<Index> n{100};
  std::vector<Index> p{2000};
  int replicates = 20;
  std::vector<std::string> classifiers{"CRC", "CRC-S", "CRC-L", "DLDA"};
  Index test_size = 1000;
  std::uint64_t seed = 1;
  bool fixed_alpha = false;
  FitArgs fit;
  std::string out;
  std::string summary;
};

int run_bench(const BenchArgs& a, const CLI::App& sub) {
  const Provenance prov = provenance(sub, a.seed);
  crc::sim::BenchConfig cfg;
  for (const auto& m : a.models) {
    for (Index n : a.n) {
      for (Index p : a.p) cfg.cells.push_back({crc::sim::model_from_string(m), n, p});
    }
  }
  cfg.classifiers.clear();
  for (const auto& c : a.classifiers) cfg.classifiers.push_back(crc::sim::classifier_from_string(c));
  cfg.replicates = a.replicates;
  cfg.test_size = a.test_size;
  cfg.seed = a.seed;
  cfg.fixed_alpha = a.fixed_alpha;
  cfg.crc = a.fit.config();

  const auto result = crc::sim::run_benchmark(cfg, [&](std::size_t cell, int rep) {
    const auto& c = cfg.cells[cell];
    progress(std::string(crc::sim::to_string(c.model)) + " n=" + std::to_string(c.n) + " p=" + std::to_string(c.p) +
             " replicate " + std::to_string(rep + 1) + "/" + std::to_string(cfg.replicates));
  });
  end_progress();
  for (const auto& d : result.diagnostics) note(d);

  const std::string head = prov.comment_block("bench") + "# generator: " + crc::rng::kGeneratorName + "\n";
  crc::io::write_file_atomic(a.out, head + crc::sim::records_csv(result.records));
  const std::string summary = crc::sim::summary_csv(result.summary);
  if (!a.summary.empty()) crc::io::write_file_atomic(a.summary, head + summary);
  std::cout << summary;
  return 0;
}

// ---- crossval ---------------------------------------------------------------

struct CrossvalArgs {
  DataArgs data;
  FitArgs fit;
  int splits = 200;
  double frac = 0.8;
  std::uint64_t seed = 1;
  std::vector<std::string> classifiers{"CRC", "CRC-S", "CRC-L", "DLDA"};
  std::string out;
  std::string summary;
};

int run_crossval(const CrossvalArgs& a, const CLI::App& sub) {
  using crc::sim::Classifier;
  const Provenance prov = provenance(sub, a.seed);
  const auto ds = a.data.load(true);
  std::vector<Classifier> wanted;
  for (const auto& c : a.classifiers) wanted.push_back(crc::sim::classifier_from_string(c));
  auto wants = [&](Classifier c) { return std::find(wanted.begin(), wanted.end(), c) != wanted.end(); };
  const bool need_crc = wants(Classifier::CRC) || wants(Classifier::CRCS) || wants(Classifier::CRCL);
  const std::vector<std::string>* groups = ds.group_ids ? &*ds.group_ids : nullptr;

  std::string rows = "split,classifier,accuracy,n_train,n_test,n_features_selected\n";
  std::map<Classifier, std::vector<double>> acc;
  for (int s = 0; s < a.splits; ++s) {
    const std::uint64_t split_seed = crc::rng::mix_seed(a.seed, static_cast<std::uint64_t>(s));
    const auto plan = crc::data::grouped_balanced_split(*ds.labels, groups, a.frac, split_seed);
    const auto train = ds.subset(plan.train);
    const auto test = ds.subset(plan.test);
    std::vector<int> truth;
    for (Index i : plan.test) truth.push_back((*ds.labels)[i]);
    const double k = static_cast<double>(truth.size());

    auto emit = [&](Classifier c, double accuracy, Index features) {
      if (!wants(c)) return;
      acc[c].push_back(accuracy);
      rows += std::to_string(s) + "," + crc::sim::to_string(c) + "," + fmt(accuracy) + "," +
              std::to_string(plan.train.size()) + "," + std::to_string(plan.test.size()) + "," +
              std::to_string(features) + "\n";
    };
    try {
      if (need_crc) {
        const auto m = crc::fit_crc(train.matrix, *train.labels, a.fit.config());
        const auto preds = crc::predict_batch(m, test.matrix);
        double r = 0, rs = 0, rl = 0;
        for (std::size_t i = 0; i < preds.size(); ++i) {
          r += preds[i].label == truth[i];
          rs += preds[i].crcs_label == truth[i];
          rl += preds[i].crcl_label == truth[i];
        }
        emit(Classifier::CRC, r / k, m.chosen_N());
        emit(Classifier::CRCS, rs / k, m.chosen_N());
        emit(Classifier::CRCL, rl / k, m.p());
      }
      if (wants(Classifier::DLDA)) {
        crc::BaselineConfig bc;
        bc.grid = a.fit.grid;
        const auto b = crc::fit_dlda_baseline(train.matrix, *train.labels, bc);
        double r = 0;
        for (Index i = 0; i < test.rows(); ++i) r += b.predict(test.matrix.row(i)) == truth[static_cast<std::size_t>(i)];
        emit(Classifier::DLDA, r / k, b.trace.chosen_N);
      }
    } catch (const crc::Error& e) {
      if (exit_code(e.kind()) != 4) throw;
      note("split " + std::to_string(s) + " skipped: " + e.what());
    }
    progress("split " + std::to_string(s + 1) + "/" + std::to_string(a.splits));
  }
  end_progress();

  const std::string head = prov.comment_block("crossval");
  if (!a.out.empty()) crc::io::write_file_atomic(a.out, head + rows);
  std::string agg = "classifier,splits,mean_accuracy,standard_error\n";
  for (Classifier c : wanted) {
    const auto& v = acc[c];
    if (v.empty()) continue;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double se = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size())) : 0.0;
    agg += std::string(crc::sim::to_string(c)) + "," + std::to_string(v.size()) + "," + fmt(mean) + "," + fmt(se) + "\n";
  }
  crc::io::write_file_atomic(a.summary, head + agg);
  std::cout << agg;
  return 0;
}

// ---- diagnose ---------------------------------------------------------------

struct DiagnoseArgs {
  std::string matrix;
  Index k = 10;
  std::string scree;
  std::string variance;
};

int run_diagnose(const DiagnoseArgs& a, const CLI::App& sub) {
  const Provenance prov = provenance(sub, 0);
  const auto t = crc::data::read_table(a.matrix, {});
  const auto rep = crc::data::pct_var_explained(t.values, a.k);
  for (const auto& w : rep.warnings) note(w);
  const std::string head = prov.comment_block("diagnose");

  const double total = rep.eigenvalues.sum();
  std::string scree = "component,eigenvalue,share,cumulative\n";
  double cum = 0.0;
  // The last eigenvalue of a centered Gram is structurally zero.
  for (Index i = 0; i + 1 < rep.eigenvalues.size(); ++i) {
    cum += rep.eigenvalues[i];
    scree += std::to_string(i + 1) + "," + fmt(rep.eigenvalues[i]) + "," + fmt(rep.eigenvalues[i] / total) + "," +
             fmt(cum / total) + "\n";
  }
  std::string var = "n,p,k,percent_variance_explained\n" + std::to_string(t.values.rows()) + "," +
                    std::to_string(t.values.cols()) + "," + std::to_string(rep.k) + "," + fmt(rep.percent) + "\n";
  if (!a.scree.empty()) crc::io::write_file_atomic(a.scree, head + scree);
  if (!a.variance.empty()) crc::io::write_file_atomic(a.variance, head + var);
  std::cout << "top-" << rep.k << " components explain " << fmt(rep.percent) << "% of variance\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-residualization classifier"};
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", std::string("crc ") + CRC_VERSION);
  app.set_config("--config", "", "key=value config file; [section] headers select subcommands; flags win");
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: CRC_THREADS or all cores)")->check(CLI::PositiveNumber);
  app.require_subcommand(1);
  app.fallthrough();

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Fit a model and write it with a training report");
  train.data.add(t);
  train.fit.add(t);
  t->add_option("--seed", train.seed, "Recorded in the provenance header; training is deterministic");
  t->add_option("--model", train.model, "Output model file (CRC1)")->required()->group(kOutputs);
  t->add_option("--report", train.report, "Training report (JSON)")->group(kOutputs);

  PredictArgs predict;
  auto* p = app.add_subcommand("predict", "Score samples with a trained model");
  p->add_option("--model", predict.model, "Model file")->required()->check(CLI::ExistingFile);
  predict.data.add(p);
  p->add_option("--out", predict.out, "Predictions CSV")->required()->group(kOutputs);

  SimulateArgs simulate;
  auto* s = app.add_subcommand("simulate", "Generate a dataset from the latent-factor model");
  s->add_option("--model-kind", simulate.model, "simple, uncorrelated or correlated")->capture_default_str();
  s->add_option("--n", simulate.n, "Samples (even)")->capture_default_str();
  s->add_option("--p", simulate.p, "Features")->capture_default_str();
  s->add_option("--r", simulate.r, "Latent dimension")->capture_default_str();
  s->add_option("--sigma", simulate.sigma, "Noise standard deviation")->capture_default_str();
  s->add_option("--seed", simulate.seed, "Data seed")->capture_default_str();
  s->add_option("--alpha-seed", simulate.alpha_seed, "Loadings seed (default: derived from --seed)")
      ->capture_default_str();
  s->add_option("--out", simulate.out, "Matrix output (.csv, .tsv or .crm binary cache)")->required()->group(kOutputs);
  s->add_option("--labels-out", simulate.labels_out, "Labels CSV")->group(kOutputs);

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Replicated simulation benchmark");
  b->add_option("--models", bench.models, "Generative models")->capture_default_str();
  b->add_option("--n", bench.n, "Training sizes")->capture_default_str();
  b->add_option("--p", bench.p, "Feature counts")->capture_default_str();
  b->add_option("--replicates", bench.replicates, "Replicates per cell")->capture_default_str();
  b->add_option("--classifiers", bench.classifiers, "CRC, CRC-S, CRC-L, DLDA")->capture_default_str();
  b->add_option("--test-size", bench.test_size, "Test samples per replicate")->capture_default_str();
  b->add_option("--seed", bench.seed, "Base seed")->capture_default_str();
  b->add_flag("--fixed-alpha", bench.fixed_alpha, "Share the loadings across replicates");
  bench.fit.add(b);
  b->add_option("--out", bench.out, "Per-replicate CSV")->required()->group(kOutputs);
  b->add_option("--summary", bench.summary, "Aggregate CSV")->group(kOutputs);

  CrossvalArgs cv;
  auto* c = app.add_subcommand("crossval", "Repeated grouped balanced train/test splits");
  cv.data.add(c);
  cv.fit.add(c);
  c->add_option("--splits", cv.splits, "Number of splits")->capture_default_str();
  c->add_option("--frac", cv.frac, "Training fraction of the smaller class")->capture_default_str();
  c->add_option("--seed", cv.seed, "Base seed")->capture_default_str();
  c->add_option("--classifiers", cv.classifiers, "CRC, CRC-S, CRC-L, DLDA")->capture_default_str();
  c->add_option("--out", cv.out, "Per-split CSV")->group(kOutputs);
  c->add_option("--summary", cv.summary, "Aggregate CSV")->required()->group(kOutputs);

  DiagnoseArgs diag;
  auto* d = app.add_subcommand("diagnose", "Scree and percent-variance tables");
  d->add_option("--matrix", diag.matrix, "Matrix file")->required();
  d->add_option("--k", diag.k, "Components for the variance share")->capture_default_str();
  d->add_option("--scree", diag.scree, "Scree CSV")->group(kOutputs);
  d->add_option("--variance", diag.variance, "Variance table CSV")->group(kOutputs);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (threads > 0) crc::kernels::set_max_threads(threads);
    if (t->parsed()) return run_train(train, *t);
    if (p->parsed()) return run_predict(predict, *p);
    if (s->parsed()) return run_simulate(simulate, *s);
    if (b->parsed()) return run_bench(bench, *b);
    if (c->parsed()) return run_crossval(cv, *c);
    if (d->parsed()) return run_diagnose(diag, *d);
  } catch (const crc::Error& e) {
    std::cerr << "crc: error [" << crc::to_string(e.kind()) << (e.stage().empty() ? "" : " in " + e.stage())
              << "]: " << e.detail() << "\n";
    return exit_code(e.kind());
  } catch (const std::bad_alloc&) {
    std::cerr << "crc: error: out of memory\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "crc: internal error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
