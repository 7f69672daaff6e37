#include "crc/ensemble.hpp"

#include "crc/io.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <utility>

namespace crc {

namespace {

template <class F>
auto run_stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw e.at_stage(name);
  }
}

struct ClassMoments {
  VectorXd m1, m2;
  MatrixXd pooled;  // n - 2 denominator
};

ClassMoments class_moments(const MatrixXd& x, const LabelVector& t) {
  const Index d = x.cols();
  ClassMoments c{VectorXd::Zero(d), VectorXd::Zero(d), MatrixXd::Zero(d, d)};
  for (Index i = 0; i < x.rows(); ++i) (t[i] < 0 ? c.m1 : c.m2) += x.row(i).transpose();
  c.m1 /= static_cast<double>(t.n1());
  c.m2 /= static_cast<double>(t.n2());
  for (Index i = 0; i < x.rows(); ++i) {
    const VectorXd r = x.row(i).transpose() - (t[i] < 0 ? c.m1 : c.m2);
    c.pooled += r * r.transpose();
  }
  c.pooled /= static_cast<double>(x.rows() - 2);
  return c;
}

}  // namespace

MetaLda fit_meta_lda(const MatrixXd& pairs, const LabelVector& t) {
  if (pairs.rows() != t.size() || pairs.cols() != 2) {
    fail(ErrorKind::ShapeError, "meta-classifier needs an n x 2 score matrix");
  }
  if (!pairs.allFinite()) fail(ErrorKind::NonFiniteInput, "leave-one-out scores are not finite");
  const ClassMoments c = class_moments(pairs, t);
  MetaLda meta;
  meta.prior1 = static_cast<double>(t.n1()) / static_cast<double>(t.size());
  meta.prior2 = static_cast<double>(t.n2()) / static_cast<double>(t.size());

  Eigen::Matrix2d s = c.pooled;
  Eigen::Vector2d b = Eigen::Vector2d::Zero();
  if (s.trace() > 0.0) {
    if (!(s.determinant() > 1e-12 * s(0, 0) * s(1, 1))) {
      s.diagonal().array() += 1e-10 * s.trace();
      meta.ridged = true;
    }
    b = s.inverse() * (c.m2 - c.m1);
  }
  meta.b2 = b[0];
  meta.b1 = b[1];
  meta.b0 = -0.5 * b.dot(c.m1 + c.m2) + std::log(meta.prior2 / meta.prior1);
  return meta;
}

ScoreCalibration calibrate_score(const VectorXd& scores, const LabelVector& t) {
  if (scores.size() != t.size()) fail(ErrorKind::ShapeError, "scores do not match labels");
  MatrixXd x = scores;
  const ClassMoments c = class_moments(x, t);
  const double var = c.pooled(0, 0);
  ScoreCalibration cal;
  cal.slope = var > 0.0 ? (c.m2[0] - c.m1[0]) / var : 0.0;
  cal.intercept = -0.5 * cal.slope * (c.m1[0] + c.m2[0]) +
                  std::log(static_cast<double>(t.n2()) / static_cast<double>(t.n1()));
  return cal;
}

FittedCRC fit_crc(RowMatrix raw, const LabelVector& t, const CrcConfig& config) {
  if (raw.rows() != t.size()) fail(ErrorKind::ShapeError, "matrix rows and labels differ in length");
  if (raw.rows() < 8 || t.n1() < 4 || t.n2() < 4) {
    fail(ErrorKind::TooFewSamples, "need n >= 8 with at least 4 samples per class");
  }

  FittedCRC m;
  m.labels = t;
  m.train = run_stage("center", [&] { return center_columns(std::move(raw)); });
  const GramState g = run_stage("gram", [&] { return build_gram(m.train); });
  m.lambda = g.lambda;
  m.effective_inverse = g.effective_inverse;
  if (g.replaced > 1) {
    m.diagnostics.push_back(std::to_string(g.replaced) + " Gram eigenvalues replaced by lambda");
  }

  m.gamma = run_stage("gamma", [&] { return estimate_gamma(g, m.train, t); });
  const ResidualizedMatrix res = run_stage("cross_residualize", [&] { return cross_residualize(g, m.train, t); });
  const VectorXd s_l = run_stage("crcl_loo", [&] { return loo_scores_crcl(g, m.train, t); });

  CrcsContext ctx;
  ctx.residualized = &res;
  ctx.labels = &t;
  ctx.gram = &g;
  ctx.data = &m.train;
  ctx.crcl_scores = &s_l;
  ctx.grid = config.grid;
  ctx.project = config.project;
  CrcsSelection sel = run_stage("select_N", [&] { return select_N(ctx); });
  m.trace = std::move(sel.trace);

  m.loo_score_pairs.resize(t.size(), 2);
  m.loo_score_pairs.col(0) = s_l;
  m.loo_score_pairs.col(1) = sel.chosen_scores;
  m.meta = run_stage("meta", [&] { return fit_meta_lda(m.loo_score_pairs, t); });
  if (m.meta.ridged) m.diagnostics.push_back("meta-classifier covariance ridged");
  m.crcl_alone = calibrate_score(s_l, t);
  m.crcs_alone = calibrate_score(sel.chosen_scores, t);

  run_stage("final_fit", [&] {
    m.crcs = fit_dlda_top(res.s_hat, t, m.trace.chosen_N);
    m.crcl = fit_crcl(g, m.train, t);
  });
  if (m.crcs.floored > 0) {
    m.diagnostics.push_back(std::to_string(m.crcs.floored) + " CRC-S variances clamped to the floor");
  }
  for (const auto& d : m.crcl.diagnostics) m.diagnostics.push_back(d);
  return m;
}

std::vector<Prediction> predict_batch(const FittedCRC& m, const RowMatrix& z_raw) {
  if (z_raw.cols() != m.p()) fail(ErrorKind::ShapeError, "observation has the wrong number of features");
  if (!z_raw.allFinite()) fail(ErrorKind::NonFiniteInput, "observation contains non-finite values");
  const RowMatrix& x = m.train.values();
  const RowMatrix zc = z_raw.rowwise() - m.train.mu_hat();
  const MatrixXd cross = zc * x.transpose();   // k x n
  const MatrixXd a = cross * m.effective_inverse;

  // CRC-S only needs the residualized values on its selected columns.
  const Index k = zc.rows();
  VectorXd z_w = VectorXd::Zero(k);
  VectorXd x_w = VectorXd::Zero(m.n());
  double gamma_w = 0.0;
  for (Index c = 0; c < m.crcs.size(); ++c) {
    const Index j = m.crcs.features[static_cast<std::size_t>(c)];
    const double w = m.crcs.weights[c];
    z_w += w * zc.col(j);
    x_w += w * x.col(j);
    gamma_w += w * m.gamma.gamma_hat[j];
  }
  const VectorXd s_s = z_w - a * x_w + (a * m.labels.values()) * gamma_w;
  const VectorXd s_l = cross * m.crcl.core;

  std::vector<Prediction> out(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) {
    Prediction& p = out[static_cast<std::size_t>(i)];
    p.s_l = s_l[i];
    p.s_s = s_s[i];
    p.combined = m.meta.combined(p.s_l, p.s_s);
    p.label = sign_label(p.combined);
    p.crcs_label = sign_label(m.crcs_alone.apply(p.s_s));
    p.crcl_label = sign_label(m.crcl_alone.apply(p.s_l));
  }
  return out;
}

Prediction predict(const FittedCRC& m, const Eigen::Ref<const RowVectorXd>& z_raw) {
  RowMatrix one = z_raw;
  return predict_batch(m, one).front();
}

LinearWeights extract_linear_weights(const FittedCRC& m) {
  const RowMatrix& x = m.train.values();
  const RowVectorXd w_s = m.crcs.dense_weights(m.p());
  const VectorXd x_w = x * w_s.transpose();
  const double gamma_w = m.gamma.gamma_hat.dot(w_s);
  const VectorXd v = m.effective_inverse * (x_w - m.labels.values() * gamma_w);
  LinearWeights out;
  out.w = m.meta.b1 * (w_s - v.transpose() * x) + m.meta.b2 * (m.crcl.core.transpose() * x);
  out.b0 = m.meta.b0;
  return out;
}

// ---- Model files ------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'C', 'R', 'C', '1'};

void put_index_list(io::ByteWriter& w, const std::vector<Index>& v) {
  w.u64(v.size());
  for (Index x : v) w.u64(static_cast<std::uint64_t>(x));
}

std::vector<Index> get_index_list(io::ByteReader& r) {
  std::vector<Index> v(r.count(8));
  for (auto& x : v) x = static_cast<Index>(r.u64());
  return v;
}

void put_vector(io::ByteWriter& w, const VectorXd& v) {
  w.u64(static_cast<std::uint64_t>(v.size()));
  w.f64s(v.data(), static_cast<std::size_t>(v.size()));
}

VectorXd get_vector(io::ByteReader& r) {
  VectorXd v(static_cast<Index>(r.count(8)));
  r.f64s(v.data(), static_cast<std::size_t>(v.size()));
  return v;
}

}  // namespace

std::vector<std::uint8_t> serialize(const FittedCRC& m) {
  io::ByteWriter w;
  w.raw(kMagic, 4);
  w.u32(kModelVersion);
  const auto n = static_cast<std::uint64_t>(m.n());
  const auto p = static_cast<std::uint64_t>(m.p());
  w.u64(n);
  w.u64(p);
  w.f64s(m.train.mu_hat().data(), p);
  w.f64s(m.train.values().data(), n * p);
  for (Index i = 0; i < m.n(); ++i) w.put<std::int32_t>(m.labels[i]);
  w.f64(m.lambda);
  w.f64s(m.effective_inverse.data(), n * n);
  w.f64s(m.gamma.gamma_hat.data(), p);
  w.f64s(m.crcl.core.data(), n);
  w.f64(m.crcl.lambda);

  put_index_list(w, m.crcs.features);
  put_vector(w, m.crcs.mean_diff);
  put_vector(w, m.crcs.pooled_var);
  put_vector(w, m.crcs.weights);
  w.f64(m.crcs.midpoint_offset);
  w.u64(static_cast<std::uint64_t>(m.crcs.floored));

  for (double v : {m.meta.b0, m.meta.b1, m.meta.b2, m.meta.prior1, m.meta.prior2}) w.f64(v);
  w.u32(m.meta.ridged ? 1u : 0u);
  for (double v : {m.crcs_alone.slope, m.crcs_alone.intercept, m.crcl_alone.slope, m.crcl_alone.intercept}) {
    w.f64(v);
  }
  const MatrixXd pairs = m.loo_score_pairs;
  w.f64s(pairs.data(), n * 2);

  put_index_list(w, m.trace.grid);
  w.f64s(m.trace.estimated_errors.data(), m.trace.estimated_errors.size());
  w.u64(static_cast<std::uint64_t>(m.trace.chosen_N));

  w.u64(m.diagnostics.size());
  for (const auto& d : m.diagnostics) w.string(d);
  w.string(m.label_names[0]);
  w.string(m.label_names[1]);

  const std::uint32_t check = io::crc32(w.bytes());
  w.u32(check);
  return std::move(w.bytes());
}

FittedCRC deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    fail(ErrorKind::CorruptModel, "not a CRC1 model file");
  }
  std::uint32_t version = 0;
  std::memcpy(&version, bytes.data() + 4, 4);
  if (version != kModelVersion) {
    fail(ErrorKind::VersionMismatch, "model version " + std::to_string(version) + " is not supported");
  }
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  std::memcpy(&stored, bytes.data() + body, 4);
  if (io::crc32(std::span<const std::uint8_t>(bytes.data(), body)) != stored) {
    fail(ErrorKind::CorruptModel, "model checksum mismatch");
  }

  io::ByteReader r(std::span<const std::uint8_t>(bytes.data() + 8, body - 8), ErrorKind::CorruptModel);
  FittedCRC m;
  const auto n = r.u64();
  const auto p = r.u64();
  if (n < 4 || p < 2 || n > r.remaining() / 8 || p > r.remaining() / 8 || n * p > r.remaining() / 8) {
    fail(ErrorKind::CorruptModel, "model dimensions are inconsistent with the file size");
  }
  const auto ni = static_cast<Index>(n);
  const auto pi = static_cast<Index>(p);
  RowVectorXd mu(pi);
  r.f64s(mu.data(), p);
  RowMatrix values(ni, pi);
  r.f64s(values.data(), n * p);
  m.train = restore_data_matrix(std::move(values), std::move(mu), true);
  std::vector<int> labels(n);
  for (auto& l : labels) l = r.get<std::int32_t>();
  try {
    m.labels = LabelVector(labels);
  } catch (const Error&) {
    fail(ErrorKind::CorruptModel, "stored labels are invalid");
  }
  m.lambda = r.f64();
  m.effective_inverse.resize(ni, ni);
  r.f64s(m.effective_inverse.data(), n * n);
  m.gamma.gamma_hat.resize(pi);
  r.f64s(m.gamma.gamma_hat.data(), p);
  m.crcl.core.resize(ni);
  r.f64s(m.crcl.core.data(), n);
  m.crcl.lambda = r.f64();

  m.crcs.features = get_index_list(r);
  m.crcs.mean_diff = get_vector(r);
  m.crcs.pooled_var = get_vector(r);
  m.crcs.weights = get_vector(r);
  m.crcs.midpoint_offset = r.f64();
  m.crcs.floored = static_cast<Index>(r.u64());
  const auto k = static_cast<Index>(m.crcs.features.size());
  if (k < 1 || m.crcs.weights.size() != k || m.crcs.mean_diff.size() != k || m.crcs.pooled_var.size() != k) {
    fail(ErrorKind::CorruptModel, "CRC-S block is inconsistent");
  }
  for (Index j : m.crcs.features) {
    if (j < 0 || j >= pi) fail(ErrorKind::CorruptModel, "CRC-S feature index out of range");
  }

  m.meta.b0 = r.f64();
  m.meta.b1 = r.f64();
  m.meta.b2 = r.f64();
  m.meta.prior1 = r.f64();
  m.meta.prior2 = r.f64();
  m.meta.ridged = r.u32() != 0;
  m.crcs_alone.slope = r.f64();
  m.crcs_alone.intercept = r.f64();
  m.crcl_alone.slope = r.f64();
  m.crcl_alone.intercept = r.f64();
  m.loo_score_pairs.resize(ni, 2);
  r.f64s(m.loo_score_pairs.data(), n * 2);

  m.trace.grid = get_index_list(r);
  m.trace.estimated_errors.resize(m.trace.grid.size());
  r.f64s(m.trace.estimated_errors.data(), m.trace.grid.size());
  m.trace.chosen_N = static_cast<Index>(r.u64());

  const auto nd = r.count(8);
  for (std::uint64_t d = 0; d < nd; ++d) m.diagnostics.push_back(r.string());
  m.label_names[0] = r.string();
  m.label_names[1] = r.string();
  if (r.remaining() != 0) fail(ErrorKind::CorruptModel, "trailing bytes after model payload");
  return m;
}

void save_model(const FittedCRC& m, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize(m));
}

FittedCRC load_model(const std::filesystem::path& path) { return deserialize(io::read_file(path)); }

}  // namespace crc
