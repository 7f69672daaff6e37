#include "crc/crc_s.hpp"

#include "crc/kernels.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace crc {

ScreeningResult marginal_pvalues(const RowMatrix& x, const LabelVector& t) {
  if (x.rows() != t.size()) fail(ErrorKind::ShapeError, "labels do not match matrix rows");
  if (t.n1() < 2 || t.n2() < 2) fail(ErrorKind::InvalidData, "each class needs two members");

  const auto stats = kernels::class_column_stats_parallel(x, t);
  const RowVectorXd floor = kernels::variance_floor(x);
  const double dof = static_cast<double>(t.size() - 2);
  const double scale = 1.0 / static_cast<double>(t.n1()) + 1.0 / static_cast<double>(t.n2());

  ScreeningResult out;
  const RowVectorXd var = ((stats.ss1 + stats.ss2) / dof).cwiseMax(floor);
  out.t = (stats.mean2 - stats.mean1).cwiseQuotient((var * scale).cwiseSqrt());

  boost::math::students_t dist(dof);
  out.pvalues.resize(x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    const double a = std::abs(out.t[j]);
    out.pvalues[j] = a == 0.0 ? 1.0 : 2.0 * boost::math::cdf(boost::math::complement(dist, a));
  }
  // |t| rather than the p-value: p-values underflow to 0 for strong features
  // and the order would fall back to the column index.
  out.order = kernels::rank_by_abs_t(out.t.cwiseAbs());
  return out;
}

double DldaModel::score(const Eigen::Ref<const RowVectorXd>& x) const {
  double s = 0.0;
  for (std::size_t k = 0; k < features.size(); ++k) {
    const Index j = features[k];
    if (j >= x.size()) fail(ErrorKind::ShapeError, "observation is shorter than the model");
    s += weights[static_cast<Index>(k)] * x[j];
  }
  return s;
}

RowVectorXd DldaModel::dense_weights(Index p) const {
  RowVectorXd w = RowVectorXd::Zero(p);
  for (std::size_t k = 0; k < features.size(); ++k) w[features[k]] = weights[static_cast<Index>(k)];
  return w;
}

DldaModel fit_dlda(const RowMatrix& x, const LabelVector& t, std::span<const Index> features) {
  if (x.rows() != t.size()) fail(ErrorKind::ShapeError, "labels do not match matrix rows");
  if (features.empty()) fail(ErrorKind::ConfigError, "DLDA needs at least one feature");
  const Index n = x.rows();
  const Index k = static_cast<Index>(features.size());
  const double dof = static_cast<double>(n - 2);

  DldaModel m;
  m.features.assign(features.begin(), features.end());
  m.mean_diff.resize(k);
  m.pooled_var.resize(k);
  m.weights.resize(k);
  for (Index c = 0; c < k; ++c) {
    const Index j = m.features[static_cast<std::size_t>(c)];
    if (j < 0 || j >= x.cols()) fail(ErrorKind::ShapeError, "feature index out of range");
    double s1 = 0.0, s2 = 0.0, sq = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double v = x(i, j);
      (t[i] < 0 ? s1 : s2) += v;
      sq += v * v;
    }
    const double m1 = s1 / static_cast<double>(t.n1());
    const double m2 = s2 / static_cast<double>(t.n2());
    double ss = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double d = x(i, j) - (t[i] < 0 ? m1 : m2);
      ss += d * d;
    }
    const double floor = std::max(1e-12 * sq / static_cast<double>(n), std::numeric_limits<double>::min());
    double var = ss / dof;
    if (var < floor) {
      var = floor;
      ++m.floored;
    }
    m.mean_diff[c] = m2 - m1;
    m.pooled_var[c] = var;
    m.weights[c] = (m2 - m1) / var;
    m.midpoint_offset += m.weights[c] * 0.5 * (m1 + m2);
  }
  return m;
}

DldaModel fit_dlda_top(const RowMatrix& x, const LabelVector& t, Index n_features) {
  if (n_features < 1 || n_features > x.cols()) {
    fail(ErrorKind::ConfigError, "feature count must lie in [1, p]");
  }
  const ScreeningResult screen = marginal_pvalues(x, t);
  return fit_dlda(x, t, std::span<const Index>(screen.order.data(), static_cast<std::size_t>(n_features)));
}

std::vector<Index> screening_grid(Index p) {
  if (p < 1) fail(ErrorKind::ConfigError, "grid needs p >= 1");
  const auto top = static_cast<int>(std::floor(std::sqrt(static_cast<double>(p))));
  std::vector<Index> grid;
  for (int half = 0; half <= 2 * top; ++half) {
    const auto v = static_cast<Index>(std::llround(std::exp2(0.5 * half)));
    const Index c = std::min(v, p);
    if (grid.empty() || c > grid.back()) grid.push_back(c);
    if (c == p) break;
  }
  return grid;
}

double estimated_error(const MatrixXd& points, const LabelVector& t) {
  if (points.rows() != t.size()) fail(ErrorKind::ShapeError, "labels do not match score rows");
  const Index n = points.rows();
  const Index d = points.cols();
  VectorXd m1 = VectorXd::Zero(d), m2 = VectorXd::Zero(d);
  for (Index i = 0; i < n; ++i) (t[i] < 0 ? m1 : m2) += points.row(i).transpose();
  m1 /= static_cast<double>(t.n1());
  m2 /= static_cast<double>(t.n2());
  MatrixXd s = MatrixXd::Zero(d, d);
  for (Index i = 0; i < n; ++i) {
    const VectorXd r = points.row(i).transpose() - (t[i] < 0 ? m1 : m2);
    s += r * r.transpose();
  }
  s /= static_cast<double>(n - 2);
  const VectorXd delta = m2 - m1;
  if (delta.squaredNorm() == 0.0) return 0.5;

  // Collinear scores leave s singular; a trace-relative ridge keeps the
  // Mahalanobis distance finite.
  const double tr = s.trace();
  s.diagonal().array() += std::max(1e-12 * tr, std::numeric_limits<double>::min());
  const double m2dist = delta.dot(s.ldlt().solve(delta));
  if (!std::isfinite(m2dist)) return 0.0;
  return 0.5 * std::erfc(std::sqrt(std::max(m2dist, 0.0)) / std::sqrt(2.0));
}

namespace {

kernels::LooScreeningScores screened_scores(const ResidualizedMatrix& s_hat, const LabelVector& t,
                                            std::span<const Index> grid, const GramState& g,
                                            const DataMatrix& dm, bool project, bool parallel) {
  if (s_hat.rows() != t.size() || dm.rows() != t.size() || g.n() != t.size()) {
    fail(ErrorKind::ShapeError, "CRC-S inputs disagree on n");
  }
  kernels::LooScreeningProblem problem;
  problem.features = &s_hat.s_hat;
  problem.labels = &t;
  problem.grid = grid;
  if (project) {
    problem.projection_source = &g.effective_inverse;
    problem.projection_basis = &dm.values();
  }
  return parallel ? kernels::loo_screened_scores_parallel(problem)
                  : kernels::loo_screened_scores_serial(problem);
}

}  // namespace

CrcsSelection select_N(const CrcsContext& c) {
  if (c.residualized == nullptr || c.labels == nullptr || c.gram == nullptr || c.data == nullptr ||
      c.crcl_scores == nullptr) {
    fail(ErrorKind::ConfigError, "grid search context is incomplete");
  }
  const LabelVector& t = *c.labels;
  if (c.crcl_scores->size() != t.size()) fail(ErrorKind::ShapeError, "CRC-L scores do not match labels");

  CrcsSelection out;
  out.trace.grid = c.grid.empty() ? screening_grid(c.residualized->cols()) : c.grid;
  const auto scores = screened_scores(*c.residualized, t, out.trace.grid, *c.gram, *c.data,
                                      c.project, c.parallel);
  out.loo_scores = scores.scores;

  const Index n = t.size();
  MatrixXd pairs(n, 2);
  pairs.col(0) = *c.crcl_scores;
  std::size_t best = 0;
  for (std::size_t k = 0; k < out.trace.grid.size(); ++k) {
    pairs.col(1) = out.loo_scores.col(static_cast<Index>(k));
    const double e = estimated_error(pairs, t);
    out.trace.estimated_errors.push_back(e);
    if (e < out.trace.estimated_errors[best]) best = k;
  }
  out.trace.chosen_N = out.trace.grid[best];
  out.chosen_scores = out.loo_scores.col(static_cast<Index>(best));
  return out;
}

VectorXd loo_scores_crcs(const ResidualizedMatrix& s_hat, const LabelVector& t, Index n_features,
                         const GramState& g, const DataMatrix& dm, bool project) {
  const Index grid[] = {n_features};
  return screened_scores(s_hat, t, grid, g, dm, project, true).scores.col(0);
}

}  // namespace crc
