#include "crc/baselines.hpp"

#include "crc/kernels.hpp"

#include <cmath>

namespace crc {

double DldaBaselineModel::discriminant(const Eigen::Ref<const RowVectorXd>& z_raw) const {
  if (z_raw.size() != mu_hat.size()) fail(ErrorKind::ShapeError, "observation has the wrong number of features");
  double s = 0.0;
  for (Index k = 0; k < dlda.size(); ++k) {
    const Index j = dlda.features[static_cast<std::size_t>(k)];
    s += dlda.weights[k] * (z_raw[j] - mu_hat[j]);
  }
  return s - dlda.midpoint_offset + log_prior_ratio;
}

int DldaBaselineModel::predict(const Eigen::Ref<const RowVectorXd>& z_raw) const {
  return discriminant(z_raw) >= 0.0 ? 1 : -1;
}

DldaBaselineModel fit_dlda_baseline(RowMatrix raw, const LabelVector& t, const BaselineConfig& config) {
  if (raw.rows() != t.size()) fail(ErrorKind::ShapeError, "matrix rows and labels differ in length");
  const DataMatrix dm = center_columns(std::move(raw));
  RowMatrix mapped;
  if (config.features) {
    mapped = config.features(dm, t);
    if (mapped.rows() != dm.rows() || mapped.cols() != dm.cols()) {
      fail(ErrorKind::ShapeError, "feature map changed the matrix shape");
    }
  }
  const RowMatrix& x = config.features ? mapped : dm.values();
  const Index n = x.rows();

  DldaBaselineModel m;
  m.mu_hat = dm.mu_hat();
  m.log_prior_ratio = std::log(static_cast<double>(t.n2()) / static_cast<double>(t.n1()));
  m.trace.grid = config.grid.empty() ? screening_grid(x.cols()) : config.grid;

  kernels::LooScreeningProblem problem;
  problem.features = &x;
  problem.labels = &t;
  problem.grid = m.trace.grid;
  const auto loo = kernels::loo_screened_scores_parallel(problem);

  std::size_t best = 0;
  for (std::size_t g = 0; g < m.trace.grid.size(); ++g) {
    Index wrong = 0;
    for (Index i = 0; i < n; ++i) {
      const double k1 = static_cast<double>(t.n1() - (t[i] < 0 ? 1 : 0));
      const double k2 = static_cast<double>(t.n2() - (t[i] > 0 ? 1 : 0));
      const auto col = static_cast<Index>(g);
      const double d = loo.scores(i, col) - loo.offsets(i, col) + std::log(k2 / k1);
      if ((d >= 0.0 ? 1 : -1) != t[i]) ++wrong;
    }
    m.trace.estimated_errors.push_back(static_cast<double>(wrong) / static_cast<double>(n));
    if (m.trace.estimated_errors[g] < m.trace.estimated_errors[best]) best = g;
  }
  m.trace.chosen_N = m.trace.grid[best];
  m.dlda = fit_dlda_top(x, t, m.trace.chosen_N);
  return m;
}

}  // namespace crc
