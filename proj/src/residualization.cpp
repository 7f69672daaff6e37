#include "crc/residualization.hpp"

#include "crc/kernels.hpp"

namespace crc {

namespace {

// Smallest acceptable T' G^-1 T. Relative to the largest possible value of
// the quadratic form so it does not depend on the scale of the data.
double contrast_floor(const GramState& g, Index n) {
  return 1e-12 * static_cast<double>(n) / g.augmented.minCoeff();
}

void check_inputs(const GramState& g, const DataMatrix& dm, const LabelVector& t) {
  if (dm.rows() != g.n()) fail(ErrorKind::ShapeError, "data matrix does not match Gram state");
  if (t.size() != g.n()) fail(ErrorKind::ShapeError, "labels do not match Gram state");
}

}  // namespace

GammaEstimate estimate_gamma(const GramState& g, const DataMatrix& dm, const LabelVector& t) {
  check_inputs(g, dm, t);
  const VectorXd ginv_t = g.effective_inverse * t.values();
  const double contrast = t.values().dot(ginv_t);
  if (!(contrast > contrast_floor(g, g.n()))) {
    fail(ErrorKind::DegenerateContrast, "T' G^-1 T is not positive");
  }
  return {(ginv_t / contrast).transpose() * dm.values()};
}

RowVectorXd residualize(const GramState& g, const DataMatrix& dm, const LabelVector& t,
                        const GammaEstimate& gamma, const Eigen::Ref<const RowVectorXd>& z) {
  check_inputs(g, dm, t);
  if (z.size() != dm.cols() || gamma.gamma_hat.size() != dm.cols()) {
    fail(ErrorKind::ShapeError, "target and gamma must have p entries");
  }
  const VectorXd cross = dm.values() * z.transpose();
  const VectorXd a = g.effective_inverse * cross;
  RowVectorXd out = z - a.transpose() * dm.values();
  out += a.dot(t.values()) * gamma.gamma_hat;
  return out;
}

GammaEstimate ResidualizedMatrix::per_row_gamma(Index i, const DataMatrix& dm) const {
  if (i < 0 || i >= gamma_weights.cols()) fail(ErrorKind::ShapeError, "fold index out of range");
  return {gamma_weights.col(i).transpose() * dm.values()};
}

ResidualizedMatrix cross_residualize(const GramState& g, const DataMatrix& dm,
                                     const LabelVector& t) {
  check_inputs(g, dm, t);
  const Index n = g.n();
  if (t.n1() < 2 || t.n2() < 2) {
    fail(ErrorKind::FoldClassEmpty, "a leave-one-out fold would leave a class empty");
  }

  // Column i: G_{-i}^-1 (Z_{-i} Z_i') and G_{-i}^-1 T_{-i}, embedded.
  const MatrixXd cross = downdated_solves_by_column(g, g.gram);
  const MatrixXd tsolve = downdated_solves_shared(g, t.values());
  const double floor = contrast_floor(g, n - 1);

  ResidualizedMatrix out;
  out.coefficients = MatrixXd::Identity(n, n);
  out.gamma_weights.resize(n, n);
  bool degenerate = false;

#pragma omp parallel for schedule(static) num_threads(kernels::max_threads())
  for (Index i = 0; i < n; ++i) {
    VectorXd t_fold = t.values();
    t_fold[i] = 0.0;
    const double contrast = t_fold.dot(tsolve.col(i));
    if (!(contrast > floor)) {
#pragma omp atomic write
      degenerate = true;
      continue;
    }
    const VectorXd beta = tsolve.col(i) / contrast;
    const VectorXd a = cross.col(i);
    const VectorXd c = a - a.dot(t_fold) * beta;
    out.coefficients.row(i) -= c.transpose();
    out.coefficients(i, i) = 1.0;
    out.gamma_weights.col(i) = beta;
  }
  if (degenerate) fail(ErrorKind::DegenerateContrast, "a leave-one-out fold has T' G^-1 T <= 0");

  out.s_hat = out.coefficients * dm.values();
  return out;
}

}  // namespace crc
