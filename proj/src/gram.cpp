#include "crc/gram.hpp"

#include "crc/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace crc {

namespace {

double median_of(VectorXd v) {
  std::sort(v.data(), v.data() + v.size());
  const Index m = v.size();
  return (m % 2 == 1) ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

// Pivots at or below this fraction of the largest diagonal entry of the
// inverse are treated as singular.
double pivot_floor(const MatrixXd& inverse) {
  return 64.0 * std::numeric_limits<double>::epsilon() *
         inverse.diagonal().cwiseAbs().maxCoeff();
}

}  // namespace

MatrixXd GramState::augmented_gram() const {
  return eigenvectors * augmented.asDiagonal() * eigenvectors.transpose();
}

VectorXd gram_spectrum(const RowMatrix& values) {
  const MatrixXd gram = kernels::gram_parallel(values);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  VectorXd ev = es.eigenvalues().reverse();
  return ev.cwiseMax(0.0);
}

GramState gram_from_matrix(MatrixXd gram) {
  if (gram.rows() != gram.cols() || gram.rows() < 2) {
    fail(ErrorKind::ShapeError, "Gram matrix must be square with at least 2 rows");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram);
  if (es.info() != Eigen::Success) fail(ErrorKind::DegenerateGram, "eigendecomposition failed");

  const Index n = gram.rows();
  GramState g;
  g.gram = std::move(gram);
  // Eigen returns ascending order.
  g.eigenvalues = es.eigenvalues().reverse().cwiseMax(0.0);
  g.eigenvectors = es.eigenvectors().rowwise().reverse();

  const double top = g.eigenvalues[0];
  if (!(top > 0.0)) fail(ErrorKind::DegenerateGram, "Gram matrix is zero");
  const double threshold = kRankDeficiencyThreshold * top;

  g.lambda = median_of(g.eigenvalues);
  if (!(g.lambda > threshold)) {
    // More than half the spectrum is deficient; fall back to the median of
    // the non-deficient part so lambda stays on the scale of the data.
    std::vector<double> kept;
    for (Index k = 0; k < n; ++k)
      if (g.eigenvalues[k] > threshold) kept.push_back(g.eigenvalues[k]);
    g.lambda = median_of(Eigen::Map<VectorXd>(kept.data(), static_cast<Index>(kept.size())));
  }

  g.augmented = g.eigenvalues;
  for (Index k = 0; k < n; ++k) {
    if (g.eigenvalues[k] < threshold) {
      g.augmented[k] = g.lambda;
      ++g.replaced;
    }
  }
  g.effective_inverse =
      g.eigenvectors * g.augmented.cwiseInverse().asDiagonal() * g.eigenvectors.transpose();
  return g;
}

GramState build_gram(const DataMatrix& dm) {
  return gram_from_matrix(kernels::gram_parallel(dm.values()));
}

// ---- DowndatedGram --------------------------------------------------------

VectorXd DowndatedGram::solve_embedded(const Eigen::Ref<const VectorXd>& embedded) const {
  if (embedded.size() != n_) fail(ErrorKind::ShapeError, "embedded vector must have n entries");
  const Index i = removed_;
  VectorXd out;
  if (direct_) {
    VectorXd compact(n_ - 1);
    compact << embedded.head(i), embedded.tail(n_ - 1 - i);
    const VectorXd x = direct_->solve(compact);
    out.resize(n_);
    out << x.head(i), 0.0, x.tail(n_ - 1 - i);
    return out;
  }
  VectorXd v = embedded;
  v[i] = 0.0;
  out = (*inverse_) * v;
  out -= inverse_->col(i) * (out[i] / pivot_);
  out[i] = 0.0;
  return out;
}

VectorXd DowndatedGram::solve(const Eigen::Ref<const VectorXd>& compact) const {
  if (compact.size() != n_ - 1) fail(ErrorKind::ShapeError, "compact vector must have n-1 entries");
  const Index i = removed_;
  VectorXd embedded(n_);
  embedded << compact.head(i), 0.0, compact.tail(n_ - 1 - i);
  const VectorXd x = solve_embedded(embedded);
  VectorXd out(n_ - 1);
  out << x.head(i), x.tail(n_ - 1 - i);
  return out;
}

MatrixXd DowndatedGram::inverse() const {
  MatrixXd out(n_ - 1, n_ - 1);
  for (Index c = 0; c < n_ - 1; ++c) {
    out.col(c) = solve(VectorXd::Unit(n_ - 1, c));
  }
  return out;
}

DowndatedGram downdate_gram(const GramState& g, const DataMatrix& dm, Index i) {
  const Index n = g.n();
  if (dm.rows() != n) fail(ErrorKind::ShapeError, "data matrix does not match Gram state");
  if (i < 0 || i >= n) fail(ErrorKind::ShapeError, "fold index out of range");
  const double pivot = g.effective_inverse(i, i);
  if (!(pivot > pivot_floor(g.effective_inverse))) {
    throw Error(ErrorKind::DowndateSingular,
                "non-positive pivot removing observation " + std::to_string(i));
  }
  DowndatedGram d;
  d.inverse_ = &g.effective_inverse;
  d.removed_ = i;
  d.n_ = n;
  d.pivot_ = pivot;
  return d;
}

DowndatedGram rebuild_downdated(const GramState& g, Index i) {
  const Index n = g.n();
  if (i < 0 || i >= n) fail(ErrorKind::ShapeError, "fold index out of range");
  const MatrixXd full = g.augmented_gram();
  std::vector<Index> keep;
  keep.reserve(static_cast<std::size_t>(n - 1));
  for (Index k = 0; k < n; ++k)
    if (k != i) keep.push_back(k);
  const MatrixXd sub = full(keep, keep);
  DowndatedGram d;
  d.removed_ = i;
  d.n_ = n;
  d.direct_.emplace(sub);
  if (d.direct_->info() != Eigen::Success) {
    fail(ErrorKind::DowndateSingular, "direct factorization failed for fold " + std::to_string(i));
  }
  return d;
}

DowndatedGram downdate_or_rebuild(const GramState& g, const DataMatrix& dm, Index i) {
  try {
    return downdate_gram(g, dm, i);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DowndateSingular) throw;
    return rebuild_downdated(g, i);
  }
}

// ---- Batched fold solves --------------------------------------------------

namespace {

// Fixes up fold columns whose pivot is unusable by solving directly.
void repair_singular_folds(const GramState& g, const MatrixXd& rhs, bool shared, MatrixXd& out) {
  const MatrixXd& b = g.effective_inverse;
  const double floor = pivot_floor(b);
  for (Index i = 0; i < g.n(); ++i) {
    if (b(i, i) > floor) continue;
    const DowndatedGram d = rebuild_downdated(g, i);
    out.col(i) = d.solve_embedded(shared ? rhs.col(0) : rhs.col(i));
  }
}

}  // namespace

MatrixXd downdated_solves_by_column(const GramState& g, const MatrixXd& rhs) {
  const Index n = g.n();
  if (rhs.rows() != n || rhs.cols() != n) fail(ErrorKind::ShapeError, "rhs must be n x n");
  const MatrixXd& b = g.effective_inverse;

  MatrixXd r0 = rhs;
  r0.diagonal().setZero();
  MatrixXd out = b * r0;
  const double floor = pivot_floor(b);

#pragma omp parallel for schedule(static) num_threads(kernels::max_threads())
  for (Index i = 0; i < n; ++i) {
    const double pivot = b(i, i);
    if (!(pivot > floor)) continue;
    const double yi = out(i, i);
    out.col(i) -= b.col(i) * (yi / pivot);
    out(i, i) = 0.0;
  }
  repair_singular_folds(g, rhs, false, out);
  return out;
}

MatrixXd downdated_solves_shared(const GramState& g, const VectorXd& rhs) {
  const Index n = g.n();
  if (rhs.size() != n) fail(ErrorKind::ShapeError, "rhs must have n entries");
  const MatrixXd& b = g.effective_inverse;
  const VectorXd bv = b * rhs;
  const double floor = pivot_floor(b);

  MatrixXd out(n, n);
#pragma omp parallel for schedule(static) num_threads(kernels::max_threads())
  for (Index i = 0; i < n; ++i) {
    const double pivot = b(i, i);
    if (!(pivot > floor)) continue;
    // B applied to rhs with slot i zeroed.
    VectorXd y = bv - b.col(i) * rhs[i];
    y -= b.col(i) * (y[i] / pivot);
    y[i] = 0.0;
    out.col(i) = y;
  }
  MatrixXd rhs_col = rhs;
  repair_singular_folds(g, rhs_col, true, out);
  return out;
}

}  // namespace crc
