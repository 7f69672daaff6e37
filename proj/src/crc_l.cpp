#include "crc/crc_l.hpp"

#include "crc/kernels.hpp"

#include <cmath>

namespace crc {

namespace {

using Eigen::Matrix2d;
using Eigen::Vector2d;

const Vector2d kContrast(-1.0, 1.0);

// Solves the 2 x 2 system A x = b. A singular A is retried once with a
// 1e-10 * trace ridge; `ridged` reports whether that happened.
Vector2d solve_class_system(Matrix2d a, const Vector2d& b, bool& ridged) {
  auto singular = [](const Matrix2d& m) {
    const double det = m.determinant();
    return !(std::abs(det) > 1e-12 * std::abs(m(0, 0) * m(1, 1))) || !std::isfinite(det);
  };
  if (singular(a)) {
    a.diagonal().array() += 1e-10 * a.trace();
    ridged = true;
    if (singular(a)) fail(ErrorKind::CrcLSingular, "class system is singular after ridge");
  }
  return a.inverse() * b;
}

void check_inputs(const GramState& g, const DataMatrix& dm, const LabelVector& t) {
  if (dm.rows() != g.n() || t.size() != g.n()) {
    fail(ErrorKind::ShapeError, "data, labels and Gram state disagree on n");
  }
}

VectorXd contrast_weights(const LabelVector& t) {
  VectorXd w(t.size());
  for (Index i = 0; i < t.size(); ++i) {
    w[i] = t[i] < 0 ? -1.0 / static_cast<double>(t.n1()) : 1.0 / static_cast<double>(t.n2());
  }
  return w;
}

}  // namespace

CrcLModel fit_crcl(const GramState& g, const DataMatrix& dm, const LabelVector& t) {
  check_inputs(g, dm, t);
  const double m = static_cast<double>(g.n());
  const MatrixXd y = t.indicator();
  const MatrixXd h = g.effective_inverse * y;
  const Matrix2d a = y.transpose() * h;
  const VectorXd w = contrast_weights(t);

  CrcLModel model;
  model.lambda = g.lambda;
  bool ridged = false;
  const Vector2d a_d = solve_class_system(a, kContrast, ridged);
  const VectorXd r = w - h * a_d;
  const Vector2d hr = h.transpose() * r;
  const Vector2d c = solve_class_system(a, kContrast / g.lambda - m * hr, ridged);
  model.core = m * (g.effective_inverse * r) + h * c;
  if (ridged) model.diagnostics.push_back("CRC-L class system ridged (near-singular)");
  return model;
}

double score_crcl_cross(const CrcLModel& m, const Eigen::Ref<const VectorXd>& cross) {
  if (cross.size() != m.core.size()) fail(ErrorKind::ShapeError, "cross products must have n entries");
  return cross.dot(m.core);
}

double score_crcl(const CrcLModel& m, const DataMatrix& dm, const Eigen::Ref<const RowVectorXd>& z) {
  if (z.size() != dm.cols()) fail(ErrorKind::ShapeError, "target must have p entries");
  if (dm.rows() != m.core.size()) fail(ErrorKind::ShapeError, "model does not match training data");
  const VectorXd cross = dm.values() * z.transpose();
  return score_crcl_cross(m, cross);
}

VectorXd loo_scores_crcl(const GramState& g, const DataMatrix& dm, const LabelVector& t) {
  check_inputs(g, dm, t);
  const Index n = g.n();
  if (t.n1() < 2 || t.n2() < 2) {
    fail(ErrorKind::FoldClassEmpty, "a leave-one-out fold would leave a class empty");
  }
  const MatrixXd y = t.indicator();
  const MatrixXd u_all = downdated_solves_by_column(g, g.gram);
  const MatrixXd h1_all = downdated_solves_shared(g, y.col(0));
  const MatrixXd h2_all = downdated_solves_shared(g, y.col(1));
  const double m = static_cast<double>(n - 1);

  VectorXd scores(n);
  bool failed = false;
#pragma omp parallel for schedule(static) num_threads(kernels::max_threads())
  for (Index i = 0; i < n; ++i) {
    MatrixXd yf = y;
    yf.row(i).setZero();
    const double k1 = static_cast<double>(t.n1() - (t[i] < 0 ? 1 : 0));
    const double k2 = static_cast<double>(t.n2() - (t[i] > 0 ? 1 : 0));
    VectorXd wf = yf.col(1) / k2 - yf.col(0) / k1;

    MatrixXd hf(n, 2);
    hf.col(0) = h1_all.col(i);
    hf.col(1) = h2_all.col(i);
    const auto v = u_all.col(i);  // fold inverse times the cross products of Z_i

    const Matrix2d a = yf.transpose() * hf;
    const Matrix2d hh = hf.transpose() * hf;
    const Vector2d hw = hf.transpose() * wf;
    const Vector2d vy = yf.transpose() * v;
    const Vector2d vh = hf.transpose() * v;
    const double vw = v.dot(wf);
    try {
      bool ridged = false;
      const Vector2d a_d = solve_class_system(a, kContrast, ridged);
      const double vr = vw - vh.dot(a_d);
      const Vector2d hr = hw - hh * a_d;
      const Vector2d c = solve_class_system(a, kContrast / g.lambda - m * hr, ridged);
      scores[i] = m * vr + vy.dot(c);
    } catch (const Error&) {
#pragma omp atomic write
      failed = true;
    }
  }
  if (failed) fail(ErrorKind::CrcLSingular, "a leave-one-out CRC-L fold is singular");
  return scores;
}

}  // namespace crc
