#include "crc/crc_l.hpp"
#include "crc/gram.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <numeric>

using namespace crc;
using crc::test::random_matrix;

namespace {

Eigen::Vector2d contrast() { return Eigen::Vector2d(-1.0, 1.0); }

// LDA on X = Z V (all right singular vectors), within-class covariance with
// its two null directions raised to lambda through lambda * P.
struct ExplicitPcLda {
  MatrixXd v;        // p x n
  MatrixXd sigma;    // unaugmented
  MatrixXd p_null;   // projector onto X^-1 Y
  VectorXd mean_diff;
  MatrixXd x;

  ExplicitPcLda(const RowMatrix& z, const LabelVector& t, double lambda) {
    const Index n = z.rows();
    Eigen::JacobiSVD<MatrixXd> svd(MatrixXd(z), Eigen::ComputeThinU | Eigen::ComputeThinV);
    v = svd.matrixV();
    x = z * v;  // n x n
    const MatrixXd y = t.indicator();
    const MatrixXd yty_inv = (y.transpose() * y).inverse();
    const MatrixXd ry = MatrixXd::Identity(n, n) - y * yty_inv * y.transpose();
    sigma = x.transpose() * ry * x / static_cast<double>(n);
    const MatrixXd xinv_y = x.inverse() * y;
    p_null = xinv_y * (xinv_y.transpose() * xinv_y).inverse() * xinv_y.transpose();
    const MatrixXd means = yty_inv * y.transpose() * x;  // 2 x n
    mean_diff = (means.row(1) - means.row(0)).transpose();
    augmented = sigma + lambda * p_null;
  }

  double score(const RowVectorXd& z) const {
    const RowVectorXd xz = z * v;
    return xz * augmented.ldlt().solve(mean_diff);
  }

  MatrixXd augmented;
};

// The bracketed n x n expression inverted literally.
VectorXd bracket_core(const GramState& g, const LabelVector& t) {
  const Index n = g.n();
  const MatrixXd y = t.indicator();
  const MatrixXd yty_inv = (y.transpose() * y).inverse();
  const MatrixXd ry = MatrixXd::Identity(n, n) - y * yty_inv * y.transpose();
  const MatrixXd gi = g.effective_inverse;
  const MatrixXd bracket = ry * g.augmented_gram() / static_cast<double>(n) +
                           g.lambda * gi * y * (y.transpose() * gi * y).inverse() * y.transpose();
  return bracket.fullPivLu().solve(y * yty_inv * contrast());
}

}  // namespace

TEST_CASE("CRC-L equals explicit PC-LDA on all components") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const Index n = 6 + static_cast<Index>(seed % 3) * 3;
    const Index p = 40 + static_cast<Index>(seed) * 10;
    const RowMatrix z = random_matrix(n, p, 100 + seed);
    const LabelVector t = crc::test::alternating_labels(n, seed);
    const DataMatrix dm = DataMatrix::uncentered(z);
    const GramState g = build_gram(dm);
    REQUIRE(g.replaced == 0);
    const CrcLModel m = fit_crcl(g, dm, t);
    const ExplicitPcLda oracle(z, t, g.lambda);
    for (int k = 0; k < 5; ++k) {
      const RowVectorXd probe = random_matrix(1, p, 1000 * seed + static_cast<std::uint64_t>(k)).row(0);
      const double expected = oracle.score(probe);
      CHECK(score_crcl(m, dm, probe) == doctest::Approx(expected).epsilon(1e-5));
    }
  }
}

TEST_CASE("CRC-L closed form equals the literal bracket inverse on centered data") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Index n = 7 + static_cast<Index>(seed);
    const DataMatrix dm = center_columns(random_matrix(n, 50, 200 + seed));
    const LabelVector t = crc::test::alternating_labels(n, seed + 7);
    const GramState g = build_gram(dm);
    const CrcLModel m = fit_crcl(g, dm, t);
    const VectorXd oracle = bracket_core(g, t);
    CHECK(crc::test::rel_frobenius(m.core, oracle) < 1e-7);
    CHECK(m.lambda == g.lambda);
  }
}

TEST_CASE("within-class covariance annihilates X^-1 Y") {
  const Index n = 9;
  const RowMatrix z = random_matrix(n, 30, 301);
  const LabelVector t = crc::test::alternating_labels(n, 3);
  const ExplicitPcLda e(z, t, 1.0);
  const MatrixXd null_dirs = e.x.inverse() * t.indicator();
  CHECK((e.sigma * null_dirs).norm() < 1e-8 * e.sigma.norm() * null_dirs.norm());
  // P is the orthogonal projector onto those directions.
  CHECK(crc::test::rel_frobenius(e.p_null * e.p_null, e.p_null) < 1e-10);
  CHECK(std::abs(e.p_null.trace() - 2.0) < 1e-10);
}

TEST_CASE("CRC-L is invariant to right-orthogonal mixing") {
  const Index n = 10, p = 25;
  const RowMatrix z = random_matrix(n, p, 302);
  const LabelVector t = crc::test::alternating_labels(n, 2);
  Eigen::HouseholderQR<MatrixXd> qr(random_matrix(p, p, 303));
  const MatrixXd q = qr.householderQ();
  const DataMatrix a = center_columns(z);
  const DataMatrix b = center_columns(RowMatrix(z * q));
  const CrcLModel ma = fit_crcl(build_gram(a), a, t);
  const CrcLModel mb = fit_crcl(build_gram(b), b, t);
  const RowVectorXd probe = random_matrix(1, p, 304).row(0);
  CHECK(score_crcl(mb, b, probe * q) == doctest::Approx(score_crcl(ma, a, probe)).epsilon(1e-8));
}

TEST_CASE("CRC-L is invariant to column offsets after centering") {
  const Index n = 10, p = 25;
  RowMatrix z = random_matrix(n, p, 305);
  const LabelVector t = crc::test::alternating_labels(n, 9);
  const DataMatrix a = center_columns(z);
  z.col(4).array() += 17.0;
  const DataMatrix b = center_columns(z);
  const CrcLModel ma = fit_crcl(build_gram(a), a, t);
  const CrcLModel mb = fit_crcl(build_gram(b), b, t);
  RowVectorXd probe = random_matrix(1, p, 306).row(0);
  const double sa = score_crcl(ma, a, apply_centering(a, probe));
  probe[4] += 17.0;
  CHECK(score_crcl(mb, b, apply_centering(b, probe)) == doctest::Approx(sa).epsilon(1e-9));
}

TEST_CASE("CRC-L score examples") {
  const Index n = 8, p = 30;
  const DataMatrix dm = center_columns(random_matrix(n, p, 307));
  const LabelVector t = crc::test::alternating_labels(n);
  const CrcLModel m = fit_crcl(build_gram(dm), dm, t);
  CHECK(score_crcl(m, dm, RowVectorXd::Zero(p)) == 0.0);

  RowVectorXd z = random_matrix(1, p, 308).row(0);
  Eigen::HouseholderQR<MatrixXd> qr(MatrixXd(dm.values().transpose()));
  const MatrixXd q = qr.householderQ() * MatrixXd::Identity(p, n);
  z -= (q * (q.transpose() * z.transpose())).transpose();
  CHECK(std::abs(score_crcl(m, dm, z)) < 1e-10);

  const RowVectorXd w = random_matrix(1, p, 309).row(0);
  CHECK(score_crcl(m, dm, -w) == doctest::Approx(-score_crcl(m, dm, w)));

  try {
    score_crcl(m, dm, RowVectorXd::Zero(p - 1));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ShapeError);
  }
}

TEST_CASE("leave-one-out CRC-L equals a fit on each submatrix") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const Index n = 8 + 2 * static_cast<Index>(seed);
    RowMatrix raw = random_matrix(n, 45, 400 + seed);
    const LabelVector t = crc::test::alternating_labels(n, seed);
    crc::test::add_signal(raw, t, 10, 0.5);
    const DataMatrix dm = center_columns(raw);
    const GramState g = build_gram(dm);
    const VectorXd loo = loo_scores_crcl(g, dm, t);
    for (Index i = 0; i < n; ++i) {
      const auto keep = crc::test::all_but(n, i);
      GramState gi = gram_from_matrix(crc::test::drop_row_col(g.augmented_gram(), i));
      REQUIRE(gi.replaced == 0);
      gi.lambda = g.lambda;  // folds keep the full-data lambda
      const DataMatrix dmi = restore_data_matrix(select_rows(dm.values(), keep), dm.mu_hat(), true);
      const CrcLModel mi = fit_crcl(gi, dmi, t.subset(keep));
      const double expected = score_crcl(mi, dmi, dm.values().row(i));
      CHECK(loo[i] == doctest::Approx(expected).epsilon(1e-6).scale(std::abs(expected) + 1e-12));
    }
  }
}

TEST_CASE("leave-one-out CRC-L on separable data has the right signs") {
  const Index n = 12, p = 20;
  RowMatrix raw = RowMatrix::Zero(n, p);
  const LabelVector t = crc::test::alternating_labels(n);
  const RowMatrix noise = random_matrix(n, p, 501, 0.05);
  for (Index i = 0; i < n; ++i) {
    raw.row(i) = noise.row(i);
    raw(i, 0) += 3.0 * t[i];
    raw(i, 1) += 1.0;
  }
  const DataMatrix dm = center_columns(raw);
  const VectorXd loo = loo_scores_crcl(build_gram(dm), dm, t);
  for (Index i = 0; i < n; ++i) CHECK(loo[i] * t[i] > 0.0);
}

TEST_CASE("leave-one-out CRC-L is permutation equivariant") {
  const Index n = 11, p = 35;
  RowMatrix raw = random_matrix(n, p, 502);
  const LabelVector t = crc::test::alternating_labels(n, 6);
  crc::test::add_signal(raw, t, 5, 0.7);
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 gen(7);
  std::shuffle(perm.begin(), perm.end(), gen);
  const DataMatrix a = center_columns(raw);
  const DataMatrix b = center_columns(select_rows(raw, perm));
  const VectorXd la = loo_scores_crcl(build_gram(a), a, t);
  const VectorXd lb = loo_scores_crcl(build_gram(b), b, t.subset(perm));
  for (Index k = 0; k < n; ++k) CHECK(lb[k] == doctest::Approx(la[perm[std::size_t(k)]]).epsilon(1e-8));
}
