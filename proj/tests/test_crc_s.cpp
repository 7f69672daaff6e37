#include "crc/crc_l.hpp"
#include "crc/crc_s.hpp"
#include "crc/gram.hpp"
#include "crc/kernels.hpp"
#include "crc/residualization.hpp"
#include "test_util.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace crc;
using crc::test::random_matrix;

TEST_CASE("marginal p-values match the incomplete-beta form of the t tail") {
  const Index n = 20;
  RowMatrix x = random_matrix(n, 30, 1);
  const LabelVector t = crc::test::alternating_labels(n, 3);
  crc::test::add_signal(x, t, 5, 0.6);
  const ScreeningResult r = marginal_pvalues(x, t);
  const double nu = static_cast<double>(n - 2);
  for (Index j = 0; j < x.cols(); ++j) {
    // Direct pooled t statistic.
    double s1 = 0, s2 = 0;
    for (Index i = 0; i < n; ++i) (t[i] < 0 ? s1 : s2) += x(i, j);
    const double m1 = s1 / double(t.n1()), m2 = s2 / double(t.n2());
    double ss = 0;
    for (Index i = 0; i < n; ++i) ss += std::pow(x(i, j) - (t[i] < 0 ? m1 : m2), 2);
    const double tv = (m2 - m1) / std::sqrt(ss / nu * (1.0 / double(t.n1()) + 1.0 / double(t.n2())));
    CHECK(r.t[j] == doctest::Approx(tv).epsilon(1e-10));
    const double p = boost::math::ibeta(nu / 2.0, 0.5, nu / (nu + tv * tv));
    CHECK(r.pvalues[j] == doctest::Approx(p).epsilon(1e-9));
  }
  // The order sorts p-values ascending.
  for (std::size_t k = 1; k < r.order.size(); ++k) CHECK(r.pvalues[r.order[k - 1]] <= r.pvalues[r.order[k]]);
}

TEST_CASE("marginal p-value examples") {
  const Index n = 12;
  const LabelVector t = crc::test::alternating_labels(n);
  RowMatrix x = random_matrix(n, 8, 2);
  x.col(2).setConstant(3.0);
  x.col(5) = t.values();
  const ScreeningResult r = marginal_pvalues(x, t);
  CHECK(r.pvalues[2] == 1.0);
  CHECK(r.order.front() == 5);
  CHECK(r.pvalues[5] == r.pvalues.minCoeff());
  for (Index j = 0; j < 8; ++j) {
    CHECK(r.pvalues[j] >= 0.0);
    CHECK(r.pvalues[j] <= 1.0);
  }
}

TEST_CASE("marginal p-values are uniform under the null") {
  const Index n = 100, p = 2000;
  const RowMatrix x = random_matrix(n, p, 3);
  const ScreeningResult r = marginal_pvalues(x, crc::test::alternating_labels(n, 8));
  std::vector<double> pv(r.pvalues.data(), r.pvalues.data() + p);
  std::sort(pv.begin(), pv.end());
  double ks = 0.0;
  for (std::size_t k = 0; k < pv.size(); ++k) {
    const double lo = double(k) / double(p), hi = double(k + 1) / double(p);
    ks = std::max({ks, std::abs(pv[k] - lo), std::abs(hi - pv[k])});
  }
  CHECK(ks < 0.05);
}

TEST_CASE("screening order is deterministic with ties") {
  const Index n = 8;
  const LabelVector t = crc::test::alternating_labels(n);
  RowMatrix x = random_matrix(n, 6, 4);
  x.col(1) = t.values();
  x.col(4) = t.values();
  x.col(3) = -t.values();
  const ScreeningResult a = marginal_pvalues(x, t);
  const ScreeningResult b = marginal_pvalues(x, t);
  CHECK(a.order == b.order);
  CHECK(a.order[0] == 1);
  CHECK(a.order[1] == 3);
  CHECK(a.order[2] == 4);
}

TEST_CASE("DLDA hand computations") {
  SUBCASE("single feature") {
    RowMatrix x(6, 1);
    x << -2, 0, -1, 1, 0, 2;
    const LabelVector t(std::vector<int>{-1, 1, -1, 1, -1, 1});
    const std::vector<Index> f{0};
    const DldaModel m = fit_dlda(x, t, f);
    CHECK(m.mean_diff[0] == doctest::Approx(2.0));
    CHECK(m.pooled_var[0] == doctest::Approx(1.0));
    CHECK(m.weights[0] == doctest::Approx(2.0));
    CHECK(m.midpoint_offset == doctest::Approx(0.0));
  }
  SUBCASE("identical features get identical weights") {
    RowMatrix x = random_matrix(10, 3, 5);
    x.col(2) = x.col(0);
    const LabelVector t = crc::test::alternating_labels(10);
    const std::vector<Index> f{0, 1, 2};
    const DldaModel m = fit_dlda(x, t, f);
    CHECK(m.weights[0] == m.weights[2]);
  }
  SUBCASE("constant feature hits the variance floor") {
    RowMatrix x = random_matrix(10, 2, 6);
    x.col(1).setConstant(4.0);
    const LabelVector t = crc::test::alternating_labels(10);
    const std::vector<Index> f{1};
    const DldaModel m = fit_dlda(x, t, f);
    CHECK(m.floored == 1);
    CHECK(std::isfinite(m.weights[0]));
    CHECK(m.weights[0] == 0.0);
  }
}

TEST_CASE("DLDA scores match a diagonal Gaussian log-likelihood ratio") {
  const Index n = 10, p = 6;
  const RowMatrix x = random_matrix(n, p, 7);
  const LabelVector t = crc::test::alternating_labels(n, 2);
  const std::vector<Index> f{0, 1, 2, 3, 4, 5};
  const DldaModel m = fit_dlda(x, t, f);
  VectorXd mu1 = VectorXd::Zero(p), mu2 = VectorXd::Zero(p), var = VectorXd::Zero(p);
  for (Index i = 0; i < n; ++i) (t[i] < 0 ? mu1 : mu2) += x.row(i).transpose();
  mu1 /= double(t.n1());
  mu2 /= double(t.n2());
  for (Index i = 0; i < n; ++i) var += (x.row(i).transpose() - (t[i] < 0 ? mu1 : mu2)).array().square().matrix();
  var /= double(n - 2);
  auto log_density = [&](const RowVectorXd& z, const VectorXd& mu) {
    double s = 0.0;
    for (Index j = 0; j < p; ++j)
      s += -0.5 * std::log(2 * M_PI * var[j]) - 0.5 * std::pow(z[j] - mu[j], 2) / var[j];
    return s;
  };
  for (int k = 0; k < 5; ++k) {
    const RowVectorXd z = random_matrix(1, p, 50 + std::uint64_t(k)).row(0);
    const double llr = log_density(z, mu2) - log_density(z, mu1);
    CHECK(m.score(z) - m.midpoint_offset == doctest::Approx(llr).epsilon(1e-8));
  }
  const RowVectorXd dense = m.dense_weights(p);
  CHECK((dense.transpose() - m.weights).norm() < 1e-15);
}

TEST_CASE("DLDA weights are scale equivariant per feature") {
  const Index n = 12;
  RowMatrix x = random_matrix(n, 4, 8);
  const LabelVector t = crc::test::alternating_labels(n, 1);
  const std::vector<Index> f{0, 1, 2, 3};
  const DldaModel a = fit_dlda(x, t, f);
  x.col(2) *= 7.0;
  const DldaModel b = fit_dlda(x, t, f);
  CHECK(b.weights[2] == doctest::Approx(a.weights[2] / 7.0));
  const RowVectorXd z = random_matrix(1, 4, 9).row(0);
  RowVectorXd z7 = z;
  z7[2] *= 7.0;
  CHECK(b.score(z7) == doctest::Approx(a.score(z)));
}

TEST_CASE("screening grid") {
  CHECK(screening_grid(100) == std::vector<Index>{1, 2, 3, 4, 6, 8, 11, 16, 23, 32, 45, 64, 91, 100});
  CHECK(screening_grid(1) == std::vector<Index>{1});
  CHECK(screening_grid(4) == std::vector<Index>{1, 2, 3, 4});
  const auto g = screening_grid(20000);
  CHECK(g.back() == 20000);
  for (std::size_t k = 1; k < g.size(); ++k) CHECK(g[k] > g[k - 1]);
  CHECK_THROWS_AS(screening_grid(0), Error);
}

TEST_CASE("estimated error properties") {
  const Index n = 40;
  const LabelVector t = crc::test::alternating_labels(n);
  const MatrixXd base = random_matrix(n, 2, 10);
  MatrixXd same = base;
  // Class means coincide exactly.
  for (Index i = 0; i < n; i += 2) same.row(i + 1) = same.row(i);
  CHECK(estimated_error(same, t) == doctest::Approx(0.5));

  double previous = 0.5;
  for (double shift : {0.2, 0.5, 1.0, 2.0, 4.0}) {
    MatrixXd pts = base;
    for (Index i = 0; i < n; ++i) pts(i, 0) += shift * t[i];
    const double e = estimated_error(pts, t);
    CHECK(e < previous);
    CHECK(e >= 0.0);
    previous = e;
  }
  // Known value: one dimension, unit pooled variance, distance 2.
  MatrixXd one(4, 1);
  const double a = std::sqrt(0.5);
  one << -1.0 - a, 1.0 - a, -1.0 + a, 1.0 + a;
  const LabelVector t4(std::vector<int>{-1, 1, -1, 1});
  CHECK(estimated_error(one, t4) == doctest::Approx(0.5 * std::erfc(2.0 / std::sqrt(2.0))).epsilon(1e-9));
}

namespace {

struct CrcsFixture {
  Index n, p;
  LabelVector t;
  DataMatrix dm;
  GramState g;
  ResidualizedMatrix r;
  VectorXd crcl;

  CrcsFixture(Index n_, Index p_, std::uint64_t seed) : n(n_), p(p_), t(crc::test::alternating_labels(n_, seed)) {
    RowMatrix raw = random_matrix(n, p, seed);
    crc::test::add_signal(raw, t, 4, 0.8);
    dm = center_columns(raw);
    g = build_gram(dm);
    r = cross_residualize(g, dm, t);
    crcl = loo_scores_crcl(g, dm, t);
  }
};

}  // namespace

TEST_CASE("serial and parallel leave-one-out screening agree") {
  const CrcsFixture f(27, 140, 11);
  const auto grid = screening_grid(f.p);
  for (bool project : {false, true}) {
    kernels::LooScreeningProblem pr;
    pr.features = &f.r.s_hat;
    pr.labels = &f.t;
    pr.grid = grid;
    if (project) {
      pr.projection_source = &f.g.effective_inverse;
      pr.projection_basis = &f.dm.values();
    }
    const auto a = kernels::loo_screened_scores_serial(pr);
    const auto b = kernels::loo_screened_scores_parallel(pr);
    CHECK(crc::test::rel_frobenius(b.scores, a.scores) < 1e-9);
    CHECK(crc::test::rel_frobenius(b.offsets, a.offsets) < 1e-9);
  }
}

TEST_CASE("leave-one-out CRC-S without projection equals DLDA refit on each fold") {
  const CrcsFixture f(16, 60, 12);
  for (Index nf : {1, 5, 60}) {
    const VectorXd loo = loo_scores_crcs(f.r, f.t, nf, f.g, f.dm, false);
    for (Index i = 0; i < f.n; ++i) {
      const auto keep = crc::test::all_but(f.n, i);
      const DldaModel m = fit_dlda_top(select_rows(f.r.s_hat, keep), f.t.subset(keep), nf);
      const double expected = m.score(f.r.s_hat.row(i));
      CHECK(loo[i] == doctest::Approx(expected).epsilon(1e-8).scale(std::abs(expected) + 1e-12));
    }
  }
}

TEST_CASE("leave-one-out CRC-S projection removes q_i from the fold class means") {
  const CrcsFixture f(14, 50, 13);
  const RowMatrix q = f.g.effective_inverse * f.dm.values();
  // q_i is dual to the training rows: Z_k q_i' = delta_ki.
  const MatrixXd dual = f.dm.values() * q.transpose();
  CHECK(crc::test::rel_frobenius(dual, f.g.effective_inverse * f.g.gram) < 1e-12);

  for (Index nf : {1, 7, 50}) {
    const VectorXd loo = loo_scores_crcs(f.r, f.t, nf, f.g, f.dm, true);
    for (Index i = 0; i < f.n; ++i) {
      const auto keep = crc::test::all_but(f.n, i);
      const RowMatrix s = select_rows(f.r.s_hat, keep);
      const LabelVector tf = f.t.subset(keep);
      RowVectorXd m1 = RowVectorXd::Zero(f.p), m2 = RowVectorXd::Zero(f.p);
      for (Index k = 0; k < s.rows(); ++k) (tf[k] < 0 ? m1 : m2) += s.row(k);
      m1 /= double(tf.n1());
      m2 /= double(tf.n2());
      const RowVectorXd qi = q.row(i);
      m1 -= (m1.dot(qi) / qi.squaredNorm()) * qi;
      m2 -= (m2.dot(qi) / qi.squaredNorm()) * qi;
      // The pooled variance still uses the unprojected fold means.
      RowVectorXd var = RowVectorXd::Zero(f.p);
      RowVectorXd u1 = RowVectorXd::Zero(f.p), u2 = RowVectorXd::Zero(f.p);
      for (Index k = 0; k < s.rows(); ++k) (tf[k] < 0 ? u1 : u2) += s.row(k);
      u1 /= double(tf.n1());
      u2 /= double(tf.n2());
      for (Index k = 0; k < s.rows(); ++k) var += (s.row(k) - (tf[k] < 0 ? u1 : u2)).array().square().matrix();
      var /= double(s.rows() - 2);
      const RowVectorXd d = m2 - m1;
      const RowVectorXd abs_t = d.cwiseAbs().cwiseQuotient(var.cwiseSqrt());
      const auto order = kernels::rank_by_abs_t(abs_t);
      double expected = 0.0;
      for (Index k = 0; k < nf; ++k) {
        const Index j = order[std::size_t(k)];
        expected += d[j] / var[j] * f.r.s_hat(i, j);
      }
      CHECK(loo[i] == doctest::Approx(expected).epsilon(1e-8).scale(std::abs(expected) + 1e-12));
    }
  }
}

TEST_CASE("leave-one-out CRC-S is permutation equivariant") {
  const Index n = 13, p = 40;
  RowMatrix raw = random_matrix(n, p, 14);
  const LabelVector t = crc::test::alternating_labels(n, 2);
  crc::test::add_signal(raw, t, 3, 0.9);
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 gen(3);
  std::shuffle(perm.begin(), perm.end(), gen);
  auto scores = [&](const RowMatrix& z, const LabelVector& lab) {
    const DataMatrix dm = center_columns(z);
    const GramState g = build_gram(dm);
    return loo_scores_crcs(cross_residualize(g, dm, lab), lab, 6, g, dm, true);
  };
  const VectorXd a = scores(raw, t);
  const VectorXd b = scores(select_rows(raw, perm), t.subset(perm));
  for (Index k = 0; k < n; ++k) CHECK(b[k] == doctest::Approx(a[perm[std::size_t(k)]]).epsilon(1e-8));
}

TEST_CASE("grid search picks the smallest minimiser and ignores global scale") {
  const CrcsFixture f(30, 120, 15);
  CrcsContext ctx;
  ctx.residualized = &f.r;
  ctx.labels = &f.t;
  ctx.gram = &f.g;
  ctx.data = &f.dm;
  ctx.crcl_scores = &f.crcl;
  const CrcsSelection s = select_N(ctx);
  REQUIRE(s.trace.grid.size() == s.trace.estimated_errors.size());
  const auto best = std::min_element(s.trace.estimated_errors.begin(), s.trace.estimated_errors.end());
  CHECK(s.trace.chosen_N == s.trace.grid[std::size_t(best - s.trace.estimated_errors.begin())]);
  for (double e : s.trace.estimated_errors) {
    CHECK(e >= 0.0);
    CHECK(e <= 0.5 + 1e-12);
  }
  const auto chosen_col = std::size_t(best - s.trace.estimated_errors.begin());
  CHECK((s.chosen_scores - s.loo_scores.col(Index(chosen_col))).norm() == 0.0);

  ResidualizedMatrix scaled = f.r;
  scaled.s_hat *= 1e3;
  CrcsContext ctx2 = ctx;
  ctx2.residualized = &scaled;
  CHECK(select_N(ctx2).trace.chosen_N == s.trace.chosen_N);

  CrcsContext serial = ctx;
  serial.parallel = false;
  CHECK(select_N(serial).trace.chosen_N == s.trace.chosen_N);

  CrcsContext custom = ctx;
  custom.grid = {2, 5, 9};
  CHECK(select_N(custom).trace.grid == std::vector<Index>{2, 5, 9});
}

TEST_CASE("grid search input validation") {
  CrcsContext empty;
  CHECK_THROWS_AS(select_N(empty), Error);
  const CrcsFixture f(12, 30, 16);
  kernels::LooScreeningProblem pr;
  pr.features = &f.r.s_hat;
  pr.labels = &f.t;
  const std::vector<Index> bad{3, 2};
  pr.grid = bad;
  try {
    kernels::loo_screened_scores_parallel(pr);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigError);
  }
}
