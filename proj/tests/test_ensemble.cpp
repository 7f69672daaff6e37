#include "crc/crc_l.hpp"
#include "crc/crc_s.hpp"
#include "crc/ensemble.hpp"
#include "crc/gram.hpp"
#include "crc/io.hpp"
#include "crc/residualization.hpp"
#include "crc/simulator.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cstring>

using namespace crc;
using crc::test::random_matrix;

namespace {

struct Fitted {
  sim::SimDataset data;
  FittedCRC model;
};

const Fitted& correlated_fit() {
  static const Fitted f = [] {
    sim::SimConfig c;
    c.model = sim::Model::Correlated;
    c.n = 40;
    c.p = 300;
    c.alpha_seed = 3;
    c.data_seed = 4;
    Fitted out;
    out.data = sim::generate(c, false);
    out.model = fit_crc(out.data.z, out.data.t);
    return out;
  }();
  return f;
}

RowMatrix probes(const FittedCRC& m, Index k, std::uint64_t seed) {
  RowMatrix z = random_matrix(k, m.p(), seed, 1.5);
  return z.rowwise() + m.train.mu_hat();
}

}  // namespace

TEST_CASE("fit_crc leave-one-out pairs match the component functions") {
  const Fitted& f = correlated_fit();
  const FittedCRC& m = f.model;
  const DataMatrix dm = center_columns(f.data.z);
  const GramState g = build_gram(dm);
  const VectorXd s_l = loo_scores_crcl(g, dm, f.data.t);
  const ResidualizedMatrix r = cross_residualize(g, dm, f.data.t);
  const VectorXd s_s = loo_scores_crcs(r, f.data.t, m.chosen_N(), g, dm, true);
  CHECK((m.loo_score_pairs.col(0) - s_l).norm() <= 1e-12 * s_l.norm());
  CHECK((m.loo_score_pairs.col(1) - s_s).norm() <= 1e-12 * s_s.norm());
  const MetaLda meta = fit_meta_lda(m.loo_score_pairs, f.data.t);
  CHECK(meta.b1 == m.meta.b1);
  CHECK(meta.b2 == m.meta.b2);
  CHECK(std::find(m.trace.grid.begin(), m.trace.grid.end(), m.chosen_N()) != m.trace.grid.end());
  CHECK(m.crcs.size() == m.chosen_N());
  CHECK(m.lambda == g.lambda);
}

TEST_CASE("meta LDA hand example") {
  // Classes separated along s_s only, identity-like pooled covariance.
  MatrixXd pairs(8, 2);
  pairs << 1, -2, -1, 2, 1, -1, -1, 1, -1, -3, 1, 3, 0, -2, 0, 2;
  const LabelVector t(std::vector<int>{-1, 1, -1, 1, -1, 1, -1, 1});
  const MetaLda meta = fit_meta_lda(pairs, t);
  CHECK(meta.prior1 == 0.5);
  CHECK(meta.b1 > 0.0);
  CHECK(std::abs(meta.b0) < 1e-12);
  // Direct LDA: pooled covariance with n - 2 denominator.
  Eigen::Vector2d m1(0.25, -2.0), m2(-0.25, 2.0);
  Eigen::Matrix2d s = Eigen::Matrix2d::Zero();
  for (Index i = 0; i < 8; ++i) {
    const Eigen::Vector2d r = pairs.row(i).transpose() - (t[i] < 0 ? m1 : m2);
    s += r * r.transpose();
  }
  s /= 6.0;
  const Eigen::Vector2d b = s.inverse() * (m2 - m1);
  CHECK(meta.b2 == doctest::Approx(b[0]));
  CHECK(meta.b1 == doctest::Approx(b[1]));
  CHECK(meta.combined(0.0, 0.0) == meta.b0);
}

TEST_CASE("score calibration is a one-dimensional LDA") {
  VectorXd s(6);
  s << -3, 1, -1, 3, -2, 2;
  const LabelVector t(std::vector<int>{-1, 1, -1, 1, -1, 1});
  const ScoreCalibration c = calibrate_score(s, t);
  // means -2, 2; pooled variance (2 + 2) / 4 = 1
  CHECK(c.slope == doctest::Approx(4.0));
  CHECK(c.intercept == doctest::Approx(0.0));
  CHECK(sign_label(c.apply(0.0)) == 1);
  CHECK(sign_label(-1e-300) == -1);
}

TEST_CASE("predicting the training mean gives zero scores") {
  const FittedCRC& m = correlated_fit().model;
  const Prediction p = predict(m, m.train.mu_hat());
  CHECK(p.s_l == 0.0);
  CHECK(p.s_s == 0.0);
  CHECK(p.combined == m.meta.b0);
  CHECK(p.label == sign_label(m.meta.b0));
}

TEST_CASE("batch prediction equals single predictions") {
  const FittedCRC& m = correlated_fit().model;
  const RowMatrix z = probes(m, 25, 11);
  const auto batch = predict_batch(m, z);
  for (Index i = 0; i < z.rows(); ++i) {
    const Prediction p = predict(m, z.row(i));
    const Prediction& b = batch[std::size_t(i)];
    CHECK(p.label == b.label);
    CHECK(p.s_l == doctest::Approx(b.s_l).epsilon(1e-12));
    CHECK(p.s_s == doctest::Approx(b.s_s).epsilon(1e-12));
    CHECK(p.crcs_label == b.crcs_label);
    CHECK(p.crcl_label == b.crcl_label);
  }
}

TEST_CASE("prediction path equals residualize plus component scores") {
  const FittedCRC& m = correlated_fit().model;
  const Fitted& f = correlated_fit();
  const GramState g = build_gram(m.train);
  const RowMatrix z = probes(m, 5, 12);
  for (Index i = 0; i < z.rows(); ++i) {
    const RowVectorXd zc = apply_centering(m.train, z.row(i));
    const RowVectorXd s = residualize(g, m.train, f.data.t, m.gamma, zc);
    const Prediction p = predict(m, z.row(i));
    CHECK(p.s_s == doctest::Approx(m.crcs.score(s)).epsilon(1e-9));
    CHECK(p.s_l == doctest::Approx(score_crcl(m.crcl, m.train, zc)).epsilon(1e-9));
    CHECK(p.combined == doctest::Approx(m.meta.b0 + m.meta.b1 * p.s_s + m.meta.b2 * p.s_l));
  }
}

TEST_CASE("linear weights agree in sign with predict on 1000 probes") {
  const FittedCRC& m = correlated_fit().model;
  const LinearWeights lw = extract_linear_weights(m);
  const RowMatrix z = probes(m, 1000, 13);
  const auto preds = predict_batch(m, z);
  int agree = 0;
  for (Index i = 0; i < z.rows(); ++i) {
    const double v = lw.b0 + (z.row(i) - m.train.mu_hat()).dot(lw.w);
    agree += sign_label(v) == preds[std::size_t(i)].label;
  }
  CHECK(agree == 1000);
}

TEST_CASE("linear weights with b1 = 0 lie in the CRC-L span") {
  FittedCRC m = correlated_fit().model;
  m.meta.b1 = 0.0;
  const LinearWeights lw = extract_linear_weights(m);
  const RowVectorXd expected = m.meta.b2 * (m.crcl.core.transpose() * m.train.values());
  CHECK((lw.w - expected).norm() <= 1e-12 * expected.norm());
}

TEST_CASE("negating the labels flips every prediction") {
  const Fitted& f = correlated_fit();
  const FittedCRC flipped = fit_crc(f.data.z, f.data.t.negated());
  CHECK(flipped.chosen_N() == f.model.chosen_N());
  const RowMatrix z = probes(f.model, 200, 14);
  const auto a = predict_batch(f.model, z);
  const auto b = predict_batch(flipped, z);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a[i].combined) < 1e-9) continue;
    CHECK(a[i].label == -b[i].label);
    CHECK(b[i].combined == doctest::Approx(-a[i].combined).epsilon(1e-8));
  }
}

TEST_CASE("fit_crc preconditions and stage tags") {
  const LabelVector small = crc::test::alternating_labels(6);
  try {
    fit_crc(random_matrix(6, 20, 1), small);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TooFewSamples);
  }
  RowMatrix bad = random_matrix(10, 20, 2);
  bad(3, 4) = std::numeric_limits<double>::infinity();
  try {
    fit_crc(bad, crc::test::alternating_labels(10));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidData);
    CHECK(e.stage() == "center");
  }
  try {
    fit_crc(RowMatrix::Constant(10, 20, 2.0), crc::test::alternating_labels(10));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateGram);
    CHECK(e.stage() == "gram");
  }
  try {
    fit_crc(random_matrix(10, 20, 3), crc::test::alternating_labels(12));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ShapeError);
  }
}

TEST_CASE("predict validates its input") {
  const FittedCRC& m = correlated_fit().model;
  try {
    predict(m, RowVectorXd::Zero(m.p() + 1));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ShapeError);
  }
  RowVectorXd z = m.train.mu_hat();
  z[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    predict(m, z);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFiniteInput);
  }
}

TEST_CASE("model serialization round trip") {
  FittedCRC m = correlated_fit().model;
  m.label_names = {"control", "case"};
  m.diagnostics.push_back("note");
  const auto bytes = serialize(m);
  CHECK(std::memcmp(bytes.data(), "CRC1", 4) == 0);
  const FittedCRC back = deserialize(bytes);
  CHECK(serialize(back) == bytes);
  CHECK(back.label_names[1] == "case");
  CHECK(back.diagnostics == m.diagnostics);
  CHECK(back.chosen_N() == m.chosen_N());
  CHECK(back.loo_score_pairs == m.loo_score_pairs);
  const RowMatrix z = probes(m, 20, 15);
  const auto a = predict_batch(m, z);
  const auto b = predict_batch(back, z);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].combined == b[i].combined);
    CHECK(a[i].s_l == b[i].s_l);
    CHECK(a[i].s_s == b[i].s_s);
  }

  crc::test::TempDir dir("model");
  save_model(m, dir / "m.crc");
  CHECK(serialize(load_model(dir / "m.crc")) == bytes);
}

TEST_CASE("model file corruption is detected") {
  const auto bytes = serialize(correlated_fit().model);
  auto expect_kind = [](const std::vector<std::uint8_t>& b, ErrorKind kind) {
    try {
      deserialize(b);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == kind);
    }
  };
  SUBCASE("truncated") {
    for (std::size_t keep : {std::size_t{0}, std::size_t{3}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
      expect_kind(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + std::ptrdiff_t(keep)),
                  ErrorKind::CorruptModel);
    }
  }
  SUBCASE("bad magic") {
    auto b = bytes;
    b[0] = 'X';
    expect_kind(b, ErrorKind::CorruptModel);
  }
  SUBCASE("unknown version") {
    auto b = bytes;
    b[4] = 2;
    expect_kind(b, ErrorKind::VersionMismatch);
  }
  SUBCASE("flipped payload byte") {
    auto b = bytes;
    b[b.size() / 3] ^= 0x40;
    expect_kind(b, ErrorKind::CorruptModel);
  }
  SUBCASE("missing file") {
    try {
      load_model("/nonexistent/dir/model.crc");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::IoError);
    }
  }
}

TEST_CASE("error kinds have names") {
  CHECK(std::string(to_string(ErrorKind::CrcLSingular)) == "CrcLSingular");
  const Error e(ErrorKind::IoError, "boom");
  const Error tagged = e.at_stage("gram");
  CHECK(tagged.stage() == "gram");
  CHECK(tagged.kind() == ErrorKind::IoError);
}
