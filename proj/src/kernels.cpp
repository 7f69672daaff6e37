#include "crc/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <string>

namespace crc::kernels {

namespace {

int initial_threads() {
  if (const char* env = std::getenv("CRC_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v >= 1) return std::min(v, omp_get_max_threads());
    } catch (...) {
    }
  }
  return omp_get_max_threads();
}

std::atomic<int>& thread_cap() {
  static std::atomic<int> cap{[] {
    const int t = initial_threads();
    Eigen::setNbThreads(t);
    return t;
  }()};
  return cap;
}

constexpr Index kColumnBlock = 512;
constexpr Index kFoldBlock = 32;

}  // namespace

int max_threads() { return thread_cap().load(); }

void set_max_threads(int threads) {
  const int t = std::max(1, threads);
  thread_cap().store(t);
  Eigen::setNbThreads(t);
}

// ---- Gram -----------------------------------------------------------------

MatrixXd gram_serial(const RowMatrix& z) {
  const Index n = z.rows();
  const Index p = z.cols();
  MatrixXd g(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j <= i; ++j) {
      double s = 0.0;
      for (Index k = 0; k < p; ++k) s += z(i, k) * z(j, k);
      g(i, j) = s;
      g(j, i) = s;
    }
  }
  return g;
}

MatrixXd gram_parallel(const RowMatrix& z) {
  max_threads();  // applies the thread cap to Eigen
  const Index n = z.rows();
  MatrixXd g = MatrixXd::Zero(n, n);
  g.selfadjointView<Eigen::Lower>().rankUpdate(z);
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g;
}

// ---- Class column statistics ----------------------------------------------

namespace {

void accumulate_stats(const RowMatrix& x, const LabelVector& t, Index c0, Index c1,
                      ClassColumnStats& s) {
  const Index n = x.rows();
  for (Index i = 0; i < n; ++i) {
    auto& mean = t[i] < 0 ? s.mean1 : s.mean2;
    for (Index j = c0; j < c1; ++j) mean[j] += x(i, j);
  }
  for (Index j = c0; j < c1; ++j) {
    s.mean1[j] /= static_cast<double>(s.n1);
    s.mean2[j] /= static_cast<double>(s.n2);
  }
  for (Index i = 0; i < n; ++i) {
    const bool second = t[i] > 0;
    const auto& mean = second ? s.mean2 : s.mean1;
    auto& ss = second ? s.ss2 : s.ss1;
    for (Index j = c0; j < c1; ++j) {
      const double d = x(i, j) - mean[j];
      ss[j] += d * d;
    }
  }
}

ClassColumnStats empty_stats(Index p, const LabelVector& t) {
  ClassColumnStats s;
  s.mean1 = RowVectorXd::Zero(p);
  s.mean2 = RowVectorXd::Zero(p);
  s.ss1 = RowVectorXd::Zero(p);
  s.ss2 = RowVectorXd::Zero(p);
  s.n1 = t.n1();
  s.n2 = t.n2();
  return s;
}

}  // namespace

ClassColumnStats class_column_stats_serial(const RowMatrix& x, const LabelVector& t) {
  if (x.rows() != t.size()) fail(ErrorKind::ShapeError, "labels do not match matrix rows");
  ClassColumnStats s = empty_stats(x.cols(), t);
  accumulate_stats(x, t, 0, x.cols(), s);
  return s;
}

ClassColumnStats class_column_stats_parallel(const RowMatrix& x, const LabelVector& t) {
  if (x.rows() != t.size()) fail(ErrorKind::ShapeError, "labels do not match matrix rows");
  const Index p = x.cols();
  ClassColumnStats s = empty_stats(p, t);
  const Index blocks = (p + kColumnBlock - 1) / kColumnBlock;
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (Index b = 0; b < blocks; ++b) {
    accumulate_stats(x, t, b * kColumnBlock, std::min(p, (b + 1) * kColumnBlock), s);
  }
  return s;
}

RowVectorXd variance_floor(const RowMatrix& x) {
  RowVectorXd f = 1e-12 * x.colwise().squaredNorm() / static_cast<double>(x.rows());
  return f.cwiseMax(std::numeric_limits<double>::min());
}

std::vector<Index> rank_by_abs_t(const RowVectorXd& abs_t) {
  std::vector<Index> order(static_cast<std::size_t>(abs_t.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return abs_t[a] > abs_t[b] || (abs_t[a] == abs_t[b] && a < b);
  });
  return order;
}

// ---- Leave-one-out screened DLDA ------------------------------------------

namespace {

struct FoldStats {
  RowVectorXd mean_diff;  // mean2 - mean1
  RowVectorXd midpoint;   // (mean1 + mean2) / 2
  RowVectorXd var;        // floored pooled variance
  RowVectorXd abs_t;
};

// With q given, the fold class means are first projected onto the
// orthogonal complement of q (all p coordinates), then screened.
void finish_fold_stats(const RowVectorXd& m1, const RowVectorXd& m2, const RowVectorXd& ss1,
                       const RowVectorXd& ss2, Index k1, Index k2, const RowVectorXd& floor,
                       const double* q, FoldStats& f) {
  const double dof = static_cast<double>(k1 + k2 - 2);
  const double scale = 1.0 / static_cast<double>(k1) + 1.0 / static_cast<double>(k2);
  f.mean_diff = m2 - m1;
  f.midpoint = 0.5 * (m1 + m2);
  if (q != nullptr) {
    const Eigen::Map<const RowVectorXd> qv(q, m1.size());
    const double qq = qv.squaredNorm();
    if (qq > 0.0) {
      f.mean_diff -= (f.mean_diff.dot(qv) / qq) * qv;
      f.midpoint -= (f.midpoint.dot(qv) / qq) * qv;
    }
  }
  f.var = ((ss1 + ss2) / dof).cwiseMax(floor);
  f.abs_t = f.mean_diff.cwiseAbs().cwiseQuotient((f.var * scale).cwiseSqrt());
}

// Scores held-out row `x` for every grid size; writes row `i` of `out`.
void score_fold(const FoldStats& f, const Eigen::Ref<const RowVectorXd>& x,
                std::span<const Index> grid, Index i, LooScreeningScores& out) {
  const Index p = x.size();
  const Index n_max = grid.back();

  std::vector<Index> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), Index{0});
  auto by_t = [&](Index a, Index b) {
    return f.abs_t[a] > f.abs_t[b] || (f.abs_t[a] == f.abs_t[b] && a < b);
  };
  if (n_max < p) {
    std::partial_sort(order.begin(), order.begin() + n_max, order.end(), by_t);
  } else {
    std::sort(order.begin(), order.end(), by_t);
  }

  double dx = 0.0, dm = 0.0;
  std::size_t g = 0;
  for (Index k = 0; k < n_max && g < grid.size(); ++k) {
    const Index j = order[static_cast<std::size_t>(k)];
    const double w = f.mean_diff[j] / f.var[j];
    dx += w * x[j];
    dm += w * f.midpoint[j];
    while (g < grid.size() && grid[g] == k + 1) {
      out.scores(i, static_cast<Index>(g)) = dx;
      out.offsets(i, static_cast<Index>(g)) = dm;
      ++g;
    }
  }
}

void validate(const LooScreeningProblem& pr) {
  if (pr.features == nullptr || pr.labels == nullptr) {
    fail(ErrorKind::ShapeError, "screening problem is missing inputs");
  }
  const Index n = pr.features->rows();
  const Index p = pr.features->cols();
  if (pr.labels->size() != n) fail(ErrorKind::ShapeError, "labels do not match matrix rows");
  if (pr.grid.empty()) fail(ErrorKind::ConfigError, "empty feature-count grid");
  for (std::size_t k = 0; k < pr.grid.size(); ++k) {
    if (pr.grid[k] < 1 || pr.grid[k] > p || (k > 0 && pr.grid[k] <= pr.grid[k - 1])) {
      fail(ErrorKind::ConfigError, "feature-count grid must be strictly increasing within [1, p]");
    }
  }
  if ((pr.projection_source == nullptr) != (pr.projection_basis == nullptr)) {
    fail(ErrorKind::ShapeError, "projection needs both a source and a basis");
  }
  if (pr.projection_source != nullptr &&
      (pr.projection_source->rows() != n || pr.projection_source->cols() != n ||
       pr.projection_basis->rows() != n || pr.projection_basis->cols() != p)) {
    fail(ErrorKind::ShapeError, "projection operands have the wrong shape");
  }
  if (pr.labels->n1() < 2 || pr.labels->n2() < 2) {
    fail(ErrorKind::FoldClassEmpty, "a leave-one-out fold would leave a class empty");
  }
}

LooScreeningScores allocate(const LooScreeningProblem& pr) {
  const Index n = pr.features->rows();
  const Index g = static_cast<Index>(pr.grid.size());
  return {MatrixXd::Zero(n, g), MatrixXd::Zero(n, g)};
}

}  // namespace

LooScreeningScores loo_screened_scores_serial(const LooScreeningProblem& pr) {
  validate(pr);
  const RowMatrix& x = *pr.features;
  const LabelVector& t = *pr.labels;
  const Index n = x.rows();
  const Index p = x.cols();
  const RowVectorXd floor = variance_floor(x);
  LooScreeningScores out = allocate(pr);

  for (Index i = 0; i < n; ++i) {
    RowVectorXd m1 = RowVectorXd::Zero(p), m2 = RowVectorXd::Zero(p);
    Index k1 = 0, k2 = 0;
    for (Index r = 0; r < n; ++r) {
      if (r == i) continue;
      if (t[r] < 0) {
        m1 += x.row(r);
        ++k1;
      } else {
        m2 += x.row(r);
        ++k2;
      }
    }
    m1 /= static_cast<double>(k1);
    m2 /= static_cast<double>(k2);
    RowVectorXd ss1 = RowVectorXd::Zero(p), ss2 = RowVectorXd::Zero(p);
    for (Index r = 0; r < n; ++r) {
      if (r == i) continue;
      if (t[r] < 0) {
        ss1 += (x.row(r) - m1).array().square().matrix();
      } else {
        ss2 += (x.row(r) - m2).array().square().matrix();
      }
    }
    RowVectorXd q;
    if (pr.projection_source != nullptr) {
      q = pr.projection_source->row(i) * (*pr.projection_basis);
    }
    FoldStats f;
    finish_fold_stats(m1, m2, ss1, ss2, k1, k2, floor, q.size() > 0 ? q.data() : nullptr, f);
    score_fold(f, x.row(i), pr.grid, i, out);
  }
  return out;
}

LooScreeningScores loo_screened_scores_parallel(const LooScreeningProblem& pr) {
  validate(pr);
  const RowMatrix& x = *pr.features;
  const LabelVector& t = *pr.labels;
  const Index n = x.rows();
  const RowVectorXd floor = variance_floor(x);
  const ClassColumnStats full = class_column_stats_parallel(x, t);
  LooScreeningScores out = allocate(pr);
  const bool project = pr.projection_source != nullptr;

  for (Index i0 = 0; i0 < n; i0 += kFoldBlock) {
    const Index b = std::min(kFoldBlock, n - i0);
    RowMatrix q_block;
    if (project) q_block = pr.projection_source->middleRows(i0, b) * (*pr.projection_basis);

#pragma omp parallel for schedule(dynamic, 1) num_threads(max_threads())
    for (Index bi = 0; bi < b; ++bi) {
      const Index i = i0 + bi;
      const auto xi = x.row(i);
      RowVectorXd m1 = full.mean1, m2 = full.mean2, ss1 = full.ss1, ss2 = full.ss2;
      Index k1 = full.n1, k2 = full.n2;
      // Remove row i from its class (reverse Welford step).
      const bool second = t[i] > 0;
      RowVectorXd& m = second ? m2 : m1;
      RowVectorXd& ss = second ? ss2 : ss1;
      Index& k = second ? k2 : k1;
      const RowVectorXd dev_old = xi - m;
      m -= dev_old / static_cast<double>(k - 1);
      ss -= dev_old.cwiseProduct(xi - m);
      ss = ss.cwiseMax(0.0);
      --k;

      FoldStats f;
      finish_fold_stats(m1, m2, ss1, ss2, k1, k2, floor, project ? q_block.row(bi).data() : nullptr, f);
      score_fold(f, xi, pr.grid, i, out);
    }
  }
  return out;
}

}  // namespace crc::kernels
