#pragma once

// Data-parallel kernels behind the estimators. Each kernel has a plain serial
// reference next to the OpenMP version; tests hold the two against each other
// and bench/ times them.

#include "crc/types.hpp"

#include <span>

namespace crc::kernels {

/// Worker count used by the parallel kernels. Starts at the CRC_THREADS
/// environment variable when set, otherwise the OpenMP default.
int max_threads();
void set_max_threads(int threads);

// ---- Gram matrix Z Z' -----------------------------------------------------

MatrixXd gram_serial(const RowMatrix& z);
MatrixXd gram_parallel(const RowMatrix& z);

// ---- Per-class column statistics ------------------------------------------

struct ClassColumnStats {
  RowVectorXd mean1, mean2;  // class T = -1, class T = +1
  RowVectorXd ss1, ss2;      // within-class sums of squared deviations
  Index n1 = 0, n2 = 0;
};

ClassColumnStats class_column_stats_serial(const RowMatrix& x, const LabelVector& t);
ClassColumnStats class_column_stats_parallel(const RowMatrix& x, const LabelVector& t);

// ---- Leave-one-out DLDA scores with per-fold screening --------------------

/// Inputs for scoring every training row with a DLDA classifier fit on the
/// other rows, for several feature counts at once.
///
/// Each fold ranks features by |t| on the remaining rows, keeps the top N for
/// every N in `grid`, and scores the held-out row with weights
/// mean_diff / pooled_var. With a projection, fold i first projects both
/// fold class means onto the orthogonal complement of q_i (row i of
/// G^-1 Z, all p coordinates) and screens on the projected difference.
struct LooScreeningProblem {
  const RowMatrix* features = nullptr;  // n x p
  const LabelVector* labels = nullptr;
  std::span<const Index> grid;          // strictly increasing, each in [1, p]
  // Row i of (augmented Gram)^{-1} * Z, produced on demand in blocks:
  // projection_source * projection_basis, where projection_source is n x n
  // and projection_basis is n x p. Both null disables the correction.
  const MatrixXd* projection_source = nullptr;
  const RowMatrix* projection_basis = nullptr;
};

struct LooScreeningScores {
  MatrixXd scores;   // n x grid.size(), no intercept
  MatrixXd offsets;  // n x grid.size(), sum_j w_j * (class-mean midpoint)_j
};

/// Reference: recomputes every fold's statistics from the remaining rows.
LooScreeningScores loo_screened_scores_serial(const LooScreeningProblem& problem);
/// Downdates the full-data statistics per fold; folds run in parallel.
LooScreeningScores loo_screened_scores_parallel(const LooScreeningProblem& problem);

/// Variance floor for each column: 1e-12 times the column's mean square,
/// never below the smallest normal double.
RowVectorXd variance_floor(const RowMatrix& x);

/// Features sorted by |t| descending, ties by column index.
std::vector<Index> rank_by_abs_t(const RowVectorXd& abs_t);

}  // namespace crc::kernels
