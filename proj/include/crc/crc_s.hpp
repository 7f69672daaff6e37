#pragma once

#include "crc/gram.hpp"
#include "crc/residualization.hpp"
#include "crc/types.hpp"

#include <span>
#include <vector>

namespace crc {

/// Two-sample equal-variance t-test for every column.
struct ScreeningResult {
  RowVectorXd t;             // (mean2 - mean1) / se, floored variance
  RowVectorXd pvalues;       // two-sided, n - 2 degrees of freedom
  std::vector<Index> order;  // most significant first, ties by column index
};

ScreeningResult marginal_pvalues(const RowMatrix& x, const LabelVector& t);

/// Diagonal LDA on a subset of columns. Scores carry no intercept.
struct DldaModel {
  std::vector<Index> features;
  VectorXd mean_diff;   // mean2 - mean1
  VectorXd pooled_var;  // floored
  VectorXd weights;     // mean_diff / pooled_var
  // sum_j weights_j * (mean1_j + mean2_j) / 2, the midpoint of the two class
  // means in score space. Only the standalone baseline uses it.
  double midpoint_offset = 0.0;
  Index floored = 0;    // features whose variance hit the floor

  Index size() const noexcept { return static_cast<Index>(features.size()); }
  double score(const Eigen::Ref<const RowVectorXd>& x) const;
  /// Dense p-vector with the weights scattered into their columns.
  RowVectorXd dense_weights(Index p) const;
};

DldaModel fit_dlda(const RowMatrix& x, const LabelVector& t, std::span<const Index> features);

/// fit_dlda on the top `n_features` columns of marginal_pvalues(x, t).
DldaModel fit_dlda_top(const RowMatrix& x, const LabelVector& t, Index n_features);

/// Candidate feature counts round(2^e) for e = 0, 0.5, ..., floor(sqrt(p)),
/// deduplicated and capped at p.
std::vector<Index> screening_grid(Index p);

/// 1 - Phi(sqrt(d' S^-1 d)) for the two-class Gaussian fit of the rows of
/// `points` (means per class, pooled covariance with n - 2 denominator).
double estimated_error(const MatrixXd& points, const LabelVector& t);

struct GridSearchTrace {
  std::vector<Index> grid;
  std::vector<double> estimated_errors;
  Index chosen_N = 0;
};

/// Everything select_N needs from the CRC fit.
struct CrcsContext {
  const ResidualizedMatrix* residualized = nullptr;
  const LabelVector* labels = nullptr;
  const GramState* gram = nullptr;
  const DataMatrix* data = nullptr;
  const VectorXd* crcl_scores = nullptr;  // leave-one-out CRC-L scores
  std::vector<Index> grid;                // empty: screening_grid(p)
  bool project = true;                    // leave-one-out projection correction
  bool parallel = true;                   // false runs the serial kernel
};

struct CrcsSelection {
  GridSearchTrace trace;
  MatrixXd loo_scores;  // n x grid.size()
  VectorXd chosen_scores;
};

/// Scores every candidate N with leave-one-out CRC-S scores paired with the
/// CRC-L scores and keeps the N with the smallest estimated error. Ties go to
/// the smaller N.
CrcsSelection select_N(const CrcsContext& context);

/// Leave-one-out CRC-S scores for one feature count. With `project`, each
/// fold's class means are projected off row i of G^-1 Z over all features
/// before screening, which cancels the share of Z_i that cross-residualization
/// leaves in the other rows.
VectorXd loo_scores_crcs(const ResidualizedMatrix& s_hat, const LabelVector& t, Index n_features,
                         const GramState& g, const DataMatrix& dm, bool project = true);

}  // namespace crc
