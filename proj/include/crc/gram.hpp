#pragma once

#include "crc/types.hpp"

#include <optional>

namespace crc {

/// Relative cutoff below which a Gram eigenvalue counts as rank deficient.
inline constexpr double kRankDeficiencyThreshold = 1e-10;

/// Eigendecomposition of the n x n Gram matrix Z Z' with deficient eigenvalues
/// replaced by lambda (the median of the raw spectrum).
///
/// The "augmented Gram" is eigenvectors * diag(augmented) * eigenvectors'. It
/// agrees with the raw Gram except on the replaced directions. Immutable after
/// construction and safe to share between threads.
struct GramState {
  MatrixXd gram;               // raw Z Z'
  MatrixXd eigenvectors;       // columns, ordered like `eigenvalues`
  VectorXd eigenvalues;        // raw spectrum, nonincreasing, clamped at 0
  VectorXd augmented;          // spectrum after replacement
  double lambda = 0.0;
  Index replaced = 0;          // number of eigenvalues replaced by lambda
  MatrixXd effective_inverse;  // inverse of the augmented Gram

  Index n() const noexcept { return gram.rows(); }
  MatrixXd augmented_gram() const;
};

/// Builds the Gram state of `dm`. Works on centered and uncentered matrices.
/// Throws DegenerateGram when the Gram matrix is zero.
GramState build_gram(const DataMatrix& dm);

/// Gram state of an explicit symmetric matrix. Used by build_gram and by
/// callers that already hold Z Z'.
GramState gram_from_matrix(MatrixXd gram);

/// Nonincreasing eigenvalues of Z Z' without any augmentation.
VectorXd gram_spectrum(const RowMatrix& values);

/// Inverse of the augmented Gram with row and column i removed, exposed
/// through products with (n-1)-vectors.
///
/// Vectors come in two layouts. "Compact" vectors have n-1 entries ordered
/// like the rows that remain. "Embedded" vectors have n entries with slot i
/// ignored on input and zero on output.
class DowndatedGram {
 public:
  Index removed() const noexcept { return removed_; }
  Index size() const noexcept { return n_ - 1; }
  bool rebuilt() const noexcept { return direct_.has_value(); }

  VectorXd solve(const Eigen::Ref<const VectorXd>& compact) const;
  VectorXd solve_embedded(const Eigen::Ref<const VectorXd>& embedded) const;
  MatrixXd inverse() const;

 private:
  friend DowndatedGram downdate_gram(const GramState& g, const DataMatrix& dm, Index i);
  friend DowndatedGram rebuild_downdated(const GramState& g, Index i);

  const MatrixXd* inverse_ = nullptr;
  Index removed_ = 0;
  Index n_ = 0;
  double pivot_ = 0.0;
  std::optional<Eigen::LDLT<MatrixXd>> direct_;
};

/// Rank-one downdate of g.effective_inverse that removes observation i.
/// Lambda stays at the full-data value. Throws DowndateSingular when the
/// pivot is not safely positive.
DowndatedGram downdate_gram(const GramState& g, const DataMatrix& dm, Index i);

/// Direct factorization of the augmented Gram with row/column i removed.
DowndatedGram rebuild_downdated(const GramState& g, Index i);

/// downdate_gram, falling back to rebuild_downdated on DowndateSingular.
DowndatedGram downdate_or_rebuild(const GramState& g, const DataMatrix& dm, Index i);

/// Leave-one-out solves for every fold at once.
///
/// Column i of the result is the embedded solution of
/// (augmented Gram without i) x = rhs.col(i) without entry i.
/// Costs one n x n x n product plus O(n^2).
MatrixXd downdated_solves_by_column(const GramState& g, const MatrixXd& rhs);

/// Same as downdated_solves_by_column with one shared right-hand side.
MatrixXd downdated_solves_shared(const GramState& g, const VectorXd& rhs);

}  // namespace crc
