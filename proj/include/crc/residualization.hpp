#pragma once

#include "crc/gram.hpp"
#include "crc/types.hpp"

namespace crc {

/// gamma_hat = [T' G^-1 T]^-1 T' G^-1 Z, G the augmented Gram.
struct GammaEstimate {
  RowVectorXd gamma_hat;
};

GammaEstimate estimate_gamma(const GramState& g, const DataMatrix& dm, const LabelVector& t);

/// Removes the predicted latent contribution from a centered observation:
///   z - z Z' G^-1 (Z - T gamma_hat).
/// This is z minus the all-components principal-components-regression
/// prediction of the latent term.
RowVectorXd residualize(const GramState& g, const DataMatrix& dm, const LabelVector& t,
                        const GammaEstimate& gamma, const Eigen::Ref<const RowVectorXd>& z);

/// Leave-one-out residualized training matrix.
///
/// Row i is residualize applied to Z_i with the training set reduced to the
/// other rows (augmented Gram submatrix, lambda fixed at the full-data value).
/// Because each row is a linear combination of training rows,
/// s_hat = coefficients * Z, which is how it is computed.
struct ResidualizedMatrix {
  RowMatrix s_hat;        // n x p
  MatrixXd coefficients;  // n x n, s_hat = coefficients * Z
  MatrixXd gamma_weights; // column i: embedded weights with gamma^(i) = weights' Z

  Index rows() const noexcept { return s_hat.rows(); }
  Index cols() const noexcept { return s_hat.cols(); }

  /// gamma_hat^(i) for fold i.
  GammaEstimate per_row_gamma(Index i, const DataMatrix& dm) const;
};

ResidualizedMatrix cross_residualize(const GramState& g, const DataMatrix& dm,
                                     const LabelVector& t);

}  // namespace crc
