#pragma once

#include "crc/gram.hpp"
#include "crc/types.hpp"

#include <string>
#include <vector>

namespace crc {

/// LDA on all n principal components of the training matrix, with the two
/// null directions of the within-class covariance raised to lambda.
///
/// The score of a centered target z is (z Z') * core, where
///   core = { (1/m) R_Y G + lambda G^-1 Y [Y' G^-1 Y]^-1 Y' }^-1 Y (Y'Y)^-1 d,
/// m the number of training rows, G the augmented Gram, Y the class
/// indicators and d = (-1, 1)'. The constant term of the LDA score is
/// dropped; the ensemble recalibrates it.
///
/// The bracket never needs to be inverted. Writing H = G^-1 Y, A = Y'H,
/// W = Y (Y'Y)^-1 d and r = W - H A^-1 d, its solution is
///   core = m G^-1 r + H A^-1 (d / lambda - m H' r),
/// which follows from Y' core = d / lambda and R_Y G core = m r.
struct CrcLModel {
  VectorXd core;  // n entries
  double lambda = 0.0;
  std::vector<std::string> diagnostics;
};

CrcLModel fit_crcl(const GramState& g, const DataMatrix& dm, const LabelVector& t);

/// (z Z') * core for a centered target z.
double score_crcl(const CrcLModel& m, const DataMatrix& dm, const Eigen::Ref<const RowVectorXd>& z);

/// Score given the precomputed cross products Z z'.
double score_crcl_cross(const CrcLModel& m, const Eigen::Ref<const VectorXd>& cross);

/// Leave-one-out CRC-L scores: entry i scores Z_i with the model fit on the
/// other rows. Lambda stays at the full-data value; Y and m follow the fold.
VectorXd loo_scores_crcl(const GramState& g, const DataMatrix& dm, const LabelVector& t);

}  // namespace crc
