#pragma once

#include "crc/crc_s.hpp"
#include "crc/types.hpp"

#include <functional>
#include <vector>

namespace crc {

/// Maps the centered training matrix to the matrix DLDA is trained on. The
/// baseline uses the identity; passing cross-residualization instead
/// reproduces the CRC-S fit.
using FeatureMap = std::function<RowMatrix(const DataMatrix&, const LabelVector&)>;

struct BaselineConfig {
  std::vector<Index> grid;  // empty: screening_grid(p)
  FeatureMap features;      // empty: identity
};

/// DLDA with marginal screening fit directly to the centered matrix. N is the
/// grid value with the fewest leave-one-out misclassifications (ties to the
/// smaller N); trace.estimated_errors holds those error rates.
struct DldaBaselineModel {
  RowVectorXd mu_hat;
  DldaModel dlda;
  GridSearchTrace trace;
  double log_prior_ratio = 0.0;  // log(n2 / n1)

  /// w (z - mu_hat) - midpoint_offset + log_prior_ratio.
  double discriminant(const Eigen::Ref<const RowVectorXd>& z_raw) const;
  int predict(const Eigen::Ref<const RowVectorXd>& z_raw) const;
};

DldaBaselineModel fit_dlda_baseline(RowMatrix raw, const LabelVector& t,
                                    const BaselineConfig& config = {});

}  // namespace crc
