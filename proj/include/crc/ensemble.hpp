#pragma once

#include "crc/crc_l.hpp"
#include "crc/crc_s.hpp"
#include "crc/gram.hpp"
#include "crc/residualization.hpp"
#include "crc/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace crc {

struct CrcConfig {
  std::vector<Index> grid;  // empty: screening_grid(p)
  bool project = true;      // leave-one-out projection correction in CRC-S
};

/// Two-dimensional LDA on the (s_l, s_s) score pairs with pooled covariance
/// and empirical priors. combined = b0 + b1 * s_s + b2 * s_l.
struct MetaLda {
  double b0 = 0.0;
  double b1 = 0.0;  // CRC-S coefficient
  double b2 = 0.0;  // CRC-L coefficient
  double prior1 = 0.5;
  double prior2 = 0.5;
  bool ridged = false;

  double combined(double s_l, double s_s) const noexcept { return b0 + b1 * s_s + b2 * s_l; }
};

/// `pairs` has columns (s_l, s_s).
MetaLda fit_meta_lda(const MatrixXd& pairs, const LabelVector& t);

/// One-dimensional LDA on a single score, used when CRC-S or CRC-L classify
/// on their own: label = sign(slope * s + intercept).
struct ScoreCalibration {
  double slope = 1.0;
  double intercept = 0.0;

  double apply(double s) const noexcept { return slope * s + intercept; }
};

ScoreCalibration calibrate_score(const VectorXd& scores, const LabelVector& t);

/// Sign with zero mapped to +1.
inline int sign_label(double v) noexcept { return v >= 0.0 ? 1 : -1; }

struct Prediction {
  int label = 1;
  double s_l = 0.0;
  double s_s = 0.0;
  double combined = 0.0;
  int crcs_label = 1;  // CRC-S alone
  int crcl_label = 1;  // CRC-L alone
};

struct FittedCRC {
  DataMatrix train;            // centered training matrix and its column means
  LabelVector labels;
  MatrixXd effective_inverse;  // inverse of the augmented training Gram
  double lambda = 0.0;
  GammaEstimate gamma;
  CrcLModel crcl;
  DldaModel crcs;              // fit on the cross-residualized matrix
  MetaLda meta;
  ScoreCalibration crcs_alone;
  ScoreCalibration crcl_alone;
  MatrixXd loo_score_pairs;    // n x 2, columns (s_l, s_s)
  GridSearchTrace trace;
  std::vector<std::string> diagnostics;
  std::array<std::string, 2> label_names{"-1", "+1"};  // names of T = -1 and T = +1

  Index n() const noexcept { return train.rows(); }
  Index p() const noexcept { return train.cols(); }
  Index chosen_N() const noexcept { return trace.chosen_N; }
};

/// Fits the full classifier. Errors from the pipeline carry the name of the
/// stage that raised them.
FittedCRC fit_crc(RowMatrix raw, const LabelVector& t, const CrcConfig& config = {});

Prediction predict(const FittedCRC& m, const Eigen::Ref<const RowVectorXd>& z_raw);

/// One prediction per row of `z_raw`. Agrees with predict up to rounding.
std::vector<Prediction> predict_batch(const FittedCRC& m, const RowMatrix& z_raw);

struct LinearWeights {
  RowVectorXd w;  // applies to z - mu_hat
  double b0 = 0.0;
};

/// The equivalent linear classifier sign(b0 + (z - mu_hat) w).
LinearWeights extract_linear_weights(const FittedCRC& m);

// ---- Model files ------------------------------------------------------------

inline constexpr std::uint32_t kModelVersion = 1;

std::vector<std::uint8_t> serialize(const FittedCRC& m);
FittedCRC deserialize(const std::vector<std::uint8_t>& bytes);

void save_model(const FittedCRC& m, const std::filesystem::path& path);
FittedCRC load_model(const std::filesystem::path& path);

}  // namespace crc
