#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace crc {

using Index = Eigen::Index;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

enum class ErrorKind {
  InvalidData,
  TooFewSamples,
  ShapeError,
  DegenerateGram,
  DowndateSingular,
  DegenerateContrast,
  FoldClassEmpty,
  CrcLSingular,
  NonFiniteInput,
  ConfigError,
  VersionMismatch,
  CorruptModel,
  RaggedRows,
  UnknownLabel,
  DuplicateId,
  NonNumericCell,
  SplitInfeasible,
  IoError,
};

const char* to_string(ErrorKind kind) noexcept;

// Every failure raised by the library. `stage` names the pipeline step that
// raised it when the error crossed fit_crc.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string stage = {});

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& stage() const noexcept { return stage_; }
  const std::string& detail() const noexcept { return detail_; }

  Error at_stage(const std::string& stage) const;

 private:
  ErrorKind kind_;
  std::string stage_;
  std::string detail_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

/// n x p feature matrix with the column means that were removed from it.
///
/// Rows are observations. An uncentered matrix carries a zero mean vector, so
/// apply_centering is the identity for it.
class DataMatrix {
 public:
  DataMatrix() = default;

  /// Wraps `raw` without centering. Validates finiteness and n >= 4, p >= 2.
  static DataMatrix uncentered(RowMatrix raw);

  const RowMatrix& values() const noexcept { return values_; }
  const RowVectorXd& mu_hat() const noexcept { return mu_hat_; }
  bool centered() const noexcept { return centered_; }
  Index rows() const noexcept { return values_.rows(); }
  Index cols() const noexcept { return values_.cols(); }

 private:
  friend DataMatrix center_columns(RowMatrix raw);
  friend DataMatrix restore_data_matrix(RowMatrix values, RowVectorXd mu_hat, bool centered);

  RowMatrix values_;
  RowVectorXd mu_hat_;
  bool centered_ = false;
};

/// Subtracts the column means. Takes the matrix by value so callers can move
/// large inputs in.
DataMatrix center_columns(RowMatrix raw);

/// z - mu_hat.
RowVectorXd apply_centering(const DataMatrix& dm, const Eigen::Ref<const RowVectorXd>& z);

// Rebuilds a DataMatrix from serialized parts without re-centering.
DataMatrix restore_data_matrix(RowMatrix values, RowVectorXd mu_hat, bool centered);

/// Class labels over {-1, +1}. Class 1 is T = -1, class 2 is T = +1.
class LabelVector {
 public:
  LabelVector() = default;
  explicit LabelVector(std::span<const int> labels);
  explicit LabelVector(const std::vector<int>& labels)
      : LabelVector(std::span<const int>(labels)) {}

  Index size() const noexcept { return values_.size(); }
  Index n1() const noexcept { return n1_; }
  Index n2() const noexcept { return n2_; }
  int operator[](Index i) const { return values_[i] > 0 ? 1 : -1; }

  /// Labels as a +-1 column vector.
  const VectorXd& values() const noexcept { return values_; }

  /// n x 2 class-indicator matrix (column 0 for T = -1).
  MatrixXd indicator() const;

  std::vector<int> to_vector() const;
  LabelVector subset(std::span<const Index> rows) const;
  LabelVector negated() const;

 private:
  VectorXd values_;
  Index n1_ = 0;
  Index n2_ = 0;
};

RowMatrix select_rows(const RowMatrix& m, std::span<const Index> rows);

}  // namespace crc
