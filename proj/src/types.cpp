#include "crc/types.hpp"

#include <cmath>
#include <sstream>

namespace crc {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidData: return "InvalidData";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::DegenerateGram: return "DegenerateGram";
    case ErrorKind::DowndateSingular: return "DowndateSingular";
    case ErrorKind::DegenerateContrast: return "DegenerateContrast";
    case ErrorKind::FoldClassEmpty: return "FoldClassEmpty";
    case ErrorKind::CrcLSingular: return "CrcLSingular";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::CorruptModel: return "CorruptModel";
    case ErrorKind::RaggedRows: return "RaggedRows";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::NonNumericCell: return "NonNumericCell";
    case ErrorKind::SplitInfeasible: return "SplitInfeasible";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

namespace {

std::string compose(ErrorKind kind, const std::string& message, const std::string& stage) {
  std::string out = to_string(kind);
  if (!stage.empty()) out += " [" + stage + "]";
  out += ": " + message;
  return out;
}

}  // namespace

Error::Error(ErrorKind kind, const std::string& message, std::string stage)
    : std::runtime_error(compose(kind, message, stage)),
      kind_(kind),
      stage_(std::move(stage)),
      detail_(message) {}

Error Error::at_stage(const std::string& stage) const {
  if (!stage_.empty()) return *this;
  return Error(kind_, detail_, stage);
}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

namespace {

void check_shape_and_finite(const RowMatrix& raw) {
  if (raw.rows() < 4) {
    fail(ErrorKind::TooFewSamples,
         "need at least 4 rows, got " + std::to_string(raw.rows()));
  }
  if (raw.cols() < 2) {
    fail(ErrorKind::ShapeError, "need at least 2 columns, got " + std::to_string(raw.cols()));
  }
  if (!raw.allFinite()) {
    for (Index i = 0; i < raw.rows(); ++i) {
      for (Index j = 0; j < raw.cols(); ++j) {
        if (!std::isfinite(raw(i, j))) {
          std::ostringstream msg;
          msg << "non-finite entry at row " << i << ", column " << j;
          fail(ErrorKind::InvalidData, msg.str());
        }
      }
    }
  }
}

}  // namespace

DataMatrix DataMatrix::uncentered(RowMatrix raw) {
  check_shape_and_finite(raw);
  DataMatrix dm;
  dm.mu_hat_ = RowVectorXd::Zero(raw.cols());
  dm.values_ = std::move(raw);
  dm.centered_ = false;
  return dm;
}

DataMatrix center_columns(RowMatrix raw) {
  check_shape_and_finite(raw);
  DataMatrix dm;
  dm.mu_hat_ = raw.colwise().mean();
  raw.rowwise() -= dm.mu_hat_;
  dm.values_ = std::move(raw);
  dm.centered_ = true;
  return dm;
}

RowVectorXd apply_centering(const DataMatrix& dm, const Eigen::Ref<const RowVectorXd>& z) {
  if (z.size() != dm.cols()) {
    fail(ErrorKind::ShapeError, "vector has " + std::to_string(z.size()) +
                                    " entries, training data has " +
                                    std::to_string(dm.cols()) + " features");
  }
  return z - dm.mu_hat();
}

DataMatrix restore_data_matrix(RowMatrix values, RowVectorXd mu_hat, bool centered) {
  if (mu_hat.size() != values.cols()) fail(ErrorKind::ShapeError, "mean vector size mismatch");
  DataMatrix dm;
  dm.values_ = std::move(values);
  dm.mu_hat_ = std::move(mu_hat);
  dm.centered_ = centered;
  return dm;
}

LabelVector::LabelVector(std::span<const int> labels) {
  values_.resize(static_cast<Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int t = labels[i];
    if (t != 1 && t != -1) {
      fail(ErrorKind::InvalidData,
           "label at position " + std::to_string(i) + " is " + std::to_string(t) + ", not +-1");
    }
    values_[static_cast<Index>(i)] = t;
    (t < 0 ? n1_ : n2_) += 1;
  }
  if (n1_ < 2 || n2_ < 2) {
    fail(ErrorKind::InvalidData, "each class needs at least 2 members (n1=" +
                                     std::to_string(n1_) + ", n2=" + std::to_string(n2_) + ")");
  }
}

MatrixXd LabelVector::indicator() const {
  MatrixXd y = MatrixXd::Zero(size(), 2);
  for (Index i = 0; i < size(); ++i) y(i, values_[i] > 0 ? 1 : 0) = 1.0;
  return y;
}

std::vector<int> LabelVector::to_vector() const {
  std::vector<int> out(static_cast<std::size_t>(size()));
  for (Index i = 0; i < size(); ++i) out[static_cast<std::size_t>(i)] = (*this)[i];
  return out;
}

LabelVector LabelVector::subset(std::span<const Index> rows) const {
  std::vector<int> out;
  out.reserve(rows.size());
  for (Index r : rows) out.push_back((*this)[r]);
  return LabelVector(out);
}

LabelVector LabelVector::negated() const {
  std::vector<int> out = to_vector();
  for (int& t : out) t = -t;
  return LabelVector(out);
}

RowMatrix select_rows(const RowMatrix& m, std::span<const Index> rows) {
  RowMatrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Index>(k)) = m.row(rows[k]);
  return out;
}

}  // namespace crc
