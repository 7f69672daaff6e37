#pragma once

#include "crc/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace crc::data {

/// Feature matrix with sample and feature ids, plus labels when they were
/// supplied.
struct Dataset {
  RowMatrix matrix;  // n x p
  std::vector<std::string> sample_ids;
  std::vector<std::string> feature_ids;
  std::vector<std::string> raw_labels;  // empty when unlabeled
  std::optional<LabelVector> labels;
  std::optional<std::vector<std::string>> group_ids;
  std::string negative_label;  // raw label mapped to T = -1
  std::string positive_label;  // raw label mapped to T = +1

  Index rows() const noexcept { return matrix.rows(); }
  Index cols() const noexcept { return matrix.cols(); }
  /// Rows `rows` of everything, labels re-derived with the same mapping.
  Dataset subset(const std::vector<Index>& rows) const;
};

struct LoadOptions {
  std::string label_column;    // labels read from this matrix column
  std::string group_column;    // groups read from this matrix column
  std::string positive_label;  // raw value mapped to +1; default: second in sorted order
  bool require_labels = true;
};

/// Plain numeric table: header of feature ids, first column of sample ids.
struct Table {
  RowMatrix values;
  std::vector<std::string> row_ids;
  std::vector<std::string> column_ids;
};

/// Reads a CSV or TSV table (delimiter taken from the header line) or a
/// binary CRM1 cache, recognised by its magic bytes. Columns named in
/// `text_columns` are returned separately instead of parsed as numbers.
Table read_table(const std::filesystem::path& path, const std::vector<std::string>& text_columns,
                 std::vector<std::vector<std::string>>* text_values = nullptr);

/// Binary cache: "CRM1", u64 n, u64 p, n sample ids, p feature ids (each a
/// u64 length plus bytes), n * p row-major float64 values, u32 CRC-32 of
/// everything before it. All integers little-endian.
void write_matrix_cache(const std::filesystem::path& path, const Table& table);
Table read_matrix_cache(const std::filesystem::path& path);
bool is_matrix_cache(const std::filesystem::path& path);

/// Writes `table` as CSV with `comments` as leading "# " lines.
std::string table_csv(const Table& table, const std::vector<std::string>& comments = {});

/// Matrix plus labels. The labels file has a header naming `sample_id`,
/// `label` and optionally `group`; rows are matched to matrix samples by id.
Dataset load_dataset(const std::filesystem::path& matrix_path, const std::filesystem::path& labels_path,
                     const LoadOptions& options = {});

// ---- Splitting ------------------------------------------------------------

struct SplitPlan {
  std::vector<Index> train;  // sorted
  std::vector<Index> test;   // sorted
  std::uint64_t seed = 0;
};

/// Balanced random split. Units are groups when `groups` is given, samples
/// otherwise; every group must be single-class. With n0 units in the smaller
/// class, each class sends floor(frac * n0) units to training and
/// n0 - floor(frac * n0) to test. Throws SplitInfeasible when either side
/// would get fewer than 2 training or 1 test unit per class.
SplitPlan grouped_balanced_split(const LabelVector& labels, const std::vector<std::string>* groups,
                                 double frac, std::uint64_t seed);

// ---- Spectrum diagnostics -------------------------------------------------

struct VarianceReport {
  Index k = 0;              // components used after clamping
  double percent = 0.0;     // share of the top-k eigenvalues, in percent
  VectorXd eigenvalues;     // centered Gram spectrum, nonincreasing
  std::vector<std::string> warnings;
};

/// Percent of total variance carried by the top k principal components of
/// the column-centered matrix. k is clamped to n - 1.
VarianceReport pct_var_explained(const RowMatrix& matrix, Index k = 10);

}  // namespace crc::data
