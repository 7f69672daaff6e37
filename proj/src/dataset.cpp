#include "crc/dataset.hpp"

#include "crc/gram.hpp"
#include "crc/io.hpp"
#include "crc/rng.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace crc::data {

namespace {

constexpr char kCacheMagic[4] = {'C', 'R', 'M', '1'};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

bool skip_line(std::string_view line) {
  const auto t = trim(line);
  return t.empty() || t.front() == '#';
}

// Reads non-comment lines; returns the delimiter guessed from the header.
char read_lines(const std::filesystem::path& path, std::vector<std::string>& lines) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (!skip_line(line)) lines.push_back(line);
  }
  if (in.bad()) fail(ErrorKind::IoError, "read failed for " + path.string());
  if (lines.empty()) fail(ErrorKind::InvalidData, path.string() + " has no header line");
  return lines.front().find('\t') != std::string::npos ? '\t' : ',';
}

std::string location(const std::filesystem::path& path, std::size_t line_no) {
  return path.filename().string() + " data row " + std::to_string(line_no);
}

}  // namespace

Table read_table(const std::filesystem::path& path, const std::vector<std::string>& text_columns,
                 std::vector<std::vector<std::string>>* text_values) {
  if (is_matrix_cache(path)) {
    if (!text_columns.empty()) fail(ErrorKind::ConfigError, "binary caches hold numeric columns only");
    return read_matrix_cache(path);
  }
  std::vector<std::string> lines;
  const char delim = read_lines(path, lines);
  const auto header = split(lines.front(), delim);
  if (header.size() < 2) fail(ErrorKind::InvalidData, path.string() + " header needs an id column and features");

  std::vector<int> text_slot(header.size(), -1);
  for (std::size_t c = 0; c < text_columns.size(); ++c) {
    const auto it = std::find(header.begin() + 1, header.end(), text_columns[c]);
    if (it == header.end()) fail(ErrorKind::ConfigError, "column '" + text_columns[c] + "' not found in " + path.string());
    text_slot[static_cast<std::size_t>(it - header.begin())] = static_cast<int>(c);
  }

  Table t;
  std::unordered_set<std::string> seen;
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (text_slot[c] >= 0) continue;
    std::string id(header[c]);
    if (!seen.insert(id).second) fail(ErrorKind::DuplicateId, "duplicate feature id '" + id + "' in " + path.string());
    t.column_ids.push_back(std::move(id));
  }
  if (t.column_ids.empty()) fail(ErrorKind::InvalidData, path.string() + " has no numeric columns");
  if (text_values != nullptr) text_values->assign(text_columns.size(), {});

  const std::size_t n = lines.size() - 1;
  const std::size_t p = t.column_ids.size();
  std::vector<double> values;
  values.reserve(n * p);
  seen.clear();
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split(lines[r], delim);
    if (cells.size() != header.size()) {
      fail(ErrorKind::RaggedRows, location(path, r) + " has " + std::to_string(cells.size()) + " cells, header has " +
                                      std::to_string(header.size()));
    }
    std::string id(cells[0]);
    if (!seen.insert(id).second) fail(ErrorKind::DuplicateId, "duplicate sample id '" + id + "' in " + path.string());
    for (std::size_t c = 1; c < cells.size(); ++c) {
      if (text_slot[c] >= 0) {
        if (text_values != nullptr) (*text_values)[static_cast<std::size_t>(text_slot[c])].emplace_back(cells[c]);
        continue;
      }
      const std::string_view cell = cells[c];
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        fail(ErrorKind::NonNumericCell, location(path, r) + " (sample '" + id + "'), column " + std::to_string(c + 1) +
                                            " ('" + std::string(header[c]) + "'): '" + std::string(cell) + "'");
      }
      values.push_back(v);
    }
    t.row_ids.push_back(std::move(id));
  }
  t.values = Eigen::Map<const RowMatrix>(values.data(), static_cast<Index>(n), static_cast<Index>(p));
  return t;
}

bool is_matrix_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[4] = {};
  return in.read(magic, 4) && std::memcmp(magic, kCacheMagic, 4) == 0;
}

void write_matrix_cache(const std::filesystem::path& path, const Table& table) {
  const auto n = static_cast<std::uint64_t>(table.values.rows());
  const auto p = static_cast<std::uint64_t>(table.values.cols());
  if (table.row_ids.size() != n || table.column_ids.size() != p) {
    fail(ErrorKind::ShapeError, "ids do not match the matrix shape");
  }
  io::ByteWriter w;
  w.raw(kCacheMagic, 4);
  w.u64(n);
  w.u64(p);
  for (const auto& s : table.row_ids) w.string(s);
  for (const auto& s : table.column_ids) w.string(s);
  w.f64s(table.values.data(), n * p);
  w.u32(io::crc32(w.bytes()));
  io::write_file_atomic(path, w.bytes());
}

Table read_matrix_cache(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  if (bytes.size() < 24 || std::memcmp(bytes.data(), kCacheMagic, 4) != 0) {
    fail(ErrorKind::InvalidData, path.string() + " is not a CRM1 cache");
  }
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  std::memcpy(&stored, bytes.data() + body, 4);
  if (io::crc32(std::span<const std::uint8_t>(bytes.data(), body)) != stored) {
    fail(ErrorKind::InvalidData, path.string() + " checksum mismatch");
  }
  io::ByteReader r(std::span<const std::uint8_t>(bytes.data() + 4, body - 4), ErrorKind::InvalidData);
  const auto n = r.count(8);
  const auto p = r.count(8);
  Table t;
  for (std::uint64_t i = 0; i < n; ++i) t.row_ids.push_back(r.string());
  for (std::uint64_t j = 0; j < p; ++j) t.column_ids.push_back(r.string());
  if (p != 0 && n > r.remaining() / 8 / p) fail(ErrorKind::InvalidData, path.string() + " is truncated");
  t.values.resize(static_cast<Index>(n), static_cast<Index>(p));
  r.f64s(t.values.data(), n * p);
  if (r.remaining() != 0) fail(ErrorKind::InvalidData, path.string() + " has trailing bytes");
  return t;
}

std::string table_csv(const Table& table, const std::vector<std::string>& comments) {
  std::string out;
  for (const auto& c : comments) out += "# " + c + "\n";
  out += "sample_id";
  for (const auto& id : table.column_ids) out += "," + id;
  out += "\n";
  char buf[32];
  for (Index i = 0; i < table.values.rows(); ++i) {
    out += table.row_ids[static_cast<std::size_t>(i)];
    for (Index j = 0; j < table.values.cols(); ++j) {
      // Shortest representation that reads back to the same double.
      const auto res = std::to_chars(buf, buf + sizeof buf, table.values(i, j));
      out += ',';
      out.append(buf, res.ptr);
    }
    out += "\n";
  }
  return out;
}

namespace {

struct LabelMap {
  std::string negative, positive;
};

LabelMap choose_labels(const std::vector<std::string>& raw, const std::string& positive) {
  const std::set<std::string> distinct(raw.begin(), raw.end());
  auto list = [&] {
    std::string s;
    for (const auto& v : distinct) s += (s.empty() ? "'" : ", '") + v + "'";
    return s;
  };
  if (distinct.size() > 2) {
    std::string extras;
    std::size_t k = 0;
    for (const auto& v : distinct) {
      if (k++ >= 2) extras += (extras.empty() ? "'" : ", '") + v + "'";
    }
    fail(ErrorKind::UnknownLabel, "expected two distinct labels, found " + std::to_string(distinct.size()) + " (" +
                                      list() + "); extra labels: " + extras);
  }
  if (distinct.size() < 2) fail(ErrorKind::InvalidData, "labels contain a single class: " + list());
  if (!positive.empty()) {
    if (!distinct.contains(positive)) {
      fail(ErrorKind::UnknownLabel, "positive label '" + positive + "' not among " + list());
    }
    return {*distinct.begin() == positive ? *distinct.rbegin() : *distinct.begin(), positive};
  }
  return {*distinct.begin(), *distinct.rbegin()};
}

}  // namespace

Dataset Dataset::subset(const std::vector<Index>& rows) const {
  Dataset d;
  d.matrix = select_rows(matrix, rows);
  d.feature_ids = feature_ids;
  d.negative_label = negative_label;
  d.positive_label = positive_label;
  if (group_ids) d.group_ids.emplace();
  std::vector<int> signs;
  for (Index r : rows) {
    const auto k = static_cast<std::size_t>(r);
    d.sample_ids.push_back(sample_ids[k]);
    if (!raw_labels.empty()) d.raw_labels.push_back(raw_labels[k]);
    if (labels) signs.push_back((*labels)[r]);
    if (group_ids) d.group_ids->push_back((*group_ids)[k]);
  }
  if (labels) {
    try {
      d.labels = LabelVector(signs);
    } catch (const Error&) {
      d.labels.reset();  // too few of a class for a LabelVector; raw labels remain
    }
  }
  return d;
}

Dataset load_dataset(const std::filesystem::path& matrix_path, const std::filesystem::path& labels_path,
                     const LoadOptions& options) {
  std::vector<std::string> text_columns;
  if (!options.label_column.empty()) text_columns.push_back(options.label_column);
  if (!options.group_column.empty()) text_columns.push_back(options.group_column);
  std::vector<std::vector<std::string>> text;
  Table t = read_table(matrix_path, text_columns, &text);

  Dataset d;
  d.matrix = std::move(t.values);
  d.sample_ids = std::move(t.row_ids);
  d.feature_ids = std::move(t.column_ids);
  std::size_t next = 0;
  if (!options.label_column.empty()) d.raw_labels = text[next++];
  if (!options.group_column.empty()) d.group_ids = text[next++];

  if (!labels_path.empty()) {
    if (!d.raw_labels.empty()) fail(ErrorKind::ConfigError, "labels given both as a column and as a file");
    std::vector<std::string> lines;
    const char delim = read_lines(labels_path, lines);
    const auto header = split(lines.front(), delim);
    const auto label_it = std::find(header.begin(), header.end(), "label");
    if (label_it == header.end() || label_it == header.begin()) {
      fail(ErrorKind::InvalidData, labels_path.string() + " header needs a sample id column and a 'label' column");
    }
    const auto label_col = static_cast<std::size_t>(label_it - header.begin());
    const auto group_it = std::find(header.begin() + 1, header.end(), "group");
    const bool has_group = group_it != header.end();
    const auto group_col = static_cast<std::size_t>(group_it - header.begin());

    std::unordered_map<std::string, std::pair<std::string, std::string>> by_id;
    for (std::size_t r = 1; r < lines.size(); ++r) {
      const auto cells = split(lines[r], delim);
      if (cells.size() != header.size()) {
        fail(ErrorKind::RaggedRows, location(labels_path, r) + " has " + std::to_string(cells.size()) +
                                        " cells, header has " + std::to_string(header.size()));
      }
      std::string id(cells[0]);
      auto [it, fresh] = by_id.try_emplace(id, std::string(cells[label_col]),
                                           has_group ? std::string(cells[group_col]) : std::string());
      if (!fresh) fail(ErrorKind::DuplicateId, "duplicate sample id '" + id + "' in " + labels_path.string());
      if (it->second.first.empty()) fail(ErrorKind::InvalidData, "empty label for sample '" + id + "'");
    }
    if (has_group && d.group_ids) fail(ErrorKind::ConfigError, "groups given both as a column and in the labels file");
    if (has_group) d.group_ids.emplace();
    for (const auto& id : d.sample_ids) {
      const auto it = by_id.find(id);
      if (it == by_id.end()) fail(ErrorKind::InvalidData, "no label for sample '" + id + "'");
      d.raw_labels.push_back(it->second.first);
      if (has_group) d.group_ids->push_back(it->second.second);
    }
  }

  if (d.raw_labels.empty()) {
    if (options.require_labels) fail(ErrorKind::ConfigError, "labels are required (labels file or label column)");
    return d;
  }
  const LabelMap map = choose_labels(d.raw_labels, options.positive_label);
  d.negative_label = map.negative;
  d.positive_label = map.positive;
  std::vector<int> signs;
  for (const auto& l : d.raw_labels) signs.push_back(l == map.positive ? 1 : -1);
  d.labels = LabelVector(signs);
  return d;
}

// ---- Splitting ------------------------------------------------------------

SplitPlan grouped_balanced_split(const LabelVector& labels, const std::vector<std::string>* groups, double frac,
                                 std::uint64_t seed) {
  if (!(frac > 0.0 && frac < 1.0)) fail(ErrorKind::ConfigError, "split fraction must lie in (0, 1)");
  const Index n = labels.size();
  if (groups != nullptr && static_cast<Index>(groups->size()) != n) {
    fail(ErrorKind::ShapeError, "group ids do not match the number of samples");
  }

  // Units in order of first appearance, with their members and class.
  std::vector<std::vector<Index>> members;
  std::vector<int> unit_class;
  std::unordered_map<std::string, std::size_t> unit_of;
  for (Index i = 0; i < n; ++i) {
    std::size_t u = members.size();
    if (groups != nullptr) {
      const auto [it, fresh] = unit_of.try_emplace((*groups)[static_cast<std::size_t>(i)], members.size());
      u = it->second;
      if (!fresh) {
        if (unit_class[u] != labels[i]) {
          fail(ErrorKind::InvalidData, "group '" + it->first + "' contains both classes");
        }
        members[u].push_back(i);
        continue;
      }
    }
    members.push_back({i});
    unit_class.push_back(labels[i]);
  }

  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t u = 0; u < members.size(); ++u) by_class[unit_class[u] > 0 ? 1 : 0].push_back(u);
  const auto n0 = static_cast<Index>(std::min(by_class[0].size(), by_class[1].size()));
  const auto n_train = static_cast<Index>(std::floor(frac * static_cast<double>(n0) + 1e-9));
  const Index n_test = n0 - n_train;
  if (n_train < 2 || n_test < 1) {
    fail(ErrorKind::SplitInfeasible, "class unit counts " + std::to_string(by_class[0].size()) + " and " +
                                         std::to_string(by_class[1].size()) + " give " + std::to_string(n_train) +
                                         " training and " + std::to_string(n_test) +
                                         " test units per class; need at least 2 and 1");
  }

  SplitPlan plan;
  plan.seed = seed;
  for (std::uint32_t c = 0; c < 2; ++c) {
    auto& units = by_class[c];
    const rng::Stream stream(seed, 100 + c);
    for (std::size_t i = units.size() - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(stream.uniform(0, i) * static_cast<double>(i + 1));
      std::swap(units[i], units[std::min(j, i)]);
    }
    for (Index k = 0; k < n_train + n_test; ++k) {
      auto& side = k < n_train ? plan.train : plan.test;
      const auto& m = members[units[static_cast<std::size_t>(k)]];
      side.insert(side.end(), m.begin(), m.end());
    }
  }
  std::sort(plan.train.begin(), plan.train.end());
  std::sort(plan.test.begin(), plan.test.end());
  return plan;
}

// ---- Spectrum diagnostics -------------------------------------------------

VarianceReport pct_var_explained(const RowMatrix& matrix, Index k) {
  const Index n = matrix.rows();
  if (n < 2 || matrix.cols() < 1) fail(ErrorKind::TooFewSamples, "need at least two samples");
  if (k < 1) fail(ErrorKind::ConfigError, "number of components must be positive");
  if (!matrix.allFinite()) fail(ErrorKind::InvalidData, "matrix contains non-finite values");
  const RowMatrix centered = matrix.rowwise() - matrix.colwise().mean();

  VarianceReport r;
  r.eigenvalues = gram_spectrum(centered);
  const double total = r.eigenvalues.sum();
  if (!(total > 0.0)) fail(ErrorKind::InvalidData, "matrix has no variance");
  r.k = k;
  if (k > n - 1) {
    r.k = n - 1;
    r.warnings.push_back("k = " + std::to_string(k) + " exceeds n - 1; using " + std::to_string(r.k));
  }
  r.percent = 100.0 * r.eigenvalues.head(r.k).sum() / total;
  return r;
}

}  // namespace crc::data
