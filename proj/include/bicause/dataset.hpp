#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "bicause/errors.hpp"
#include "bicause/rng.hpp"

namespace bicause {

using Treatment = std::uint8_t;
using RowId = std::int64_t;

struct PotentialOutcomes {
  std::vector<double> y0;
  std::vector<double> y1;
};

/// Observational data: covariates X (n x d, column-major), binary treatment
/// T, outcome Y, and for synthetic data the potential outcomes Y(0), Y(1).
/// Immutable after construction.
class Dataset {
 public:
  Dataset() = default;

  Dataset(Eigen::MatrixXd features, std::vector<std::string> feature_names,
          std::vector<Treatment> treatment, std::vector<double> outcome,
          std::optional<PotentialOutcomes> potential_outcomes = std::nullopt,
          std::vector<RowId> row_ids = {})
      : features_(std::move(features)),
        feature_names_(std::move(feature_names)),
        treatment_(std::move(treatment)),
        outcome_(std::move(outcome)),
        potential_outcomes_(std::move(potential_outcomes)),
        row_ids_(std::move(row_ids)) {
    if (row_ids_.empty()) {
      row_ids_.resize(treatment_.size());
      std::iota(row_ids_.begin(), row_ids_.end(), RowId{0});
    }
    validate();
  }

  std::size_t size() const { return treatment_.size(); }
  std::size_t num_features() const { return static_cast<std::size_t>(features_.cols()); }

  const Eigen::MatrixXd& features() const { return features_; }
  double feature(std::size_t row, std::size_t col) const {
    return features_(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
  }
  std::span<const double> column(std::size_t col) const {
    return {features_.col(static_cast<Eigen::Index>(col)).data(), size()};
  }
  Eigen::VectorXd row(std::size_t r) const {
    return features_.row(static_cast<Eigen::Index>(r)).transpose();
  }

  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::vector<Treatment>& treatment() const { return treatment_; }
  const std::vector<double>& outcome() const { return outcome_; }
  const std::optional<PotentialOutcomes>& potential_outcomes() const { return potential_outcomes_; }
  bool has_potential_outcomes() const { return potential_outcomes_.has_value(); }
  const std::vector<RowId>& row_ids() const { return row_ids_; }

  std::size_t num_treated() const {
    return static_cast<std::size_t>(std::count(treatment_.begin(), treatment_.end(), Treatment{1}));
  }
  std::size_t num_control() const { return size() - num_treated(); }

  std::optional<std::size_t> feature_index(std::string_view name) const {
    for (std::size_t j = 0; j < feature_names_.size(); ++j) {
      if (feature_names_[j] == name) return j;
    }
    return std::nullopt;
  }

  /// Rows in the given order; row ids are carried over.
  Dataset subset(std::span<const std::size_t> rows) const {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), features_.cols());
    std::vector<Treatment> t(rows.size());
    std::vector<double> y(rows.size());
    std::vector<RowId> ids(rows.size());
    std::optional<PotentialOutcomes> po;
    if (potential_outcomes_) po.emplace(PotentialOutcomes{std::vector<double>(rows.size()), std::vector<double>(rows.size())});
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::size_t r = rows[i];
      if (r >= size()) throw InvalidArgument("subset: row index out of range");
      x.row(static_cast<Eigen::Index>(i)) = features_.row(static_cast<Eigen::Index>(r));
      t[i] = treatment_[r];
      y[i] = outcome_[r];
      ids[i] = row_ids_[r];
      if (po) {
        po->y0[i] = potential_outcomes_->y0[r];
        po->y1[i] = potential_outcomes_->y1[r];
      }
    }
    return Dataset(std::move(x), feature_names_, std::move(t), std::move(y), std::move(po), std::move(ids));
  }

  /// Same rows with extra feature columns appended.
  Dataset with_extra_features(const Eigen::MatrixXd& extra, const std::vector<std::string>& names) const {
    if (extra.rows() != features_.rows() || static_cast<std::size_t>(extra.cols()) != names.size()) {
      throw InvalidArgument("with_extra_features: shape mismatch");
    }
    Eigen::MatrixXd x(features_.rows(), features_.cols() + extra.cols());
    x << features_, extra;
    auto all_names = feature_names_;
    all_names.insert(all_names.end(), names.begin(), names.end());
    return Dataset(std::move(x), std::move(all_names), treatment_, outcome_, potential_outcomes_, row_ids_);
  }

 private:
  void validate() const {
    const std::size_t n = treatment_.size();
    if (static_cast<std::size_t>(features_.rows()) != n || outcome_.size() != n || row_ids_.size() != n) {
      throw DataError("dataset columns have unequal lengths");
    }
    if (feature_names_.size() != static_cast<std::size_t>(features_.cols())) {
      throw DataError("feature name count does not match feature columns");
    }
    std::unordered_set<std::string> seen;
    for (const auto& name : feature_names_) {
      if (!seen.insert(name).second) throw DataError("duplicate feature name '" + name + "'");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (treatment_[i] > 1) throw DataError("treatment at row " + std::to_string(i) + " is not binary");
      if (!std::isfinite(outcome_[i])) throw DataError("non-finite outcome at row " + std::to_string(i));
    }
    if (!features_.allFinite()) throw DataError("non-finite feature value");
    if (potential_outcomes_ && (potential_outcomes_->y0.size() != n || potential_outcomes_->y1.size() != n)) {
      throw DataError("potential outcome columns have wrong length");
    }
  }

  Eigen::MatrixXd features_;
  std::vector<std::string> feature_names_;
  std::vector<Treatment> treatment_;
  std::vector<double> outcome_;
  std::optional<PotentialOutcomes> potential_outcomes_;
  std::vector<RowId> row_ids_;
};

/// Which CSV columns play which role. An empty feature list means every
/// column not otherwise named.
struct ColumnSchema {
  std::string treatment_column = "T";
  std::string outcome_column = "Y";
  std::optional<std::string> y0_column;
  std::optional<std::string> y1_column;
  std::vector<std::string> feature_columns;
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cell.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell.push_back(ch);
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

}  // namespace detail

inline Dataset load_csv(const std::string& path, const ColumnSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open data file '" + path + "'");
  if (schema.treatment_column == schema.outcome_column) {
    throw SchemaError("treatment and outcome columns must differ");
  }

  std::string line;
  if (!std::getline(in, line)) throw SchemaError("'" + path + "' has no header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  std::vector<std::string> header = detail::split_csv_line(line);
  for (auto& h : header) h = std::string(detail::trim(h));

  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!position.emplace(header[i], i).second) throw SchemaError("duplicate column '" + header[i] + "'");
  }
  auto require = [&](const std::string& name) {
    const auto it = position.find(name);
    if (it == position.end()) throw SchemaError("column '" + name + "' not found in '" + path + "'");
    return it->second;
  };

  const std::size_t t_col = require(schema.treatment_column);
  const std::size_t y_col = require(schema.outcome_column);
  std::optional<std::size_t> y0_col, y1_col;
  if (schema.y0_column) y0_col = require(*schema.y0_column);
  if (schema.y1_column) y1_col = require(*schema.y1_column);
  if (y0_col.has_value() != y1_col.has_value()) {
    throw SchemaError("potential outcome columns must be given as a pair");
  }

  std::vector<std::size_t> feature_cols;
  std::vector<std::string> feature_names;
  if (schema.feature_columns.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i == t_col || i == y_col || (y0_col && i == *y0_col) || (y1_col && i == *y1_col)) continue;
      feature_cols.push_back(i);
      feature_names.push_back(header[i]);
    }
  } else {
    for (const auto& name : schema.feature_columns) {
      const std::size_t c = require(name);
      if (c == t_col || c == y_col) throw SchemaError("column '" + name + "' cannot be both feature and treatment/outcome");
      feature_cols.push_back(c);
      feature_names.push_back(name);
    }
  }

  std::vector<double> values;  // row-major feature cells
  std::vector<Treatment> treatment;
  std::vector<double> outcome, y0, y1;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw SchemaError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                        " cells, found " + std::to_string(cells.size()));
    }
    auto number = [&](std::size_t col) {
      const auto v = detail::parse_double(cells[col]);
      if (!v) {
        throw SchemaError("line " + std::to_string(line_no) + ", column '" + header[col] +
                          "': cannot parse '" + cells[col] + "' as a number");
      }
      return *v;
    };
    const double t = number(t_col);
    if (t != 0.0 && t != 1.0) {
      throw DataError("line " + std::to_string(line_no) + " (data row " + std::to_string(line_no - 2) +
                      "): treatment value '" + std::string(detail::trim(cells[t_col])) + "' is not 0 or 1");
    }
    treatment.push_back(static_cast<Treatment>(t));
    outcome.push_back(number(y_col));
    if (y0_col) {
      y0.push_back(number(*y0_col));
      y1.push_back(number(*y1_col));
    }
    for (const std::size_t c : feature_cols) values.push_back(number(c));
  }

  const auto n = static_cast<Eigen::Index>(treatment.size());
  const auto d = static_cast<Eigen::Index>(feature_cols.size());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = values[static_cast<std::size_t>(i * d + j)];
  }
  std::optional<PotentialOutcomes> po;
  if (y0_col) po.emplace(PotentialOutcomes{std::move(y0), std::move(y1)});
  return Dataset(std::move(x), std::move(feature_names), std::move(treatment), std::move(outcome), std::move(po));
}

/// Writes features..., T, Y[, y0, y1] with shortest round-trip number text.
inline void write_csv(const Dataset& ds, const std::string& path, const std::string& treatment_name = "T",
                      const std::string& outcome_name = "Y") {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  for (const auto& name : ds.feature_names()) out << name << ',';
  out << treatment_name << ',' << outcome_name;
  if (ds.has_potential_outcomes()) out << ",y0,y1";
  out << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.num_features(); ++j) out << detail::format_double(ds.feature(i, j)) << ',';
    out << static_cast<int>(ds.treatment()[i]) << ',' << detail::format_double(ds.outcome()[i]);
    if (ds.has_potential_outcomes()) {
      out << ',' << detail::format_double(ds.potential_outcomes()->y0[i]) << ','
          << detail::format_double(ds.potential_outcomes()->y1[i]);
    }
    out << '\n';
  }
  if (!out) throw IoError("error while writing '" + path + "'");
}

/// Row positions of a seeded train/test partition. The train part is the
/// prefix of a uniform permutation, each part listed in ascending order.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

inline SplitIndices split_indices(std::size_t n, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("train fraction must lie in (0, 1)");
  }
  if (n < 2) throw InvalidArgument("need at least two rows to split");
  auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  CounterRng rng(seed);
  rng.shuffle(std::span<std::size_t>(perm));

  SplitIndices out;
  out.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

inline std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  const auto idx = split_indices(ds.size(), train_fraction, seed);
  return {ds.subset(idx.train), ds.subset(idx.test)};
}

}  // namespace bicause
