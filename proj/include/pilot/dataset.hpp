#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace pilot {

using RowId = std::uint32_t;
using LevelId = std::int32_t;

/// Level id used for categorical values that the model never saw in training.
inline constexpr LevelId kUnseenLevel = -1;

enum class ColumnKind { Numeric, Categorical };

struct ColumnMeta {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  std::vector<std::string> levels;  // categorical only, indexed by level id

  bool is_numeric() const { return kind == ColumnKind::Numeric; }
  /// Level id for `name`, or kUnseenLevel.
  LevelId find_level(std::string_view level) const;

  bool operator==(const ColumnMeta&) const = default;
};

/// One predictor column. Numeric columns fill `values`; categorical columns
/// fill `codes` with ids into `meta.levels`.
struct Column {
  ColumnMeta meta;
  std::vector<double> values;
  std::vector<LevelId> codes;

  std::size_t size() const { return meta.is_numeric() ? values.size() : codes.size(); }
};

/// Predictor columns without a response. Used for prediction inputs.
struct FeatureTable {
  std::size_t n_rows = 0;
  std::vector<Column> columns;

  std::size_t n_cols() const { return columns.size(); }
  std::vector<ColumnMeta> metas() const;
  /// Column index by name, or -1.
  int find(std::string_view name) const;
  /// Appends a column after checking its length against n_rows.
  void add(Column column);
};

/// Per-column ascending row orders. Entry j is empty for categorical columns.
using SortedIndex = std::vector<std::vector<RowId>>;

/// Training data: typed predictors, numeric response and the presorted
/// per-predictor row orders. Immutable once built by make_dataset().
struct Dataset {
  FeatureTable features;
  std::string target;
  std::vector<double> response;
  SortedIndex sorted_index;

  std::size_t n_rows() const { return features.n_rows; }
  std::size_t n_cols() const { return features.n_cols(); }
  const Column& column(std::size_t j) const { return features.columns[j]; }
};

struct CenteredResponse {
  std::vector<double> values;
  double offset = 0.0;
  double bound_B = 0.0;
};

/// Raw CSV contents: a header and rows of unparsed cells.
struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int find(std::string_view name) const;
};

/// Midrange centering: values = raw - (min+max)/2, so max(values) = -min(values).
CenteredResponse center_response(std::span<const double> raw);

/// Stable ascending order of `values` (ties keep original row order).
std::vector<RowId> presort(std::span<const double> values);

/// Presorts every numeric column of `features`.
SortedIndex presort(const FeatureTable& features);

/// Validates shapes and finiteness, then presorts. Throws DataError.
Dataset make_dataset(FeatureTable features, std::vector<double> response, std::string target);

/// Rows `rows` of `data` (in the given order), presorted afresh.
Dataset subset_rows(const Dataset& data, std::span<const RowId> rows);
FeatureTable subset_rows(const FeatureTable& table, std::span<const RowId> rows);

/// RFC-4180 reader: quoted fields, doubled quotes, CRLF or LF line ends.
RawTable parse_csv(std::istream& in);
RawTable read_csv(const std::filesystem::path& path);

/// Builds typed columns from raw cells. Columns listed in `categorical`, or
/// holding any token that does not parse as a finite float, become
/// categorical with levels in first-appearance order. Empty cells throw.
FeatureTable type_columns(const RawTable& raw, const std::set<std::string>& categorical,
                          std::string_view skip_column = {});

/// Builds columns with the kinds fixed by `schema` (matched by name). Used to
/// read prediction inputs; level tables are local to the returned table.
FeatureTable type_columns_like(const RawTable& raw, std::span<const ColumnMeta> schema,
                               std::string_view skip_column = {});

Dataset ingest_csv(const std::filesystem::path& path, const std::string& target,
                   const std::set<std::string>& categorical_override = {});
Dataset ingest_csv(std::istream& in, const std::string& target,
                   const std::set<std::string>& categorical_override = {});

/// Writes features (+ response when non-empty) with 17 significant digits.
void write_csv(std::ostream& out, const FeatureTable& features, std::span<const double> response = {},
               std::string_view target = {});
void write_csv(std::ostream& out, const Dataset& data);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace pilot
