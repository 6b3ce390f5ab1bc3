#include "pilot/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "pilot/error.hpp"

namespace pilot {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

// Accepts finite decimal floats only; "nan"/"inf" are treated as text.
bool parse_finite(std::string_view token, double& out) {
  token = trim(token);
  if (token.empty()) return false;
  if (token.front() == '+') token.remove_prefix(1);
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

std::string cell_name(std::size_t row, const std::string& column) {
  // Row numbers are 1-based data rows (the header is line 1 of the file).
  return "row " + std::to_string(row + 1) + ", column '" + column + "'";
}

std::string quote_csv(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

LevelId ColumnMeta::find_level(std::string_view level) const {
  const auto it = std::find(levels.begin(), levels.end(), level);
  return it == levels.end() ? kUnseenLevel : static_cast<LevelId>(it - levels.begin());
}

std::vector<ColumnMeta> FeatureTable::metas() const {
  std::vector<ColumnMeta> out;
  out.reserve(columns.size());
  for (const auto& c : columns) out.push_back(c.meta);
  return out;
}

int FeatureTable::find(std::string_view name) const {
  for (std::size_t j = 0; j < columns.size(); ++j)
    if (columns[j].meta.name == name) return static_cast<int>(j);
  return -1;
}

void FeatureTable::add(Column column) {
  if (columns.empty() && n_rows == 0) n_rows = column.size();
  if (column.size() != n_rows)
    throw DataError("column '" + column.meta.name + "' has " + std::to_string(column.size()) +
                    " rows, expected " + std::to_string(n_rows));
  if (find(column.meta.name) >= 0) throw DataError("duplicate column '" + column.meta.name + "'");
  columns.push_back(std::move(column));
}

int RawTable::find(std::string_view name) const {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return static_cast<int>(j);
  return -1;
}

CenteredResponse center_response(std::span<const double> raw) {
  CenteredResponse out;
  if (raw.empty()) return out;
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  out.offset = (*lo + *hi) / 2.0;
  out.values.reserve(raw.size());
  for (double v : raw) out.values.push_back(v - out.offset);
  // Midpoint rounding can leave max and -min a few ulps apart; B is the larger.
  const auto [clo, chi] = std::minmax_element(out.values.begin(), out.values.end());
  out.bound_B = std::max(*chi, -*clo);
  return out;
}

std::vector<RowId> presort(std::span<const double> values) {
  std::vector<RowId> order(values.size());
  std::iota(order.begin(), order.end(), RowId{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](RowId a, RowId b) { return values[a] < values[b]; });
  return order;
}

SortedIndex presort(const FeatureTable& features) {
  SortedIndex index(features.n_cols());
  for (std::size_t j = 0; j < features.n_cols(); ++j) {
    const auto& col = features.columns[j];
    if (col.meta.is_numeric()) index[j] = presort(col.values);
  }
  return index;
}

Dataset make_dataset(FeatureTable features, std::vector<double> response, std::string target) {
  if (response.empty()) throw DataError("dataset has no rows");
  if (features.columns.empty()) throw DataError("dataset has no predictor columns");
  if (response.size() != features.n_rows)
    throw DataError("response has " + std::to_string(response.size()) + " values but features have " +
                    std::to_string(features.n_rows) + " rows");
  if (features.n_rows > std::numeric_limits<RowId>::max()) throw DataError("too many rows");
  for (std::size_t i = 0; i < response.size(); ++i)
    if (!std::isfinite(response[i])) throw DataError("non-finite response at row " + std::to_string(i + 1));
  for (const auto& col : features.columns) {
    if (col.size() != features.n_rows) throw DataError("column '" + col.meta.name + "' has wrong length");
    if (col.meta.is_numeric()) {
      for (std::size_t i = 0; i < col.values.size(); ++i)
        if (!std::isfinite(col.values[i]))
          throw DataError("non-finite value at " + cell_name(i, col.meta.name));
    } else {
      const auto n_levels = static_cast<LevelId>(col.meta.levels.size());
      for (std::size_t i = 0; i < col.codes.size(); ++i)
        if (col.codes[i] < 0 || col.codes[i] >= n_levels)
          throw DataError("invalid level id at " + cell_name(i, col.meta.name));
    }
  }
  Dataset data;
  data.sorted_index = presort(features);
  data.features = std::move(features);
  data.response = std::move(response);
  data.target = std::move(target);
  return data;
}

FeatureTable subset_rows(const FeatureTable& table, std::span<const RowId> rows) {
  FeatureTable out;
  out.n_rows = rows.size();
  for (const auto& col : table.columns) {
    Column c;
    c.meta = col.meta;
    if (col.meta.is_numeric()) {
      c.values.reserve(rows.size());
      for (RowId r : rows) c.values.push_back(col.values.at(r));
    } else {
      c.codes.reserve(rows.size());
      for (RowId r : rows) c.codes.push_back(col.codes.at(r));
    }
    out.columns.push_back(std::move(c));
  }
  return out;
}

Dataset subset_rows(const Dataset& data, std::span<const RowId> rows) {
  std::vector<double> y;
  y.reserve(rows.size());
  for (RowId r : rows) y.push_back(data.response.at(r));
  return make_dataset(subset_rows(data.features, rows), std::move(y), data.target);
}

RawTable parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    // Skip blank lines entirely.
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };

  char c;
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field_started && field.empty()) {
          in_quotes = true;
          field_started = true;
        } else {
          field += c;
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (in.peek() == '\n') in.get(c);
        ++line;
        end_record();
        break;
      case '\n':
        ++line;
        end_record();
        break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (in_quotes) throw DataError("unterminated quoted field near line " + std::to_string(line));
  if (!field.empty() || !record.empty()) end_record();

  if (records.empty()) throw DataError("CSV input is empty (no header row)");
  RawTable table;
  table.header = std::move(records.front());
  for (auto& h : table.header) h = std::string(trim(h));
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].size() != table.header.size())
      throw DataError("row " + std::to_string(i) + " has " + std::to_string(records[i].size()) +
                      " fields, header has " + std::to_string(table.header.size()));
    table.rows.push_back(std::move(records[i]));
  }
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (table.header[j].empty()) throw DataError("empty column name at position " + std::to_string(j + 1));
    for (std::size_t k = 0; k < j; ++k)
      if (table.header[k] == table.header[j]) throw DataError("duplicate column name '" + table.header[j] + "'");
  }
  return table;
}

RawTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return parse_csv(in);
}

namespace {

void check_missing(const RawTable& raw) {
  for (std::size_t i = 0; i < raw.rows.size(); ++i)
    for (std::size_t j = 0; j < raw.header.size(); ++j)
      if (trim(raw.rows[i][j]).empty()) throw DataError("missing value at " + cell_name(i, raw.header[j]));
}

Column numeric_column(const RawTable& raw, std::size_t j) {
  Column col;
  col.meta.name = raw.header[j];
  col.meta.kind = ColumnKind::Numeric;
  col.values.reserve(raw.rows.size());
  for (std::size_t i = 0; i < raw.rows.size(); ++i) {
    double v;
    if (!parse_finite(raw.rows[i][j], v))
      throw DataError("non-numeric value '" + raw.rows[i][j] + "' at " + cell_name(i, raw.header[j]));
    col.values.push_back(v);
  }
  return col;
}

Column categorical_column(const RawTable& raw, std::size_t j) {
  Column col;
  col.meta.name = raw.header[j];
  col.meta.kind = ColumnKind::Categorical;
  std::unordered_map<std::string, LevelId> ids;
  col.codes.reserve(raw.rows.size());
  for (const auto& row : raw.rows) {
    std::string token(trim(row[j]));
    auto [it, inserted] = ids.try_emplace(token, static_cast<LevelId>(col.meta.levels.size()));
    if (inserted) col.meta.levels.push_back(token);
    col.codes.push_back(it->second);
  }
  return col;
}

bool all_numeric(const RawTable& raw, std::size_t j) {
  double v;
  for (const auto& row : raw.rows)
    if (!parse_finite(row[j], v)) return false;
  return true;
}

}  // namespace

FeatureTable type_columns(const RawTable& raw, const std::set<std::string>& categorical,
                          std::string_view skip_column) {
  check_missing(raw);
  for (const auto& name : categorical)
    if (raw.find(name) < 0) throw DataError("categorical column '" + name + "' not found in header");
  FeatureTable table;
  table.n_rows = raw.rows.size();
  for (std::size_t j = 0; j < raw.header.size(); ++j) {
    if (raw.header[j] == skip_column) continue;
    const bool cat = categorical.count(raw.header[j]) > 0 || !all_numeric(raw, j);
    table.add(cat ? categorical_column(raw, j) : numeric_column(raw, j));
  }
  return table;
}

FeatureTable type_columns_like(const RawTable& raw, std::span<const ColumnMeta> schema,
                               std::string_view skip_column) {
  check_missing(raw);
  FeatureTable table;
  table.n_rows = raw.rows.size();
  for (std::size_t j = 0; j < raw.header.size(); ++j) {
    if (raw.header[j] == skip_column) continue;
    const auto it = std::find_if(schema.begin(), schema.end(),
                                 [&](const ColumnMeta& m) { return m.name == raw.header[j]; });
    // Columns unknown to the schema are typed by content; predict_batch rejects them.
    const bool cat = it != schema.end() ? !it->is_numeric() : !all_numeric(raw, j);
    table.add(cat ? categorical_column(raw, j) : numeric_column(raw, j));
  }
  return table;
}

Dataset ingest_csv(std::istream& in, const std::string& target, const std::set<std::string>& categorical_override) {
  const RawTable raw = parse_csv(in);
  const int t = raw.find(target);
  if (t < 0) throw DataError("target column '" + target + "' not found in header");
  if (categorical_override.count(target)) throw DataError("target column '" + target + "' cannot be categorical");
  if (raw.rows.empty()) throw DataError("CSV has a header but no data rows");
  check_missing(raw);

  std::vector<double> y;
  y.reserve(raw.rows.size());
  for (std::size_t i = 0; i < raw.rows.size(); ++i) {
    double v;
    if (!parse_finite(raw.rows[i][t], v))
      throw DataError("target value '" + raw.rows[i][t] + "' at " + cell_name(i, target) + " is not numeric");
    y.push_back(v);
  }
  FeatureTable features = type_columns(raw, categorical_override, target);
  return make_dataset(std::move(features), std::move(y), target);
}

Dataset ingest_csv(const std::filesystem::path& path, const std::string& target,
                   const std::set<std::string>& categorical_override) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return ingest_csv(in, target, categorical_override);
}

void write_csv(std::ostream& out, const FeatureTable& features, std::span<const double> response,
               std::string_view target) {
  const bool with_y = !response.empty();
  for (std::size_t j = 0; j < features.n_cols(); ++j) {
    if (j) out << ',';
    out << quote_csv(features.columns[j].meta.name);
  }
  if (with_y) out << (features.n_cols() ? "," : "") << quote_csv(target);
  out << '\n';
  for (std::size_t i = 0; i < features.n_rows; ++i) {
    for (std::size_t j = 0; j < features.n_cols(); ++j) {
      if (j) out << ',';
      const auto& col = features.columns[j];
      if (col.meta.is_numeric())
        out << format17(col.values[i]);
      else
        out << quote_csv(col.meta.levels.at(col.codes[i]));
    }
    if (with_y) out << (features.n_cols() ? "," : "") << format17(response[i]);
    out << '\n';
  }
}

void write_csv(std::ostream& out, const Dataset& data) {
  write_csv(out, data.features, data.response, data.target);
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

}  // namespace pilot
