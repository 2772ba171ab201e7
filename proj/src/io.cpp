#include "robinf/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "robinf/error.hpp"

namespace robinf {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::optional<double> parse_number(std::string_view cell) {
  const std::string t = trim(cell);
  if (t.empty()) return std::nullopt;
  double v = 0.0;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::optional<std::size_t> CsvTable::find(std::string_view name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) return std::nullopt;
  return static_cast<std::size_t>(it - columns.begin());
}

std::size_t CsvTable::require(std::string_view name) const {
  if (auto idx = find(name)) return *idx;
  throw Error(ErrorCode::ConfigError, "column '" + std::string(name) + "' not found in input");
}

bool is_missing(std::string_view cell) {
  const std::string t = trim(cell);
  return t.empty() || t == "NA" || t == "NaN" || t == "nan" || t == "." || t == "NULL";
}

CsvTable parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::size_t> starts;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_quoted = false;
  bool record_open = false;
  std::size_t line = 1;
  std::size_t column = 1;
  std::size_t record_line = 1;

  auto end_field = [&] {
    record.push_back(field);
    field.clear();
    field_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    const bool blank = record.size() == 1 && record[0].empty();
    if (!blank) {
      records.push_back(std::move(record));
      starts.push_back(record_line);
    }
    record.clear();
    record_open = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (!record_open) {
      record_open = true;
      record_line = line;
    }
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') {
          ++line;
          column = 0;
        }
        field.push_back(c);
      }
      ++column;
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty() || field_quoted) {
          throw Error(ErrorCode::ParseError, "unexpected quote at line " + std::to_string(line) +
                                                 ", column " + std::to_string(column));
        }
        in_quotes = true;
        field_quoted = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        ++line;
        column = 0;
        break;
      default:
        if (field_quoted) {
          throw Error(ErrorCode::ParseError, "text after closing quote at line " +
                                                 std::to_string(line) + ", column " +
                                                 std::to_string(column));
        }
        field.push_back(c);
    }
    ++column;
  }
  if (in_quotes) {
    throw Error(ErrorCode::ParseError, "unterminated quoted field starting on line " +
                                           std::to_string(record_line));
  }
  if (record_open) end_record();

  if (records.empty()) throw Error(ErrorCode::ParseError, "input has no header row");
  CsvTable table;
  for (auto& h : records.front()) table.columns.push_back(trim(h));
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.columns.size()) {
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(starts[r]) + ": expected " +
                      std::to_string(table.columns.size()) + " fields, found " +
                      std::to_string(records[r].size()));
    }
    table.rows.push_back(std::move(records[r]));
    table.lines.push_back(starts[r]);
  }
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

std::string to_csv(const CsvTable& table) {
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
      if (c == '"') out += "\"\"";
      else out.push_back(c);
    }
    return out + "\"";
  };
  std::ostringstream os;
  for (std::size_t j = 0; j < table.columns.size(); ++j) {
    os << (j ? "," : "") << quote(table.columns[j]);
  }
  os << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) os << (j ? "," : "") << quote(row[j]);
    os << '\n';
  }
  return os.str();
}

IngestResult to_dataset(const CsvTable& table, const ColumnRoles& roles) {
  std::vector<std::string> covariates = roles.covariates;
  if (roles.treatment &&
      std::find(covariates.begin(), covariates.end(), *roles.treatment) == covariates.end()) {
    covariates.push_back(*roles.treatment);
  }
  const std::size_t y_col = table.require(roles.outcome);
  std::vector<std::size_t> x_cols;
  for (const auto& c : covariates) x_cols.push_back(table.require(c));
  std::vector<std::size_t> cl_cols;
  for (const auto& c : roles.clusters) cl_cols.push_back(table.require(c));

  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    bool missing = is_missing(row[y_col]);
    for (auto c : x_cols) missing = missing || is_missing(row[c]);
    for (auto c : cl_cols) missing = missing || is_missing(row[c]);
    if (!missing) keep.push_back(r);
  }

  IngestResult out;
  out.dropped_rows = table.rows.size() - keep.size();
  out.source_rows = keep;
  if (keep.empty()) {
    throw Error(ErrorCode::EmptyAfterFiltering, "no complete rows remain after dropping missing values");
  }
  const auto n = static_cast<Eigen::Index>(keep.size());
  VectorXd y(n);
  MatrixXd x(n, static_cast<Eigen::Index>(x_cols.size()));
  auto numeric = [&](std::size_t r, std::size_t c) {
    if (auto v = parse_number(table.rows[r][c])) return *v;
    throw Error(ErrorCode::ParseError,
                "line " + std::to_string(table.lines[r]) + ", column " + std::to_string(c + 1) +
                    " ('" + table.columns[c] + "'): not a number: '" + table.rows[r][c] + "'");
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t r = keep[static_cast<std::size_t>(i)];
    y(i) = numeric(r, y_col);
    for (std::size_t j = 0; j < x_cols.size(); ++j) x(i, static_cast<Eigen::Index>(j)) = numeric(r, x_cols[j]);
  }
  out.data = Dataset::from_columns(std::move(y), x, covariates, roles.intercept);
  out.data.outcome_name = roles.outcome;
  out.data.dropped_rows = out.dropped_rows;

  for (std::size_t c = 0; c < cl_cols.size(); ++c) {
    std::map<std::string, int> dense;
    std::vector<std::string> mapping;
    std::vector<int> labels;
    labels.reserve(keep.size());
    for (auto r : keep) {
      const std::string key = trim(table.rows[r][cl_cols[c]]);
      auto [it, inserted] = dense.emplace(key, static_cast<int>(mapping.size()));
      if (inserted) mapping.push_back(key);
      labels.push_back(it->second);
    }
    out.data.cluster_labels[roles.clusters[c]] = std::move(labels);
    out.label_mappings[roles.clusters[c]] = std::move(mapping);
  }

  if (roles.treatment) {
    const auto it = std::find(out.data.column_names.begin(), out.data.column_names.end(),
                              *roles.treatment);
    out.data.treatment_name = *roles.treatment;
    out.data.treatment = out.data.covariates.col(it - out.data.column_names.begin());
  }
  out.data.validate();
  return out;
}

IngestResult ingest_csv(const std::filesystem::path& path, const ColumnRoles& roles) {
  return to_dataset(read_csv(path), roles);
}

CollapseResult collapse_periods(const CsvTable& table, std::string_view unit_column,
                                std::string_view period_column, double cutoff) {
  const std::size_t unit_col = table.require(unit_column);
  const std::size_t period_col = table.require(period_column);
  const std::size_t width = table.columns.size();

  struct Cell {
    std::vector<double> sum;
    std::vector<std::size_t> count;
    std::vector<std::string> text;
    std::vector<char> text_consistent;
    bool seen = false;
  };
  struct Unit {
    std::string key;
    Cell side[2];
  };
  std::vector<Unit> units;
  std::map<std::string, std::size_t> index;
  std::vector<char> numeric_col(width, 1);
  for (std::size_t j = 0; j < width; ++j) {
    if (j == unit_col) {
      numeric_col[j] = 0;
      continue;
    }
    for (const auto& row : table.rows) {
      if (!is_missing(row[j]) && !parse_number(row[j])) {
        numeric_col[j] = 0;
        break;
      }
    }
  }
  if (!numeric_col[period_col]) {
    throw Error(ErrorCode::ParseError, "period column '" + std::string(period_column) + "' is not numeric");
  }

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (is_missing(row[unit_col]) || is_missing(row[period_col])) continue;
    const std::string key = trim(row[unit_col]);
    auto [it, inserted] = index.emplace(key, units.size());
    if (inserted) units.push_back(Unit{key, {}});
    const double period = *parse_number(row[period_col]);
    Cell& cell = units[it->second].side[period <= cutoff ? 0 : 1];
    if (!cell.seen) {
      cell.seen = true;
      cell.sum.assign(width, 0.0);
      cell.count.assign(width, 0);
      cell.text.assign(width, {});
      cell.text_consistent.assign(width, 1);
      for (std::size_t j = 0; j < width; ++j) cell.text[j] = row[j];
    }
    for (std::size_t j = 0; j < width; ++j) {
      if (numeric_col[j]) {
        if (auto v = parse_number(row[j])) {
          cell.sum[j] += *v;
          ++cell.count[j];
        }
      } else if (trim(row[j]) != trim(cell.text[j])) {
        cell.text_consistent[j] = 0;
      }
    }
  }

  CollapseResult out;
  out.table.columns = table.columns;
  std::vector<char> text_ok(width, 1);
  for (const auto& u : units) {
    for (const auto& cell : u.side) {
      if (!cell.seen) continue;
      for (std::size_t j = 0; j < width; ++j) {
        if (!numeric_col[j] && j != unit_col && !cell.text_consistent[j]) text_ok[j] = 0;
      }
    }
  }
  for (const auto& u : units) {
    if (!u.side[0].seen || !u.side[1].seen) {
      ++out.dropped_units;
      continue;
    }
    for (const auto& cell : u.side) {
      std::vector<std::string> row(width);
      for (std::size_t j = 0; j < width; ++j) {
        if (j == unit_col) {
          row[j] = u.key;
        } else if (numeric_col[j]) {
          row[j] = cell.count[j] ? format_number(cell.sum[j] / static_cast<double>(cell.count[j])) : "";
        } else {
          row[j] = text_ok[j] ? cell.text[j] : "";
        }
      }
      out.table.rows.push_back(std::move(row));
      out.table.lines.push_back(0);
    }
  }
  for (std::size_t j = 0; j < width; ++j) {
    if (!numeric_col[j] && j != unit_col && !text_ok[j]) {
      out.notes.push_back("text column '" + table.columns[j] +
                          "' varies within a unit-period side and was blanked");
    }
  }
  if (out.dropped_units) {
    out.notes.push_back(std::to_string(out.dropped_units) +
                        " unit(s) lacking pre- or post-cutoff rows dropped");
  }
  return out;
}

}  // namespace robinf
