#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "robinf/regression.hpp"

namespace robinf {

// Raw CSV contents: header plus string cells, row-major.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  // 1-based source line on which each row starts.
  std::vector<std::size_t> lines;

  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t require(std::string_view name) const;
};

// RFC-4180: comma separated, double-quoted fields with "" escapes, quoted
// line breaks, CRLF or LF endings. Throws ParseError with line and column.
CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);
std::string to_csv(const CsvTable& table);

// Empty, NA, NaN and "." cells count as missing.
bool is_missing(std::string_view cell);

struct ColumnRoles {
  std::string outcome;
  std::vector<std::string> covariates;
  // Categorical columns mapped to dense labels in order of first appearance.
  std::vector<std::string> clusters;
  std::optional<std::string> treatment;
  bool intercept = true;
};

struct IngestResult {
  Dataset data;
  // Dense label -> original text, per cluster column.
  std::map<std::string, std::vector<std::string>> label_mappings;
  std::size_t dropped_rows = 0;
  // Table row index of each retained observation.
  std::vector<std::size_t> source_rows;
};

// Listwise deletion over the referenced columns; the treatment is appended
// to the covariates when not already listed.
IngestResult to_dataset(const CsvTable& table, const ColumnRoles& roles);
IngestResult ingest_csv(const std::filesystem::path& path, const ColumnRoles& roles);

struct CollapseResult {
  CsvTable table;
  std::size_t dropped_units = 0;
  std::vector<std::string> notes;
};

// Averages every numeric column within (unit, side), where side is
// period <= cutoff (pre) or period > cutoff (post). The period column holds
// the mean period of each side; units lacking either side are dropped and
// counted. Output rows follow first appearance of the unit, pre before post.
CollapseResult collapse_periods(const CsvTable& table, std::string_view unit_column,
                                std::string_view period_column, double cutoff);

}  // namespace robinf
