#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace socicnn {

using Cell = std::variant<std::string, std::int64_t, double>;

/// Column-named result table. Columns listed in `timing_columns` hold wall-clock values and
/// are the only cells allowed to differ between runs with the same seed.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  std::set<std::string> timing_columns;

  void add_row(std::vector<Cell> row);
  std::size_t column_index(const std::string& column) const;
  double number(std::size_t row, const std::string& column) const;
};

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Header row plus one line per row; doubles in round-trip decimal.
std::string to_csv(const Table& table);

nlohmann::json to_json(const Table& table);

}  // namespace socicnn
