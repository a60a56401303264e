#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ruad::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; throws DataError when absent.
  std::size_t column(std::string_view name) const;
};

Table read(const std::filesystem::path& path);
Table parse(std::string_view text);

double to_double(std::string_view field);
long long to_int(std::string_view field);

// Shortest representation that round-trips through to_double.
std::string format_double(double value);

}  // namespace ruad::csv
