#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace precise {

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view text);
std::size_t parse_size(std::string_view text);
std::vector<std::string> split(std::string_view text, char sep);
std::string join_doubles(const std::vector<double>& values, char sep = ',');

}  // namespace precise
