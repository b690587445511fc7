#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mvr {

/// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double v);

/// Strict full-token parse; throws with `context` on malformed input.
double parse_double(std::string_view token, const std::string& context);

long parse_long(std::string_view token, const std::string& context);

std::vector<std::string_view> split_csv(std::string_view line);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace mvr
