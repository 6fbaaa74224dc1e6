#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace orchnet::csv {

std::vector<std::string_view> split(std::string_view line, char sep = ',');

/// Parses the whole field as a double; throws DataError naming `what` otherwise.
double parse_double(std::string_view field, std::string_view what);
long long parse_int(std::string_view field, std::string_view what);

/// Shortest decimal representation that round-trips exactly.
std::string format_double(double value);

/// Reads all lines, stripping a trailing '\r'. Throws DataError if unreadable.
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Writes `contents` to `path`, throwing DataError when the file cannot be opened.
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace orchnet::csv
