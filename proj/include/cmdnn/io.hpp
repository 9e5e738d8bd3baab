#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cmdnn::io {

// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);

// Parses a whole field as a double; returns false on any trailing garbage.
bool parse_double(std::string_view text, double& out);

std::vector<std::string> split_csv_line(std::string_view line);

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`, so readers
// never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace cmdnn::io
