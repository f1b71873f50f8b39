#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace nst {

// RFC-4180-style field quoting: fields containing commas, quotes or
// newlines are wrapped in double quotes with quotes doubled.
std::string csv_escape(const std::string& field);

std::string csv_line(const std::vector<std::string>& fields);

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Numeric matrix from a headerless CSV of doubles.
std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path);

}  // namespace nst
