#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mobsynth::io {

/// Writes `contents` to a sibling temp file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Splits one CSV line on commas, honouring double quotes, and trims ASCII
/// whitespace around each field.
std::vector<std::string> split_csv_line(std::string_view line);

std::string_view trim(std::string_view s);

}  // namespace mobsynth::io
