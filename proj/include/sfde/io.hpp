#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace sfde {

/// `%.17g`: round-trips every double.
std::string format_double(double x);

/// Writes `content` to `<path>.tmp` and renames it over `path`, so readers
/// never observe a partial file. Creates missing parent directories.
void write_file_atomically(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

}  // namespace sfde
