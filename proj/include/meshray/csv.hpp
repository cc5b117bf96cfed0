#pragma once

#include <filesystem>
#include <vector>

namespace meshray {

/// Reads comma-separated numeric rows with exactly `columns` fields. Blank
/// lines and '#' comments are skipped; a non-numeric first row is treated as a
/// header. Throws Error(ParseError) naming the line, Error(Io) if unreadable.
std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path, std::size_t columns);

}  // namespace meshray
