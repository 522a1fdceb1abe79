#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>

namespace chromnet {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

/// Fixed-point with `decimals` digits after the point.
std::string format_fixed(double v, int decimals);

/// Writes through a temporary file in the same directory, then renames it
/// over `path`. Throws IoError.
void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& writer, bool binary = false);

}  // namespace chromnet
