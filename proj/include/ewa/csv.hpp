#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ewa/glm.hpp"

namespace ewa::csv {

/// Shortest decimal text that round-trips (17 significant digits).
std::string format(double v);

/// Headerless numeric CSV. Every row must have the same number of fields.
/// Parse errors name the file and 1-based line number.
Matrix read_matrix(const std::filesystem::path& path);
Vector read_vector(const std::filesystem::path& path);

/// Splits one CSV line on commas (no quoting).
std::vector<std::string> split(const std::string& line);

}  // namespace ewa::csv
