#pragma once

#include "maskcov/common.hpp"

#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace maskcov::harness {

/// Shortest round-trip decimal representation.
std::string format_double(double v);

/// Writes "# key = value" provenance lines.
void write_provenance(std::ostream& out, const std::vector<std::pair<std::string, std::string>>& entries);

/// Row-major, comma-separated, full precision.
void write_matrix_csv(std::ostream& out, const Matrix& m);
void write_matrix_csv(const std::string& path, const Matrix& m);

/// Reads a matrix written by write_matrix_csv (blank and '#' lines skipped).
Matrix read_matrix_csv(const std::string& path);

}  // namespace maskcov::harness
