// Matrix Market reading and writing.
//
// Coordinate files (real, general or symmetric) load into CscMatrix; dense
// vectors use the array format. Indices are one-based on disk and zero-based
// everywhere else.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "ess/sparse.hpp"

namespace ess {

CscMatrix load_matrix_market(const std::filesystem::path& path);
CscMatrix read_matrix_market(std::istream& in);

/// Emits `%%MatrixMarket matrix coordinate real general` with 17 significant digits.
void save_matrix_market(const CscMatrix& a, const std::filesystem::path& path);
void write_matrix_market(const CscMatrix& a, std::ostream& out);

/// Reads a column vector stored either as an `array` file or as an n x 1 coordinate file.
std::vector<double> load_vector(const std::filesystem::path& path);
void save_vector(std::span<const double> v, const std::filesystem::path& path);

}  // namespace ess
