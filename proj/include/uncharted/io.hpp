#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uncharted/dataset.hpp"

namespace uncharted {

/// Headerless CSV, one matrix row per line, 17 significant digits.
std::string format_matrix_csv(const Eigen::MatrixXd& m);
/// Parses a headerless numeric CSV. Throws DataError on ragged or non-numeric input.
Eigen::MatrixXd parse_matrix_csv(const std::string& text);

/// "label,start,end" with a header row.
std::string format_blocks_csv(const ClassBlocks& blocks);
ClassBlocks parse_blocks_csv(const std::string& text, std::size_t n_rows);

/// round(v * 255) with halves rounded up.
std::uint8_t to_pixel(double v);

/// Binary PGM ("P5"): header "P5\n<w> <h>\n255\n" then row-major bytes.
/// Throws InvalidArgument for entries outside [0, 1].
std::string format_pgm(const Eigen::MatrixXd& m);
/// The heat map with every block-boundary row and column at 255.
std::string format_overlay_pgm(const Eigen::MatrixXd& m, const ClassBlocks& blocks);
void write_pgm(const Eigen::MatrixXd& m, const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(const std::string& bytes);

}  // namespace uncharted
