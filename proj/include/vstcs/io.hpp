#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace vstcs::io {

struct PgmImage {
  Eigen::MatrixXd pixels;  // row-major pixel values in [0, maxval]
  int maxval = 255;
};

// Binary PGM (P5), 8-bit or 16-bit (big-endian) per maxval.
PgmImage read_pgm(const std::string& path);
void write_pgm(const std::string& path, const PgmImage& image);

// Single-column CSV, one value per line, no header.
void write_vector_csv(const std::string& path, const Eigen::VectorXd& v);
Eigen::VectorXd read_vector_csv(const std::string& path);

// Deterministic double formatting used in all CSV output (%.17g).
std::string format_double(double v);

}  // namespace vstcs::io
