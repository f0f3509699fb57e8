#include "vstcs/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vstcs::io {

namespace {

// Reads the next whitespace-delimited token, skipping '#' comment lines.
std::string next_pgm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (!std::isspace(ch)) {
      tok.push_back(static_cast<char>(ch));
      while ((ch = in.peek()) != EOF && !std::isspace(ch)) {
        tok.push_back(static_cast<char>(in.get()));
      }
      return tok;
    }
  }
  throw std::runtime_error("read_pgm: truncated header");
}

}  // namespace

PgmImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_pgm: cannot open " + path);
  if (next_pgm_token(in) != "P5") {
    throw std::runtime_error("read_pgm: not a binary PGM (P5): " + path);
  }
  const int cols = std::stoi(next_pgm_token(in));
  const int rows = std::stoi(next_pgm_token(in));
  const int maxval = std::stoi(next_pgm_token(in));
  if (cols < 1 || rows < 1 || maxval < 1 || maxval > 65535) {
    throw std::runtime_error("read_pgm: bad dimensions/maxval in " + path);
  }
  in.get();  // single whitespace after maxval
  PgmImage img;
  img.maxval = maxval;
  img.pixels.resize(rows, cols);
  const bool wide = maxval > 255;
  std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols *
                                 (wide ? 2 : 1));
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size()) {
    throw std::runtime_error("read_pgm: truncated pixel data in " + path);
  }
  std::size_t k = 0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (wide) {
        img.pixels(r, c) = 256.0 * buf[k] + buf[k + 1];
        k += 2;
      } else {
        img.pixels(r, c) = buf[k++];
      }
    }
  }
  return img;
}

void write_pgm(const std::string& path, const PgmImage& image) {
  if (image.maxval < 1 || image.maxval > 65535) {
    throw std::invalid_argument("write_pgm: maxval out of range");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pgm: cannot open " + path);
  out << "P5\n"
      << image.pixels.cols() << ' ' << image.pixels.rows() << '\n'
      << image.maxval << '\n';
  const bool wide = image.maxval > 255;
  for (int r = 0; r < image.pixels.rows(); ++r) {
    for (int c = 0; c < image.pixels.cols(); ++c) {
      const long v = std::lround(
          std::clamp(image.pixels(r, c), 0.0, double(image.maxval)));
      if (wide) {
        out.put(static_cast<char>((v >> 8) & 0xFF));
        out.put(static_cast<char>(v & 0xFF));
      } else {
        out.put(static_cast<char>(v & 0xFF));
      }
    }
  }
  if (!out) throw std::runtime_error("write_pgm: write failed for " + path);
}

void write_vector_csv(const std::string& path, const Eigen::VectorXd& v) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_vector_csv: cannot open " + path);
  for (int i = 0; i < v.size(); ++i) out << format_double(v(i)) << '\n';
  if (!out) throw std::runtime_error("write_vector_csv: write failed");
}

Eigen::VectorXd read_vector_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_vector_csv: cannot open " + path);
  std::vector<double> vals;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    vals.push_back(std::stod(line));
  }
  Eigen::VectorXd v(static_cast<int>(vals.size()));
  for (int i = 0; i < v.size(); ++i) v(i) = vals[static_cast<std::size_t>(i)];
  return v;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace vstcs::io
