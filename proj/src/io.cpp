#include "romsieve/io.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

#include "romsieve/errors.hpp"

namespace romsieve {

namespace {
constexpr char kMagic[4] = {'R', 'S', 'V', '1'};
}

void write_matrix(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw error("write_matrix: cannot open " + path);
  out.write(kMagic, 4);
  const std::int64_t rows = m.rows(), cols = m.cols();
  out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
  out.write(reinterpret_cast<const char*>(m.data()), sizeof(double) * rows * cols);
  if (!out) throw error("write_matrix: write failed for " + path);
}

Eigen::MatrixXd read_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw error("read_matrix: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != std::string(kMagic, 4)) {
    throw error("read_matrix: bad magic in " + path);
  }
  std::int64_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
  if (!in || rows < 0 || cols < 0) throw error("read_matrix: bad header in " + path);
  Eigen::MatrixXd m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()), sizeof(double) * rows * cols);
  if (!in) throw error("read_matrix: truncated file " + path);
  return m;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw error("write_text_file: cannot open " + path);
  out << text;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw error("read_text_file: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace romsieve
