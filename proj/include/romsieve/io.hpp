#pragma once

#include <Eigen/Core>
#include <string>

namespace romsieve {

/// Binary matrix file: magic "RSV1", int64 rows, int64 cols, column-major
/// doubles. Used for the train/run split (snapshots, POD bases).
void write_matrix(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(const std::string& path);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace romsieve
