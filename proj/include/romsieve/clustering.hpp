#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace romsieve {

struct KMeansResult {
  std::vector<int> assignment;              // point -> cluster in [0, k)
  std::vector<std::vector<int>> clusters;   // cluster -> point indices (may be empty)
  int iterations = 0;
};

/// Lloyd iterations from k-means++ initialization, Euclidean metric,
/// deterministic under (points, k, seed). Converges when assignments stop
/// changing or after max_iterations. Empty clusters are legal output.
KMeansResult kmeans(const Eigen::MatrixXd& points,  // one column per point
                    int k, std::uint64_t seed, int max_iterations = 100);

}  // namespace romsieve
