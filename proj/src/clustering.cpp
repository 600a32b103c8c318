#include "romsieve/clustering.hpp"

#include <limits>
#include <random>

#include "romsieve/errors.hpp"

namespace romsieve {

namespace {

// Index in [0, weights.size()) drawn proportionally to nonnegative weights.
// Falls back to uniform when all weights vanish.
int weighted_draw(const Eigen::VectorXd& weights, std::mt19937_64& rng) {
  const double total = weights.sum();
  if (!(total > 0)) {
    return static_cast<int>(rng() % weights.size());
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double target = unit(rng) * total;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    target -= weights(i);
    if (target <= 0) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size() - 1);
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                    int max_iterations) {
  const int n = static_cast<int>(points.cols());
  if (k < 1) throw invalid_input_error("kmeans: k must be >= 1");
  if (n < 1) throw invalid_input_error("kmeans: need at least one point");

  std::mt19937_64 rng(seed);

  // k-means++ seeding.
  Eigen::MatrixXd centers(points.rows(), k);
  centers.col(0) = points.col(static_cast<int>(rng() % n));
  Eigen::VectorXd dist2 = (points.colwise() - centers.col(0)).colwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const int pick = weighted_draw(dist2, rng);
    centers.col(c) = points.col(pick);
    dist2 = dist2.cwiseMin((points.colwise() - centers.col(c)).colwise().squaredNorm().transpose());
  }

  KMeansResult out;
  out.assignment.assign(n, -1);

  std::vector<int> counts(k, 0);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (points.col(i) - centers.col(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (out.assignment[i] != best) {
        out.assignment[i] = best;
        changed = true;
      }
    }
    out.iterations = iter + 1;
    if (!changed) break;

    centers.setZero();
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) {
      centers.col(out.assignment[i]) += points.col(i);
      ++counts[out.assignment[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) centers.col(c) /= counts[c];
      // Empty cluster: center stays at zero; it simply attracts nothing and
      // the caller skips it (the tree builder's skip-empty branch).
    }
  }

  out.clusters.assign(k, {});
  for (int i = 0; i < n; ++i) out.clusters[out.assignment[i]].push_back(i);
  return out;
}

}  // namespace romsieve
