#pragma once

#include <Eigen/Core>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace romsieve {

/// Orthonormal basis q_1..q_n whose spans are the leaves of a refinement
/// tree. analyze = Q^T x, synthesize = Q y; project(x, S) is the orthogonal
/// projection onto span{q_i : i in S}.
class LeafBasis {
 public:
  virtual ~LeafBasis() = default;

  virtual int dimension() const = 0;
  virtual Eigen::VectorXd analyze(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::VectorXd synthesize(const Eigen::VectorXd& y) const = 0;

  /// True when the leaf vectors have local support (Kronecker case); sieving
  /// then never needs a transform.
  virtual bool local_support() const { return false; }

  virtual Eigen::VectorXd project(const Eigen::VectorXd& x, std::span<const int> leaf_set) const;

  /// Serialization tag ("kronecker" / "dct") plus block sizes, enough to
  /// reconstruct the basis from a tree file.
  virtual std::string kind() const = 0;
  virtual std::vector<int> block_sizes() const { return {dimension()}; }
};

/// Identity basis: analyze/synthesize copy, project masks entries. Sieving
/// through it is the original entry-wise basis splitting.
class KroneckerBasis final : public LeafBasis {
 public:
  explicit KroneckerBasis(int n) : n_(n) {}
  int dimension() const override { return n_; }
  Eigen::VectorXd analyze(const Eigen::VectorXd& x) const override { return x; }
  Eigen::VectorXd synthesize(const Eigen::VectorXd& y) const override { return y; }
  bool local_support() const override { return true; }
  Eigen::VectorXd project(const Eigen::VectorXd& x, std::span<const int> leaf_set) const override;
  std::string kind() const override { return "kronecker"; }

 private:
  int n_;
};

/// Block-diagonal orthonormalized DCT-II. Each block is an independent
/// transform; leaves are (block, frequency) pairs laid out contiguously.
/// Blocks above the dense fallback size run through FFTW (O(n log n)).
class DctBasis final : public LeafBasis {
 public:
  explicit DctBasis(std::vector<int> block_sizes, int dense_fallback_below = 65);
  ~DctBasis() override;
  DctBasis(const DctBasis&) = delete;
  DctBasis& operator=(const DctBasis&) = delete;

  int dimension() const override { return n_; }
  Eigen::VectorXd analyze(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd synthesize(const Eigen::VectorXd& y) const override;
  std::string kind() const override { return "dct"; }
  std::vector<int> block_sizes() const override { return blocks_; }

 private:
  struct Plans;
  int n_;
  std::vector<int> blocks_;
  std::vector<int> offsets_;
  std::vector<Eigen::MatrixXd> dense_;  // per block; empty when FFTW path used
  std::unique_ptr<Plans> plans_;
};

std::shared_ptr<const LeafBasis> make_leaf_basis(const std::string& kind,
                                                 const std::vector<int>& block_sizes);

}  // namespace romsieve
