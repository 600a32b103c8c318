#include "romsieve/leaf_basis.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

#include "romsieve/errors.hpp"

namespace romsieve {

Eigen::VectorXd LeafBasis::project(const Eigen::VectorXd& x, std::span<const int> leaf_set) const {
  Eigen::VectorXd coeffs = analyze(x);
  Eigen::VectorXd masked = Eigen::VectorXd::Zero(coeffs.size());
  for (int i : leaf_set) masked(i) = coeffs(i);
  return synthesize(masked);
}

Eigen::VectorXd KroneckerBasis::project(const Eigen::VectorXd& x,
                                        std::span<const int> leaf_set) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_);
  for (int i : leaf_set) out(i) = x(i);
  return out;
}

namespace {

// FFTW's planner is not thread-safe; executing distinct plans on distinct
// buffers is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

Eigen::MatrixXd dense_dct2(int n) {
  Eigen::MatrixXd m(n, n);
  const double s0 = std::sqrt(1.0 / n);
  const double sk = std::sqrt(2.0 / n);
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      m(k, j) = (k == 0 ? s0 : sk) * std::cos(M_PI * (2 * j + 1) * k / (2.0 * n));
    }
  }
  return m;
}

}  // namespace

struct DctBasis::Plans {
  std::vector<fftw_plan> forward;   // REDFT10 per block (nullptr when dense)
  std::vector<fftw_plan> backward;  // REDFT01 per block
  // Plans are tied to the buffers they were created with, but the new-array
  // execute interface lets us run them on per-call buffers.
  std::vector<double> scratch_in, scratch_out;
};

DctBasis::DctBasis(std::vector<int> block_sizes, int dense_fallback_below)
    : blocks_(std::move(block_sizes)) {
  n_ = 0;
  for (int b : blocks_) {
    if (b <= 0) throw invalid_input_error("DctBasis: block sizes must be positive");
    offsets_.push_back(n_);
    n_ += b;
  }
  dense_.resize(blocks_.size());
  plans_ = std::make_unique<Plans>();
  plans_->forward.assign(blocks_.size(), nullptr);
  plans_->backward.assign(blocks_.size(), nullptr);
  int max_block = 0;
  for (int b : blocks_) max_block = std::max(max_block, b);
  plans_->scratch_in.resize(max_block);
  plans_->scratch_out.resize(max_block);

  std::lock_guard<std::mutex> lock(planner_mutex());
  for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
    const int nb = blocks_[bi];
    if (nb < dense_fallback_below) {
      dense_[bi] = dense_dct2(nb);
    } else {
      fftw_r2r_kind fwd = FFTW_REDFT10, bwd = FFTW_REDFT01;
      plans_->forward[bi] = fftw_plan_r2r_1d(nb, plans_->scratch_in.data(),
                                             plans_->scratch_out.data(), fwd,
                                             FFTW_ESTIMATE | FFTW_UNALIGNED);
      plans_->backward[bi] = fftw_plan_r2r_1d(nb, plans_->scratch_in.data(),
                                              plans_->scratch_out.data(), bwd,
                                              FFTW_ESTIMATE | FFTW_UNALIGNED);
    }
  }
}

DctBasis::~DctBasis() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  for (auto p : plans_->forward)
    if (p) fftw_destroy_plan(p);
  for (auto p : plans_->backward)
    if (p) fftw_destroy_plan(p);
}

Eigen::VectorXd DctBasis::analyze(const Eigen::VectorXd& x) const {
  if (x.size() != n_) throw invalid_input_error("DctBasis::analyze: size mismatch");
  Eigen::VectorXd out(n_);
  for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
    const int nb = blocks_[bi];
    const int off = offsets_[bi];
    if (plans_->forward[bi] == nullptr) {
      out.segment(off, nb) = dense_[bi] * x.segment(off, nb);
    } else {
      Eigen::VectorXd in = x.segment(off, nb);
      Eigen::VectorXd raw(nb);
      fftw_execute_r2r(plans_->forward[bi], in.data(), raw.data());
      // REDFT10 returns 2 * sum_j x_j cos(pi (2j+1) k / 2N); orthonormalize.
      const double s0 = std::sqrt(1.0 / (4.0 * nb));
      const double sk = std::sqrt(1.0 / (2.0 * nb));
      out(off) = raw(0) * s0;
      for (int k = 1; k < nb; ++k) out(off + k) = raw(k) * sk;
    }
  }
  return out;
}

Eigen::VectorXd DctBasis::synthesize(const Eigen::VectorXd& y) const {
  if (y.size() != n_) throw invalid_input_error("DctBasis::synthesize: size mismatch");
  Eigen::VectorXd out(n_);
  for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
    const int nb = blocks_[bi];
    const int off = offsets_[bi];
    if (plans_->backward[bi] == nullptr) {
      out.segment(off, nb) = dense_[bi].transpose() * y.segment(off, nb);
    } else {
      Eigen::VectorXd in(nb);
      const double s0 = std::sqrt(1.0 / nb);
      const double sk = std::sqrt(2.0 / nb);
      in(0) = y(off) * s0;
      for (int k = 1; k < nb; ++k) in(k) = y(off + k) * sk * 0.5;
      Eigen::VectorXd raw(nb);
      fftw_execute_r2r(plans_->backward[bi], in.data(), raw.data());
      out.segment(off, nb) = raw;
    }
  }
  return out;
}

std::shared_ptr<const LeafBasis> make_leaf_basis(const std::string& kind,
                                                 const std::vector<int>& block_sizes) {
  int n = 0;
  for (int b : block_sizes) n += b;
  if (kind == "kronecker") return std::make_shared<KroneckerBasis>(n);
  if (kind == "dct") return std::make_shared<DctBasis>(block_sizes);
  throw invalid_input_error("unknown leaf basis kind: " + kind);
}

}  // namespace romsieve
