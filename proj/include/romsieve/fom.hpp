#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace romsieve {

/// A time sequence of algebraic systems r^k(x) = 0, k = 1..T. Implicit
/// integrators couple consecutive steps through set_previous_state. The
/// quantity of interest defaults to the mean of the state, g(x) = mean(x);
/// its gradient drives the dual-weighted-residual indicators.
class FomProblem {
 public:
  virtual ~FomProblem() = default;

  virtual int dimension() const = 0;
  virtual int num_steps() const = 0;
  virtual Eigen::VectorXd initial_state() const {
    return Eigen::VectorXd::Zero(dimension());
  }
  virtual void set_previous_state(const Eigen::VectorXd& x) = 0;

  virtual Eigen::VectorXd residual(const Eigen::VectorXd& x, int step) const = 0;
  virtual Eigen::SparseMatrix<double> jacobian(const Eigen::VectorXd& x, int step) const = 0;
  virtual Eigen::VectorXd qoi_gradient(const Eigen::VectorXd& x) const {
    return Eigen::VectorXd::Constant(dimension(), 1.0 / dimension());
  }
};

/// Single-step linear system r(x) = A x - b; the elliptic special case of the
/// FOM interface. Used by the convergence checks and the verification suite.
class LinearFom final : public FomProblem {
 public:
  LinearFom(Eigen::MatrixXd a, Eigen::VectorXd b) : a_(std::move(a)), b_(std::move(b)) {}

  int dimension() const override { return static_cast<int>(a_.rows()); }
  int num_steps() const override { return 1; }
  void set_previous_state(const Eigen::VectorXd&) override {}
  Eigen::VectorXd residual(const Eigen::VectorXd& x, int) const override { return a_ * x - b_; }
  Eigen::SparseMatrix<double> jacobian(const Eigen::VectorXd&, int) const override {
    return a_.sparseView();
  }
  const Eigen::MatrixXd& matrix() const { return a_; }
  const Eigen::VectorXd& rhs() const { return b_; }

 private:
  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
};

}  // namespace romsieve
