#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <functional>

#include "romsieve/fom.hpp"

namespace romsieve {

/// FitzHugh--Nagumo on [0, L], node-centered grid of `grid_points` points
/// (h = L/(grid_points-1)), Neumann boundaries via second-order ghost points,
/// stimulus entering through the left boundary. State layout
/// [v_1..v_N, w_1..w_N], backward Euler in time.
struct FhnParams {
  double length = 1.0;
  double eps = 0.015;
  double b = 0.5;
  double c = 0.05;
  double gamma = 2.0;
  int grid_points = 512;
  double dt = 0.008;
  double t_end = 8.0;

  int n() const { return 2 * grid_points; }
  int steps() const { return static_cast<int>(t_end / dt + 0.5); }
};

class FhnProblem final : public FomProblem {
 public:
  explicit FhnProblem(FhnParams params = {});

  int dimension() const override { return params_.n(); }
  int num_steps() const override { return params_.steps(); }
  void set_previous_state(const Eigen::VectorXd& x) override { x_prev_ = x; }
  Eigen::VectorXd residual(const Eigen::VectorXd& x, int step) const override;
  Eigen::SparseMatrix<double> jacobian(const Eigen::VectorXd& x, int step) const override;

  const FhnParams& params() const { return params_; }
  double stimulus(double t) const { return 50000.0 * t * t * t * std::exp(-15.0 * t); }
  static double reaction(double v) { return v * (v - 0.1) * (1.0 - v); }
  static double reaction_deriv(double v) { return -3.0 * v * v + 2.2 * v - 0.1; }

 private:
  FhnParams params_;
  Eigen::VectorXd x_prev_;
};

/// Nonlinear transmission line: n nodes, tridiagonal linear coupling plus
/// exponential diode terms, current input u(t) into node 1, backward Euler.
struct NtlParams {
  int nodes = 100;
  double dt = 0.01;
  double t_end = 10.0;
  double diode_gain = 40.0;

  int steps() const { return static_cast<int>(t_end / dt + 0.5); }
};

enum class NtlInput { train, test };

class NtlProblem final : public FomProblem {
 public:
  explicit NtlProblem(NtlInput input, NtlParams params = {});
  /// Custom input signal (tests and experiments).
  NtlProblem(std::function<double(double)> input, NtlParams params = {});

  int dimension() const override { return params_.nodes; }
  int num_steps() const override { return params_.steps(); }
  void set_previous_state(const Eigen::VectorXd& x) override { x_prev_ = x; }
  Eigen::VectorXd residual(const Eigen::VectorXd& x, int step) const override;
  Eigen::SparseMatrix<double> jacobian(const Eigen::VectorXd& x, int step) const override;

  double input(double t) const;
  Eigen::VectorXd velocity(const Eigen::VectorXd& x) const;  // f(x), no input term
  const NtlParams& params() const { return params_; }
  /// Times the exp argument hit the overflow clamp; nonzero values flag a
  /// run that left the model's intended regime.
  long clamp_count() const { return clamp_count_; }

 private:
  double safe_exp(double arg) const;
  NtlParams params_;
  NtlInput input_ = NtlInput::train;
  std::function<double(double)> custom_input_;
  Eigen::VectorXd x_prev_;
  mutable long clamp_count_ = 0;
};

/// Integrate the FOM over all steps with a sparse-LU Newton per step.
/// Returns the n x T trajectory (column k-1 is x^k).
Eigen::MatrixXd run_fom(FomProblem& fom, double tol = 1e-10, int max_newton = 25);

struct TrainingData {
  Eigen::MatrixXd phi0;             // n x p0, leading left singular vectors
  Eigen::MatrixXd snapshots;        // n x q
  Eigen::VectorXd singular_values;  // full spectrum of the snapshot matrix
};

/// Integrate q steps and take the leading p0 POD modes of the snapshots.
TrainingData generate_initial_basis(FomProblem& fom, int q, int p0);

}  // namespace romsieve
