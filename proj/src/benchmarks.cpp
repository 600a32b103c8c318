#include "romsieve/benchmarks.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <vector>

#include "romsieve/dense.hpp"
#include "romsieve/errors.hpp"

namespace romsieve {

FhnProblem::FhnProblem(FhnParams params) : params_(params) {
  x_prev_ = Eigen::VectorXd::Zero(params_.n());
}

Eigen::VectorXd FhnProblem::residual(const Eigen::VectorXd& x, int step) const {
  const int N = params_.grid_points;
  const double h = params_.length / (N - 1);
  const double dt = params_.dt;
  const double t = step * dt;
  const double eps = params_.eps;
  const double i0 = stimulus(t);

  Eigen::VectorXd r(2 * N);
  for (int i = 0; i < N; ++i) {
    const double v = x(i);
    const double w = x(N + i);
    double vxx;
    if (i == 0) {
      vxx = 2.0 * (x(1) - x(0)) / (h * h) + 2.0 * i0 / h;
    } else if (i == N - 1) {
      vxx = 2.0 * (x(N - 2) - x(N - 1)) / (h * h);
    } else {
      vxx = (x(i - 1) - 2.0 * v + x(i + 1)) / (h * h);
    }
    // eps v_t = eps^2 v_xx + f(v) - w + c
    const double vdot = eps * vxx + (reaction(v) - w + params_.c) / eps;
    const double wdot = params_.b * v - params_.gamma * w + params_.c;
    r(i) = v - x_prev_(i) - dt * vdot;
    r(N + i) = w - x_prev_(N + i) - dt * wdot;
  }
  return r;
}

Eigen::SparseMatrix<double> FhnProblem::jacobian(const Eigen::VectorXd& x, int) const {
  const int N = params_.grid_points;
  const double h = params_.length / (N - 1);
  const double dt = params_.dt;
  const double eps = params_.eps;
  const double diff = dt * eps / (h * h);

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(5 * N);
  for (int i = 0; i < N; ++i) {
    const double fp = reaction_deriv(x(i));
    double diag = 1.0 - dt * fp / eps;
    if (i == 0) {
      diag += 2.0 * diff;
      trip.emplace_back(0, 1, -2.0 * diff);
    } else if (i == N - 1) {
      diag += 2.0 * diff;
      trip.emplace_back(N - 1, N - 2, -2.0 * diff);
    } else {
      diag += 2.0 * diff;
      trip.emplace_back(i, i - 1, -diff);
      trip.emplace_back(i, i + 1, -diff);
    }
    trip.emplace_back(i, i, diag);
    trip.emplace_back(i, N + i, dt / eps);
    trip.emplace_back(N + i, i, -dt * params_.b);
    trip.emplace_back(N + i, N + i, 1.0 + dt * params_.gamma);
  }
  Eigen::SparseMatrix<double> j(2 * N, 2 * N);
  j.setFromTriplets(trip.begin(), trip.end());
  return j;
}

NtlProblem::NtlProblem(NtlInput input, NtlParams params) : params_(params), input_(input) {
  x_prev_ = Eigen::VectorXd::Zero(params_.nodes);
}

NtlProblem::NtlProblem(std::function<double(double)> input, NtlParams params)
    : params_(params), custom_input_(std::move(input)) {
  x_prev_ = Eigen::VectorXd::Zero(params_.nodes);
}

double NtlProblem::input(double t) const {
  if (custom_input_) return custom_input_(t);
  if (input_ == NtlInput::train) return 1.0 - t / 50.0;
  return 0.5 * (std::cos(2.0 * M_PI * t / 10.0) + 1.0);
}

double NtlProblem::safe_exp(double arg) const {
  if (arg > 700.0) {
    ++clamp_count_;
    arg = 700.0;
  }
  return std::exp(arg);
}

Eigen::VectorXd NtlProblem::velocity(const Eigen::VectorXd& x) const {
  const int n = params_.nodes;
  const double g = params_.diode_gain;
  Eigen::VectorXd f(n);
  for (int i = 0; i < n; ++i) {
    double lin = -2.0 * x(i);
    if (i > 0) lin += x(i - 1);
    if (i + 1 < n) lin += x(i + 1);
    f(i) = lin;
  }
  f(0) += 2.0 - safe_exp(g * x(0)) - safe_exp(g * (x(0) - x(1)));
  for (int i = 1; i + 1 < n; ++i) {
    f(i) += safe_exp(g * (x(i - 1) - x(i))) - safe_exp(g * (x(i) - x(i + 1)));
  }
  f(n - 1) += safe_exp(g * (x(n - 2) - x(n - 1))) - 1.0;
  return f;
}

Eigen::VectorXd NtlProblem::residual(const Eigen::VectorXd& x, int step) const {
  const double t = step * params_.dt;
  Eigen::VectorXd r = x - x_prev_ - params_.dt * velocity(x);
  r(0) -= params_.dt * input(t);
  return r;
}

Eigen::SparseMatrix<double> NtlProblem::jacobian(const Eigen::VectorXd& x, int) const {
  const int n = params_.nodes;
  const double g = params_.diode_gain;
  const double dt = params_.dt;

  // df/dx = tridiagonal(-2, 1) plus the diode terms.
  Eigen::MatrixXd band = Eigen::MatrixXd::Zero(n, 3);  // sub, diag, super
  for (int i = 0; i < n; ++i) {
    band(i, 1) = -2.0;
    if (i > 0) band(i, 0) = 1.0;
    if (i + 1 < n) band(i, 2) = 1.0;
  }
  band(0, 1) += -g * safe_exp(g * x(0)) - g * safe_exp(g * (x(0) - x(1)));
  band(0, 2) += g * safe_exp(g * (x(0) - x(1)));
  for (int i = 1; i + 1 < n; ++i) {
    const double left = safe_exp(g * (x(i - 1) - x(i)));
    const double right = safe_exp(g * (x(i) - x(i + 1)));
    band(i, 0) += g * left;
    band(i, 1) += -g * left - g * right;
    band(i, 2) += g * right;
  }
  const double last = safe_exp(g * (x(n - 2) - x(n - 1)));
  band(n - 1, 0) += g * last;
  band(n - 1, 1) += -g * last;

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(3 * n);
  for (int i = 0; i < n; ++i) {
    if (i > 0) trip.emplace_back(i, i - 1, -dt * band(i, 0));
    trip.emplace_back(i, i, 1.0 - dt * band(i, 1));
    if (i + 1 < n) trip.emplace_back(i, i + 1, -dt * band(i, 2));
  }
  Eigen::SparseMatrix<double> j(n, n);
  j.setFromTriplets(trip.begin(), trip.end());
  return j;
}

Eigen::MatrixXd run_fom(FomProblem& fom, double tol, int max_newton) {
  const int n = fom.dimension();
  const int T = fom.num_steps();
  Eigen::MatrixXd traj(n, T);
  Eigen::VectorXd x = fom.initial_state();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  for (int k = 1; k <= T; ++k) {
    fom.set_previous_state(x);
    bool done = false;
    for (int it = 0; it <= max_newton; ++it) {
      const Eigen::VectorXd r = fom.residual(x, k);
      if (r.norm() <= tol) {
        done = true;
        break;
      }
      if (it == max_newton) break;
      lu.compute(fom.jacobian(x, k));
      if (lu.info() != Eigen::Success) {
        throw singular_system_error("run_fom: singular Jacobian at step " + std::to_string(k));
      }
      x -= lu.solve(r);
    }
    if (!done) {
      throw nonconvergence_error("run_fom: Newton stalled at step " + std::to_string(k), x,
                                 fom.residual(x, k).norm());
    }
    traj.col(k - 1) = x;
  }
  return traj;
}

TrainingData generate_initial_basis(FomProblem& fom, int q, int p0) {
  if (q > fom.num_steps()) {
    throw invalid_input_error("generate_initial_basis: q exceeds the number of steps");
  }
  const int n = fom.dimension();
  Eigen::MatrixXd snapshots(n, q);
  Eigen::VectorXd x = fom.initial_state();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  for (int k = 1; k <= q; ++k) {
    fom.set_previous_state(x);
    for (int it = 0; it < 25; ++it) {
      const Eigen::VectorXd r = fom.residual(x, k);
      if (r.norm() <= 1e-10) break;
      lu.compute(fom.jacobian(x, k));
      if (lu.info() != Eigen::Success) {
        throw singular_system_error("generate_initial_basis: singular Jacobian");
      }
      x -= lu.solve(r);
    }
    snapshots.col(k - 1) = x;
  }
  TrainingData out;
  out.snapshots = snapshots;
  const ThinSvd svd = thin_svd(snapshots);
  if (p0 > svd.sigma.size()) {
    throw invalid_input_error("generate_initial_basis: p0 exceeds the snapshot rank bound");
  }
  out.phi0 = svd.u.leftCols(p0);
  out.singular_values = svd.sigma;
  return out;
}

}  // namespace romsieve
