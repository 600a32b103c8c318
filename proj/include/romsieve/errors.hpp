#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace romsieve {

struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct invalid_input_error : error {
  using error::error;
};

struct not_psd_error : error {
  using error::error;
};

struct singular_system_error : error {
  using error::error;
};

struct invariant_error : error {
  using error::error;
};

struct not_dominated_error : error {
  using error::error;
};

struct invalid_decomposition_error : error {
  using error::error;
};

struct conditioning_error : error {
  using error::error;
};

/// Newton ran out of iterations; carries the last iterate so callers can
/// proceed with it (the fixed-basis runs do exactly that).
struct nonconvergence_error : error {
  nonconvergence_error(std::string msg, Eigen::VectorXd iterate, double residual)
      : error(std::move(msg)), last_iterate(std::move(iterate)), residual_norm(residual) {}
  Eigen::VectorXd last_iterate;
  double residual_norm;
};

}  // namespace romsieve
