#pragma once

#include <Eigen/Dense>
#include <vector>

namespace homent {

/// y_t = sum_p A_p y_{t-p} + B0 eps_t.
struct VarSpec {
  std::vector<Eigen::MatrixXd> A;  // A_1..A_P, each n x n
  Eigen::MatrixXd B0;

  Eigen::Index dim() const { return B0.rows(); }
  std::size_t lags() const { return A.size(); }
};

/// Spectral radius of the companion matrix (0 when P = 0).
double companion_spectral_radius(const VarSpec& spec);

inline constexpr Eigen::Index kDefaultBurnIn = 200;

/// Runs the recursion from zero initial states over all rows of `shocks`
/// and drops the first burn_in rows. Throws InvalidArgument for
/// non-stationary specs.
Eigen::MatrixXd simulate_var(const VarSpec& spec, const Eigen::MatrixXd& shocks, Eigen::Index burn_in = kDefaultBurnIn);

struct VarFit {
  std::vector<Eigen::MatrixXd> A;
  Eigen::VectorXd intercept;  // empty without an intercept
  Eigen::MatrixXd residuals;  // (T - P) x n
};

/// Equation-by-equation least squares of y_t on y_{t-1}..y_{t-P}.
VarFit ols_var(const Eigen::MatrixXd& Y, std::size_t P, bool intercept = false);

}  // namespace homent
