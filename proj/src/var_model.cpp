#include "homent/var_model.hpp"

#include <Eigen/Eigenvalues>

#include "homent/errors.hpp"

namespace homent {

namespace {

void check_spec(const VarSpec& spec) {
  const Eigen::Index n = spec.dim();
  if (n < 1 || spec.B0.cols() != n) throw InvalidArgument("VAR spec: B0 must be square");
  for (const auto& A : spec.A)
    if (A.rows() != n || A.cols() != n) throw InvalidArgument("VAR spec: lag matrices must be n x n");
}

}  // namespace

double companion_spectral_radius(const VarSpec& spec) {
  check_spec(spec);
  const Eigen::Index n = spec.dim();
  const auto P = static_cast<Eigen::Index>(spec.lags());
  if (P == 0) return 0.0;
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(n * P, n * P);
  for (Eigen::Index p = 0; p < P; ++p) F.block(0, p * n, n, n) = spec.A[static_cast<std::size_t>(p)];
  if (P > 1) F.block(n, 0, n * (P - 1), n * (P - 1)).setIdentity();
  return Eigen::EigenSolver<Eigen::MatrixXd>(F, false).eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::MatrixXd simulate_var(const VarSpec& spec, const Eigen::MatrixXd& shocks, Eigen::Index burn_in) {
  check_spec(spec);
  const Eigen::Index n = spec.dim();
  if (shocks.cols() != n) throw InvalidArgument("simulate_var: shock panel has the wrong width");
  if (burn_in < 0 || burn_in >= shocks.rows()) throw InvalidArgument("simulate_var: burn_in must be in [0, rows)");
  if (companion_spectral_radius(spec) >= 1.0) throw InvalidArgument("simulate_var: VAR is not stationary");
  const Eigen::Index total = shocks.rows();
  Eigen::MatrixXd y(total, n);
  const Eigen::MatrixXd u = shocks * spec.B0.transpose();
  for (Eigen::Index t = 0; t < total; ++t) {
    Eigen::RowVectorXd row = u.row(t);
    for (std::size_t p = 1; p <= spec.lags(); ++p) {
      const Eigen::Index s = t - static_cast<Eigen::Index>(p);
      if (s < 0) break;
      row += y.row(s) * spec.A[p - 1].transpose();
    }
    y.row(t) = row;
  }
  return y.bottomRows(total - burn_in);
}

VarFit ols_var(const Eigen::MatrixXd& Y, std::size_t P, bool intercept) {
  const Eigen::Index T = Y.rows();
  const Eigen::Index n = Y.cols();
  const auto lags = static_cast<Eigen::Index>(P);
  if (n < 1) throw InvalidArgument("ols_var: empty panel");
  if (T <= n * lags + 1) throw InvalidArgument("ols_var: too few observations for the lag order");
  VarFit out;
  if (P == 0 && !intercept) {
    out.residuals = Y;
    return out;
  }
  const Eigen::Index rows = T - lags;
  const Eigen::Index k = n * lags + (intercept ? 1 : 0);
  Eigen::MatrixXd X(rows, k);
  for (Eigen::Index p = 0; p < lags; ++p) X.block(0, p * n, rows, n) = Y.block(lags - 1 - p, 0, rows, n);
  if (intercept) X.col(k - 1).setOnes();
  const Eigen::MatrixXd Yt = Y.bottomRows(rows);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < k) throw InvalidArgument("ols_var: regressor matrix is rank deficient");
  const Eigen::MatrixXd Pi = qr.solve(Yt);
  for (Eigen::Index p = 0; p < lags; ++p) out.A.push_back(Pi.block(p * n, 0, n, n).transpose());
  if (intercept) out.intercept = Pi.row(k - 1).transpose();
  out.residuals = Yt - X * Pi;
  return out;
}

}  // namespace homent
