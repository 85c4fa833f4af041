#include "homent/inference.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "homent/errors.hpp"

namespace homent {

namespace {

Eigen::MatrixXd clip_negative(const Eigen::MatrixXd& V) {
  const Eigen::MatrixXd sym = 0.5 * (V + V.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) return sym;
  if (eig.eigenvalues().minCoeff() >= 0.0) return sym;
  const Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0);
  Eigen::MatrixXd out = eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

Eigen::MatrixXd information_inverse(const Eigen::MatrixXd& H) {
  const Eigen::MatrixXd sym = 0.5 * (H + H.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw UnidentifiedModelError("G' W G could not be decomposed");
  const double top = eig.eigenvalues().maxCoeff();
  if (!(top > 0.0) || eig.eigenvalues().minCoeff() <= 1e-12 * top)
    throw UnidentifiedModelError("G does not have full column rank");
  return eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

AsymptoticCovariance asymptotic_covariance(const Eigen::MatrixXd& G, const Eigen::MatrixXd& S,
                                           const Eigen::MatrixXd& W, Eigen::Index T, Basis basis) {
  const Eigen::Index K = G.rows();
  if (S.rows() != K || S.cols() != K || W.rows() != K || W.cols() != K)
    throw InvalidArgument("asymptotic_covariance: S, W and G are not conformable");
  if (T < 1) throw InvalidArgument("asymptotic_covariance: T must be positive");
  const Eigen::MatrixXd Hinv = information_inverse(G.transpose() * W * G);
  const Eigen::MatrixXd M = Hinv * G.transpose() * W;
  AsymptoticCovariance out;
  out.matrix = clip_negative(M * S * M.transpose());
  out.basis = basis;
  out.sample_size = T;
  out.floored = floored_inverse(S).floored;
  return out;
}

Eigen::MatrixXd efficient_covariance(const Eigen::MatrixXd& G, const Eigen::MatrixXd& S) {
  return information_inverse(G.transpose() * floored_inverse(S).inverse * G);
}

Eigen::MatrixXd permute_covariance(const Eigen::MatrixXd& V, const std::vector<int>& perm, const std::vector<int>& sign) {
  const auto n = static_cast<Eigen::Index>(perm.size());
  if (V.rows() != n * n) throw InvalidArgument("permute_covariance: dimension mismatch");
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n * n, n * n);
  for (Eigen::Index j = 0; j < n; ++j)
    Q.block(j * n, perm[static_cast<std::size_t>(j)] * n, n, n) =
        sign[static_cast<std::size_t>(j)] * Eigen::MatrixXd::Identity(n, n);
  return Q * V * Q.transpose();
}

WaldTest wald(const Eigen::MatrixXd& R, const Eigen::VectorXd& r, const Eigen::VectorXd& beta_hat,
              const Eigen::MatrixXd& avar, Eigen::Index T) {
  if (R.rows() < 1 || R.rows() != r.size() || R.cols() != beta_hat.size() || avar.rows() != beta_hat.size())
    throw InvalidArgument("wald: restriction is not conformable");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(R.transpose());
  if (qr.rank() < R.rows()) throw InvalidArgument("wald: restriction matrix must have full row rank");
  const Eigen::VectorXd d = R * beta_hat - r;
  const FlooredInverse inv = floored_inverse(R * avar * R.transpose());
  WaldTest out;
  out.statistic = std::max(0.0, static_cast<double>(T) * d.dot(inv.inverse * d));
  out.dof = static_cast<int>(R.rows());
  out.floored = inv.floored;
  const boost::math::chi_squared_distribution<double> chi(out.dof);
  out.p_value = std::isfinite(out.statistic) ? boost::math::cdf(boost::math::complement(chi, out.statistic)) : 0.0;
  return out;
}

Interval confidence_interval(Eigen::Index coefficient, const Eigen::MatrixXd& avar, const Eigen::VectorXd& beta_hat,
                             Eigen::Index T, double level) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("confidence_interval: level must lie in (0,1)");
  if (coefficient < 0 || coefficient >= beta_hat.size()) throw InvalidArgument("confidence_interval: bad coefficient");
  const boost::math::normal_distribution<double> normal;
  const double z = boost::math::quantile(normal, 0.5 * (1.0 + level));
  const double half = z * std::sqrt(std::max(0.0, avar(coefficient, coefficient)) / static_cast<double>(T));
  return {beta_hat(coefficient) - half, beta_hat(coefficient) + half};
}

Inference infer(const EstimateResult& est, const ShockPanel& U, const MomentEvaluator& ev, Basis basis,
                const ShockModel* truth) {
  const auto& sys = ev.system();
  Inference out;
  out.basis = basis;
  switch (basis) {
    case Basis::SMI: {
      const Eigen::MatrixXd e = innovations(est.B_hat, U);
      out.S_hat = s_smi_empirical(sys, e);
      out.G_hat = g_smi(est.B_hat, sample_moment_table(e, sys.max_exponent() + 1), sys);
      break;
    }
    case Basis::SI: {
      const Eigen::MatrixXd A = checked_inverse(est.B_hat);
      const Eigen::MatrixXd e = U.data() * A.transpose();
      out.S_hat = s_si(ev, e);
      out.G_hat = ev.jacobian(ev.means(e), A);
      break;
    }
    case Basis::TRUE: {
      if (truth == nullptr) throw InvalidArgument("infer: the true basis needs the shock model");
      out.S_hat = s_true(*truth, sys);
      out.G_hat = g_smi(est.B_hat, population_table(*truth, 8), sys);
      break;
    }
  }
  out.avar = asymptotic_covariance(out.G_hat, out.S_hat, est.W, U.rows(), basis);
  return out;
}

Restriction coefficient_restriction(std::string name, Eigen::Index n, Eigen::Index row, Eigen::Index col, double value) {
  if (row < 0 || row >= n || col < 0 || col >= n) throw InvalidArgument("restriction: coefficient out of range");
  Restriction out{std::move(name), Eigen::MatrixXd::Zero(1, n * n), Eigen::VectorXd::Constant(1, value)};
  out.R(0, vec_index(row, col, n)) = 1.0;
  return out;
}

Restriction full_restriction(std::string name, const Eigen::MatrixXd& B) {
  const Eigen::Index m = B.size();
  return {std::move(name), Eigen::MatrixXd::Identity(m, m), vec(B)};
}

Restriction recursive_restriction(std::string name, Eigen::Index n) {
  if (n < 2) throw InvalidArgument("recursive restriction needs n >= 2");
  const Eigen::Index rows = n * (n - 1) / 2;
  Restriction out{std::move(name), Eigen::MatrixXd::Zero(rows, n * n), Eigen::VectorXd::Zero(rows)};
  Eigen::Index k = 0;
  for (Eigen::Index col = 0; col < n; ++col)
    for (Eigen::Index row = 0; row < col; ++row) out.R(k++, vec_index(row, col, n)) = 1.0;
  return out;
}

}  // namespace homent
