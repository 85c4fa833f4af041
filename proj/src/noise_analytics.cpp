#include "homent/noise_analytics.hpp"

#include <cmath>

#include "homent/errors.hpp"

namespace homent {

LossSplit expected_loss_split(const Eigen::MatrixXd& W, const Eigen::VectorXd& Ef, const Eigen::MatrixXd& S,
                              Eigen::Index T) {
  if (T < 1) throw InvalidArgument("expected_loss_split: T must be positive");
  if (W.rows() != Ef.size() || S.rows() != Ef.size()) throw InvalidArgument("expected_loss_split: size mismatch");
  const double t = static_cast<double>(T);
  return {(1.0 - 1.0 / t) * Ef.dot(W * Ef), (W * S).trace() / t};
}

Eigen::VectorXd scaling_factors(const MomentSystem& sys, const Eigen::VectorXd& d) {
  if (d.size() != static_cast<Eigen::Index>(sys.dim())) throw InvalidArgument("scaling_factors: dimension mismatch");
  if ((d.array() <= 0.0).any()) throw InvalidArgument("scaling_factors: scales must be positive");
  Eigen::VectorXd out(static_cast<Eigen::Index>(sys.size()));
  for (std::size_t k = 0; k < sys.size(); ++k) {
    double p = 1.0;
    for (std::size_t i = 0; i < sys.dim(); ++i) p *= std::pow(d(static_cast<Eigen::Index>(i)), sys[k][i]);
    out(static_cast<Eigen::Index>(k)) = 1.0 / p;
  }
  return out;
}

NoiseDecomposition noise_decomposition(const Eigen::MatrixXd& W, const Eigen::VectorXd& d, const MomentSystem& sys,
                                       const Eigen::MatrixXd& S_unscaled, const Eigen::VectorXd& Ef_unscaled,
                                       Eigen::Index T) {
  const auto K = static_cast<Eigen::Index>(sys.size());
  if (W.rows() != K || S_unscaled.rows() != K || Ef_unscaled.size() != K)
    throw InvalidArgument("noise_decomposition: size mismatch");
  if (T < 1) throw InvalidArgument("noise_decomposition: T must be positive");
  const double t = static_cast<double>(T);
  const Eigen::VectorXd Dt = scaling_factors(sys, d);
  Eigen::VectorXd c(K);
  for (Eigen::Index k = 0; k < K; ++k) c(k) = sys.constants()[static_cast<std::size_t>(k)];
  const Eigen::VectorXd shift = (Dt.array() - 1.0).matrix().cwiseProduct(c);

  NoiseDecomposition out;
  out.term_quadratic = (Dt.asDiagonal() * W * Dt.asDiagonal() * S_unscaled).trace() / t;
  out.term_cross = 2.0 * shift.dot(W * Dt.cwiseProduct(Ef_unscaled)) / t;
  out.term_constant = shift.dot(W * shift) / t;
  return out;
}

std::vector<double> noise_gradient_at_identity(const MomentSystem& sys, Eigen::Index T) {
  if (T < 1) throw InvalidArgument("noise_gradient_at_identity: T must be positive");
  std::vector<double> out(sys.dim(), 0.0);
  for (std::size_t l = 0; l < sys.dim(); ++l) {
    int total = 0;
    for (std::size_t k = 0; k < sys.size(); ++k) total += sys[k][l];
    out[l] = -2.0 * total / static_cast<double>(T);
  }
  return out;
}

}  // namespace homent
