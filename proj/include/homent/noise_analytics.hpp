#pragma once

#include <Eigen/Dense>
#include <vector>

#include "homent/moment_index.hpp"

namespace homent {

/// Expected GMM loss E[g_T' W g_T] for serially independent data, split into
/// signal (1 - 1/T) Ef' W Ef and noise trace(W S)/T.
struct LossSplit {
  double signal = 0.0;
  double noise = 0.0;
  double total() const { return signal + noise; }
};

LossSplit expected_loss_split(const Eigen::MatrixXd& W, const Eigen::VectorXd& Ef, const Eigen::MatrixXd& S,
                              Eigen::Index T);

/// trace(W S(B D))/T written through S(B) and E f(B) at the unscaled B.
///
/// With D~ = diag(1/prod_i d_i^{m_k,i}) and constants c, f(BD) = D~ f(B) + (D~ - I) c, so
///   quadratic = trace(D~ W D~ S(B)) / T
///   cross     = 2 c'(D~ - I) W D~ E f(B) / T
///   constant  = c'(D~ - I) W (D~ - I) c / T.
/// For diagonal W each term is a sum over conditions k of the W_kk-weighted
/// per-condition expression.
struct NoiseDecomposition {
  double term_quadratic = 0.0;
  double term_cross = 0.0;
  double term_constant = 0.0;
  double total() const { return term_quadratic + term_cross + term_constant; }
};

/// Diagonal of D~ for scales d (length n).
Eigen::VectorXd scaling_factors(const MomentSystem& sys, const Eigen::VectorXd& d);

NoiseDecomposition noise_decomposition(const Eigen::MatrixXd& W, const Eigen::VectorXd& d, const MomentSystem& sys,
                                       const Eigen::MatrixXd& S_unscaled, const Eigen::VectorXd& Ef_unscaled,
                                       Eigen::Index T);

/// Derivative of trace(W* S(B0 D))/T in d_l at D = I: -2/T sum_k m_{k,l}.
std::vector<double> noise_gradient_at_identity(const MomentSystem& sys, Eigen::Index T);

}  // namespace homent
