#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "homent/covariance_estimators.hpp"
#include "homent/estimators.hpp"

namespace homent {

/// Sandwich M S M' with M = (G' W G)^{-1} G' W, for sqrt(T)(vec B_hat - vec B0).
struct AsymptoticCovariance {
  Eigen::MatrixXd matrix;  // n^2 x n^2
  Basis basis = Basis::SMI;
  Eigen::Index sample_size = 0;
  bool floored = false;  // S inverse needed eigenvalue flooring

  /// Variance of one coefficient estimate, matrix(i,i)/T.
  double coefficient_variance(Eigen::Index i) const {
    return matrix(i, i) / static_cast<double>(sample_size);
  }
};

/// Throws UnidentifiedModelError when G has deficient column rank.
AsymptoticCovariance asymptotic_covariance(const Eigen::MatrixXd& G, const Eigen::MatrixXd& S,
                                           const Eigen::MatrixXd& W, Eigen::Index T, Basis basis = Basis::SMI);

/// Efficient covariance (G' S^{-1} G)^{-1}.
Eigen::MatrixXd efficient_covariance(const Eigen::MatrixXd& G, const Eigen::MatrixXd& S);

/// Covariance of vec(B P) given that of vec(B) for a signed column permutation.
Eigen::MatrixXd permute_covariance(const Eigen::MatrixXd& V, const std::vector<int>& perm, const std::vector<int>& sign);

struct WaldTest {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  bool floored = false;  // R V R' needed eigenvalue flooring
};

/// T (R b - r)' [R V R']^{-1} (R b - r), chi-square(rows of R) reference.
WaldTest wald(const Eigen::MatrixXd& R, const Eigen::VectorXd& r, const Eigen::VectorXd& beta_hat,
              const Eigen::MatrixXd& avar, Eigen::Index T);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  bool contains(double x) const { return lower <= x && x <= upper; }
};

/// beta_i -/+ z_{(1+level)/2} sqrt(avar_ii / T).
Interval confidence_interval(Eigen::Index coefficient, const Eigen::MatrixXd& avar, const Eigen::VectorXd& beta_hat,
                             Eigen::Index T, double level = 0.90);

/// S_hat, G_hat and the sandwich at an estimate.
struct Inference {
  Basis basis = Basis::SMI;
  Eigen::MatrixXd S_hat;
  Eigen::MatrixXd G_hat;
  AsymptoticCovariance avar;
};

/// SMI: s_smi_empirical and g_smi with sample moments at B_hat.
/// SI: s_si and the sample Jacobian at B_hat.
/// TRUE: population S and G of `truth` with the innovations at B_hat.
Inference infer(const EstimateResult& est, const ShockPanel& U, const MomentEvaluator& ev, Basis basis,
                const ShockModel* truth = nullptr);

/// Restriction R vec(B) = r on the coefficients.
struct Restriction {
  std::string name;
  Eigen::MatrixXd R;
  Eigen::VectorXd r;
};

/// Single coefficient b_{row,col} (zero-based) equal to value.
Restriction coefficient_restriction(std::string name, Eigen::Index n, Eigen::Index row, Eigen::Index col, double value);
/// All coefficients equal to B.
Restriction full_restriction(std::string name, const Eigen::MatrixXd& B);
/// Every strictly upper-triangular coefficient equal to zero.
Restriction recursive_restriction(std::string name, Eigen::Index n);

}  // namespace homent
