#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "homent/moment_index.hpp"
#include "homent/shock_dgps.hpp"
#include "homent/svar_core.hpp"

namespace homent {

/// Information set behind an estimate of S or G.
enum class Basis { SI, SMI, TRUE };

std::string basis_name(Basis b);
Basis parse_basis(const std::string& s);

/// Uncentered sample covariance (1/T) sum_t f_t f_t' of the moment functions.
Eigen::MatrixXd s_si(const Eigen::MatrixXd& B, const ShockPanel& U, const MomentSystem& sys);
Eigen::MatrixXd s_si(const MomentEvaluator& ev, const Eigen::MatrixXd& e);

/// Covariance of the moment functions implied by serially and mutually
/// independent shocks with the given univariate moments:
///   prod E[eps^{m+m~}] - c prod E[eps^{m~}] - c~ prod E[eps^{m}] + c c~.
Eigen::MatrixXd s_smi(const UnivariateMomentTable& moments, const MomentSystem& sys);

/// s_smi fed with sample moments (orders 0..6) of the innovations at B.
Eigen::MatrixXd s_smi_empirical(const Eigen::MatrixXd& B, const ShockPanel& U, const MomentSystem& sys);
Eigen::MatrixXd s_smi_empirical(const MomentSystem& sys, const Eigen::MatrixXd& e);

/// Sample Jacobian of g_T at B (same values as moment_jacobian).
Eigen::MatrixXd g_empirical(const Eigen::MatrixXd& B, const ShockPanel& U, const MomentSystem& sys);

/// Expected Jacobian at B when the innovations are independent with the
/// given univariate moments (orders 0..5 are used).
Eigen::MatrixXd g_smi(const Eigen::MatrixXd& B, const UnivariateMomentTable& moments, const MomentSystem& sys);

/// g_smi with sample moments of the innovations at B.
Eigen::MatrixXd g_smi_empirical(const Eigen::MatrixXd& B, const ShockPanel& U, const MomentSystem& sys);

/// Population S at the true B0 for a shock model. Uses exact joint moments,
/// so it remains valid when shocks share a volatility process.
Eigen::MatrixXd s_true(const ShockModel& model, const MomentSystem& sys);

/// Population Jacobian at B0 for a shock model.
Eigen::MatrixXd g_true(const Eigen::MatrixXd& B0, const ShockModel& model, const MomentSystem& sys);

/// Exact population quantities of f(B, u) for u = B0 eps.
///
/// The innovations e(B) = B^{-1} B0 eps are expanded as polynomials in the
/// shocks and integrated against the joint moments of the shock model.
class PopulationMomentFunctions {
 public:
  PopulationMomentFunctions(Eigen::MatrixXd B0, ShockModel model, MomentSystem sys);

  /// E[f(B, u_t)] (length K).
  Eigen::VectorXd mean(const Eigen::MatrixXd& B) const;
  /// S(B) = E[f(B, u_t) f(B, u_t)'] (K x K, uncentered).
  Eigen::MatrixXd second_moment(const Eigen::MatrixXd& B) const;

  const MomentSystem& system() const { return sys_; }

 private:
  double expectation(const Eigen::MatrixXd& C, const std::vector<int>& powers) const;

  Eigen::MatrixXd B0_;
  PopulationMoments pop_;
  MomentSystem sys_;
};

/// Smallest eigenvalue kept when inverting a symmetric PSD matrix, relative
/// to the largest one.
inline constexpr double kEigenFloorRelative = 1e-10;
inline constexpr double kEigenFloorAbsolute = 1e-12;

struct FlooredInverse {
  Eigen::MatrixXd inverse;
  bool floored = false;  // some eigenvalue was raised to the floor
};

/// Inverse through a symmetric eigendecomposition with eigenvalues floored at
/// max(1e-10 * lambda_max, 1e-12).
FlooredInverse floored_inverse(const Eigen::MatrixXd& S);

/// Population moment tables cached as JSON under a directory, keyed by the
/// canonical form of the distribution.
class MomentCache {
 public:
  explicit MomentCache(std::filesystem::path dir);

  /// Cache at $HOMENT_CACHE_DIR, if set.
  static std::optional<MomentCache> from_environment();

  std::vector<double> population_moments(const ShockDistribution& d, int max_order = 8) const;
  const std::filesystem::path& file() const { return file_; }

 private:
  std::filesystem::path file_;
};

/// Canonical string for a distribution, e.g. "student_t(dof=9)".
std::string canonical_key(const ShockDistribution& d);

}  // namespace homent
