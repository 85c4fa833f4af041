#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "homent/covariance_estimators.hpp"
#include "homent/moment_index.hpp"
#include "homent/shock_dgps.hpp"
#include "homent/svar_core.hpp"

namespace homent {

/// How the weighting matrix of the GMM loss is obtained.
///
/// identity, fixed and true resolve to a fixed base matrix. si and smi
/// resolve to the inverse of s_si or s_smi_empirical evaluated at `reference`,
/// or, with `continuous` set, at every candidate B (the CUE objective).
/// With scale_updating the loss uses W(B) = D(B) W_base D(B).
struct WeightingSpec {
  enum class Kind { identity, fixed, si, smi, true_s };

  Kind kind = Kind::identity;
  Eigen::MatrixXd matrix;                 // fixed: the matrix; true_s: S_true
  std::optional<Eigen::MatrixXd> reference;  // si / smi evaluated at this B
  bool continuous = false;
  bool scale_updating = false;

  static WeightingSpec identity(bool scale_updating = false);
  static WeightingSpec fixed(Eigen::MatrixXd W, bool scale_updating = false);
  static WeightingSpec true_s(Eigen::MatrixXd S_true, bool scale_updating = false);
  static WeightingSpec si(Eigen::MatrixXd B_ref, bool scale_updating = false);
  static WeightingSpec smi(Eigen::MatrixXd B_ref, bool scale_updating = false);
  static WeightingSpec cue(Basis basis);

  std::string describe() const;
};

struct OptimizerOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-8;  // relative to max(1, loss)
  int max_restarts = 3;
  double restart_perturbation = 0.05;
  std::uint64_t restart_seed = 0x5eed;
};

struct EstimateResult {
  Eigen::MatrixXd B_hat;
  double loss = 0.0;
  std::string weighting;      // WeightingSpec::describe() of the final step
  Eigen::MatrixXd W_base;     // resolved base matrix (empty for CUE)
  Eigen::MatrixXd W;          // weighting at B_hat, used by the sandwich
  bool converged = false;
  int iterations = 0;
  int restarts = 0;
  double gradient_norm = 0.0;
  std::string message;
};

/// GMM loss g'Wg (or its scale-updated / continuously updated variant) with
/// its exact gradient in vec(B).
class GmmObjective {
 public:
  GmmObjective(const MomentEvaluator& ev, const ShockPanel& U, const WeightingSpec& W);

  std::size_t parameters() const { return n_ * n_; }

  /// Loss at vec(B); +inf when B is singular. Writes the gradient if asked.
  double evaluate(const Eigen::VectorXd& b, Eigen::VectorXd* gradient = nullptr) const;

  /// Weighting matrix in effect at B (K x K).
  Eigen::MatrixXd weighting_at(const Eigen::MatrixXd& B) const;

  const Eigen::MatrixXd& base() const { return W_base_; }

 private:
  double fixed_loss(const Eigen::MatrixXd& A, const Eigen::MatrixXd& e, Eigen::VectorXd* gradient) const;
  double cue_si_loss(const Eigen::MatrixXd& A, const Eigen::MatrixXd& e, Eigen::VectorXd* gradient) const;
  double cue_smi_loss(const Eigen::MatrixXd& A, const Eigen::MatrixXd& e, Eigen::VectorXd* gradient) const;

  const MomentEvaluator& ev_;
  const ShockPanel& U_;
  WeightingSpec spec_;
  Eigen::MatrixXd W_base_;
  std::size_t n_;
};

/// Lower-triangular Cholesky factor of (1/T) U'U.
Eigen::MatrixXd default_start(const ShockPanel& U);

/// Quasi-Newton minimization of the loss from `start`, with restarts from
/// perturbed starts when the run fails to converge.
EstimateResult minimize_gmm(const ShockPanel& U, const MomentEvaluator& ev, const WeightingSpec& W,
                            const Eigen::MatrixXd& start, const OptimizerOptions& opt = {});
EstimateResult minimize_gmm(const ShockPanel& U, const MomentSystem& sys, const WeightingSpec& W,
                            const Eigen::MatrixXd& start, const OptimizerOptions& opt = {});

/// Identity weighting, then W = s_si(B1)^{-1}.
EstimateResult two_step_gmm(const ShockPanel& U, const MomentEvaluator& ev, const OptimizerOptions& opt = {});
/// Identity weighting, then W = s_smi_empirical(B1)^{-1}.
EstimateResult two_step_gmm_smi(const ShockPanel& U, const MomentEvaluator& ev, const OptimizerOptions& opt = {});
/// Scale-updated identity, then scale-updated s_smi_empirical(B1)^{-1}.
EstimateResult two_step_csue(const ShockPanel& U, const MomentEvaluator& ev, const OptimizerOptions& opt = {});
/// Scale-updated identity, then scale-updated s_si(B1)^{-1}.
EstimateResult csue_si(const ShockPanel& U, const MomentEvaluator& ev, const OptimizerOptions& opt = {});
/// One step with W = S_true^{-1}.
EstimateResult gmm_star(const ShockPanel& U, const MomentEvaluator& ev, const Eigen::MatrixXd& S_true,
                        const OptimizerOptions& opt = {});
/// One step with scale-updated S_true^{-1}.
EstimateResult csue_star(const ShockPanel& U, const MomentEvaluator& ev, const Eigen::MatrixXd& S_true,
                         const OptimizerOptions& opt = {});
/// Continuously updated W(B) = S_hat(B)^{-1}, starting from the two-step estimate on the same basis.
EstimateResult cue(const ShockPanel& U, const MomentEvaluator& ev, Basis basis, const OptimizerOptions& opt = {});

/// Estimators known to the harness and the CLI.
enum class EstimatorKind { gmm_star, gmm2, gmm_smi, csue2, csue_si, csue_star, cue_si, cue_smi };

std::string estimator_name(EstimatorKind k);
EstimatorKind parse_estimator(const std::string& s);
bool needs_true_s(EstimatorKind k);
/// Basis whose S estimate the estimator uses for its efficient weighting.
Basis natural_basis(EstimatorKind k);

EstimateResult run_estimator(EstimatorKind k, const ShockPanel& U, const MomentEvaluator& ev,
                             const std::optional<Eigen::MatrixXd>& S_true = std::nullopt,
                             const OptimizerOptions& opt = {});

/// Result of normalizing the columns of an estimate.
struct SignedPermutation {
  std::vector<int> perm;   // output column j is input column perm[j]
  std::vector<int> sign;   // then multiplied by sign[j]
  Eigen::MatrixXd B;
  double statistic = 0.0;  // reference mode: quadratic form at the optimum
};

/// Applies the signed permutation to the columns of B.
Eigen::MatrixXd apply_signed_permutation(const Eigen::MatrixXd& B, const std::vector<int>& perm,
                                         const std::vector<int>& sign);

/// Among all 2^n n! signed column permutations P, the one minimizing
/// (vec(BP) - vec(B_ref))' V^{-1} (vec(BP) - vec(B_ref)).
SignedPermutation sign_permute_reference(const Eigen::MatrixXd& B_hat, const Eigen::MatrixXd& B_ref,
                                         const Eigen::MatrixXd& V);

/// Greedy largest-|entry| assignment of columns to diagonal positions, then
/// positive diagonal.
SignedPermutation sign_permute_convention(const Eigen::MatrixXd& B_hat);

}  // namespace homent
