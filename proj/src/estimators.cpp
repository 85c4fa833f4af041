#include "homent/estimators.hpp"

#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "homent/errors.hpp"

namespace homent {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd identity_like(const MomentEvaluator& ev) {
  const auto K = static_cast<Eigen::Index>(ev.size());
  return Eigen::MatrixXd::Identity(K, K);
}

class CeresObjective final : public ceres::FirstOrderFunction {
 public:
  explicit CeresObjective(const GmmObjective& obj) : obj_(obj) {}

  bool Evaluate(const double* parameters, double* cost, double* gradient) const override {
    const Eigen::Map<const Eigen::VectorXd> b(parameters, NumParameters());
    Eigen::VectorXd grad;
    const double loss = obj_.evaluate(b, gradient != nullptr ? &grad : nullptr);
    if (!std::isfinite(loss)) return false;
    cost[0] = loss;
    if (gradient != nullptr) {
      if (!grad.allFinite()) return false;
      Eigen::Map<Eigen::VectorXd>(gradient, NumParameters()) = grad;
    }
    return true;
  }

  int NumParameters() const override { return static_cast<int>(obj_.parameters()); }

 private:
  const GmmObjective& obj_;
};

struct Attempt {
  Eigen::VectorXd b;
  double loss = kInf;
  double gradient_norm = kInf;
  int iterations = 0;
  std::string message;
};

Attempt run_once(const GmmObjective& obj, const Eigen::VectorXd& start, const OptimizerOptions& opt) {
  Attempt out;
  out.b = start;
  if (!std::isfinite(obj.evaluate(start))) {
    out.message = "start is not admissible";
    return out;
  }
  ceres::GradientProblemSolver::Options options;
  options.line_search_direction_type = ceres::BFGS;
  options.line_search_type = ceres::WOLFE;
  options.use_approximate_eigenvalue_bfgs_scaling = true;
  options.max_num_iterations = opt.max_iterations;
  options.gradient_tolerance = opt.gradient_tolerance;
  options.function_tolerance = 1e-15;
  options.parameter_tolerance = 1e-15;
  options.logging_type = ceres::SILENT;
  options.minimizer_progress_to_stdout = false;

  ceres::GradientProblem problem(new CeresObjective(obj));
  ceres::GradientProblemSolver::Summary summary;
  ceres::Solve(options, problem, out.b.data(), &summary);

  Eigen::VectorXd grad;
  out.loss = obj.evaluate(out.b, &grad);
  out.gradient_norm = std::isfinite(out.loss) ? grad.lpNorm<Eigen::Infinity>() : kInf;
  out.iterations = static_cast<int>(summary.iterations.size()) - 1;
  out.message = summary.message;
  return out;
}

// Product of univariate moments over all shocks except one.
double product_except(const UnivariateMomentTable& t, const std::vector<int>& r, std::size_t skip) {
  double v = 1.0;
  for (std::size_t j = 0; j < r.size(); ++j)
    if (j != skip) v *= t(j, r[j]);
  return v;
}

}  // namespace

WeightingSpec WeightingSpec::identity(bool scale_updating) {
  WeightingSpec w;
  w.kind = Kind::identity;
  w.scale_updating = scale_updating;
  return w;
}

WeightingSpec WeightingSpec::fixed(Eigen::MatrixXd W, bool scale_updating) {
  WeightingSpec w;
  w.kind = Kind::fixed;
  w.matrix = std::move(W);
  w.scale_updating = scale_updating;
  return w;
}

WeightingSpec WeightingSpec::true_s(Eigen::MatrixXd S_true, bool scale_updating) {
  WeightingSpec w;
  w.kind = Kind::true_s;
  w.matrix = std::move(S_true);
  w.scale_updating = scale_updating;
  return w;
}

WeightingSpec WeightingSpec::si(Eigen::MatrixXd B_ref, bool scale_updating) {
  WeightingSpec w;
  w.kind = Kind::si;
  w.reference = std::move(B_ref);
  w.scale_updating = scale_updating;
  return w;
}

WeightingSpec WeightingSpec::smi(Eigen::MatrixXd B_ref, bool scale_updating) {
  WeightingSpec w;
  w.kind = Kind::smi;
  w.reference = std::move(B_ref);
  w.scale_updating = scale_updating;
  return w;
}

WeightingSpec WeightingSpec::cue(Basis basis) {
  if (basis == Basis::TRUE) throw InvalidArgument("continuous updating needs an estimated S (si or smi)");
  WeightingSpec w;
  w.kind = basis == Basis::SI ? Kind::si : Kind::smi;
  w.continuous = true;
  return w;
}

std::string WeightingSpec::describe() const {
  std::string base;
  switch (kind) {
    case Kind::identity: base = "identity"; break;
    case Kind::fixed: base = "fixed"; break;
    case Kind::si: base = "si"; break;
    case Kind::smi: base = "smi"; break;
    case Kind::true_s: base = "true"; break;
  }
  if (continuous) base = "cue_" + base;
  if (scale_updating) base += "+scale_updating";
  return base;
}

GmmObjective::GmmObjective(const MomentEvaluator& ev, const ShockPanel& U, const WeightingSpec& W)
    : ev_(ev), U_(U), spec_(W), n_(ev.dim()) {
  if (static_cast<std::size_t>(U.dim()) != n_) throw InvalidArgument("objective: panel dimension does not match the system");
  const auto K = static_cast<Eigen::Index>(ev.size());
  if (spec_.continuous) {
    if (spec_.kind != WeightingSpec::Kind::si && spec_.kind != WeightingSpec::Kind::smi)
      throw InvalidArgument("objective: continuous updating requires si or smi weighting");
    if (spec_.scale_updating) throw InvalidArgument("objective: continuous updating is not combined with scale updating");
    return;
  }
  switch (spec_.kind) {
    case WeightingSpec::Kind::identity:
      W_base_ = identity_like(ev);
      break;
    case WeightingSpec::Kind::fixed:
      if (spec_.matrix.rows() != K || spec_.matrix.cols() != K)
        throw InvalidArgument("objective: fixed weighting has the wrong size");
      W_base_ = 0.5 * (spec_.matrix + spec_.matrix.transpose());
      break;
    case WeightingSpec::Kind::true_s:
      if (spec_.matrix.rows() != K || spec_.matrix.cols() != K)
        throw InvalidArgument("objective: true S has the wrong size");
      W_base_ = floored_inverse(spec_.matrix).inverse;
      break;
    case WeightingSpec::Kind::si:
    case WeightingSpec::Kind::smi: {
      if (!spec_.reference) throw InvalidArgument("objective: si/smi weighting needs a reference B");
      const Eigen::MatrixXd e = innovations(*spec_.reference, U_);
      const Eigen::MatrixXd S =
          spec_.kind == WeightingSpec::Kind::si ? s_si(ev_, e) : s_smi_empirical(ev_.system(), e);
      W_base_ = floored_inverse(S).inverse;
      break;
    }
  }
}

double GmmObjective::evaluate(const Eigen::VectorXd& b, Eigen::VectorXd* gradient) const {
  if (!b.allFinite()) return kInf;
  const Eigen::MatrixXd B = unvec(b, static_cast<Eigen::Index>(n_));
  Eigen::MatrixXd A;
  try {
    A = checked_inverse(B);
  } catch (const SingularMatrixError&) {
    return kInf;
  }
  const Eigen::MatrixXd e = U_.data() * A.transpose();
  try {
    if (!spec_.continuous) return fixed_loss(A, e, gradient);
    if (spec_.kind == WeightingSpec::Kind::si) return cue_si_loss(A, e, gradient);
    return cue_smi_loss(A, e, gradient);
  } catch (const DegenerateInnovationError&) {
    return kInf;
  } catch (const SingularMatrixError&) {
    return kInf;
  }
}

double GmmObjective::fixed_loss(const Eigen::MatrixXd& A, const Eigen::MatrixXd& e, Eigen::VectorXd* gradient) const {
  const MonomialMeans mm = ev_.means(e);
  const Eigen::VectorXd g = ev_.moments(mm);
  if (!spec_.scale_updating) {
    const Eigen::VectorXd Wg = W_base_ * g;
    if (gradient != nullptr) *gradient = 2.0 * ev_.jacobian(mm, A).transpose() * Wg;
    return g.dot(Wg);
  }
  const Eigen::VectorXd D = ev_.scale_diagonal(mm);
  const Eigen::VectorXd gt = D.cwiseProduct(g);
  const Eigen::VectorXd Wg = W_base_ * gt;
  const double loss = gt.dot(Wg);
  if (gradient != nullptr) {
    const Eigen::MatrixXd J = ev_.jacobian(mm, A);
    *gradient = 2.0 * J.transpose() * D.cwiseProduct(Wg);
    // Derivative of D(B): d log D_k / d b_pq = sum_i m_ki a_ip C_iq / C_ii.
    const Eigen::VectorXd u = g.cwiseProduct(Wg).cwiseProduct(D);
    const Eigen::MatrixXd C = ev_.second_moments(mm);
    const auto n = static_cast<Eigen::Index>(n_);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
    const auto& sys = ev_.system();
    for (std::size_t k = 0; k < sys.size(); ++k)
      for (Eigen::Index i = 0; i < n; ++i) z(i) += u(static_cast<Eigen::Index>(k)) * sys[k][static_cast<std::size_t>(i)];
    for (Eigen::Index i = 0; i < n; ++i) z(i) /= C(i, i);
    // sum_i z_i a_ip C_iq = (A' diag(z) C)_pq
    const Eigen::MatrixXd extra = A.transpose() * z.asDiagonal() * C;
    *gradient += 2.0 * vec(extra);
  }
  return loss;
}

double GmmObjective::cue_si_loss(const Eigen::MatrixXd& A, const Eigen::MatrixXd& e, Eigen::VectorXd* gradient) const {
  const MonomialMeans mm = ev_.means(e);
  const Eigen::VectorXd g = ev_.moments(mm);
  const Eigen::MatrixXd F = ev_.moment_functions(e);
  const Eigen::MatrixXd S = (F.transpose() * F) / static_cast<double>(F.rows());
  const Eigen::VectorXd v = floored_inverse(S).inverse * g;
  if (gradient != nullptr) {
    const Eigen::VectorXd w = F * v;
    const MonomialMeans mw = ev_.means(e, std::span<const double>(w.data(), static_cast<std::size_t>(w.size())));
    *gradient = 2.0 * (ev_.jacobian(mm, A).transpose() * v - ev_.jacobian(mw, A).transpose() * v);
  }
  return g.dot(v);
}

double GmmObjective::cue_smi_loss(const Eigen::MatrixXd& A, const Eigen::MatrixXd& e, Eigen::VectorXd* gradient) const {
  const auto& sys = ev_.system();
  const int top = 2 * sys.max_exponent();
  const MonomialMeans mm = ev_.means(e);
  const Eigen::VectorXd g = ev_.moments(mm);
  const UnivariateMomentTable mu = sample_moment_table(e, top);
  const Eigen::VectorXd v = floored_inverse(s_smi(mu, sys)).inverse * g;
  if (gradient == nullptr) return g.dot(v);

  const std::size_t n = n_;
  const std::size_t K = sys.size();
  // h(i, s) = v' dS/dmu_{i,s} v
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), top + 1);
  double vc = 0.0;
  for (std::size_t k = 0; k < K; ++k) vc += v(static_cast<Eigen::Index>(k)) * sys.constants()[k];
  std::vector<int> r(n);
  for (std::size_t k = 0; k < K; ++k) {
    const double vk = v(static_cast<Eigen::Index>(k));
    for (std::size_t l = 0; l < K; ++l) {
      const double vkl = vk * v(static_cast<Eigen::Index>(l));
      for (std::size_t i = 0; i < n; ++i) r[i] = sys[k][i] + sys[l][i];
      for (std::size_t i = 0; i < n; ++i)
        if (r[i] > 0) h(static_cast<Eigen::Index>(i), r[i]) += vkl * product_except(mu, r, i);
    }
    // -c_l P(m_k) - c_k P(m_l): summed over the partner index this is 2 * (v'c) v_k dP(m_k).
    const auto& ek = sys[k].exponents();
    for (std::size_t i = 0; i < n; ++i)
      if (ek[i] > 0) h(static_cast<Eigen::Index>(i), ek[i]) -= 2.0 * vc * vk * product_except(mu, ek, i);
  }
  // X(i, s, q) = mean(e_i^s e_q), s = 0..top-1
  const Eigen::Index T = e.rows();
  std::vector<double> X(n * static_cast<std::size_t>(top) * n, 0.0);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      double pw = 1.0;
      const double ei = e(t, static_cast<Eigen::Index>(i));
      for (int s = 0; s < top; ++s) {
        for (std::size_t q = 0; q < n; ++q)
          X[(i * static_cast<std::size_t>(top) + static_cast<std::size_t>(s)) * n + q] += pw * e(t, static_cast<Eigen::Index>(q));
        pw *= ei;
      }
    }
  }
  const double invT = 1.0 / static_cast<double>(T);
  // dmu_{i,s}/db_pq = -s a_ip mean(e_i^{s-1} e_q)
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));  // Z(i,q)
  for (std::size_t i = 0; i < n; ++i)
    for (int s = 1; s <= top; ++s) {
      const double his = h(static_cast<Eigen::Index>(i), s);
      if (his == 0.0) continue;
      for (std::size_t q = 0; q < n; ++q)
        Z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(q)) +=
            his * s * X[(i * static_cast<std::size_t>(top) + static_cast<std::size_t>(s - 1)) * n + q] * invT;
    }
  *gradient = 2.0 * ev_.jacobian(mm, A).transpose() * v + vec(A.transpose() * Z);
  return g.dot(v);
}

Eigen::MatrixXd GmmObjective::weighting_at(const Eigen::MatrixXd& B) const {
  const Eigen::MatrixXd e = innovations(B, U_);
  if (spec_.continuous) {
    const Eigen::MatrixXd S = spec_.kind == WeightingSpec::Kind::si ? s_si(ev_, e) : s_smi_empirical(ev_.system(), e);
    return floored_inverse(S).inverse;
  }
  if (!spec_.scale_updating) return W_base_;
  const Eigen::VectorXd D = ev_.scale_diagonal(ev_.means(e));
  return D.asDiagonal() * W_base_ * D.asDiagonal();
}

Eigen::MatrixXd default_start(const ShockPanel& U) {
  const Eigen::MatrixXd Sigma = (U.data().transpose() * U.data()) / static_cast<double>(U.rows());
  Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
  if (llt.info() != Eigen::Success) throw DegenerateInnovationError("reduced-form covariance is not positive definite");
  return llt.matrixL();
}

EstimateResult minimize_gmm(const ShockPanel& U, const MomentEvaluator& ev, const WeightingSpec& W,
                            const Eigen::MatrixXd& start, const OptimizerOptions& opt) {
  const auto n = static_cast<Eigen::Index>(ev.dim());
  if (start.rows() != n || start.cols() != n) throw InvalidArgument("minimize_gmm: start has the wrong size");
  const GmmObjective obj(ev, U, W);

  Attempt best;
  int total_iterations = 0;
  int restarts = 0;
  bool converged = false;
  std::mt19937_64 rng(opt.restart_seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int attempt = 0; attempt <= opt.max_restarts; ++attempt) {
    Eigen::VectorXd b0 = vec(start);
    if (attempt > 0) {
      ++restarts;
      for (Eigen::Index i = 0; i < b0.size(); ++i) b0(i) *= 1.0 + opt.restart_perturbation * noise(rng);
    }
    Attempt a = run_once(obj, b0, opt);
    total_iterations += std::max(a.iterations, 0);
    if (a.loss < best.loss) best = a;
    converged = std::isfinite(best.loss) && best.gradient_norm < opt.gradient_tolerance * std::max(1.0, best.loss);
    if (converged) break;
  }
  if (!std::isfinite(best.loss)) throw SingularMatrixError("minimize_gmm: no admissible start found");

  EstimateResult out;
  out.B_hat = unvec(best.b, n);
  out.loss = best.loss;
  out.weighting = W.describe();
  out.W_base = obj.base();
  out.W = obj.weighting_at(out.B_hat);
  out.converged = converged;
  out.iterations = total_iterations;
  out.restarts = restarts;
  out.gradient_norm = best.gradient_norm;
  out.message = best.message;
  return out;
}

EstimateResult minimize_gmm(const ShockPanel& U, const MomentSystem& sys, const WeightingSpec& W,
                            const Eigen::MatrixXd& start, const OptimizerOptions& opt) {
  const MomentEvaluator ev(sys);
  return minimize_gmm(U, ev, W, start, opt);
}

namespace {

EstimateResult chain(const EstimateResult& first, EstimateResult second) {
  second.iterations += first.iterations;
  second.restarts += first.restarts;
  return second;
}

EstimateResult two_step(const ShockPanel& U, const MomentEvaluator& ev, Basis basis, bool scale_updating,
                        const OptimizerOptions& opt) {
  const EstimateResult step1 = minimize_gmm(U, ev, WeightingSpec::identity(scale_updating), default_start(U), opt);
  const WeightingSpec w2 = basis == Basis::SI ? WeightingSpec::si(step1.B_hat, scale_updating)
                                              : WeightingSpec::smi(step1.B_hat, scale_updating);
  return chain(step1, minimize_gmm(U, ev, w2, step1.B_hat, opt));
}

}  // namespace

EstimateResult two_step_gmm(const ShockPanel& U, const MomentEvaluator& ev, const OptimizerOptions& opt) {
  return two_step(U, ev, Basis::SI, false, opt);
}

EstimateResult two_step_gmm_smi(const ShockPanel& U, const MomentEvaluator& ev, const OptimizerOptions& opt) {
  return two_step(U, ev, Basis::SMI, false, opt);
}

EstimateResult two_step_csue(const ShockPanel& U, const MomentEvaluator& ev, const OptimizerOptions& opt) {
  return two_step(U, ev, Basis::SMI, true, opt);
}

EstimateResult csue_si(const ShockPanel& U, const MomentEvaluator& ev, const OptimizerOptions& opt) {
  return two_step(U, ev, Basis::SI, true, opt);
}

EstimateResult gmm_star(const ShockPanel& U, const MomentEvaluator& ev, const Eigen::MatrixXd& S_true,
                        const OptimizerOptions& opt) {
  return minimize_gmm(U, ev, WeightingSpec::true_s(S_true, false), default_start(U), opt);
}

EstimateResult csue_star(const ShockPanel& U, const MomentEvaluator& ev, const Eigen::MatrixXd& S_true,
                         const OptimizerOptions& opt) {
  return minimize_gmm(U, ev, WeightingSpec::true_s(S_true, true), default_start(U), opt);
}

EstimateResult cue(const ShockPanel& U, const MomentEvaluator& ev, Basis basis, const OptimizerOptions& opt) {
  const EstimateResult first = two_step(U, ev, basis, false, opt);
  return chain(first, minimize_gmm(U, ev, WeightingSpec::cue(basis), first.B_hat, opt));
}

std::string estimator_name(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::gmm_star: return "gmm_star";
    case EstimatorKind::gmm2: return "gmm2";
    case EstimatorKind::gmm_smi: return "gmm_smi";
    case EstimatorKind::csue2: return "csue2";
    case EstimatorKind::csue_si: return "csue_si";
    case EstimatorKind::csue_star: return "csue_star";
    case EstimatorKind::cue_si: return "cue_si";
    case EstimatorKind::cue_smi: return "cue_smi";
  }
  return "?";
}

EstimatorKind parse_estimator(const std::string& s) {
  for (auto k : {EstimatorKind::gmm_star, EstimatorKind::gmm2, EstimatorKind::gmm_smi, EstimatorKind::csue2,
                 EstimatorKind::csue_si, EstimatorKind::csue_star, EstimatorKind::cue_si, EstimatorKind::cue_smi})
    if (estimator_name(k) == s) return k;
  throw InvalidArgument("unknown estimator '" + s + "'");
}

bool needs_true_s(EstimatorKind k) { return k == EstimatorKind::gmm_star || k == EstimatorKind::csue_star; }

Basis natural_basis(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::gmm2:
    case EstimatorKind::csue_si:
    case EstimatorKind::cue_si:
      return Basis::SI;
    default:
      return Basis::SMI;
  }
}

EstimateResult run_estimator(EstimatorKind k, const ShockPanel& U, const MomentEvaluator& ev,
                             const std::optional<Eigen::MatrixXd>& S_true, const OptimizerOptions& opt) {
  if (needs_true_s(k) && !S_true) throw InvalidArgument(estimator_name(k) + " requires the population S");
  switch (k) {
    case EstimatorKind::gmm_star: return gmm_star(U, ev, *S_true, opt);
    case EstimatorKind::gmm2: return two_step_gmm(U, ev, opt);
    case EstimatorKind::gmm_smi: return two_step_gmm_smi(U, ev, opt);
    case EstimatorKind::csue2: return two_step_csue(U, ev, opt);
    case EstimatorKind::csue_si: return csue_si(U, ev, opt);
    case EstimatorKind::csue_star: return csue_star(U, ev, *S_true, opt);
    case EstimatorKind::cue_si: return cue(U, ev, Basis::SI, opt);
    case EstimatorKind::cue_smi: return cue(U, ev, Basis::SMI, opt);
  }
  throw InvalidArgument("unknown estimator");
}

Eigen::MatrixXd apply_signed_permutation(const Eigen::MatrixXd& B, const std::vector<int>& perm,
                                         const std::vector<int>& sign) {
  Eigen::MatrixXd out(B.rows(), B.cols());
  for (Eigen::Index j = 0; j < B.cols(); ++j)
    out.col(j) = sign[static_cast<std::size_t>(j)] * B.col(perm[static_cast<std::size_t>(j)]);
  return out;
}

SignedPermutation sign_permute_reference(const Eigen::MatrixXd& B_hat, const Eigen::MatrixXd& B_ref,
                                         const Eigen::MatrixXd& V) {
  const auto n = static_cast<std::size_t>(B_hat.cols());
  if (B_hat.rows() != B_ref.rows() || B_hat.cols() != B_ref.cols() || V.rows() != static_cast<Eigen::Index>(n * n))
    throw InvalidArgument("sign_permute: dimension mismatch");
  const Eigen::MatrixXd Vinv = floored_inverse(V).inverse;
  const Eigen::VectorXd ref = vec(B_ref);

  SignedPermutation best;
  best.statistic = kInf;
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> sign(n);
  do {
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
      for (std::size_t j = 0; j < n; ++j) sign[j] = (mask >> j) & 1U ? -1 : 1;
      const Eigen::MatrixXd cand = apply_signed_permutation(B_hat, perm, sign);
      const Eigen::VectorXd d = vec(cand) - ref;
      const double stat = d.dot(Vinv * d);
      if (stat < best.statistic) {
        best.statistic = stat;
        best.perm = perm;
        best.sign = sign;
        best.B = cand;
      }
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

SignedPermutation sign_permute_convention(const Eigen::MatrixXd& B_hat) {
  const auto n = static_cast<std::size_t>(B_hat.cols());
  std::vector<bool> row_used(n, false), col_used(n, false);
  std::vector<int> perm(n, 0), sign(n, 1);
  for (std::size_t step = 0; step < n; ++step) {
    double best = -1.0;
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (row_used[i]) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (col_used[j]) continue;
        const double v = std::abs(B_hat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        if (v > best) {
          best = v;
          bi = i;
          bj = j;
        }
      }
    }
    row_used[bi] = true;
    col_used[bj] = true;
    perm[bi] = static_cast<int>(bj);
  }
  for (std::size_t j = 0; j < n; ++j)
    sign[j] = B_hat(static_cast<Eigen::Index>(j), perm[j]) < 0.0 ? -1 : 1;
  SignedPermutation out;
  out.perm = perm;
  out.sign = sign;
  out.B = apply_signed_permutation(B_hat, perm, sign);
  return out;
}

}  // namespace homent
