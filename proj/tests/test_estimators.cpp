#include "doctest.h"

#include <random>

#include "homent/errors.hpp"
#include "homent/estimators.hpp"
#include "homent/inference.hpp"

using namespace homent;

namespace {

Eigen::MatrixXd lower_b0(Eigen::Index n) {
  Eigen::MatrixXd B = Eigen::MatrixXd::Constant(n, n, 5.0);
  B.diagonal().setConstant(10.0);
  return B.triangularView<Eigen::Lower>();
}

ShockPanel panel(Eigen::Index n, Eigen::Index T, std::uint64_t seed) {
  const ShockModel m = ShockModel::iid(GaussianMixture{}, static_cast<std::size_t>(n));
  return ShockPanel(sample_panel(m, T, seed) * lower_b0(n).transpose());
}

double gradient_error(const GmmObjective& obj, const Eigen::MatrixXd& B) {
  const Eigen::VectorXd b = vec(B);
  Eigen::VectorXd grad;
  obj.evaluate(b, &grad);
  Eigen::VectorXd fd(b.size());
  for (Eigen::Index p = 0; p < b.size(); ++p) {
    const double h = 1e-6 * std::max(1.0, std::abs(b(p)));
    Eigen::VectorXd up = b, dn = b;
    up(p) += h;
    dn(p) -= h;
    fd(p) = (obj.evaluate(up) - obj.evaluate(dn)) / (2 * h);
  }
  return (fd - grad).norm() / std::max(1e-12, grad.norm());
}

}  // namespace

TEST_CASE("exact gradients of every loss") {
  const Eigen::Index n = 3;
  const ShockPanel U = panel(n, 400, 3);
  const MomentEvaluator ev(full_moment_system(static_cast<std::size_t>(n)));
  const Eigen::MatrixXd S = s_true(ShockModel::iid(GaussianMixture{}, 3), ev.system());
  Eigen::MatrixXd B = lower_b0(n);
  B(0, 2) = 1.0;
  B(1, 0) = 4.0;
  const std::vector<std::pair<const char*, WeightingSpec>> specs{
      {"identity", WeightingSpec::identity()},
      {"identity scale-updated", WeightingSpec::identity(true)},
      {"true", WeightingSpec::true_s(S)},
      {"true scale-updated", WeightingSpec::true_s(S, true)},
      {"smi scale-updated", WeightingSpec::smi(lower_b0(n), true)},
      {"si", WeightingSpec::si(lower_b0(n))},
      {"cue si", WeightingSpec::cue(Basis::SI)},
      {"cue smi", WeightingSpec::cue(Basis::SMI)}};
  for (const auto& [name, spec] : specs) {
    CAPTURE(name);
    const GmmObjective obj(ev, U, spec);
    CHECK(gradient_error(obj, B) < 1e-5);
  }
}

TEST_CASE("objective is infinite at a singular B") {
  const ShockPanel U = panel(2, 100, 4);
  const MomentEvaluator ev(full_moment_system(2));
  const GmmObjective obj(ev, U, WeightingSpec::identity());
  Eigen::MatrixXd B(2, 2);
  B << 1, 2, 2, 4;
  CHECK(std::isinf(obj.evaluate(vec(B))));
}

TEST_CASE("efficient GMM is consistent in a large sample") {
  const ShockPanel U = panel(2, 100000, 5);
  const MomentEvaluator ev(full_moment_system(2));
  const Eigen::MatrixXd S = s_true(ShockModel::iid(GaussianMixture{}, 2), ev.system());
  const EstimateResult r = gmm_star(U, ev, S);
  CHECK(r.converged);
  const Eigen::MatrixXd V = efficient_covariance(g_true(lower_b0(2), ShockModel::iid(GaussianMixture{}, 2), ev.system()), S);
  const SignedPermutation sp = sign_permute_reference(r.B_hat, lower_b0(2), V);
  CHECK((sp.B - lower_b0(2)).cwiseAbs().maxCoeff() < 0.15);
}

TEST_CASE("every estimator runs on a small sample") {
  const ShockPanel U = panel(2, 500, 6);
  const MomentEvaluator ev(full_moment_system(2));
  const Eigen::MatrixXd S = s_true(ShockModel::iid(GaussianMixture{}, 2), ev.system());
  for (EstimatorKind k : {EstimatorKind::gmm_star, EstimatorKind::gmm2, EstimatorKind::gmm_smi, EstimatorKind::csue2,
                          EstimatorKind::csue_si, EstimatorKind::csue_star, EstimatorKind::cue_si,
                          EstimatorKind::cue_smi}) {
    CAPTURE(estimator_name(k));
    const EstimateResult r = run_estimator(k, U, ev, S);
    CHECK(r.converged);
    CHECK(r.loss >= 0.0);
    CHECK(r.W.rows() == 8);
    CHECK(parse_estimator(estimator_name(k)) == k);
  }
  CHECK_THROWS_AS(run_estimator(EstimatorKind::gmm_star, U, ev), InvalidArgument);
  CHECK_THROWS_AS(parse_estimator("gmm3"), InvalidArgument);
}

TEST_CASE("scale updating centres the innovation variances") {
  const ShockPanel U = panel(2, 2000, 7);
  const MomentEvaluator ev(full_moment_system(2));
  const EstimateResult r = two_step_csue(U, ev);
  REQUIRE(r.converged);
  const Eigen::MatrixXd e = innovations(r.B_hat, U);
  for (Eigen::Index i = 0; i < 2; ++i) CHECK(e.col(i).squaredNorm() / 2000.0 == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("default start") {
  Eigen::MatrixXd u(4, 2);
  u << 1, 0, -1, 0, 0, 2, 0, -2;
  const Eigen::MatrixXd L = default_start(ShockPanel(u));
  CHECK(L(0, 0) == doctest::Approx(std::sqrt(0.5)));
  CHECK(L(1, 1) == doctest::Approx(std::sqrt(2.0)));
  CHECK(L(0, 1) == 0.0);
}

TEST_CASE("reference normalization undoes a signed permutation") {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd B0 = lower_b0(3);
  const Eigen::MatrixXd V = Eigen::MatrixXd::Identity(9, 9);
  const std::vector<int> perm{2, 0, 1}, sign{-1, 1, -1};
  const Eigen::MatrixXd scrambled = apply_signed_permutation(B0 + 0.1 * Eigen::MatrixXd::Random(3, 3), perm, sign);
  const SignedPermutation sp = sign_permute_reference(scrambled, B0, V);
  CHECK((sp.B - B0).cwiseAbs().maxCoeff() < 0.11);
  CHECK(apply_signed_permutation(scrambled, sp.perm, sp.sign) == sp.B);
}

TEST_CASE("convention normalization") {
  Eigen::MatrixXd B(2, 2);
  B << 0.1, -3.0, 2.0, 0.2;
  const SignedPermutation sp = sign_permute_convention(B);
  CHECK(sp.B(0, 0) == doctest::Approx(3.0));
  CHECK(sp.B(1, 1) == doctest::Approx(2.0));
  CHECK(sp.B(1, 0) == doctest::Approx(-0.2));
}
