#include "doctest.h"

#include <random>

#include "homent/errors.hpp"
#include "homent/inference.hpp"

using namespace homent;

namespace {

Eigen::MatrixXd spd(Eigen::Index k, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd A(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) A(i, j) = z(rng);
  return A * A.transpose() + Eigen::MatrixXd::Identity(k, k);
}

}  // namespace

TEST_CASE("efficient weighting collapses the sandwich") {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd S = spd(8, rng);
  const Eigen::MatrixXd G = Eigen::MatrixXd::Random(8, 4);
  const Eigen::MatrixXd W = S.inverse();
  const AsymptoticCovariance a = asymptotic_covariance(G, S, W, 100);
  const Eigen::MatrixXd eff = (G.transpose() * W * G).inverse();
  CHECK((a.matrix - eff).cwiseAbs().maxCoeff() < 1e-10 * eff.cwiseAbs().maxCoeff());
  CHECK((efficient_covariance(G, S) - eff).cwiseAbs().maxCoeff() < 1e-10 * eff.cwiseAbs().maxCoeff());
  CHECK(a.coefficient_variance(0) == doctest::Approx(a.matrix(0, 0) / 100.0));
}

TEST_CASE("scalar sandwich") {
  const Eigen::MatrixXd G = Eigen::MatrixXd::Constant(1, 1, 2.0);
  const Eigen::MatrixXd S = Eigen::MatrixXd::Constant(1, 1, 3.0);
  const Eigen::MatrixXd W = Eigen::MatrixXd::Constant(1, 1, 7.0);
  CHECK(asymptotic_covariance(G, S, W, 10).matrix(0, 0) == doctest::Approx(3.0 / 4.0));
}

TEST_CASE("rank-deficient G is unidentified") {
  Eigen::MatrixXd G = Eigen::MatrixXd::Random(6, 4);
  G.col(3) = G.col(2);
  const Eigen::MatrixXd S = Eigen::MatrixXd::Identity(6, 6);
  CHECK_THROWS_AS(asymptotic_covariance(G, S, S, 50), UnidentifiedModelError);
}

TEST_CASE("Wald statistic") {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd V = spd(4, rng);
  const Eigen::VectorXd beta = Eigen::VectorXd::Random(4);
  const Eigen::Index T = 250;

  SUBCASE("exact restriction") {
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(2, 4);
    R(0, 1) = 1.0;
    R(1, 3) = 1.0;
    const WaldTest w = wald(R, R * beta, beta, V, T);
    CHECK(w.statistic == 0.0);
    CHECK(w.p_value == doctest::Approx(1.0));
    CHECK(w.dof == 2);
  }
  SUBCASE("single restriction is a squared t ratio") {
    const Restriction res = coefficient_restriction("b", 2, 1, 0, 0.3);
    const WaldTest w = wald(res.R, res.r, beta, V, T);
    const double t = (beta(1) - 0.3) / std::sqrt(V(1, 1) / T);
    CHECK(w.statistic == doctest::Approx(t * t));
    CHECK(w.p_value == doctest::Approx(std::erfc(std::abs(t) / std::sqrt(2.0))).epsilon(1e-10));
  }
  SUBCASE("invariance under row operations") {
    const Eigen::MatrixXd R = Eigen::MatrixXd::Random(3, 4);
    const Eigen::VectorXd r = Eigen::VectorXd::Random(3);
    const Eigen::MatrixXd A = spd(3, rng);
    const WaldTest a = wald(R, r, beta, V, T);
    const WaldTest b = wald(A * R, A * r, beta, V, T);
    CHECK(b.statistic == doctest::Approx(a.statistic).epsilon(1e-9));
  }
  SUBCASE("rank-deficient restrictions are rejected") {
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(2, 4);
    R(0, 0) = R(1, 0) = 1.0;
    CHECK_THROWS_AS(wald(R, Eigen::VectorXd::Zero(2), beta, V, T), InvalidArgument);
  }
}

TEST_CASE("confidence intervals") {
  const Eigen::MatrixXd V = Eigen::MatrixXd::Identity(1, 1) * 4.0;
  const Eigen::VectorXd beta = Eigen::VectorXd::Constant(1, 1.0);
  const Interval ci = confidence_interval(0, V, beta, 100, 0.90);
  CHECK(ci.upper - 1.0 == doctest::Approx(1.6448536269514722 * 0.2));
  CHECK(ci.contains(1.3));
  CHECK_FALSE(ci.contains(1.4));
  const Interval wide = confidence_interval(0, V * 1e12, beta, 100, 0.90);
  CHECK(wide.contains(1e4));
}

TEST_CASE("permuted covariance matches the permuted estimates") {
  std::mt19937_64 rng(5);
  const Eigen::Index n = 3;
  const Eigen::MatrixXd V = spd(n * n, rng);
  const std::vector<int> perm{1, 2, 0}, sign{1, -1, -1};
  // vec(B P) = Q vec(B); build Q from unit vectors.
  Eigen::MatrixXd Q(n * n, n * n);
  for (Eigen::Index p = 0; p < n * n; ++p) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n * n);
    e(p) = 1.0;
    Q.col(p) = vec(apply_signed_permutation(unvec(e, n), perm, sign));
  }
  CHECK((permute_covariance(V, perm, sign) - Q * V * Q.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("restriction builders") {
  Eigen::MatrixXd B(2, 2);
  B << 1, 2, 3, 4;
  const Restriction full = full_restriction("full", B);
  CHECK(full.R.rows() == 4);
  CHECK(full.r == vec(B));
  const Restriction rec = recursive_restriction("rec", 4);
  CHECK(rec.R.rows() == 6);
  CHECK((rec.R * vec(Eigen::MatrixXd(Eigen::MatrixXd::Ones(4, 4).triangularView<Eigen::Lower>()))).isZero());
}

TEST_CASE("TRUE-basis covariance matches the Monte Carlo spread") {
  const ShockModel m = ShockModel::iid(GaussianMixture{}, 2);
  Eigen::MatrixXd B0(2, 2);
  B0 << 10, 0, 5, 10;
  const MomentEvaluator ev(full_moment_system(2));
  const Eigen::MatrixXd S = s_true(m, ev.system());
  const Eigen::MatrixXd V = efficient_covariance(g_true(B0, m, ev.system()), S);
  const Eigen::Index T = 10000;
  const int R = 2000;
  Eigen::MatrixXd draws(R, 4);
  for (int r = 0; r < R; ++r) {
    const ShockPanel U(sample_panel(m, T, derive_seed(77, {static_cast<std::uint64_t>(r)})) * B0.transpose());
    const EstimateResult est = gmm_star(U, ev, S);
    draws.row(r) = (std::sqrt(static_cast<double>(T)) * (vec(sign_permute_reference(est.B_hat, B0, V).B) - vec(B0)))
                       .transpose();
  }
  const Eigen::MatrixXd centred = draws.rowwise() - draws.colwise().mean();
  const Eigen::MatrixXd emp = centred.transpose() * centred / (R - 1);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(emp(i, i) == doctest::Approx(V(i, i)).epsilon(0.15));
}
