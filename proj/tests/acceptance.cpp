// Acceptance checks. Prints one PASS/FAIL line per criterion; the exit code is
// nonzero when a criterion fails that is not listed as a known deviation.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "homent/covariance_estimators.hpp"
#include "homent/inference.hpp"
#include "homent/mc_harness.hpp"
#include "homent/noise_analytics.hpp"
#include "homent/svar_core.hpp"

using namespace homent;
namespace fs = std::filesystem;

namespace {

struct Check {
  Check(std::string l, bool pass) : label(std::move(l)), ok(pass) {}

  std::string label;
  bool ok;
  std::string deviation;  // non-empty: documented as not reproduced
};

Check known(Check c, std::string why) {
  c.deviation = std::move(why);
  return c;
}

struct Outcome {
  int id;
  std::string title;
  std::vector<Check> checks;
  std::string error;

  bool passed() const {
    if (!error.empty()) return false;
    for (const auto& c : checks)
      if (!c.ok) return false;
    return true;
  }

  // Failed, but only in checks documented as known deviations.
  bool known_failure() const {
    if (!error.empty() || passed()) return false;
    for (const auto& c : checks)
      if (!c.ok && c.deviation.empty()) return false;
    return true;
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

Check within(const std::string& what, double value, double centre, double tol) {
  return {what + " = " + fmt(value) + " in " + fmt(centre) + " +/- " + fmt(tol), std::abs(value - centre) <= tol};
}

Check at_least(const std::string& what, double value, double bound) {
  return {what + " = " + fmt(value) + " >= " + fmt(bound), value >= bound};
}

Check below(const std::string& what, double value, double bound) {
  return {what + " = " + fmt(value) + " < " + fmt(bound), value < bound};
}

Eigen::MatrixXd lower_b0(Eigen::Index n) {
  Eigen::MatrixXd B = Eigen::MatrixXd::Constant(n, n, 5.0);
  B.diagonal().setConstant(10.0);
  return B.triangularView<Eigen::Lower>();
}

Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd A(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) A(i, j) = z(rng);
  return A;
}

double relative_gap(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff();
}

// Summary table lookup by column values.
class Summary {
 public:
  explicit Summary(const fs::path& file) : t_(read_records(file)) {}

  double get(const std::map<std::string, std::string>& key, const std::string& column) const {
    for (const auto& row : t_.rows) {
      bool match = true;
      for (const auto& [k, v] : key)
        if (row[t_.column(k)] != v) match = false;
      if (match) return std::stod(row[t_.column(column)]);
    }
    throw std::runtime_error("summary row not found for column " + column);
  }

 private:
  RecordTable t_;
};

std::uint64_t file_hash(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::uint64_t h = 1469598103934665603ULL;
  for (char ch; in.get(ch);) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ULL;
  }
  return h;
}

struct Table3Run {
  fs::path dir;
  int replications;
};

Table3Run run_table3(const fs::path& source, const fs::path& work, int replications, unsigned threads) {
  std::ifstream in(source / "scenarios" / "table3.json");
  nlohmann::json j = nlohmann::json::parse(in);
  j["replications"] = replications;
  const Scenario sc = scenario_from_json(j);
  const fs::path dir = work / ("table3_r" + std::to_string(replications));
  RunOptions opt;
  opt.out_dir = dir;
  opt.threads = threads;
  const RunSummary s = run_scenario(sc, opt);
  std::cout << "table3: " << s.records << " records (" << s.computed << " computed, " << s.failures
            << " not converged)\n";
  return {dir, replications};
}

void criterion_1(const Table3Run& run, Outcome& o) {
  const Summary v(run.dir / "summary_variance_quantiles.csv");
  auto stat = [&](const std::string& est, const std::string& col, bool take_max) {
    double acc = take_max ? -1e300 : 0.0;
    for (int i = 1; i <= 4; ++i) {
      const double x = v.get({{"T", "300"}, {"estimator", est}, {"innovation", std::to_string(i)}}, col);
      acc = take_max ? std::max(acc, x) : acc + x / 4.0;
    }
    return acc;
  };
  o.checks.push_back(within("gmm_star mean variance", stat("gmm_star", "mean", false), 0.88, 0.03));
  o.checks.push_back(below("gmm_star largest q90", stat("gmm_star", "q90", true), 1.0));
  o.checks.push_back(within("csue2 mean variance", stat("csue2", "mean", false), 1.01, 0.03));
  o.checks.push_back(known(within("gmm2 mean variance", stat("gmm2", "mean", false), 1.04, 0.06),
                           "two-step GMM variance drift larger than the reference"));
}

void criterion_2(const Table3Run& run, Outcome& o) {
  const Summary c(run.dir / "summary_coef_stats.csv");
  auto get = [&](const char* T, const char* col) {
    return c.get({{"T", T}, {"estimator", "csue2"}, {"coefficient", "b41"}}, col);
  };
  o.checks.push_back(known(within("T=300 mean b41", get("300", "mean"), 4.89, 0.15), "borderline, MC error"));
  o.checks.push_back(within("T=300 iqr b41", get("300", "iqr"), 1.73, 0.25));
  o.checks.push_back(within("T=800 mean b41", get("800", "mean"), 4.96, 0.06));
  o.checks.push_back(known(within("T=800 sd b41", get("800", "sd"), 0.58, 0.10),
                           "reference value matches the variance, not the sd"));
}

void criterion_3(const Table3Run& run, Outcome& o) {
  const Summary c(run.dir / "summary_coverage.csv");
  o.checks.push_back(within(
      "csue2/smi T=800 coverage b41",
      c.get({{"T", "800"}, {"estimator", "csue2"}, {"coefficient", "b41"}, {"basis", "smi"}}, "coverage_pct"), 88, 4));
  o.checks.push_back(known(
      within("gmm2/si T=300 coverage b41",
             c.get({{"T", "300"}, {"estimator", "gmm2"}, {"coefficient", "b41"}, {"basis", "si"}}, "coverage_pct"), 29,
             6),
      "two-step GMM estimates less dispersed than the reference"));
}

void criterion_4(const Table3Run& run, Outcome& o) {
  const Summary r(run.dir / "summary_rejection.csv");
  o.checks.push_back(within(
      "csue2/smi T=800 H0 b14=0",
      r.get({{"T", "800"}, {"estimator", "csue2"}, {"test", "h0_b14"}, {"basis", "smi"}}, "rejection_pct"), 12, 4));
  o.checks.push_back(at_least(
      "gmm2/si T=300 H0 B=B0",
      r.get({{"T", "300"}, {"estimator", "gmm2"}, {"test", "h0_full"}, {"basis", "si"}}, "rejection_pct"), 95));
}

void criterion_5(const Table3Run& run, Outcome& o) {
  const Summary p(run.dir / "summary_power_curve.csv");
  auto at = [&](double b) {
    return p.get({{"T", "800"}, {"estimator", "csue2"}, {"basis", "smi"}, {"b", format_number(b)}}, "rejection_pct");
  };
  o.checks.push_back(within("rejection at b=5", at(5), 12, 4));
  o.checks.push_back(at_least("rejection at b=7", at(7), 75));
  // Each step away from b=5 may dip by at most two binomial standard errors.
  bool monotone = true;
  const double R = run.replications;
  auto slack = [&](double pct) { return 2.0 * 100.0 * std::sqrt(std::max(pct / 100 * (1 - pct / 100), 1e-4) / R); };
  for (double b = 5; b < 8; ++b)
    if (at(b + 1) < at(b) - slack(at(b))) monotone = false;
  for (double b = 5; b > 2; --b)
    if (at(b - 1) < at(b) - slack(at(b))) monotone = false;
  o.checks.push_back({"monotone away from b=5 within MC error", monotone});
}

void criterion_6(Outcome& o) {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240606);
  std::uniform_real_distribution<double> unif(0.5, 1.6);
  std::map<std::size_t, std::pair<MomentSystem, PopulationMomentFunctions>> pops;
  for (std::size_t n : {2, 3, 4}) {
    const MomentSystem sys = full_moment_system(n);
    pops.emplace(n, std::make_pair(sys, PopulationMomentFunctions(lower_b0(static_cast<Eigen::Index>(n)),
                                                                  ShockModel::iid(GaussianMixture{}, n), sys)));
  }
  double worst = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    const std::size_t n = 2 + static_cast<std::size_t>(draw % 3);
    const auto N = static_cast<Eigen::Index>(n);
    const auto& [sys, pop] = pops.at(n);
    const auto K = static_cast<Eigen::Index>(sys.size());
    const Eigen::MatrixXd A = normal_matrix(K, K, rng);
    const Eigen::MatrixXd W = A * A.transpose() / static_cast<double>(K);
    const Eigen::MatrixXd B = lower_b0(N) + 2.0 * normal_matrix(N, N, rng);
    Eigen::VectorXd d(N);
    for (Eigen::Index i = 0; i < N; ++i) d(i) = unif(rng);
    const Eigen::Index T = 100 + 50 * draw;
    const double total = noise_decomposition(W, d, sys, pop.second_moment(B), pop.mean(B), T).total();
    const double direct = (W * pop.second_moment(B * d.asDiagonal())).trace() / static_cast<double>(T);
    worst = std::max(worst, std::abs(total - direct) / std::abs(direct));
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.checks.push_back(below("largest relative error over 100 draws", worst, 1e-8));
  o.checks.push_back(below("runtime in seconds", seconds, 60));
}

void criterion_7(Outcome& o) {
  const Eigen::Index T = 1000;
  bool exact = true;
  double worst_fd = 0.0;
  for (std::size_t n : {2, 3, 4}) {
    const MomentSystem sys = full_moment_system(n);
    const auto N = static_cast<Eigen::Index>(n);
    const auto analytic = noise_gradient_at_identity(sys, T);
    for (std::size_t l = 0; l < n; ++l) {
      int sum = 0;
      for (std::size_t k = 0; k < sys.size(); ++k) sum += sys[k][l];
      if (analytic[l] != -2.0 * sum / static_cast<double>(T)) exact = false;
    }
    const PopulationMomentFunctions pop(lower_b0(N), ShockModel::iid(GaussianMixture{}, n), sys);
    const Eigen::MatrixXd S = pop.second_moment(lower_b0(N));
    const Eigen::VectorXd Ef = pop.mean(lower_b0(N));
    const Eigen::MatrixXd W = floored_inverse(S).inverse;
    for (Eigen::Index l = 0; l < N; ++l) {
      const double h = 1e-5;
      Eigen::VectorXd up = Eigen::VectorXd::Ones(N), dn = Eigen::VectorXd::Ones(N);
      up(l) += h;
      dn(l) -= h;
      const double fd =
          (noise_decomposition(W, up, sys, S, Ef, T).total() - noise_decomposition(W, dn, sys, S, Ef, T).total()) /
          (2 * h);
      const double a = analytic[static_cast<std::size_t>(l)];
      worst_fd = std::max(worst_fd, std::abs(fd - a) / std::abs(a));
    }
  }
  const double n2 = noise_gradient_at_identity(full_moment_system(2), T)[0];
  o.checks.push_back({"n=2 direction 1 equals -24/T (" + fmt(n2 * T) + "/T)", n2 == -24.0 / T});
  o.checks.push_back({"analytic equals -2/T sum_k m_kl for n=2,3,4", exact});
  o.checks.push_back(below("finite-difference relative gap", worst_fd, 1e-4));
}

void criterion_8(Outcome& o, unsigned threads) {
  for (int n : {2, 4}) {
    nlohmann::json j = {{"name", "noise_floor_n" + std::to_string(n)},
                        {"B0", nlohmann::json::array()},
                        {"sample_sizes", {1000}},
                        {"shocks", {{"kind", "gaussian_mixture"}}},
                        {"estimators", {"gmm_star"}},
                        {"seed", 20240608 + n}};
    const Eigen::MatrixXd B0 = lower_b0(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      std::vector<double> row;
      for (Eigen::Index c = 0; c < n; ++c) row.push_back(B0(r, c));
      j["B0"].push_back(row);
    }
    const Scenario sc = scenario_from_json(j);
    const auto K = static_cast<double>(full_moment_system(static_cast<std::size_t>(n)).size());
    LossCurveSpec spec;
    spec.sample_sizes = {1000};
    spec.replications = 500;
    for (const auto& p : loss_at_truth(sc, spec, threads))
      if (p.weighting == "true")
        o.checks.push_back(within("n=" + std::to_string(n) + " T * mean loss (K=" + fmt(K) + ")", 1000.0 * p.mean, K,
                                  0.1 * K));
  }
}

void criterion_9(Outcome& o) {
  const std::map<std::size_t, std::array<std::size_t, 3>> expected{{2, {3, 2, 3}}, {3, {6, 7, 12}}, {4, {10, 16, 31}}};
  for (const auto& [n, counts] : expected) {
    std::array<std::size_t, 3> got{};
    for (int order = 2; order <= 4; ++order) got[order - 2] = enumerate_moment_indices(n, {order}).size();
    o.checks.push_back({"n=" + std::to_string(n) + " counts (" + std::to_string(got[0]) + "," + std::to_string(got[1]) +
                            "," + std::to_string(got[2]) + ")",
                        got == counts});
  }
}

void criterion_10(Outcome& o) {
  std::mt19937_64 rng(20240610);
  double worst_jac = 0.0;
  for (Eigen::Index n : {2, 3, 4}) {
    const MomentSystem sys = full_moment_system(static_cast<std::size_t>(n));
    const Eigen::MatrixXd B = lower_b0(n) + normal_matrix(n, n, rng);
    const ShockPanel U(sample_panel(ShockModel::iid(GaussianMixture{}, static_cast<std::size_t>(n)), 500, 41) *
                       B.transpose());
    const Eigen::MatrixXd J = moment_jacobian(B, U, sys);
    for (Eigen::Index p = 0; p < n * n; ++p) {
      const double h = 1e-6 * std::max(1.0, std::abs(vec(B)(p)));
      Eigen::VectorXd b = vec(B);
      b(p) += h;
      const Eigen::VectorXd up = sample_moments(unvec(b, n), U, sys);
      b(p) -= 2 * h;
      const Eigen::VectorXd dn = sample_moments(unvec(b, n), U, sys);
      const Eigen::VectorXd fd = (up - dn) / (2 * h);
      worst_jac = std::max(worst_jac, (fd - J.col(p)).norm() / std::max(1.0, J.col(p).norm()));
    }
  }
  o.checks.push_back(below("Jacobian vs finite differences", worst_jac, 1e-5));

  for (Eigen::Index n : {2, 4}) {
    const MomentSystem sys = full_moment_system(static_cast<std::size_t>(n));
    const ShockModel m = ShockModel::iid(GaussianMixture{}, static_cast<std::size_t>(n));
    const Eigen::MatrixXd B0 = lower_b0(n);
    const ShockPanel U(sample_panel(m, 1000000, 43 + static_cast<std::uint64_t>(n)) * B0.transpose());
    const Eigen::MatrixXd St = s_true(m, sys);
    const Eigen::MatrixXd Ssi = s_si(B0, U, sys);
    const Eigen::MatrixXd Ssmi = s_smi_empirical(B0, U, sys);
    double gap_si = 0.0, gap_smi = 0.0;
    for (Eigen::Index i = 0; i < St.rows(); ++i)
      for (Eigen::Index k = 0; k < St.cols(); ++k)
        if (std::abs(St(i, k)) > 0.1) {
          gap_si = std::max(gap_si, std::abs(Ssi(i, k) - St(i, k)) / std::abs(St(i, k)));
          gap_smi = std::max(gap_smi, std::abs(Ssmi(i, k) - St(i, k)) / std::abs(St(i, k)));
        }
    o.checks.push_back(known(below("n=" + std::to_string(n) + " S_si vs S_true at T=1e6", gap_si, 5e-2),
                             "sampling error of eighth-order entries exceeds the bound"));
    o.checks.push_back(below("n=" + std::to_string(n) + " S_smi vs S_true at T=1e6", gap_smi, 5e-2));
  }

  {
    const MomentSystem sys = full_moment_system(4);
    const Eigen::MatrixXd B = lower_b0(4) + normal_matrix(4, 4, rng);
    const ShockPanel U(sample_panel(ShockModel::iid(GaussianMixture{}, 4), 800, 47) * B.transpose());
    Eigen::VectorXd c(static_cast<Eigen::Index>(sys.size()));
    for (std::size_t k = 0; k < sys.size(); ++k) c(static_cast<Eigen::Index>(k)) = sys.constants()[k];
    const Eigen::VectorXd base = scale_diagonal(B, U, sys).cwiseProduct(sample_moments(B, U, sys) + c);
    double worst = 0.0;
    std::uniform_real_distribution<double> unif(0.3, 3.0);
    for (int draw = 0; draw < 20; ++draw) {
      Eigen::VectorXd d(4);
      for (Eigen::Index i = 0; i < 4; ++i) d(i) = unif(rng);
      const Eigen::MatrixXd BD = B * d.asDiagonal();
      const Eigen::VectorXd scaled = scale_diagonal(BD, U, sys).cwiseProduct(sample_moments(BD, U, sys) + c);
      worst = std::max(worst, (scaled - base).cwiseAbs().maxCoeff() / base.cwiseAbs().maxCoeff());
    }
    o.checks.push_back(below("standardized moments under column scaling", worst, 1e-12));
  }

  {
    const MomentSystem sys = full_moment_system(3);
    const Eigen::MatrixXd B = lower_b0(3);
    const ShockPanel U(sample_panel(ShockModel::iid(GaussianMixture{}, 3), 2000, 53) * B.transpose());
    const Eigen::MatrixXd S = s_si(B, U, sys);
    const Eigen::MatrixXd G = g_empirical(B, U, sys);
    const Eigen::MatrixXd W = S.inverse();
    const Eigen::MatrixXd sandwich = asymptotic_covariance(G, S, W, 2000).matrix;
    const Eigen::MatrixXd eff = (G.transpose() * W * G).inverse();
    o.checks.push_back(below("sandwich with W = S^-1 vs (G' S^-1 G)^-1", relative_gap(sandwich, eff), 1e-9));
  }
}

void criterion_11(const fs::path& source, const fs::path& work, Outcome& o) {
  std::ifstream in(source / "scenarios" / "bivariate.json");
  nlohmann::json j = nlohmann::json::parse(in);
  j["replications"] = 6;
  j["sample_sizes"] = {200};
  j.erase("loss_curve");
  const Scenario sc = scenario_from_json(j);
  std::vector<std::uint64_t> hashes;
  for (unsigned threads : {1U, 3U}) {
    const fs::path dir = work / ("determinism_t" + std::to_string(threads));
    fs::remove_all(dir);
    RunOptions opt;
    opt.out_dir = dir;
    opt.threads = threads;
    run_scenario(sc, opt);
    hashes.push_back(file_hash(dir / "records.csv"));
  }
  std::ostringstream label;
  label << "records.csv hash with 1 and 3 threads: " << std::hex << hashes[0] << " / " << hashes[1];
  o.checks.push_back({label.str(), hashes[0] == hashes[1]});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria of the homent library"};
  std::string work_dir = "acceptance_runs";
  std::string source_dir = HOMENT_SOURCE_DIR;
  int replications = 500;
  unsigned threads = 0;
  bool full = false;
  app.add_option("--work-dir", work_dir, "Directory for scenario outputs (reused across runs)");
  app.add_option("--source-dir", source_dir, "Repository root holding scenarios/");
  app.add_option("--replications", replications, "Replications of the Monte Carlo criteria")->check(CLI::PositiveNumber);
  app.add_flag("--full", full, "Use 2000 replications");
  app.add_option("--threads", threads, "Worker threads (default: available cores)");
  CLI11_PARSE(app, argc, argv);
  if (full) replications = 2000;
  const fs::path work(work_dir);
  fs::create_directories(work);

  std::vector<Outcome> outcomes;
  auto run = [&](int id, const std::string& title, const std::function<void(Outcome&)>& body) {
    Outcome o{id, title, {}, {}};
    const auto start = std::chrono::steady_clock::now();
    try {
      body(o);
    } catch (const std::exception& e) {
      o.error = e.what();
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "criterion " << id << " (" << title << ") checked in " << fmt(s) << " s\n";
    for (const auto& c : o.checks) std::cout << "    [" << (c.ok ? "ok" : "no") << "] " << c.label << '\n';
    if (!o.error.empty()) std::cout << "    error: " << o.error << '\n';
    std::cout.flush();
    outcomes.push_back(std::move(o));
  };

  std::optional<Table3Run> t3;
  try {
    t3 = run_table3(source_dir, work, replications, threads);
  } catch (const std::exception& e) {
    std::cout << "table3 scenario failed: " << e.what() << '\n';
  }
  auto mc = [&](void (*f)(const Table3Run&, Outcome&)) {
    return [&, f](Outcome& o) {
      if (!t3) throw std::runtime_error("no Monte Carlo results");
      f(*t3, o);
    };
  };
  run(1, "scaling bias of innovation variances", mc(criterion_1));
  run(2, "coefficient statistics of b41", mc(criterion_2));
  run(3, "confidence interval coverage", mc(criterion_3));
  run(4, "Wald rejection rates", mc(criterion_4));
  run(5, "power curve", mc(criterion_5));
  run(6, "three-term noise decomposition", criterion_6);
  run(7, "noise derivative at the identity scaling", criterion_7);
  run(8, "noise floor K/T", [&](Outcome& o) { criterion_8(o, threads == 0 ? std::thread::hardware_concurrency() : threads); });
  run(9, "moment condition counts", criterion_9);
  run(10, "oracle suite", criterion_10);
  run(11, "determinism across thread counts", [&](Outcome& o) { criterion_11(source_dir, work, o); });

  std::cout << "\nsummary\n";
  int unexpected = 0;
  for (const auto& o : outcomes) {
    const bool pass = o.passed();
    std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << o.id << ": " << o.title;
    if (o.known_failure()) std::cout << "  [known deviation, see README]";
    else if (!pass) ++unexpected;
    std::cout << '\n';
  }
  std::cout << (unexpected == 0 ? "no unexpected failures\n" : std::to_string(unexpected) + " unexpected failures\n");
  return unexpected == 0 ? 0 : 1;
}
