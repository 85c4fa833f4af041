#include "homent/mc_harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "homent/errors.hpp"
#include "homent/version.hpp"

namespace homent {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw InvalidArgument(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw InvalidArgument(where + ": unknown key '" + key + "'");
  }
}

double number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw InvalidArgument(where + ": missing '" + key + "'");
  if (!j.at(key).is_number()) throw InvalidArgument(where + ": '" + key + "' must be a number");
  return j.at(key).get<double>();
}

double number_or(const json& j, const char* key, double fallback, const std::string& where) {
  return j.contains(key) ? number(j, key, where) : fallback;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw InvalidArgument(where + ": expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd M(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw InvalidArgument(where + ": rows must be arrays of equal length");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = row.at(static_cast<std::size_t>(c));
      if (!v.is_number()) throw InvalidArgument(where + ": entries must be numbers");
      M(r, c) = v.get<double>();
    }
  }
  if (!M.allFinite()) throw InvalidArgument(where + ": entries must be finite");
  return M;
}

std::pair<Eigen::Index, Eigen::Index> coefficient_from_json(const json& j, Eigen::Index n, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j.at(0).is_number_integer() || !j.at(1).is_number_integer())
    throw InvalidArgument(where + ": a coefficient is written [row, column] (one-based)");
  const auto r = j.at(0).get<Eigen::Index>() - 1;
  const auto c = j.at(1).get<Eigen::Index>() - 1;
  if (r < 0 || r >= n || c < 0 || c >= n) throw InvalidArgument(where + ": coefficient out of range");
  return {r, c};
}

std::vector<Eigen::Index> sizes_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw InvalidArgument(where + ": expected a non-empty array of sample sizes");
  std::vector<Eigen::Index> out;
  for (const auto& v : j) {
    if (!v.is_number_integer() || v.get<long long>() < 2) throw InvalidArgument(where + ": sample sizes must be integers >= 2");
    out.push_back(v.get<Eigen::Index>());
  }
  return out;
}

}  // namespace

TestSpec test_from_json(const json& j, Eigen::Index n, const Eigen::MatrixXd* B0) {
  const std::string where = "test";
  reject_unknown(j, {"name", "coefficients", "values"}, where);
  if (!j.contains("name") || !j.at("name").is_string()) throw InvalidArgument(where + ": missing test name");
  const std::string name = j.at("name").get<std::string>();
  if (name.empty() || name.find_first_of(",\"\n ") != std::string::npos)
    throw InvalidArgument(where + ": test names must be non-empty without commas, quotes or spaces");
  std::vector<std::pair<Eigen::Index, Eigen::Index>> coefs;
  const json& cj = j.contains("coefficients") ? j.at("coefficients") : json("all");
  if (cj.is_string()) {
    const auto s = cj.get<std::string>();
    if (s == "all") {
      for (Eigen::Index c = 0; c < n; ++c)
        for (Eigen::Index r = 0; r < n; ++r) coefs.emplace_back(r, c);
    } else if (s == "upper") {
      for (Eigen::Index c = 0; c < n; ++c)
        for (Eigen::Index r = 0; r < c; ++r) coefs.emplace_back(r, c);
    } else {
      throw InvalidArgument(where + ": coefficients must be \"all\", \"upper\" or a list");
    }
  } else if (cj.is_array()) {
    for (const auto& c : cj) coefs.push_back(coefficient_from_json(c, n, where));
  } else {
    throw InvalidArgument(where + ": coefficients must be \"all\", \"upper\" or a list");
  }
  if (coefs.empty()) throw InvalidArgument(where + ": no coefficients restricted");
  Eigen::VectorXd values(static_cast<Eigen::Index>(coefs.size()));
  const json& vj = j.contains("values") ? j.at("values") : json("B0");
  for (std::size_t i = 0; i < coefs.size(); ++i) {
    const auto [r, c] = coefs[i];
    if (vj.is_string()) {
      if (vj.get<std::string>() != "B0") throw InvalidArgument(where + ": values must be \"B0\", a number or a list");
      if (B0 == nullptr) throw InvalidArgument(where + ": values \"B0\" need a known B0");
      values(static_cast<Eigen::Index>(i)) = (*B0)(r, c);
    } else if (vj.is_number()) {
      values(static_cast<Eigen::Index>(i)) = vj.get<double>();
    } else if (vj.is_array() && vj.size() == coefs.size() && vj.at(i).is_number()) {
      values(static_cast<Eigen::Index>(i)) = vj.at(i).get<double>();
    } else {
      throw InvalidArgument(where + ": values must be \"B0\", a number or a list matching the coefficients");
    }
  }
  Restriction res{name, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(coefs.size()), n * n), values};
  for (std::size_t i = 0; i < coefs.size(); ++i)
    res.R(static_cast<Eigen::Index>(i), vec_index(coefs[i].first, coefs[i].second, n)) = 1.0;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(res.R.transpose());
  if (qr.rank() < res.R.rows()) throw InvalidArgument(where + ": repeated coefficients in a test");
  return {name, std::move(res)};
}

namespace {

std::string grid_label(double b) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", b);
  std::string s = buf;
  std::replace(s.begin(), s.end(), '.', 'p');
  std::replace(s.begin(), s.end(), '-', 'm');
  return s;
}

std::string power_column(const Scenario& sc, double b, Basis basis) {
  const auto& pc = *sc.power_curve;
  return "reject_" + coefficient_label(pc.row, pc.col, sc.dim()) + "_eq" + grid_label(b) + "_" + basis_name(basis);
}

double parse_cell(const std::string& s) {
  if (s.empty() || s == "NA") return std::numeric_limits<double>::quiet_NaN();
  return std::strtod(s.c_str(), nullptr);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string join_csv(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  return out;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
};

Moments mean_sd(const std::vector<double>& v) {
  Moments m;
  m.n = v.size();
  if (v.empty()) return m;
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return m;
}

}  // namespace

std::string format_number(double v) {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ShockDistribution shock_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
    throw InvalidArgument("shock spec: expected an object with a string 'kind'");
  const auto kind = j.at("kind").get<std::string>();
  const std::string where = "shock spec '" + kind + "'";
  ShockDistribution d;
  if (kind == "gaussian") {
    reject_unknown(j, {"kind"}, where);
    d = Gaussian{};
  } else if (kind == "gaussian_mixture") {
    reject_unknown(j, {"kind", "p", "mean1", "sd1", "mean2", "sd2"}, where);
    GaussianMixture m;
    m.p = number_or(j, "p", m.p, where);
    m.mean1 = number_or(j, "mean1", m.mean1, where);
    m.sd1 = number_or(j, "sd1", m.sd1, where);
    m.mean2 = number_or(j, "mean2", m.mean2, where);
    m.sd2 = number_or(j, "sd2", m.sd2, where);
    d = m;
  } else if (kind == "skew_normal") {
    reject_unknown(j, {"kind", "alpha"}, where);
    d = SkewNormal{number_or(j, "alpha", SkewNormal{}.alpha, where)};
  } else if (kind == "student_t") {
    reject_unknown(j, {"kind", "dof"}, where);
    d = StudentT{number_or(j, "dof", StudentT{}.dof, where)};
  } else if (kind == "truncated_normal") {
    reject_unknown(j, {"kind", "lower", "upper"}, where);
    d = TruncatedNormal{number(j, "lower", where), number(j, "upper", where)};
  } else {
    throw InvalidArgument("shock spec: unknown kind '" + kind + "'");
  }
  validate(d);
  return d;
}

json shock_to_json(const ShockDistribution& d) {
  return std::visit(
      [](const auto& law) -> json {
        using Law = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<Law, Gaussian>) return {{"kind", "gaussian"}};
        else if constexpr (std::is_same_v<Law, GaussianMixture>)
          return {{"kind", "gaussian_mixture"}, {"p", law.p},     {"mean1", law.mean1},
                  {"sd1", law.sd1},             {"mean2", law.mean2}, {"sd2", law.sd2}};
        else if constexpr (std::is_same_v<Law, SkewNormal>) return {{"kind", "skew_normal"}, {"alpha", law.alpha}};
        else if constexpr (std::is_same_v<Law, StudentT>) return {{"kind", "student_t"}, {"dof", law.dof}};
        else return {{"kind", "truncated_normal"}, {"lower", law.lower}, {"upper", law.upper}};
      },
      d);
}

Scenario scenario_from_json(const json& j) {
  reject_unknown(j,
                 {"schema_version", "name", "B0", "shocks", "common_volatility", "var", "sample_sizes", "replications",
                  "estimators", "inference", "coefficients", "tests", "power_curve", "loss_curve", "level", "seed"},
                 "scenario");
  if (j.contains("schema_version") && j.at("schema_version") != kScenarioSchemaVersion)
    throw InvalidArgument("scenario: unsupported schema_version");
  Scenario sc;
  sc.source = j;
  if (!j.contains("name") || !j.at("name").is_string()) throw InvalidArgument("scenario: missing 'name'");
  sc.name = j.at("name").get<std::string>();
  if (!j.contains("B0")) throw InvalidArgument("scenario: missing 'B0'");
  sc.B0 = matrix_from_json(j.at("B0"), "scenario B0");
  const Eigen::Index n = sc.B0.rows();
  if (sc.B0.cols() != n) throw InvalidArgument("scenario: B0 must be square");
  checked_inverse(sc.B0);

  if (!j.contains("shocks")) throw InvalidArgument("scenario: missing 'shocks'");
  const json& sj = j.at("shocks");
  if (sj.is_array()) {
    if (static_cast<Eigen::Index>(sj.size()) != n) throw InvalidArgument("scenario: one shock spec per variable");
    for (const auto& s : sj) sc.shocks.shocks.push_back(shock_from_json(s));
  } else {
    sc.shocks = ShockModel::iid(shock_from_json(sj), static_cast<std::size_t>(n));
  }
  if (j.contains("common_volatility")) {
    const json& cj = j.at("common_volatility");
    reject_unknown(cj, {"regime_prob", "regime_scale"}, "common_volatility");
    CommonVolatility cv;
    cv.regime_prob = number_or(cj, "regime_prob", cv.regime_prob, "common_volatility");
    cv.regime_scale = number_or(cj, "regime_scale", cv.regime_scale, "common_volatility");
    sc.shocks.volatility = cv;
  }
  validate(sc.shocks);

  if (j.contains("var")) {
    const json& vj = j.at("var");
    reject_unknown(vj, {"lags", "burn_in"}, "var");
    VarSpec spec;
    spec.B0 = sc.B0;
    if (!vj.contains("lags") || !vj.at("lags").is_array() || vj.at("lags").empty())
      throw InvalidArgument("var: 'lags' must list at least one coefficient matrix");
    for (const auto& a : vj.at("lags")) {
      spec.A.push_back(matrix_from_json(a, "var lag matrix"));
      if (spec.A.back().rows() != n || spec.A.back().cols() != n) throw InvalidArgument("var: lag matrices must be n x n");
    }
    if (companion_spectral_radius(spec) >= 1.0) throw InvalidArgument("var: lag polynomial is not stationary");
    if (vj.contains("burn_in")) {
      if (!vj.at("burn_in").is_number_integer() || vj.at("burn_in").get<long long>() < 0)
        throw InvalidArgument("var: burn_in must be a non-negative integer");
      sc.burn_in = vj.at("burn_in").get<Eigen::Index>();
    }
    sc.var = std::move(spec);
  }

  if (!j.contains("sample_sizes")) throw InvalidArgument("scenario: missing 'sample_sizes'");
  sc.sample_sizes = sizes_from_json(j.at("sample_sizes"), "scenario sample_sizes");
  if (j.contains("replications")) {
    if (!j.at("replications").is_number_integer() || j.at("replications").get<long long>() < 1)
      throw InvalidArgument("scenario: replications must be a positive integer");
    sc.replications = j.at("replications").get<int>();
  }
  if (!j.contains("estimators") || !j.at("estimators").is_array() || j.at("estimators").empty())
    throw InvalidArgument("scenario: 'estimators' must be a non-empty list");
  for (const auto& e : j.at("estimators")) {
    if (!e.is_string()) throw InvalidArgument("scenario: estimator names must be strings");
    const auto k = parse_estimator(e.get<std::string>());
    if (std::find(sc.estimators.begin(), sc.estimators.end(), k) != sc.estimators.end())
      throw InvalidArgument("scenario: duplicate estimator");
    sc.estimators.push_back(k);
  }
  if (j.contains("inference")) {
    for (const auto& b : j.at("inference")) {
      if (!b.is_string()) throw InvalidArgument("scenario: inference bases must be strings");
      const auto basis = parse_basis(b.get<std::string>());
      if (std::find(sc.bases.begin(), sc.bases.end(), basis) != sc.bases.end())
        throw InvalidArgument("scenario: duplicate inference basis");
      sc.bases.push_back(basis);
    }
  } else {
    sc.bases = {Basis::SMI, Basis::SI};
  }
  if (j.contains("coefficients")) {
    for (const auto& c : j.at("coefficients")) sc.coefficients.push_back(coefficient_from_json(c, n, "scenario coefficients"));
  } else {
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = 0; c < n; ++c) sc.coefficients.emplace_back(r, c);
  }
  if (j.contains("tests")) {
    std::set<std::string> names;
    for (const auto& t : j.at("tests")) {
      sc.tests.push_back(test_from_json(t, n, &sc.B0));
      if (!names.insert(sc.tests.back().name).second) throw InvalidArgument("scenario: duplicate test name");
    }
  }
  if (j.contains("power_curve")) {
    const json& pj = j.at("power_curve");
    reject_unknown(pj, {"coefficient", "grid"}, "power_curve");
    PowerCurveSpec pc;
    if (!pj.contains("coefficient")) throw InvalidArgument("power_curve: missing 'coefficient'");
    std::tie(pc.row, pc.col) = coefficient_from_json(pj.at("coefficient"), n, "power_curve");
    if (!pj.contains("grid") || !pj.at("grid").is_array() || pj.at("grid").empty())
      throw InvalidArgument("power_curve: 'grid' must be a non-empty list");
    for (const auto& b : pj.at("grid")) {
      if (!b.is_number()) throw InvalidArgument("power_curve: grid values must be numbers");
      pc.grid.push_back(b.get<double>());
    }
    sc.power_curve = std::move(pc);
  }
  if (j.contains("loss_curve")) {
    const json& lj = j.at("loss_curve");
    reject_unknown(lj, {"sample_sizes", "replications"}, "loss_curve");
    LossCurveSpec lc;
    if (!lj.contains("sample_sizes")) throw InvalidArgument("loss_curve: missing 'sample_sizes'");
    lc.sample_sizes = sizes_from_json(lj.at("sample_sizes"), "loss_curve sample_sizes");
    if (lj.contains("replications")) {
      if (!lj.at("replications").is_number_integer() || lj.at("replications").get<long long>() < 1)
        throw InvalidArgument("loss_curve: replications must be a positive integer");
      lc.replications = lj.at("replications").get<int>();
    }
    sc.loss_curve = std::move(lc);
  }
  sc.level = number_or(j, "level", sc.level, "scenario");
  if (!(sc.level > 0.0 && sc.level < 1.0)) throw InvalidArgument("scenario: level must lie in (0,1)");
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer())
      throw InvalidArgument("scenario: seed must be a non-negative integer");
    if (j.at("seed").is_number_integer() && j.at("seed").get<long long>() < 0)
      throw InvalidArgument("scenario: seed must be a non-negative integer");
    sc.seed = j.at("seed").get<std::uint64_t>();
  }
  const std::size_t lags = sc.var ? sc.var->lags() : 0;
  for (auto T : sc.sample_sizes)
    if (T <= static_cast<Eigen::Index>(n * static_cast<Eigen::Index>(lags) + 1 + n))
      throw InvalidArgument("scenario: sample size too small for the model");
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open scenario file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidArgument("scenario " + path.string() + ": " + e.what());
  }
  return scenario_from_json(j);
}

std::uint64_t scenario_hash(const Scenario& sc) { return fnv1a(sc.source.dump()); }

std::string coefficient_label(Eigen::Index row, Eigen::Index col, Eigen::Index n) {
  if (n > 9) return "b" + std::to_string(row + 1) + "_" + std::to_string(col + 1);
  return "b" + std::to_string(row + 1) + std::to_string(col + 1);
}

std::vector<std::string> record_columns(const Scenario& sc) {
  const Eigen::Index n = sc.dim();
  std::vector<std::string> cols{"scenario", "T", "rep", "estimator", "converged", "iterations", "restarts", "loss",
                                "gradient_norm"};
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) cols.push_back(coefficient_label(r, c, n) + "_hat");
  for (Eigen::Index i = 0; i < n; ++i) cols.push_back("var_e" + std::to_string(i + 1));
  for (Basis b : sc.bases) {
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = 0; c < n; ++c) cols.push_back("cover_" + coefficient_label(r, c, n) + "_" + basis_name(b));
    for (const auto& t : sc.tests) {
      cols.push_back("stat_" + t.name + "_" + basis_name(b));
      cols.push_back("reject_" + t.name + "_" + basis_name(b));
    }
    if (sc.power_curve)
      for (double v : sc.power_curve->grid) cols.push_back(power_column(sc, v, b));
  }
  return cols;
}

ShockPanel replication_panel(const Scenario& sc, Eigen::Index T, int rep) {
  const std::uint64_t seed =
      derive_seed(sc.seed, {static_cast<std::uint64_t>(T), static_cast<std::uint64_t>(rep)});
  if (!sc.var) return ShockPanel(sample_panel(sc.shocks, T, seed) * sc.B0.transpose());
  const Eigen::MatrixXd eps = sample_panel(sc.shocks, T + sc.burn_in, seed);
  const Eigen::MatrixXd y = simulate_var(*sc.var, eps, sc.burn_in);
  return ShockPanel(ols_var(y, sc.var->lags()).residuals);
}

ScenarioContext::ScenarioContext(const Scenario& sc)
    : sys(full_moment_system(static_cast<std::size_t>(sc.dim()))),
      ev(sys),
      S_true(s_true(sc.shocks, sys)),
      V_true(efficient_covariance(g_true(sc.B0, sc.shocks, sys), S_true)) {}

std::vector<std::vector<std::string>> run_replication(const Scenario& sc, const ScenarioContext& ctx, Eigen::Index T,
                                                      int rep, const std::vector<EstimatorKind>& estimators,
                                                      std::vector<double>* wall_ms) {
  const Eigen::Index n = sc.dim();
  const ShockPanel U = replication_panel(sc, T, rep);
  const auto columns = record_columns(sc);
  const double alpha = 1.0 - sc.level;
  std::vector<std::vector<std::string>> out;
  for (EstimatorKind kind : estimators) {
    const auto t0 = std::chrono::steady_clock::now();
    std::map<std::string, std::string> cell;
    cell["scenario"] = sc.name;
    cell["T"] = std::to_string(T);
    cell["rep"] = std::to_string(rep);
    cell["estimator"] = estimator_name(kind);
    cell["converged"] = "0";
    try {
      const EstimateResult est = run_estimator(kind, U, ctx.ev, ctx.S_true);
      const SignedPermutation sp = sign_permute_reference(est.B_hat, sc.B0, ctx.V_true);
      const Eigen::VectorXd beta = vec(sp.B);
      cell["converged"] = est.converged ? "1" : "0";
      cell["iterations"] = std::to_string(est.iterations);
      cell["restarts"] = std::to_string(est.restarts);
      cell["loss"] = format_number(est.loss);
      cell["gradient_norm"] = format_number(est.gradient_norm);
      for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < n; ++c) cell[coefficient_label(r, c, n) + "_hat"] = format_number(sp.B(r, c));
      const Eigen::MatrixXd e = innovations(sp.B, U);
      for (Eigen::Index i = 0; i < n; ++i)
        cell["var_e" + std::to_string(i + 1)] = format_number(e.col(i).squaredNorm() / static_cast<double>(e.rows()));
      for (Basis b : sc.bases) {
        const std::string tag = "_" + basis_name(b);
        Eigen::MatrixXd V;
        try {
          V = permute_covariance(infer(est, U, ctx.ev, b, &sc.shocks).avar.matrix, sp.perm, sp.sign);
        } catch (const std::exception&) {
          continue;  // cells stay NA
        }
        const Eigen::Index Tu = U.rows();
        for (Eigen::Index r = 0; r < n; ++r)
          for (Eigen::Index c = 0; c < n; ++c) {
            const Interval ci = confidence_interval(vec_index(r, c, n), V, beta, Tu, sc.level);
            cell["cover_" + coefficient_label(r, c, n) + tag] = ci.contains(sc.B0(r, c)) ? "1" : "0";
          }
        for (const auto& t : sc.tests) {
          const WaldTest w = wald(t.restriction.R, t.restriction.r, beta, V, Tu);
          cell["stat_" + t.name + tag] = format_number(w.statistic);
          cell["reject_" + t.name + tag] = w.p_value < alpha ? "1" : "0";
        }
        if (sc.power_curve) {
          const auto& pc = *sc.power_curve;
          for (double v : pc.grid) {
            const Restriction res = coefficient_restriction("power", n, pc.row, pc.col, v);
            const WaldTest w = wald(res.R, res.r, beta, V, Tu);
            cell[power_column(sc, v, b)] = w.p_value < alpha ? "1" : "0";
          }
        }
      }
    } catch (const std::exception&) {
      cell["converged"] = "0";
    }
    std::vector<std::string> row;
    row.reserve(columns.size());
    for (const auto& c : columns) {
      auto it = cell.find(c);
      row.push_back(it == cell.end() ? "NA" : it->second);
    }
    out.push_back(std::move(row));
    if (wall_ms != nullptr)
      wall_ms->push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return out;
}

std::size_t RecordTable::column(const std::string& name) const {
  const auto idx = find(name);
  if (!idx) throw InvalidArgument("records: missing column '" + name + "'");
  return *idx;
}

std::optional<std::size_t> RecordTable::find(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) return std::nullopt;
  return static_cast<std::size_t>(it - columns.begin());
}

RecordTable read_records(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw InvalidArgument("cannot open records file " + file.string());
  RecordTable t;
  std::string line;
  if (!std::getline(in, line)) return t;
  t.columns = split_csv_line(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    // A trailing partial line from an interrupted run is dropped.
    if (cells.size() != t.columns.size()) {
      if (in.peek() == EOF) break;
      throw InvalidArgument("records file " + file.string() + ": ragged row at line " + std::to_string(lineno));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

void write_csv(const std::filesystem::path& file, const std::vector<std::string>& columns,
               const std::vector<std::vector<std::string>>& rows) {
  const auto tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write " + file.string());
    out << join_csv(columns) << '\n';
    for (const auto& r : rows) out << join_csv(r) << '\n';
  }
  std::filesystem::rename(tmp, file);
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

SummaryTable summarize(const Scenario& sc, const RecordTable& records, const std::string& kind) {
  if (records.rows.empty()) throw InvalidArgument("summarize: no records");
  const Eigen::Index n = sc.dim();
  const std::size_t colT = records.column("T");
  const std::size_t colE = records.column("estimator");

  // Values of a column for one (T, estimator) group, non-finite cells skipped.
  auto values = [&](Eigen::Index T, const std::string& est, const std::string& column) {
    std::vector<double> out;
    const std::size_t c = records.column(column);
    const std::string Ts = std::to_string(T);
    for (const auto& row : records.rows) {
      if (row[colT] != Ts || row[colE] != est) continue;
      const double v = parse_cell(row[c]);
      if (std::isfinite(v)) out.push_back(v);
    }
    return out;
  };
  auto percent = [](const std::vector<double>& v) {
    return v.empty() ? std::numeric_limits<double>::quiet_NaN()
                     : 100.0 * std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };

  SummaryTable t;
  t.kind = kind;
  if (kind == "variance_quantiles") {
    t.columns = {"T", "estimator", "innovation", "mean", "q10", "q90", "n"};
    for (auto T : sc.sample_sizes)
      for (auto k : sc.estimators)
        for (Eigen::Index i = 0; i < n; ++i) {
          const auto v = values(T, estimator_name(k), "var_e" + std::to_string(i + 1));
          t.rows.push_back({std::to_string(T), estimator_name(k), std::to_string(i + 1), format_number(mean_sd(v).mean),
                            format_number(quantile(v, 0.10)), format_number(quantile(v, 0.90)), std::to_string(v.size())});
        }
  } else if (kind == "coef_stats") {
    t.columns = {"T", "estimator", "coefficient", "true", "mean", "median", "iqr", "sd", "n"};
    for (auto T : sc.sample_sizes)
      for (auto k : sc.estimators)
        for (const auto& [r, c] : sc.coefficients) {
          const auto label = coefficient_label(r, c, n);
          const auto v = values(T, estimator_name(k), label + "_hat");
          const auto m = mean_sd(v);
          t.rows.push_back({std::to_string(T), estimator_name(k), label, format_number(sc.B0(r, c)),
                            format_number(m.mean), format_number(quantile(v, 0.5)),
                            format_number(quantile(v, 0.75) - quantile(v, 0.25)), format_number(m.sd),
                            std::to_string(v.size())});
        }
  } else if (kind == "coverage") {
    t.columns = {"T", "estimator", "coefficient", "basis", "coverage_pct", "n"};
    for (auto T : sc.sample_sizes)
      for (auto k : sc.estimators)
        for (const auto& [r, c] : sc.coefficients)
          for (Basis b : sc.bases) {
            const auto label = coefficient_label(r, c, n);
            const auto v = values(T, estimator_name(k), "cover_" + label + "_" + basis_name(b));
            t.rows.push_back({std::to_string(T), estimator_name(k), label, basis_name(b), format_number(percent(v)),
                              std::to_string(v.size())});
          }
  } else if (kind == "rejection") {
    t.columns = {"T", "estimator", "test", "basis", "rejection_pct", "n"};
    for (auto T : sc.sample_sizes)
      for (auto k : sc.estimators)
        for (const auto& test : sc.tests)
          for (Basis b : sc.bases) {
            const auto v = values(T, estimator_name(k), "reject_" + test.name + "_" + basis_name(b));
            t.rows.push_back({std::to_string(T), estimator_name(k), test.name, basis_name(b),
                              format_number(percent(v)), std::to_string(v.size())});
          }
  } else if (kind == "power_curve") {
    t.columns = {"T", "estimator", "coefficient", "basis", "b", "rejection_pct", "n"};
    if (sc.power_curve) {
      const auto& pc = *sc.power_curve;
      for (auto T : sc.sample_sizes)
        for (auto k : sc.estimators)
          for (Basis b : sc.bases)
            for (double g : pc.grid) {
              const auto v = values(T, estimator_name(k), power_column(sc, g, b));
              t.rows.push_back({std::to_string(T), estimator_name(k), coefficient_label(pc.row, pc.col, n),
                                basis_name(b), format_number(g), format_number(percent(v)), std::to_string(v.size())});
            }
    }
  } else {
    throw InvalidArgument("summarize: unknown table kind '" + kind + "'");
  }
  return t;
}

namespace {

struct Task {
  std::size_t t_index;
  int rep;
  std::vector<EstimatorKind> estimators;
};

struct Done {
  std::vector<std::vector<std::string>> rows;
  std::vector<double> wall_ms;
};

std::tuple<std::size_t, int, std::size_t> record_key(const Scenario& sc, const std::vector<std::string>& row,
                                                     const RecordTable& layout) {
  const auto T = std::stoll(row[layout.column("T")]);
  const int rep = std::stoi(row[layout.column("rep")]);
  const auto est = parse_estimator(row[layout.column("estimator")]);
  const auto ti = static_cast<std::size_t>(
      std::find(sc.sample_sizes.begin(), sc.sample_sizes.end(), static_cast<Eigen::Index>(T)) - sc.sample_sizes.begin());
  const auto ei = static_cast<std::size_t>(std::find(sc.estimators.begin(), sc.estimators.end(), est) - sc.estimators.begin());
  return {ti, rep, ei};
}

}  // namespace

RunSummary run_scenario(const Scenario& sc, const RunOptions& opt) {
  namespace fs = std::filesystem;
  fs::create_directories(opt.out_dir);
  const fs::path records_file = opt.out_dir / "records.csv";
  const fs::path manifest_file = opt.out_dir / "manifest.json";
  const fs::path timings_file = opt.out_dir / "timings.csv";
  const auto columns = record_columns(sc);
  const std::string hash = hex64(scenario_hash(sc));

  std::set<std::tuple<std::size_t, int, std::size_t>> done;
  if (opt.resume && fs::exists(records_file)) {
    if (fs::exists(manifest_file)) {
      std::ifstream in(manifest_file);
      const json m = json::parse(in, nullptr, false);
      if (!m.is_discarded() && m.contains("scenario_hash") && m.at("scenario_hash") != hash)
        throw InvalidArgument("records in " + opt.out_dir.string() + " belong to a different scenario");
    }
    RecordTable existing = read_records(records_file);
    if (!existing.columns.empty() && existing.columns != columns)
      throw InvalidArgument("records in " + opt.out_dir.string() + " have a different layout");
    // Rewrite without any partial trailing line before appending.
    write_csv(records_file, columns, existing.rows);
    existing.columns = columns;
    for (const auto& row : existing.rows) done.insert(record_key(sc, row, existing));
  } else {
    write_csv(records_file, columns, {});
    std::error_code ec;
    fs::remove(timings_file, ec);
  }
  {
    json m = {{"schema_version", kScenarioSchemaVersion}, {"scenario", sc.name}, {"scenario_hash", hash},
              {"status", "running"}};
    std::ofstream(manifest_file) << m.dump(2) << '\n';
  }

  std::vector<Task> tasks;
  for (std::size_t ti = 0; ti < sc.sample_sizes.size(); ++ti)
    for (int rep = 0; rep < sc.replications; ++rep) {
      Task task{ti, rep, {}};
      for (std::size_t ei = 0; ei < sc.estimators.size(); ++ei)
        if (!done.count({ti, rep, ei})) task.estimators.push_back(sc.estimators[ei]);
      if (!task.estimators.empty()) tasks.push_back(std::move(task));
    }

  const ScenarioContext ctx(sc);
  unsigned threads = opt.threads == 0 ? std::max(1U, std::thread::hardware_concurrency()) : opt.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(tasks.size(), 1)));

  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::condition_variable cv;
  std::map<std::size_t, Done> finished;
  std::exception_ptr failure;
  std::atomic<bool> abort{false};

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size() || abort.load()) return;
      Done d;
      try {
        const Task& task = tasks[i];
        d.rows = run_replication(sc, ctx, sc.sample_sizes[task.t_index], task.rep, task.estimators, &d.wall_ms);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
        abort = true;
        cv.notify_all();
        return;
      }
      std::lock_guard<std::mutex> lock(mu);
      finished.emplace(i, std::move(d));
      cv.notify_all();
    }
  };

  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);

  RunSummary summary;
  {
    std::ofstream rec(records_file, std::ios::app | std::ios::binary);
    const bool new_timings = !fs::exists(timings_file);
    std::ofstream tim(timings_file, std::ios::app);
    if (new_timings) tim << "T,rep,estimator,wall_ms\n";
    std::size_t write_next = 0;
    while (write_next < tasks.size()) {
      Done d;
      {
        std::unique_lock<std::mutex> lock(mu);
        cv.wait(lock, [&] { return abort.load() || finished.count(write_next) > 0; });
        if (abort.load() && !finished.count(write_next)) break;
        d = std::move(finished.at(write_next));
        finished.erase(write_next);
      }
      const Task& task = tasks[write_next];
      for (std::size_t r = 0; r < d.rows.size(); ++r) {
        rec << join_csv(d.rows[r]) << '\n';
        tim << sc.sample_sizes[task.t_index] << ',' << task.rep << ',' << estimator_name(task.estimators[r]) << ','
            << format_number(d.wall_ms[r]) << '\n';
        ++summary.computed;
      }
      rec.flush();
      ++write_next;
      if (!opt.quiet && (write_next % 50 == 0 || write_next == tasks.size()))
        std::cerr << "[" << sc.name << "] " << write_next << "/" << tasks.size() << " replications\n";
    }
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  // Canonical order, independent of interruptions and resumption.
  RecordTable all = read_records(records_file);
  std::sort(all.rows.begin(), all.rows.end(), [&](const auto& a, const auto& b) {
    return record_key(sc, a, all) < record_key(sc, b, all);
  });
  write_csv(records_file, columns, all.rows);

  summary.records = all.rows.size();
  const std::size_t conv_col = all.column("converged");
  for (const auto& row : all.rows)
    if (row[conv_col] != "1") ++summary.failures;
  if (summary.records > 0 && static_cast<double>(summary.failures) > 0.05 * static_cast<double>(summary.records))
    summary.warnings.push_back("more than 5% of the estimations did not converge");

  for (const auto& kind : summary_kinds()) {
    const SummaryTable t = summarize(sc, all, kind);
    write_csv(opt.out_dir / ("summary_" + kind + ".csv"), t.columns, t.rows);
  }
  if (sc.loss_curve) {
    const auto points = loss_at_truth(sc, *sc.loss_curve, threads);
    std::vector<std::vector<std::string>> rows;
    for (const auto& p : points)
      rows.push_back({std::to_string(p.T), p.weighting, format_number(p.mean), format_number(p.q10),
                      format_number(p.q90), format_number(p.mean * static_cast<double>(p.T))});
    write_csv(opt.out_dir / "loss_at_truth.csv", {"T", "weighting", "mean", "q10", "q90", "T_times_mean"}, rows);
  }

  json manifest = {
      {"schema_version", kScenarioSchemaVersion},
      {"scenario", sc.name},
      {"scenario_hash", hash},
      {"scenario_source", sc.source},
      {"seed", sc.seed},
      {"records", summary.records},
      {"failures", summary.failures},
      {"warnings", summary.warnings},
      {"versions", {{"homent", kVersion}, {"eigen", eigen_version()}, {"boost", boost_version()}, {"ceres", ceres_version()}}},
      {"notes",
       sc.var ? json::array({"second-step inference treats the VAR residuals as data"}) : json::array()},
      {"status", "complete"}};
  std::ofstream(manifest_file) << manifest.dump(2) << '\n';
  return summary;
}

std::vector<LossCurvePoint> loss_at_truth(const Scenario& sc, const LossCurveSpec& spec, unsigned threads) {
  const ScenarioContext ctx(sc);
  const Eigen::MatrixXd W_true = floored_inverse(ctx.S_true).inverse;
  std::vector<LossCurvePoint> out;
  threads = std::max(1U, threads);
  for (Eigen::Index T : spec.sample_sizes) {
    const auto R = static_cast<std::size_t>(spec.replications);
    std::vector<double> lt(R), ls(R), lm(R);
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
      for (std::size_t r; (r = next.fetch_add(1)) < R;) {
        const std::uint64_t seed =
            derive_seed(sc.seed, {static_cast<std::uint64_t>(T), static_cast<std::uint64_t>(r), 0x10559ULL});
        const Eigen::MatrixXd eps = sample_panel(sc.shocks, T, seed);
        const Eigen::VectorXd g = ctx.ev.moments(ctx.ev.means(eps));
        lt[r] = g.dot(W_true * g);
        ls[r] = g.dot(floored_inverse(s_si(ctx.ev, eps)).inverse * g);
        lm[r] = g.dot(floored_inverse(s_smi_empirical(ctx.sys, eps)).inverse * g);
      }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
    for (auto [name, v] : {std::pair<const char*, std::vector<double>*>{"true", &lt}, {"si", &ls}, {"smi", &lm}})
      out.push_back({T, name, mean_sd(*v).mean, quantile(*v, 0.10), quantile(*v, 0.90)});
  }
  return out;
}

}  // namespace homent
