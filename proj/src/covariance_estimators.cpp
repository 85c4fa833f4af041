#include "homent/covariance_estimators.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>

#include "homent/errors.hpp"
#include "json.hpp"

namespace homent {

namespace {

using Exponents = std::vector<int>;

std::vector<int> add(const MultiIndex& a, const MultiIndex& b) {
  std::vector<int> out(a.exponents());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

double factorized(const UnivariateMomentTable& t, const std::vector<int>& powers) {
  double v = 1.0;
  for (std::size_t i = 0; i < powers.size(); ++i) v *= t(i, powers[i]);
  return v;
}

void require_order(const UnivariateMomentTable& t, const MomentSystem& sys, int needed, const char* who) {
  if (t.dim() != sys.dim()) throw InvalidArgument(std::string(who) + ": moment table dimension mismatch");
  if (t.max_order() < needed)
    throw InvalidArgument(std::string(who) + ": moments up to order " + std::to_string(needed) + " are required");
}

template <class Expect>
Eigen::MatrixXd covariance_from(const MomentSystem& sys, Expect&& expect) {
  const auto K = static_cast<Eigen::Index>(sys.size());
  Eigen::MatrixXd S(K, K);
  std::vector<double> single(sys.size());
  for (std::size_t k = 0; k < sys.size(); ++k) single[k] = expect(sys[k].exponents());
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto& m = sys[static_cast<std::size_t>(k)];
    const double c = m.constant();
    for (Eigen::Index l = k; l < K; ++l) {
      const auto& mt = sys[static_cast<std::size_t>(l)];
      const double ct = mt.constant();
      const double v = expect(add(m, mt)) - c * single[static_cast<std::size_t>(l)] -
                       ct * single[static_cast<std::size_t>(k)] + c * ct;
      S(k, l) = v;
      S(l, k) = v;
    }
  }
  return S;
}

template <class Expect>
Eigen::MatrixXd jacobian_from(const Eigen::MatrixXd& A, const MomentSystem& sys, Expect&& expect) {
  const std::size_t n = sys.dim();
  const auto ni = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sys.size()), ni * ni);
  for (std::size_t k = 0; k < sys.size(); ++k) {
    const auto& m = sys[k];
    for (std::size_t j = 0; j < n; ++j) {
      if (m[j] == 0) continue;
      for (std::size_t q = 0; q < n; ++q) {
        auto shifted = m.exponents();
        --shifted[j];
        ++shifted[q];
        const double h = m[j] * expect(shifted);
        for (Eigen::Index p = 0; p < ni; ++p)
          G(static_cast<Eigen::Index>(k), vec_index(p, static_cast<Eigen::Index>(q), ni)) -=
              A(static_cast<Eigen::Index>(j), p) * h;
      }
    }
  }
  return G;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string basis_name(Basis b) {
  switch (b) {
    case Basis::SI: return "si";
    case Basis::SMI: return "smi";
    case Basis::TRUE: return "true";
  }
  return "?";
}

Basis parse_basis(const std::string& s) {
  if (s == "si" || s == "SI") return Basis::SI;
  if (s == "smi" || s == "SMI") return Basis::SMI;
  if (s == "true" || s == "TRUE") return Basis::TRUE;
  throw InvalidArgument("unknown inference basis '" + s + "'");
}

Eigen::MatrixXd s_si(const MomentEvaluator& ev, const Eigen::MatrixXd& e) {
  const Eigen::MatrixXd F = ev.moment_functions(e);
  Eigen::MatrixXd S = (F.transpose() * F) / static_cast<double>(F.rows());
  return 0.5 * (S + S.transpose());
}

Eigen::MatrixXd s_si(const Eigen::MatrixXd& B, const ShockPanel& U, const MomentSystem& sys) {
  const MomentEvaluator ev(sys);
  return s_si(ev, innovations(B, U));
}

Eigen::MatrixXd s_smi(const UnivariateMomentTable& moments, const MomentSystem& sys) {
  require_order(moments, sys, 2 * sys.max_exponent(), "s_smi");
  return covariance_from(sys, [&](const std::vector<int>& r) { return factorized(moments, r); });
}

Eigen::MatrixXd s_smi_empirical(const MomentSystem& sys, const Eigen::MatrixXd& e) {
  return s_smi(sample_moment_table(e, 2 * sys.max_exponent()), sys);
}

Eigen::MatrixXd s_smi_empirical(const Eigen::MatrixXd& B, const ShockPanel& U, const MomentSystem& sys) {
  return s_smi_empirical(sys, innovations(B, U));
}

Eigen::MatrixXd g_empirical(const Eigen::MatrixXd& B, const ShockPanel& U, const MomentSystem& sys) {
  return moment_jacobian(B, U, sys);
}

Eigen::MatrixXd g_smi(const Eigen::MatrixXd& B, const UnivariateMomentTable& moments, const MomentSystem& sys) {
  require_order(moments, sys, sys.max_exponent() + 1, "g_smi");
  const Eigen::MatrixXd A = checked_inverse(B);
  return jacobian_from(A, sys, [&](const std::vector<int>& r) { return factorized(moments, r); });
}

Eigen::MatrixXd g_smi_empirical(const Eigen::MatrixXd& B, const ShockPanel& U, const MomentSystem& sys) {
  return g_smi(B, sample_moment_table(innovations(B, U), sys.max_exponent() + 1), sys);
}

Eigen::MatrixXd s_true(const ShockModel& model, const MomentSystem& sys) {
  if (model.dim() != sys.dim()) throw InvalidArgument("s_true: shock model dimension mismatch");
  const PopulationMoments pop(model, 8);
  return covariance_from(sys, [&](const std::vector<int>& r) { return pop.joint(r); });
}

Eigen::MatrixXd g_true(const Eigen::MatrixXd& B0, const ShockModel& model, const MomentSystem& sys) {
  if (model.dim() != sys.dim()) throw InvalidArgument("g_true: shock model dimension mismatch");
  const PopulationMoments pop(model, 8);
  const Eigen::MatrixXd A = checked_inverse(B0);
  return jacobian_from(A, sys, [&](const std::vector<int>& r) { return pop.joint(r); });
}

PopulationMomentFunctions::PopulationMomentFunctions(Eigen::MatrixXd B0, ShockModel model, MomentSystem sys)
    : B0_(std::move(B0)), pop_(std::move(model), 8), sys_(std::move(sys)) {
  if (B0_.rows() != static_cast<Eigen::Index>(sys_.dim()) || pop_.dim() != sys_.dim())
    throw InvalidArgument("population moment functions: dimension mismatch");
  checked_inverse(B0_);
}

double PopulationMomentFunctions::expectation(const Eigen::MatrixXd& C, const std::vector<int>& powers) const {
  // prod_i (C_i . eps)^{r_i} as a polynomial in eps, one linear factor at a time.
  const std::size_t n = powers.size();
  std::map<Exponents, double> poly{{Exponents(n, 0), 1.0}};
  for (std::size_t i = 0; i < n; ++i) {
    for (int r = 0; r < powers[i]; ++r) {
      std::map<Exponents, double> next;
      for (const auto& [exps, coef] : poly) {
        for (std::size_t j = 0; j < n; ++j) {
          const double cij = C(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
          if (cij == 0.0) continue;
          auto e = exps;
          ++e[j];
          next[e] += coef * cij;
        }
      }
      poly = std::move(next);
    }
  }
  double out = 0.0;
  for (const auto& [exps, coef] : poly) out += coef * pop_.joint(exps);
  return out;
}

Eigen::VectorXd PopulationMomentFunctions::mean(const Eigen::MatrixXd& B) const {
  const Eigen::MatrixXd C = checked_inverse(B) * B0_;
  Eigen::VectorXd out(static_cast<Eigen::Index>(sys_.size()));
  for (std::size_t k = 0; k < sys_.size(); ++k)
    out(static_cast<Eigen::Index>(k)) = expectation(C, sys_[k].exponents()) - sys_[k].constant();
  return out;
}

Eigen::MatrixXd PopulationMomentFunctions::second_moment(const Eigen::MatrixXd& B) const {
  const Eigen::MatrixXd C = checked_inverse(B) * B0_;
  std::map<Exponents, double> memo;
  auto expect = [&](const std::vector<int>& r) {
    auto it = memo.find(r);
    if (it != memo.end()) return it->second;
    const double v = expectation(C, r);
    memo.emplace(r, v);
    return v;
  };
  return covariance_from(sys_, expect);
}

FlooredInverse floored_inverse(const Eigen::MatrixXd& S) {
  if (S.rows() != S.cols() || S.rows() == 0) throw InvalidArgument("floored_inverse: matrix must be square");
  if (!S.allFinite()) throw SingularMatrixError("floored_inverse: non-finite entries");
  const Eigen::MatrixXd sym = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw SingularMatrixError("floored_inverse: eigendecomposition failed");
  Eigen::VectorXd lambda = eig.eigenvalues();
  const double floor = std::max(kEigenFloorRelative * lambda.maxCoeff(), kEigenFloorAbsolute);
  bool floored = false;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < floor) {
      lambda(i) = floor;
      floored = true;
    }
  }
  const Eigen::MatrixXd& V = eig.eigenvectors();
  Eigen::MatrixXd inv = V * lambda.cwiseInverse().asDiagonal() * V.transpose();
  return {0.5 * (inv + inv.transpose()), floored};
}

std::string canonical_key(const ShockDistribution& d) {
  return std::visit(
      [](const auto& law) -> std::string {
        using Law = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<Law, Gaussian>) return "gaussian()";
        else if constexpr (std::is_same_v<Law, GaussianMixture>)
          return "gaussian_mixture(p=" + format_double(law.p) + ",mean1=" + format_double(law.mean1) +
                 ",sd1=" + format_double(law.sd1) + ",mean2=" + format_double(law.mean2) +
                 ",sd2=" + format_double(law.sd2) + ")";
        else if constexpr (std::is_same_v<Law, SkewNormal>) return "skew_normal(alpha=" + format_double(law.alpha) + ")";
        else if constexpr (std::is_same_v<Law, StudentT>) return "student_t(dof=" + format_double(law.dof) + ")";
        else
          return "truncated_normal(lower=" + format_double(law.lower) + ",upper=" + format_double(law.upper) + ")";
      },
      d);
}

MomentCache::MomentCache(std::filesystem::path dir) : file_(std::move(dir) / "population_moments.json") {}

std::optional<MomentCache> MomentCache::from_environment() {
  const char* dir = std::getenv("HOMENT_CACHE_DIR");
  if (dir == nullptr || *dir == '\0') return std::nullopt;
  return MomentCache(dir);
}

std::vector<double> MomentCache::population_moments(const ShockDistribution& d, int max_order) const {
  const std::string key = canonical_key(d) + "/" + std::to_string(max_order);
  nlohmann::json table = nlohmann::json::object();
  if (std::filesystem::exists(file_)) {
    std::ifstream in(file_);
    try {
      table = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception&) {
      table = nlohmann::json::object();
    }
    if (table.contains(key)) return table.at(key).get<std::vector<double>>();
  }
  auto values = homent::population_moments(d, max_order);
  table[key] = values;
  std::filesystem::create_directories(file_.parent_path());
  const auto tmp = file_.string() + ".tmp";
  {
    std::ofstream out(tmp);
    out << table.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, file_);
  return values;
}

}  // namespace homent
