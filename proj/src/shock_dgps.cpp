#include "homent/shock_dgps.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "homent/errors.hpp"

namespace homent {

namespace {

double binomial(int r, int k) {
  double out = 1.0;
  for (int i = 1; i <= k; ++i) out = out * (r - k + i) / i;
  return out;
}

double double_factorial(int k) {
  double out = 1.0;
  for (int i = k; i > 1; i -= 2) out *= i;
  return out;
}

// Raw moments of N(mean, sd^2), orders 0..max_order.
std::vector<double> normal_raw(double mean, double sd, int max_order) {
  std::vector<double> out(static_cast<std::size_t>(max_order) + 1, 0.0);
  for (int r = 0; r <= max_order; ++r) {
    double s = 0.0;
    for (int k = 0; k <= r; k += 2) s += binomial(r, k) * std::pow(mean, r - k) * std::pow(sd, k) * double_factorial(k - 1);
    out[static_cast<std::size_t>(r)] = s;
  }
  return out;
}

double std_normal_pdf(double x) {
  if (std::isinf(x)) return 0.0;
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Moments of the unstandardized law.
std::vector<double> base_raw(const ShockDistribution& d, int max_order) {
  const auto size = static_cast<std::size_t>(max_order) + 1;
  return std::visit(
      [&](const auto& law) -> std::vector<double> {
        using Law = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<Law, Gaussian>) {
          return normal_raw(0.0, 1.0, max_order);
        } else if constexpr (std::is_same_v<Law, GaussianMixture>) {
          const auto a = normal_raw(law.mean1, law.sd1, max_order);
          const auto b = normal_raw(law.mean2, law.sd2, max_order);
          std::vector<double> out(size);
          for (std::size_t r = 0; r < size; ++r) out[r] = law.p * a[r] + (1.0 - law.p) * b[r];
          return out;
        } else if constexpr (std::is_same_v<Law, SkewNormal>) {
          // delta*|U0| + sqrt(1-delta^2)*U1 with U0, U1 iid N(0,1).
          const double delta = law.alpha / std::sqrt(1.0 + law.alpha * law.alpha);
          const double rest = std::sqrt(1.0 - delta * delta);
          const auto gauss = normal_raw(0.0, 1.0, max_order);
          std::vector<double> half(size);
          for (std::size_t k = 0; k < size; ++k)
            half[k] = std::pow(2.0, 0.5 * k) * std::tgamma(0.5 * (k + 1.0)) / std::sqrt(std::numbers::pi);
          std::vector<double> out(size, 0.0);
          for (int r = 0; r <= max_order; ++r)
            for (int k = 0; k <= r; ++k)
              out[static_cast<std::size_t>(r)] += binomial(r, k) * std::pow(delta, k) * std::pow(rest, r - k) *
                                                  half[static_cast<std::size_t>(k)] * gauss[static_cast<std::size_t>(r - k)];
          return out;
        } else if constexpr (std::is_same_v<Law, StudentT>) {
          if (!(law.dof > max_order))
            throw InvalidArgument("student_t: moments of order " + std::to_string(max_order) +
                                  " require more degrees of freedom than the order");
          std::vector<double> out(size, 0.0);
          out[0] = 1.0;
          for (int r = 2; r <= max_order; r += 2) {
            const int k = r / 2;
            out[static_cast<std::size_t>(r)] = out[static_cast<std::size_t>(r - 2)] * law.dof * (2 * k - 1) / (law.dof - 2 * k);
          }
          return out;
        } else {
          const double a = law.lower, b = law.upper;
          const double mass = std_normal_cdf(b) - std_normal_cdf(a);
          std::vector<double> out(size, 0.0);
          out[0] = 1.0;
          auto boundary = [&](int power) {
            const double fb = std::isinf(b) ? 0.0 : std::pow(b, power) * std_normal_pdf(b);
            const double fa = std::isinf(a) ? 0.0 : std::pow(a, power) * std_normal_pdf(a);
            return (fb - fa) / mass;
          };
          if (max_order >= 1) out[1] = -boundary(0);
          for (int r = 2; r <= max_order; ++r)
            out[static_cast<std::size_t>(r)] = (r - 1) * out[static_cast<std::size_t>(r - 2)] - boundary(r - 1);
          return out;
        }
      },
      d);
}

// Standardize raw moments of X to those of (X - mu)/sigma.
std::vector<double> standardize(const std::vector<double>& raw) {
  const double mu = raw[1];
  const double sigma = std::sqrt(raw[2] - mu * mu);
  std::vector<double> out(raw.size(), 0.0);
  for (std::size_t r = 0; r < raw.size(); ++r) {
    double s = 0.0;
    for (std::size_t k = 0; k <= r; ++k)
      s += binomial(static_cast<int>(r), static_cast<int>(k)) * raw[k] * std::pow(-mu, static_cast<double>(r - k));
    out[r] = s / std::pow(sigma, static_cast<double>(r));
  }
  // Orders one and two are exact by construction.
  out[0] = 1.0;
  if (out.size() > 1) out[1] = 0.0;
  if (out.size() > 2) out[2] = 1.0;
  return out;
}

std::pair<double, double> base_mean_sd(const ShockDistribution& d) {
  const auto raw = base_raw(d, 2);
  return {raw[1], std::sqrt(raw[2] - raw[1] * raw[1])};
}

double volatility_normalizer(const CommonVolatility& cv) {
  return std::sqrt(cv.regime_prob * cv.regime_scale * cv.regime_scale + 1.0 - cv.regime_prob);
}

// E[lambda^r] / kappa^r for the regime multiplier lambda.
double volatility_factor(const CommonVolatility& cv, int r) {
  return (cv.regime_prob * std::pow(cv.regime_scale, r) + 1.0 - cv.regime_prob) / std::pow(volatility_normalizer(cv), r);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::string kind_name(const ShockDistribution& d) {
  return std::visit(
      [](const auto& law) -> std::string {
        using Law = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<Law, Gaussian>) return "gaussian";
        else if constexpr (std::is_same_v<Law, GaussianMixture>) return "gaussian_mixture";
        else if constexpr (std::is_same_v<Law, SkewNormal>) return "skew_normal";
        else if constexpr (std::is_same_v<Law, StudentT>) return "student_t";
        else return "truncated_normal";
      },
      d);
}

void validate(const ShockDistribution& d) {
  std::visit(
      [](const auto& law) {
        using Law = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<Law, GaussianMixture>) {
          if (!(law.p > 0.0 && law.p < 1.0)) throw InvalidArgument("gaussian_mixture: p must lie in (0,1)");
          if (!(law.sd1 > 0.0 && law.sd2 > 0.0)) throw InvalidArgument("gaussian_mixture: standard deviations must be positive");
          if (!std::isfinite(law.mean1) || !std::isfinite(law.mean2)) throw InvalidArgument("gaussian_mixture: non-finite mean");
        } else if constexpr (std::is_same_v<Law, SkewNormal>) {
          if (!std::isfinite(law.alpha)) throw InvalidArgument("skew_normal: alpha must be finite");
        } else if constexpr (std::is_same_v<Law, StudentT>) {
          if (!(law.dof > 2.0)) throw InvalidArgument("student_t: variance requires dof > 2");
        } else if constexpr (std::is_same_v<Law, TruncatedNormal>) {
          if (!(law.lower < law.upper)) throw InvalidArgument("truncated_normal: lower bound must be below upper bound");
          if (!(std_normal_cdf(law.upper) - std_normal_cdf(law.lower) > 0.0))
            throw InvalidArgument("truncated_normal: interval has no probability mass");
        }
      },
      d);
}

void validate(const ShockModel& m) {
  if (m.shocks.empty()) throw InvalidArgument("shock model: no shocks");
  for (const auto& d : m.shocks) validate(d);
  if (m.volatility) {
    if (!(m.volatility->regime_prob >= 0.0 && m.volatility->regime_prob <= 1.0))
      throw InvalidArgument("common volatility: regime_prob must lie in [0,1]");
    if (!(m.volatility->regime_scale > 0.0)) throw InvalidArgument("common volatility: regime_scale must be positive");
  }
}

std::vector<double> population_moments(const ShockDistribution& d, int max_order) {
  if (max_order < 2) throw InvalidArgument("population_moments: max_order must be at least 2");
  validate(d);
  return standardize(base_raw(d, max_order));
}

UnivariateMomentTable::UnivariateMomentTable(Eigen::MatrixXd raw) : raw_(std::move(raw)) {
  if (raw_.rows() < 1 || raw_.cols() < 2) throw InvalidArgument("moment table: needs at least one shock and order 1");
  if (!raw_.allFinite()) throw InvalidArgument("moment table: non-finite moments");
}

double UnivariateMomentTable::operator()(std::size_t shock, int order) const {
  if (order < 0 || order > max_order())
    throw InvalidArgument("moment table: order " + std::to_string(order) + " not available");
  return raw_(static_cast<Eigen::Index>(shock), order);
}

UnivariateMomentTable population_table(const ShockModel& m, int max_order) {
  validate(m);
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(m.dim()), max_order + 1);
  for (std::size_t i = 0; i < m.dim(); ++i) {
    const auto mom = population_moments(m.shocks[i], max_order);
    for (int r = 0; r <= max_order; ++r) {
      const double f = m.volatility ? volatility_factor(*m.volatility, r) : 1.0;
      raw(static_cast<Eigen::Index>(i), r) = mom[static_cast<std::size_t>(r)] * f;
    }
  }
  return UnivariateMomentTable(std::move(raw));
}

UnivariateMomentTable sample_moment_table(const Eigen::MatrixXd& e, int max_order) {
  const Eigen::Index T = e.rows();
  if (T < 1) throw InvalidArgument("sample_moment_table: empty panel");
  Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(e.cols(), max_order + 1);
  for (Eigen::Index i = 0; i < e.cols(); ++i) {
    std::vector<double> total(static_cast<std::size_t>(max_order) + 1, 0.0), block(total.size(), 0.0);
    for (Eigen::Index t = 0; t < T; ++t) {
      double p = 1.0;
      const double x = e(t, i);
      for (int r = 0; r <= max_order; ++r) {
        block[static_cast<std::size_t>(r)] += p;
        p *= x;
      }
      if ((t + 1) % 256 == 0 || t + 1 == T) {
        for (std::size_t r = 0; r < total.size(); ++r) {
          total[r] += block[r];
          block[r] = 0.0;
        }
      }
    }
    for (int r = 0; r <= max_order; ++r) raw(i, r) = total[static_cast<std::size_t>(r)] / static_cast<double>(T);
  }
  return UnivariateMomentTable(std::move(raw));
}

PopulationMoments::PopulationMoments(ShockModel model, int max_order) : model_(std::move(model)), max_order_(max_order) {
  validate(model_);
  base_.resize(static_cast<Eigen::Index>(model_.dim()), max_order_ + 1);
  for (std::size_t i = 0; i < model_.dim(); ++i) {
    const auto mom = population_moments(model_.shocks[i], max_order_);
    for (int r = 0; r <= max_order_; ++r) base_(static_cast<Eigen::Index>(i), r) = mom[static_cast<std::size_t>(r)];
  }
}

double PopulationMoments::joint(const std::vector<int>& powers) const {
  if (powers.size() != model_.dim()) throw InvalidArgument("joint moment: dimension mismatch");
  double out = 1.0;
  int total = 0;
  for (std::size_t i = 0; i < powers.size(); ++i) {
    if (powers[i] > max_order_ || powers[i] < 0) throw InvalidArgument("joint moment: order not available");
    out *= base_(static_cast<Eigen::Index>(i), powers[i]);
    total += powers[i];
  }
  if (model_.volatility) out *= volatility_factor(*model_.volatility, total);
  return out;
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(base);
  for (auto k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

Eigen::VectorXd sample(const ShockDistribution& d, Eigen::Index T, std::uint64_t seed) {
  if (T < 1) throw InvalidArgument("sample: T must be positive");
  validate(d);
  std::mt19937_64 rng(seed);
  const auto [mu, sigma] = base_mean_sd(d);
  Eigen::VectorXd out(T);
  std::visit(
      [&](const auto& law) {
        using Law = std::decay_t<decltype(law)>;
        std::normal_distribution<double> normal(0.0, 1.0);
        if constexpr (std::is_same_v<Law, Gaussian>) {
          for (Eigen::Index t = 0; t < T; ++t) out(t) = normal(rng);
        } else if constexpr (std::is_same_v<Law, GaussianMixture>) {
          std::bernoulli_distribution z(law.p);
          for (Eigen::Index t = 0; t < T; ++t) {
            const bool first = z(rng);
            const double x = normal(rng);
            out(t) = first ? law.mean1 + law.sd1 * x : law.mean2 + law.sd2 * x;
          }
        } else if constexpr (std::is_same_v<Law, SkewNormal>) {
          const double delta = law.alpha / std::sqrt(1.0 + law.alpha * law.alpha);
          const double rest = std::sqrt(1.0 - delta * delta);
          for (Eigen::Index t = 0; t < T; ++t) {
            const double u0 = normal(rng);
            const double u1 = normal(rng);
            out(t) = delta * std::abs(u0) + rest * u1;
          }
        } else if constexpr (std::is_same_v<Law, StudentT>) {
          std::student_t_distribution<double> student(law.dof);
          for (Eigen::Index t = 0; t < T; ++t) out(t) = student(rng);
        } else {
          // Inverse CDF on whichever side keeps the probabilities away from 1.
          const bool flip = law.lower > 0.0;
          const double a = flip ? -law.upper : law.lower;
          const double b = flip ? -law.lower : law.upper;
          const boost::math::normal_distribution<double> std_normal;
          const double pa = std_normal_cdf(a), pb = std_normal_cdf(b);
          std::uniform_real_distribution<double> unif(0.0, 1.0);
          for (Eigen::Index t = 0; t < T; ++t) {
            double p = pa + (pb - pa) * unif(rng);
            p = std::clamp(p, std::nextafter(0.0, 1.0), std::nextafter(1.0, 0.0));
            const double x = std::clamp(boost::math::quantile(std_normal, p), a, b);
            out(t) = flip ? -x : x;
          }
        }
      },
      d);
  return (out.array() - mu) / sigma;
}

Eigen::MatrixXd common_volatility_panel(const std::vector<ShockDistribution>& base, Eigen::Index T, std::uint64_t seed,
                                        const CommonVolatility& cv) {
  const auto n = static_cast<Eigen::Index>(base.size());
  Eigen::MatrixXd out(T, n);
  for (Eigen::Index i = 0; i < n; ++i) out.col(i) = sample(base[static_cast<std::size_t>(i)], T, derive_seed(seed, {static_cast<std::uint64_t>(i)}));
  std::mt19937_64 rng(derive_seed(seed, {static_cast<std::uint64_t>(n)}));
  std::bernoulli_distribution regime(cv.regime_prob);
  const double norm = volatility_normalizer(cv);
  for (Eigen::Index t = 0; t < T; ++t) {
    const double scale = regime(rng) ? cv.regime_scale : 1.0;
    out.row(t) *= scale / norm;
  }
  return out;
}

Eigen::MatrixXd sample_panel(const ShockModel& m, Eigen::Index T, std::uint64_t seed) {
  validate(m);
  if (m.volatility) return common_volatility_panel(m.shocks, T, seed, *m.volatility);
  const auto n = static_cast<Eigen::Index>(m.dim());
  Eigen::MatrixXd out(T, n);
  for (Eigen::Index i = 0; i < n; ++i)
    out.col(i) = sample(m.shocks[static_cast<std::size_t>(i)], T, derive_seed(seed, {static_cast<std::uint64_t>(i)}));
  return out;
}

}  // namespace homent
