#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace homent {

struct Gaussian {};

/// z*N(mean1, sd1^2) + (1-z)*N(mean2, sd2^2) with z ~ Bernoulli(p).
/// The second parameter of each component is a standard deviation.
struct GaussianMixture {
  double p = 0.79;
  double mean1 = -0.2;
  double sd1 = 0.7;
  double mean2 = 0.75;
  double sd2 = 1.5;
};

struct SkewNormal {
  double alpha = 4.0;
};

struct StudentT {
  double dof = 9.0;
};

struct TruncatedNormal {
  double lower = -1.0;
  double upper = 1.0;
};

/// Univariate shock law. Every law is standardized to zero mean and unit
/// variance by an exact affine map computed from its analytic moments.
using ShockDistribution = std::variant<Gaussian, GaussianMixture, SkewNormal, StudentT, TruncatedNormal>;

/// Two-regime volatility shared by all shocks: with probability regime_prob
/// every shock at t is multiplied by regime_scale, then all shocks are
/// divided by sqrt(regime_prob*regime_scale^2 + 1 - regime_prob).
struct CommonVolatility {
  double regime_prob = 0.5;
  double regime_scale = 2.0;
};

/// Joint law of the n structural shocks.
struct ShockModel {
  std::vector<ShockDistribution> shocks;
  std::optional<CommonVolatility> volatility;

  std::size_t dim() const { return shocks.size(); }
  static ShockModel iid(const ShockDistribution& d, std::size_t n) { return {std::vector<ShockDistribution>(n, d), {}}; }
};

std::string kind_name(const ShockDistribution& d);

/// Throws InvalidArgument for out-of-range parameters.
void validate(const ShockDistribution& d);
void validate(const ShockModel& m);

/// Raw moments E[eps^r], r = 0..max_order, of the standardized law.
/// Throws InvalidArgument when a requested moment does not exist.
std::vector<double> population_moments(const ShockDistribution& d, int max_order = 8);

/// Per-shock raw moments E[eps_i^r] for r = 0..max_order (column r).
class UnivariateMomentTable {
 public:
  explicit UnivariateMomentTable(Eigen::MatrixXd raw);

  std::size_t dim() const { return static_cast<std::size_t>(raw_.rows()); }
  int max_order() const { return static_cast<int>(raw_.cols()) - 1; }
  /// E[eps_shock^order]; throws InvalidArgument if order exceeds max_order.
  double operator()(std::size_t shock, int order) const;
  const Eigen::MatrixXd& raw() const { return raw_; }

 private:
  Eigen::MatrixXd raw_;
};

/// Marginal moment table of a shock model (including any common volatility).
UnivariateMomentTable population_table(const ShockModel& m, int max_order = 8);

/// Sample raw moments of each column, orders 0..max_order.
UnivariateMomentTable sample_moment_table(const Eigen::MatrixXd& e, int max_order);

/// Exact joint moments E[prod_i eps_i^{r_i}] under a shock model.
class PopulationMoments {
 public:
  explicit PopulationMoments(ShockModel model, int max_order = 8);

  std::size_t dim() const { return model_.dim(); }
  const ShockModel& model() const { return model_; }
  int max_order() const { return max_order_; }
  bool mutually_independent() const { return !model_.volatility.has_value(); }

  double joint(const std::vector<int>& powers) const;

 private:
  ShockModel model_;
  int max_order_;
  Eigen::MatrixXd base_;  // per-shock moments before the volatility mixture
};

/// SplitMix64-based derivation of an independent stream seed from a base
/// seed and a path of keys (scenario, sample size, replication, shock ...).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys);

/// iid standardized draws; deterministic for fixed seed.
Eigen::VectorXd sample(const ShockDistribution& d, Eigen::Index T, std::uint64_t seed);

/// T x n panel of structural shocks. Column i uses stream derive_seed(seed, {i});
/// the volatility regime uses derive_seed(seed, {n}).
Eigen::MatrixXd sample_panel(const ShockModel& m, Eigen::Index T, std::uint64_t seed);

/// Independent base draws rescaled by one shared Bernoulli regime per t.
Eigen::MatrixXd common_volatility_panel(const std::vector<ShockDistribution>& base, Eigen::Index T,
                                        std::uint64_t seed, const CommonVolatility& cv = {});

}  // namespace homent
