#include "homent/svar_core.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "homent/errors.hpp"

namespace homent {

namespace {

constexpr std::size_t kBlock = 256;

int degree(const std::vector<int>& exps) { return std::accumulate(exps.begin(), exps.end(), 0); }

struct DegreeLexLess {
  bool operator()(const std::vector<int>& a, const std::vector<int>& b) const {
    const int da = degree(a), db = degree(b);
    if (da != db) return da < db;
    return a < b;
  }
};

}  // namespace

ShockPanel::ShockPanel(Eigen::MatrixXd data) : data_(std::move(data)) {
  if (data_.rows() < 1 || data_.cols() < 1) throw InvalidArgument("ShockPanel: empty panel");
  if (!data_.allFinite()) throw InvalidArgument("ShockPanel: non-finite entries");
}

Eigen::MatrixXd checked_inverse(const Eigen::MatrixXd& B) {
  if (B.rows() != B.cols() || B.rows() == 0) throw InvalidArgument("mixing matrix must be square");
  if (!B.allFinite()) throw SingularMatrixError("mixing matrix has non-finite entries");
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
  const double rcond = lu.rcond();
  if (!(rcond >= kMinReciprocalCondition)) throw SingularMatrixError("mixing matrix is numerically singular");
  return lu.inverse();
}

Eigen::MatrixXd innovations(const Eigen::MatrixXd& B, const ShockPanel& U) {
  if (B.rows() != U.dim()) throw InvalidArgument("innovations: dimension mismatch between B and U");
  const Eigen::MatrixXd A = checked_inverse(B);
  return U.data() * A.transpose();
}

double blocked_mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t start = 0; start < values.size(); start += kBlock) {
    const std::size_t stop = std::min(values.size(), start + kBlock);
    double block = 0.0;
    for (std::size_t t = start; t < stop; ++t) block += values[t];
    total += block;
  }
  return total / static_cast<double>(values.size());
}

Eigen::VectorXd vec(const Eigen::MatrixXd& M) {
  return Eigen::Map<const Eigen::VectorXd>(M.data(), M.size());
}

Eigen::MatrixXd unvec(const Eigen::VectorXd& v, Eigen::Index rows) {
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, v.size() / rows);
}

MonomialPlan::MonomialPlan(const MomentSystem& sys) : n_(sys.dim()) {
  std::map<std::vector<int>, std::size_t, DegreeLexLess> slots;
  auto unit = [&](std::size_t i) {
    std::vector<int> u(n_, 0);
    u[i] = 1;
    return u;
  };
  for (const auto& m : sys.indices()) {
    slots.emplace(m.exponents(), 0);
    for (std::size_t j = 0; j < n_; ++j) {
      if (m[j] == 0) continue;
      for (std::size_t q = 0; q < n_; ++q) {
        auto v = m.exponents();
        --v[j];
        ++v[q];
        slots.emplace(std::move(v), 0);
      }
    }
  }
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t q = 0; q < n_; ++q) {
      auto v = unit(i);
      ++v[q];
      slots.emplace(std::move(v), 0);
    }
  // Close under the parent relation down to the constant monomial.
  std::vector<std::vector<int>> pending;
  for (const auto& [k, _] : slots) pending.push_back(k);
  while (!pending.empty()) {
    auto v = std::move(pending.back());
    pending.pop_back();
    auto it = std::find_if(v.begin(), v.end(), [](int e) { return e > 0; });
    if (it == v.end()) continue;
    --*it;
    if (slots.emplace(v, 0).second) pending.push_back(v);
  }
  slots.emplace(std::vector<int>(n_, 0), 0);

  std::size_t next = 0;
  for (auto& [exps, slot] : slots) {
    slot = next++;
    exponents_.push_back(exps);
  }
  parent_.assign(exponents_.size(), 0);
  variable_.assign(exponents_.size(), 0);
  for (std::size_t s = 1; s < exponents_.size(); ++s) {
    auto v = exponents_[s];
    auto it = std::find_if(v.begin(), v.end(), [](int e) { return e > 0; });
    variable_[s] = static_cast<std::size_t>(it - v.begin());
    --*it;
    parent_[s] = slots.at(v);
  }

  const std::size_t K = sys.size();
  moment_slot_.resize(K);
  jacobian_slot_.assign(K * n_ * n_, 0);
  for (std::size_t k = 0; k < K; ++k) {
    const auto& m = sys[k];
    moment_slot_[k] = slots.at(m.exponents());
    for (std::size_t j = 0; j < n_; ++j) {
      if (m[j] == 0) continue;
      for (std::size_t q = 0; q < n_; ++q) {
        auto v = m.exponents();
        --v[j];
        ++v[q];
        jacobian_slot_[(k * n_ + j) * n_ + q] = slots.at(v);
      }
    }
  }
  cross_slot_.resize(n_ * n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t q = 0; q < n_; ++q) {
      auto v = unit(i);
      ++v[q];
      cross_slot_[i * n_ + q] = slots.at(v);
    }
}

std::size_t MonomialPlan::find(const std::vector<int>& exponents) const {
  auto it = std::lower_bound(exponents_.begin(), exponents_.end(), exponents, DegreeLexLess{});
  if (it == exponents_.end() || *it != exponents) throw InvalidArgument("monomial is not part of the plan");
  return static_cast<std::size_t>(it - exponents_.begin());
}

MonomialMeans MonomialPlan::means(const Eigen::MatrixXd& e, std::span<const double> weights) const {
  const std::size_t T = static_cast<std::size_t>(e.rows());
  if (static_cast<std::size_t>(e.cols()) != n_) throw InvalidArgument("monomial means: dimension mismatch");
  if (!weights.empty() && weights.size() != T) throw InvalidArgument("monomial means: weight length mismatch");
  const std::size_t M = size();
  std::vector<double> cur(M), block(M, 0.0), total(M, 0.0);
  std::vector<double> row(n_);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < n_; ++i) row[i] = e(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i));
    evaluate(row, cur);
    const double w = weights.empty() ? 1.0 : weights[t];
    for (std::size_t s = 0; s < M; ++s) block[s] += w * cur[s];
    if ((t + 1) % kBlock == 0 || t + 1 == T) {
      for (std::size_t s = 0; s < M; ++s) {
        total[s] += block[s];
        block[s] = 0.0;
      }
    }
  }
  const double inv = T > 0 ? 1.0 / static_cast<double>(T) : 0.0;
  for (double& v : total) v *= inv;
  return MonomialMeans{std::move(total)};
}

void MonomialPlan::evaluate(std::span<const double> row, std::span<double> out) const {
  out[0] = 1.0;
  for (std::size_t s = 1; s < parent_.size(); ++s) out[s] = out[parent_[s]] * row[variable_[s]];
}

MomentEvaluator::MomentEvaluator(MomentSystem sys)
    : sys_(std::move(sys)), plan_(std::make_shared<const MonomialPlan>(sys_)) {}

Eigen::VectorXd MomentEvaluator::moments(const MonomialMeans& mm) const {
  const std::size_t K = sys_.size();
  Eigen::VectorXd g(static_cast<Eigen::Index>(K));
  for (std::size_t k = 0; k < K; ++k)
    g(static_cast<Eigen::Index>(k)) = mm.values[plan_->moment_slot(k)] - sys_.constants()[k];
  return g;
}

Eigen::MatrixXd MomentEvaluator::jacobian(const MonomialMeans& mm, const Eigen::MatrixXd& unmixing) const {
  const std::size_t K = sys_.size();
  const std::size_t n = sys_.dim();
  const auto ni = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K), ni * ni);
  for (std::size_t k = 0; k < K; ++k) {
    const auto& m = sys_[k];
    for (std::size_t j = 0; j < n; ++j) {
      if (m[j] == 0) continue;
      for (std::size_t q = 0; q < n; ++q) {
        const double h = m[j] * mm.values[plan_->jacobian_slot(k, j, q)];
        for (std::size_t p = 0; p < n; ++p) {
          J(static_cast<Eigen::Index>(k), vec_index(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q), ni)) -=
              unmixing(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(p)) * h;
        }
      }
    }
  }
  return J;
}

Eigen::MatrixXd MomentEvaluator::second_moments(const MonomialMeans& mm) const {
  const auto n = static_cast<Eigen::Index>(sys_.dim());
  Eigen::MatrixXd C(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index q = 0; q < n; ++q)
      C(i, q) = mm.values[plan_->cross_slot(static_cast<std::size_t>(i), static_cast<std::size_t>(q))];
  return C;
}

Eigen::VectorXd MomentEvaluator::scale_diagonal(const MonomialMeans& mm) const {
  const std::size_t n = sys_.dim();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double var = mm.values[plan_->cross_slot(i, i)];
    if (!(var > 0.0) || !std::isfinite(var))
      throw DegenerateInnovationError("innovation has zero sample variance");
    d[i] = 1.0 / std::sqrt(var);
  }
  const std::size_t K = sys_.size();
  Eigen::VectorXd out(static_cast<Eigen::Index>(K));
  for (std::size_t k = 0; k < K; ++k) {
    double v = 1.0;
    for (std::size_t i = 0; i < n; ++i)
      for (int r = 0; r < sys_[k][i]; ++r) v *= d[i];
    out(static_cast<Eigen::Index>(k)) = v;
  }
  return out;
}

Eigen::MatrixXd MomentEvaluator::moment_functions(const Eigen::MatrixXd& e) const {
  const Eigen::Index T = e.rows();
  const std::size_t n = sys_.dim();
  const std::size_t K = sys_.size();
  const std::size_t M = plan_->size();
  Eigen::MatrixXd F(T, static_cast<Eigen::Index>(K));
  std::vector<double> cur(M), row(n);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < n; ++i) row[i] = e(t, static_cast<Eigen::Index>(i));
    plan_->evaluate(row, cur);
    for (std::size_t k = 0; k < K; ++k)
      F(t, static_cast<Eigen::Index>(k)) = cur[plan_->moment_slot(k)] - sys_.constants()[k];
  }
  return F;
}

Eigen::VectorXd sample_moments(const Eigen::MatrixXd& B, const ShockPanel& U, const MomentSystem& sys) {
  const MomentEvaluator ev(sys);
  return ev.moments(ev.means(innovations(B, U)));
}

Eigen::MatrixXd moment_jacobian(const Eigen::MatrixXd& B, const ShockPanel& U, const MomentSystem& sys) {
  const MomentEvaluator ev(sys);
  const Eigen::MatrixXd A = checked_inverse(B);
  const Eigen::MatrixXd e = U.data() * A.transpose();
  return ev.jacobian(ev.means(e), A);
}

Eigen::VectorXd scale_diagonal(const Eigen::MatrixXd& B, const ShockPanel& U, const MomentSystem& sys) {
  const MomentEvaluator ev(sys);
  return ev.scale_diagonal(ev.means(innovations(B, U)));
}

}  // namespace homent
