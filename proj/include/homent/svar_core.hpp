#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "homent/moment_index.hpp"

namespace homent {

/// T x n panel of reduced-form shocks u_t (one row per observation).
class ShockPanel {
 public:
  explicit ShockPanel(Eigen::MatrixXd data);

  const Eigen::MatrixXd& data() const { return data_; }
  Eigen::Index rows() const { return data_.rows(); }
  Eigen::Index dim() const { return data_.cols(); }

 private:
  Eigen::MatrixXd data_;
};

/// Reciprocal condition number below which B is treated as singular.
inline constexpr double kMinReciprocalCondition = 1e-12;

/// B^{-1} via partial-pivot LU; throws SingularMatrixError when the
/// estimated reciprocal condition number is below kMinReciprocalCondition.
Eigen::MatrixXd checked_inverse(const Eigen::MatrixXd& B);

/// Innovation panel e(B)_t = B^{-1} u_t, returned as T x n.
Eigen::MatrixXd innovations(const Eigen::MatrixXd& B, const ShockPanel& U);

/// Means over t of every monomial the moment system touches.
///
/// Values are laid out in the order of the owning MonomialPlan.
struct MonomialMeans {
  std::vector<double> values;
};

/// Distinct innovation monomials needed for g_T(B), its Jacobian, the scale
/// diagonal and the second-moment matrix of the innovations. Each monomial is
/// a parent monomial times one innovation, so a single pass per observation
/// evaluates all of them.
class MonomialPlan {
 public:
  explicit MonomialPlan(const MomentSystem& sys);

  std::size_t size() const { return parent_.size(); }
  std::size_t dim() const { return n_; }

  /// Position of monomial prod e_i^{exponents_i}; throws if it is not planned.
  std::size_t find(const std::vector<int>& exponents) const;

  MonomialMeans means(const Eigen::MatrixXd& e, std::span<const double> weights = {}) const;

  /// Values of every planned monomial at one observation; out[0] is 1.
  void evaluate(std::span<const double> row, std::span<double> out) const;

  // Slot of the k-th moment monomial.
  std::size_t moment_slot(std::size_t k) const { return moment_slot_[k]; }
  // Slot of m_k - unit_j + unit_q (only valid when m_kj > 0).
  std::size_t jacobian_slot(std::size_t k, std::size_t j, std::size_t q) const {
    return jacobian_slot_[(k * n_ + j) * n_ + q];
  }
  std::size_t cross_slot(std::size_t i, std::size_t q) const { return cross_slot_[i * n_ + q]; }

 private:
  std::size_t n_;
  std::vector<std::vector<int>> exponents_;
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> variable_;
  std::vector<std::size_t> moment_slot_;
  std::vector<std::size_t> jacobian_slot_;
  std::vector<std::size_t> cross_slot_;
};

/// Moment conditions of a fixed system evaluated at arbitrary (B, U).
///
/// Holds the precomputed monomial plan; cheap to copy and safe to share
/// between threads.
class MomentEvaluator {
 public:
  explicit MomentEvaluator(MomentSystem sys);

  const MomentSystem& system() const { return sys_; }
  const MonomialPlan& plan() const { return *plan_; }
  std::size_t size() const { return sys_.size(); }
  std::size_t dim() const { return sys_.dim(); }

  MonomialMeans means(const Eigen::MatrixXd& e, std::span<const double> weights = {}) const {
    return plan_->means(e, weights);
  }

  /// g_T(B): mean of prod e^{m_k} minus c(m_k).
  Eigen::VectorXd moments(const MonomialMeans& mm) const;

  /// d g_T / d vec(B)' (K x n^2, column-major vec). `unmixing` is B^{-1}.
  /// Constants are not subtracted, so with weighted means this also yields
  /// (1/T) sum_t w_t d f_t / d vec(B)'.
  Eigen::MatrixXd jacobian(const MonomialMeans& mm, const Eigen::MatrixXd& unmixing) const;

  /// (1/T) sum_t e_t e_t' (n x n).
  Eigen::MatrixXd second_moments(const MonomialMeans& mm) const;

  /// Diagonal of D(B): prod_i d_i^{m_k,i} with d_i = 1/sqrt(mean e_i^2).
  Eigen::VectorXd scale_diagonal(const MonomialMeans& mm) const;

  /// Per-observation moment functions f(B,u_t), T x K.
  Eigen::MatrixXd moment_functions(const Eigen::MatrixXd& e) const;

 private:
  MomentSystem sys_;
  std::shared_ptr<const MonomialPlan> plan_;
};

Eigen::VectorXd sample_moments(const Eigen::MatrixXd& B, const ShockPanel& U, const MomentSystem& sys);

Eigen::MatrixXd moment_jacobian(const Eigen::MatrixXd& B, const ShockPanel& U, const MomentSystem& sys);

/// Diagonal entries of D-hat(B); throws DegenerateInnovationError when an
/// innovation has zero sample variance.
Eigen::VectorXd scale_diagonal(const Eigen::MatrixXd& B, const ShockPanel& U, const MomentSystem& sys);

/// Column-major position of b_pq in vec(B).
inline Eigen::Index vec_index(Eigen::Index row, Eigen::Index col, Eigen::Index n) { return col * n + row; }

Eigen::VectorXd vec(const Eigen::MatrixXd& M);
Eigen::MatrixXd unvec(const Eigen::VectorXd& v, Eigen::Index rows);

/// Mean of a column with two-level blocked summation.
double blocked_mean(std::span<const double> values);

}  // namespace homent
