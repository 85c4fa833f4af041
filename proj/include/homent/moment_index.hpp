#pragma once

#include <cstddef>
#include <set>
#include <vector>

namespace homent {

/// Exponent vector m of a moment condition E[prod_i e_i^{m_i}] = c(m).
///
/// Valid indices have order 2, 3 or 4. Second- and third-order indices use
/// exponents in {0,1,2}; fourth-order indices allow exponents up to 3.
class MultiIndex {
 public:
  explicit MultiIndex(std::vector<int> exponents);

  const std::vector<int>& exponents() const { return exponents_; }
  int operator[](std::size_t i) const { return exponents_[i]; }
  std::size_t size() const { return exponents_.size(); }
  int order() const { return order_; }

  /// 0 when some exponent equals one (the condition is a pure co-moment),
  /// otherwise 1.
  int constant() const;

  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
  friend bool operator<(const MultiIndex& a, const MultiIndex& b);

 private:
  std::vector<int> exponents_;
  int order_ = 0;
};

inline int constant_c(const MultiIndex& m) { return m.constant(); }

/// Ordered set of moment conditions f(B,u) for an n-dimensional system.
/// Orders ascend; within an order indices are sorted lexicographically.
class MomentSystem {
 public:
  MomentSystem(std::size_t n, std::vector<MultiIndex> indices);

  std::size_t dim() const { return n_; }
  std::size_t size() const { return indices_.size(); }
  const MultiIndex& operator[](std::size_t k) const { return indices_[k]; }
  const std::vector<MultiIndex>& indices() const { return indices_; }
  const std::vector<int>& constants() const { return constants_; }

  /// Largest single exponent across the system.
  int max_exponent() const;
  /// Number of indices of the given order.
  std::size_t count(int order) const;

 private:
  std::size_t n_;
  std::vector<MultiIndex> indices_;
  std::vector<int> constants_;
};

/// All multi-indices of the requested orders for dimension n.
MomentSystem enumerate_moment_indices(std::size_t n, const std::set<int>& orders);

/// Second- to fourth-order system used throughout the estimators.
inline MomentSystem full_moment_system(std::size_t n) {
  return enumerate_moment_indices(n, {2, 3, 4});
}

}  // namespace homent
