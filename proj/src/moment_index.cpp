#include "homent/moment_index.hpp"

#include <algorithm>
#include <numeric>

#include "homent/errors.hpp"

namespace homent {

MultiIndex::MultiIndex(std::vector<int> exponents) : exponents_(std::move(exponents)) {
  if (exponents_.empty()) throw InvalidArgument("MultiIndex: empty exponent vector");
  for (int e : exponents_) {
    if (e < 0) throw InvalidArgument("MultiIndex: negative exponent");
  }
  order_ = std::accumulate(exponents_.begin(), exponents_.end(), 0);
  if (order_ < 2 || order_ > 4) throw InvalidArgument("MultiIndex: order must be 2, 3 or 4");
  const int cap = order_ == 4 ? 3 : 2;
  for (int e : exponents_) {
    if (e > cap) throw InvalidArgument("MultiIndex: exponent exceeds the bound for its order");
  }
}

int MultiIndex::constant() const {
  return std::find(exponents_.begin(), exponents_.end(), 1) == exponents_.end() ? 1 : 0;
}

bool operator<(const MultiIndex& a, const MultiIndex& b) {
  if (a.order() != b.order()) return a.order() < b.order();
  return std::lexicographical_compare(a.exponents().begin(), a.exponents().end(),
                                      b.exponents().begin(), b.exponents().end());
}

MomentSystem::MomentSystem(std::size_t n, std::vector<MultiIndex> indices)
    : n_(n), indices_(std::move(indices)) {
  if (n_ == 0) throw InvalidArgument("MomentSystem: dimension must be positive");
  if (indices_.empty()) throw InvalidArgument("MomentSystem: no moment conditions");
  for (const auto& m : indices_) {
    if (m.size() != n_) throw InvalidArgument("MomentSystem: index dimension mismatch");
  }
  std::vector<MultiIndex> sorted = indices_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw InvalidArgument("MomentSystem: duplicate moment condition");
  constants_.reserve(indices_.size());
  for (const auto& m : indices_) constants_.push_back(m.constant());
}

int MomentSystem::max_exponent() const {
  int out = 0;
  for (const auto& m : indices_)
    for (int e : m.exponents()) out = std::max(out, e);
  return out;
}

std::size_t MomentSystem::count(int order) const {
  return static_cast<std::size_t>(std::count_if(
      indices_.begin(), indices_.end(), [order](const MultiIndex& m) { return m.order() == order; }));
}

namespace {

// Exponent vectors in [0,cap]^n summing to `order`, in lexicographic order.
void compositions(std::size_t n, int order, int cap, std::vector<int>& current,
                  std::vector<MultiIndex>& out) {
  const std::size_t pos = current.size();
  const int used = std::accumulate(current.begin(), current.end(), 0);
  const int remaining = order - used;
  if (pos + 1 == n) {
    if (remaining <= cap) {
      current.push_back(remaining);
      out.emplace_back(current);
      current.pop_back();
    }
    return;
  }
  for (int e = 0; e <= std::min(cap, remaining); ++e) {
    current.push_back(e);
    compositions(n, order, cap, current, out);
    current.pop_back();
  }
}

}  // namespace

MomentSystem enumerate_moment_indices(std::size_t n, const std::set<int>& orders) {
  if (n == 0) throw InvalidArgument("enumerate_moment_indices: n must be positive");
  if (orders.empty()) throw InvalidArgument("enumerate_moment_indices: no orders requested");
  std::vector<MultiIndex> out;
  for (int order : orders) {
    if (order < 2 || order > 4) throw InvalidArgument("enumerate_moment_indices: orders must be in {2,3,4}");
    std::vector<int> current;
    current.reserve(n);
    compositions(n, order, order == 4 ? 3 : 2, current, out);
  }
  if (out.empty()) throw InvalidArgument("enumerate_moment_indices: requested orders are empty for this n");
  return MomentSystem(n, std::move(out));
}

}  // namespace homent
