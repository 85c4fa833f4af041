#include "doctest.h"

#include <algorithm>
#include <numeric>

#include "homent/errors.hpp"
#include "homent/moment_index.hpp"

using namespace homent;

TEST_CASE("counts per order for the full system") {
  struct Case {
    std::size_t n, second, third, fourth;
  };
  for (const Case c : {Case{2, 3, 2, 3}, Case{3, 6, 7, 12}, Case{4, 10, 16, 31}}) {
    const MomentSystem sys = full_moment_system(c.n);
    CHECK(sys.count(2) == c.second);
    CHECK(sys.count(3) == c.third);
    CHECK(sys.count(4) == c.fourth);
    CHECK(sys.size() == c.second + c.third + c.fourth);
  }
}

TEST_CASE("larger systems enumerate without overlap") {
  for (std::size_t n : {5, 6}) {
    const MomentSystem sys = full_moment_system(n);
    CHECK(sys.count(2) == n * (n + 1) / 2);
    CHECK(sys.count(3) == n * (n - 1) + n * (n - 1) * (n - 2) / 6);
    auto idx = sys.indices();
    CHECK(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
  }
}

TEST_CASE("orders ascend and indices are sorted within an order") {
  const MomentSystem sys = full_moment_system(3);
  for (std::size_t k = 1; k < sys.size(); ++k) {
    CHECK(sys[k - 1].order() <= sys[k].order());
    if (sys[k - 1].order() == sys[k].order()) CHECK(sys[k - 1] < sys[k]);
  }
  CHECK(sys[0].order() == 2);
  CHECK(sys[sys.size() - 1].order() == 4);
}

TEST_CASE("n = 2 system in full") {
  const MomentSystem sys = full_moment_system(2);
  REQUIRE(sys.size() == 8);
  const std::vector<std::vector<int>> expected{{0, 2}, {1, 1}, {2, 0}, {1, 2}, {2, 1}, {1, 3}, {2, 2}, {3, 1}};
  const std::vector<int> constants{1, 0, 1, 0, 0, 0, 1, 0};
  for (std::size_t k = 0; k < sys.size(); ++k) {
    CHECK(sys[k].exponents() == expected[k]);
    CHECK(sys.constants()[k] == constants[k]);
  }
  int first = 0;
  for (const auto& m : sys.indices()) first += m[0];
  CHECK(first == 12);
  CHECK(sys.max_exponent() == 3);
}

TEST_CASE("constants") {
  CHECK(MultiIndex({2, 0, 0}).constant() == 1);
  CHECK(MultiIndex({1, 1, 0}).constant() == 0);
  CHECK(MultiIndex({2, 2, 0}).constant() == 1);
  CHECK(MultiIndex({3, 1, 0}).constant() == 0);
  CHECK(MultiIndex({1, 1, 2}).constant() == 0);
}

TEST_CASE("invalid indices are rejected") {
  CHECK_THROWS_AS(MultiIndex({4, 0}), InvalidArgument);
  CHECK_THROWS_AS(MultiIndex({1, 0}), InvalidArgument);
  CHECK_THROWS_AS(MultiIndex({3, 0}), InvalidArgument);
  CHECK_THROWS_AS(MultiIndex({-1, 3}), InvalidArgument);
  CHECK_THROWS_AS(enumerate_moment_indices(0, {2}), InvalidArgument);
  CHECK_THROWS_AS(enumerate_moment_indices(2, {5}), InvalidArgument);
}

TEST_CASE("subsets of orders") {
  const MomentSystem two = enumerate_moment_indices(4, {2});
  CHECK(two.size() == 10);
  const MomentSystem three_four = enumerate_moment_indices(4, {3, 4});
  CHECK(three_four.size() == 47);
  CHECK(three_four.count(2) == 0);
}
