#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "saber/rng.hpp"

using namespace saber;

TEST_CASE("same seed reproduces the sequence, different seeds diverge") {
  Rng a(123), b(123), c(124);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 1000; ++i) {
    const auto va = a.next();
    all_equal = all_equal && (va == b.next());
    any_diff = any_diff || (va != c.next());
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("uniform stays in range and fills it") {
  Rng rng(99);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.001);
  CHECK(hi > 0.999);
}

TEST_CASE("below covers [0, n) roughly uniformly") {
  Rng rng(5);
  const std::uint64_t n = 6;
  std::vector<int> counts(n, 0);
  const int draws = 60000;
  for (int i = 0; i < draws; ++i) ++counts[rng.below(n)];
  for (const int c : counts) {
    CHECK(c > draws / static_cast<int>(n) * 0.9);
    CHECK(c < draws / static_cast<int>(n) * 1.1);
  }
}

TEST_CASE("normal has the right first two moments") {
  Rng rng(11);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::fabs(mean) < 0.01);
  CHECK(std::fabs(var - 1.0) < 0.02);
}

TEST_CASE("shuffle is a permutation and is seed-deterministic") {
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  Rng r1(7), r2(7);
  r1.shuffle(v);
  r2.shuffle(w);
  CHECK(v == w);
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> expect(100);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(sorted == expect);
}

TEST_CASE("sample_indices returns k distinct ascending indices") {
  Rng rng(31);
  const auto s = rng.sample_indices(50, 20);
  CHECK(s.size() == 20);
  CHECK(std::is_sorted(s.begin(), s.end()));
  CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == 20);
  CHECK(s.back() < 50);

  // k >= n degenerates to the full index range.
  const auto all = rng.sample_indices(5, 9);
  CHECK(all == std::vector<std::size_t>{0, 1, 2, 3, 4});
}

TEST_CASE("mix produces distinct deterministic sub-seeds") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t t = 0; t < 1000; ++t) seen.insert(Rng::mix(42, t));
  CHECK(seen.size() == 1000);
  CHECK(Rng::mix(42, 7) == Rng::mix(42, 7));
  CHECK(Rng::mix(42, 7) != Rng::mix(43, 7));
}
