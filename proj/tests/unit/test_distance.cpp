#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "orbitmatch/distance.hpp"
#include "orbitmatch/dynamics.hpp"

using namespace orbitmatch;
using namespace orbitmatch::distance;

namespace {

PointArray values(std::initializer_list<double> xs) { return PointArray::from_values(std::vector<double>(xs)); }

// Independent oracle: recursive enumeration with the last orbit varying
// slowest, distances recomputed from scratch per tuple.
double naive_min(const std::vector<PointArray>& orbits, std::size_t n, const MetricSpec& metric) {
  const std::size_t k = orbits.size();
  std::vector<std::size_t> idx(k);
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t)> rec = [&](std::size_t level) {
    if (level == k) {
      double d = 0.0;
      for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
          if (a != b) d = std::max(d, metric(orbits[a][idx[a]], orbits[b][idx[b]]));
        }
      }
      best = std::min(best, d);
      return;
    }
    const std::size_t j = k - 1 - level;
    for (std::size_t i = 0; i < n; ++i) {
      idx[j] = i;
      rec(level + 1);
    }
  };
  rec(0);
  return best;
}

std::uint64_t naive_count(const std::vector<PointArray>& orbits, std::size_t n, const MetricSpec& metric, double r) {
  const std::size_t k = orbits.size();
  std::vector<std::size_t> idx(k, 0);
  std::uint64_t count = 0;
  for (;;) {
    bool ok = true;
    for (std::size_t a = 0; a < k && ok; ++a) {
      for (std::size_t b = a + 1; b < k && ok; ++b) ok = metric(orbits[a][idx[a]], orbits[b][idx[b]]) < r;
    }
    count += ok;
    std::size_t j = 0;
    while (j < k && ++idx[j] == n) idx[j++] = 0;
    if (j == k) break;
  }
  return count;
}

// Random orbit points; coarse = true draws from a 1/16 lattice to force ties
// and coincident points.
std::vector<PointArray> random_orbits(Rng& rng, std::size_t k, std::size_t n, std::size_t dim, bool coarse) {
  std::vector<PointArray> out;
  for (std::size_t j = 0; j < k; ++j) {
    PointArray o(dim);
    std::vector<double> c(dim);
    for (std::size_t i = 0; i < n; ++i) {
      for (double& v : c) v = coarse ? static_cast<double>(rng.below(16)) / 16.0 : rng.uniform();
      o.push_back(c);
    }
    out.push_back(std::move(o));
  }
  return out;
}

SearchOptions grid_only() {
  SearchOptions o;
  o.brute_force_below = 0;
  return o;
}

}  // namespace

TEST(KDiameter, FrozenExamples) {
  const std::vector<Point> a{Point(0.1), Point(0.2), Point(0.4)};
  EXPECT_NEAR(kdiameter(a, MetricSpec::euclidean(1)), 0.3, 1e-15);
  const std::vector<Point> b{Point(0.05), Point(0.95)};
  EXPECT_NEAR(kdiameter(b, MetricSpec::torus(1)), 0.1, 1e-15);
  const std::vector<Point> c{Point{0.3, 0.6}, Point{0.3, 0.6}, Point{0.3, 0.6}};
  EXPECT_EQ(kdiameter(c, MetricSpec::torus(2)), 0.0);
}

TEST(KDiameter, Errors) {
  const std::vector<Point> one{Point(0.1)};
  EXPECT_THROW(kdiameter(one, MetricSpec::torus(1)), Error);
  const std::vector<Point> mixed{Point(0.1), Point{0.1, 0.2}};
  try {
    kdiameter(mixed, MetricSpec::torus(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DimensionMismatch);
  }
}

TEST(KDiameter, PermutationInvariantAndDominatesPairs) {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    std::vector<Point> pts;
    for (int i = 0; i < 4; ++i) pts.push_back(Point{rng.uniform(), rng.uniform()});
    const MetricSpec m = t % 2 ? MetricSpec::torus(2) : MetricSpec::euclidean(2);
    const double d = kdiameter(pts, m);
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 4; ++j) EXPECT_GE(d, m(pts[i].coords(), pts[j].coords()));
    }
    std::reverse(pts.begin(), pts.end());
    std::swap(pts[0], pts[2]);
    EXPECT_EQ(kdiameter(pts, m), d);
  }
}

TEST(Metric, TorusWrapsEachCoordinate) {
  const MetricSpec t = MetricSpec::torus(2);
  const std::vector<double> a{0.05, 0.5}, b{0.95, 0.5}, c{0.95, 0.8};
  EXPECT_NEAR(t(a, b), 0.1, 1e-15);
  EXPECT_NEAR(t(a, c), std::hypot(0.1, 0.3), 1e-15);
  EXPECT_NEAR(MetricSpec::euclidean(2)(a, b), 0.9, 1e-15);
}

TEST(ShortestDistance, HandExamples) {
  const OrbitSet s({values({0.0, 0.5}), values({0.26, 0.74})}, MetricSpec::euclidean(1));
  EXPECT_NEAR(shortest_distance_bruteforce(s, 2), 0.24, 1e-15);
  EXPECT_EQ(shortest_distance_fast(s, 2, grid_only()), shortest_distance_bruteforce(s, 2));
  // n = 1: the initial tuple.
  EXPECT_NEAR(shortest_distance_bruteforce(s, 1), 0.26, 1e-15);
  EXPECT_EQ(shortest_distance_fast(s, 1, grid_only()), shortest_distance_bruteforce(s, 1));
}

TEST(ShortestDistance, IdenticalOrbitsGiveZero) {
  Rng rng(2);
  const auto o = random_orbits(rng, 1, 30, 2, false);
  const OrbitSet s({o[0], o[0], o[0]}, MetricSpec::torus(2));
  EXPECT_EQ(shortest_distance_bruteforce(s, 30), 0.0);
  EXPECT_EQ(shortest_distance_fast(s, 30, grid_only()), 0.0);
}

TEST(ShortestDistance, Errors) {
  const OrbitSet s({values({0.1, 0.2}), values({0.3, 0.4})}, MetricSpec::torus(1));
  try {
    shortest_distance_bruteforce(s, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NTooLarge);
  }
  EXPECT_THROW(shortest_distance_fast(s, 3), Error);
  EXPECT_THROW(OrbitSet({values({0.1})}, MetricSpec::torus(1)), Error);
  EXPECT_THROW(OrbitSet({values({0.1}), values({0.1, 0.2})}, MetricSpec::torus(1)), Error);
}

TEST(ShortestDistance, BruteForceMatchesIndependentEnumeration) {
  Rng rng(3);
  const auto o = random_orbits(rng, 3, 20, 1, false);
  const OrbitSet s(o, MetricSpec::torus(1));
  EXPECT_EQ(shortest_distance_bruteforce(s, 20), naive_min(o, 20, MetricSpec::torus(1)));
}

TEST(ShortestDistance, FastEqualsBruteForceOnRandomInstances) {
  Rng rng(4);
  for (int t = 0; t < 300; ++t) {
    const std::size_t k = 2 + rng.below(3);
    const std::size_t n = 1 + rng.below(40);
    const std::size_t dim = 1 + rng.below(3);
    const bool coarse = rng.below(4) == 0;
    const MetricSpec m = rng.below(2) ? MetricSpec::torus(dim) : MetricSpec::euclidean(dim);
    const OrbitSet s(random_orbits(rng, k, n, dim, coarse), m);
    const TupleMatch slow = closest_tuple_bruteforce(s, n);
    const TupleMatch fast = closest_tuple_fast(s, n, grid_only());
    ASSERT_EQ(fast.distance, slow.distance) << "t=" << t << " k=" << k << " n=" << n << " dim=" << dim;
    ASSERT_EQ(fast.indices, slow.indices) << "t=" << t;
  }
}

TEST(ShortestDistance, UpperBoundHintKeepsResult) {
  Rng rng(5);
  const OrbitSet s(random_orbits(rng, 3, 200, 1, false), MetricSpec::torus(1));
  const double exact = shortest_distance_bruteforce(s, 200);
  const double shorter = shortest_distance_fast(s, 100, grid_only());
  SearchOptions o = grid_only();
  o.upper_bound = shorter;
  EXPECT_EQ(shortest_distance_fast(s, 200, o), exact);
  o.upper_bound = exact;
  EXPECT_EQ(shortest_distance_fast(s, 200, o), exact);
}

TEST(ShortestDistance, MonotoneInN) {
  Rng rng(6);
  const OrbitSet s(random_orbits(rng, 2, 400, 2, false), MetricSpec::torus(2));
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t n = 1; n <= 400; n += 13) {
    const double m = shortest_distance_fast(s, n, grid_only());
    EXPECT_LE(m, prev);
    prev = m;
  }
}

TEST(ShortestDistance, DuplicatedOrbitLeavesValueUnchanged) {
  Rng rng(7);
  for (int t = 0; t < 30; ++t) {
    auto o = random_orbits(rng, 2, 25, 1, false);
    const double base = shortest_distance_bruteforce(OrbitSet(o, MetricSpec::torus(1)), 25);
    o.push_back(o.back());
    EXPECT_EQ(shortest_distance_fast(OrbitSet(o, MetricSpec::torus(1)), 25, grid_only()), base);
  }
}

TEST(ShortestDistance, OrbitOrderDoesNotMatter) {
  Rng rng(8);
  for (int t = 0; t < 30; ++t) {
    auto o = random_orbits(rng, 3, 20, 2, false);
    const double a = shortest_distance_fast(OrbitSet(o, MetricSpec::euclidean(2)), 20, grid_only());
    std::swap(o[0], o[2]);
    EXPECT_EQ(shortest_distance_fast(OrbitSet(o, MetricSpec::euclidean(2)), 20, grid_only()), a);
  }
}

TEST(ShortestDistance, LargerInstanceAgainstBruteForce) {
  Rng rng(9);
  const dynamics::MapSpec map = dynamics::MTimesMod1{2};
  std::vector<PointArray> o;
  for (int j = 0; j < 2; ++j) o.push_back(dynamics::sample_orbit(map, 1500, rng));
  const OrbitSet s(o, MetricSpec::torus(1));
  EXPECT_EQ(shortest_distance_fast(s, 1500), shortest_distance_bruteforce(s, 1500));
}

TEST(CountCloseTuples, HandExample) {
  const OrbitSet s({values({0.0, 0.5}), values({0.1, 0.9})}, MetricSpec::euclidean(1));
  EXPECT_EQ(count_close_tuples(s, 0.15, 2), 1u);
  EXPECT_EQ(count_close_tuples(s, 0.15, 2, grid_only()), 1u);
}

TEST(CountCloseTuples, LargeRadiusCountsEverything) {
  Rng rng(10);
  const OrbitSet s(random_orbits(rng, 3, 12, 2, false), MetricSpec::euclidean(2));
  EXPECT_EQ(count_close_tuples(s, 2.0, 12), 12u * 12u * 12u);
  EXPECT_EQ(count_close_tuples(s, 2.0, 12, grid_only()), 12u * 12u * 12u);
}

TEST(CountCloseTuples, StrictInequality) {
  const OrbitSet s({values({0.0}), values({0.25})}, MetricSpec::euclidean(1));
  EXPECT_EQ(count_close_tuples(s, 0.25, 1, grid_only()), 0u);
  EXPECT_EQ(count_close_tuples(s, std::nextafter(0.25, 1.0), 1, grid_only()), 1u);
}

TEST(CountCloseTuples, MatchesNaiveCountAndEquivalence) {
  Rng rng(11);
  for (int t = 0; t < 150; ++t) {
    const std::size_t k = 2 + rng.below(3);
    const std::size_t n = 1 + rng.below(25);
    const std::size_t dim = 1 + rng.below(2);
    const MetricSpec m = rng.below(2) ? MetricSpec::torus(dim) : MetricSpec::euclidean(dim);
    const auto o = random_orbits(rng, k, n, dim, rng.below(3) == 0);
    const OrbitSet s(o, m);
    const double mn = shortest_distance_bruteforce(s, n);
    for (double r : {mn, std::nextafter(mn, 2.0), 0.05, 0.2, 0.7}) {
      if (!(r > 0.0)) continue;
      const auto c = count_close_tuples(s, r, n, grid_only());
      ASSERT_EQ(c, naive_count(o, n, m, r)) << t;
      ASSERT_EQ(c >= 1, mn < r) << t;
    }
  }
}

TEST(CountCloseTuples, MonotoneInRadiusAndN) {
  Rng rng(12);
  const OrbitSet s(random_orbits(rng, 2, 60, 1, false), MetricSpec::torus(1));
  std::uint64_t prev = 0;
  for (double r = 0.001; r < 0.6; r *= 1.5) {
    const auto c = count_close_tuples(s, r, 60, grid_only());
    EXPECT_GE(c, prev);
    prev = c;
  }
  prev = 0;
  for (std::size_t n = 1; n <= 60; n += 7) {
    const auto c = count_close_tuples(s, 0.05, n, grid_only());
    EXPECT_GE(c, prev);
    prev = c;
  }
  EXPECT_THROW(count_close_tuples(s, 0.0, 10), Error);
}

TEST(Observed, IdentityProjectionAffine) {
  Rng rng(13);
  const auto o2 = random_orbits(rng, 2, 40, 2, false);
  const OrbitSet torus(o2, MetricSpec::torus(2));
  const double full = shortest_distance_fast(torus, 40);
  EXPECT_EQ(observed_shortest_distance(torus, dynamics::Identity{}, 40), full);
  EXPECT_LE(observed_shortest_distance(torus, dynamics::CoordinateProjection{{1}}, 40), full);

  const auto o1 = random_orbits(rng, 3, 30, 1, false);
  const OrbitSet box(o1, MetricSpec::euclidean(1));
  EXPECT_NEAR(observed_shortest_distance(box, dynamics::Affine{0.5, 0.0}, 30), 0.5 * shortest_distance_fast(box, 30),
              1e-15);
}

TEST(Exponent, Examples) {
  EXPECT_NEAR(exponent(1.0 / 1000, 1000), 1.0, 1e-12);
  EXPECT_NEAR(exponent(std::pow(1000.0, -1.5), 1000), 1.5, 1e-12);
  const double e = exponent(0.0, 1000);
  EXPECT_TRUE(std::isinf(e));
  EXPECT_TRUE(is_degenerate(e));
  EXPECT_FALSE(is_degenerate(exponent(0.5, 10)));
}
