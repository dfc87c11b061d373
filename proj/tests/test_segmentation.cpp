#include <cmath>
#include <deque>
#include <random>

#include <gtest/gtest.h>

#include "biliseg/segmentation.hpp"
#include "test_util.hpp"

using namespace biliseg;

namespace {

Volume tube_volume(Dims d, std::int64_t cx, std::int64_t cy, double radius, float fg, float bg) {
  Volume v(d, {}, bg);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Index3 p = index_of(d, i);
    const double r = std::hypot(double(p.x - cx), double(p.y - cy));
    if (r <= radius) v[i] = fg;
  }
  return v;
}

// Region growing reference: thresholds from the window definition, then a
// plain BFS over in-slice neighbours plus the voxels directly above/below.
Mask region_grow_oracle(const Volume& v, const RegionGrowConfig& c) {
  const Dims& d = v.dims();
  const int h = c.window / 2;
  auto threshold = [&](const Index3& p) {
    double sum = 0, sum2 = 0;
    int n = 0;
    for (int dy = -h; dy <= h; ++dy)
      for (int dx = -h; dx <= h; ++dx) {
        const Index3 q{p.x + dx, p.y + dy, p.z};
        if (!contains(d, q)) continue;
        const double x = v[linear_index(d, q)];
        sum += x;
        sum2 += x * x;
        ++n;
      }
    const double m = sum / n;
    const double s = std::sqrt(std::max(0.0, sum2 / n - m * m));
    return m * (1 + c.k * (s / c.r - 1));
  };
  Mask out(d, v.spacing(), std::uint8_t{0});
  std::deque<Index3> q{c.seed};
  out.at(c.seed) = 1;
  while (!q.empty()) {
    const Index3 p = q.front();
    q.pop_front();
    std::vector<Index3> next;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        if (c.in_slice_connectivity == Connectivity::edge4 && dx != 0 && dy != 0) continue;
        next.push_back({p.x + dx, p.y + dy, p.z});
      }
    if (c.propagate_slices) {
      next.push_back({p.x, p.y, p.z - 1});
      next.push_back({p.x, p.y, p.z + 1});
    }
    for (const Index3& n : next) {
      if (!contains(d, n) || out.at(n)) continue;
      if (v.at(n) >= threshold(n) - 1e-9) {
        out.at(n) = 1;
        q.push_back(n);
      }
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Dual thresholding

TEST(DualThreshold, StrictLowerInclusiveUpper) {
  const Volume v({3, 1, 1}, {}, std::vector<float>{50, 40, 60});
  const Mask m = dual_threshold(v, {40, 60, {}});
  EXPECT_EQ(m[0], 1);
  EXPECT_EQ(m[1], 0);
  EXPECT_EQ(m[2], 1);
}

TEST(DualThreshold, MatchesVoxelwiseRuleOnRandomVolumes) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 60; ++trial) {
    const Volume v = oracle::random_volume(rng, {8, 8, 2}, {}, 0, 20);
    const double lo = std::uniform_int_distribution<int>(0, 10)(rng);
    const double hi = lo + std::uniform_int_distribution<int>(1, 10)(rng);
    ThresholdConfig cfg{lo, hi, {}};
    if (trial % 3 == 0) cfg.per_slice_overrides[1] = {hi - 1, hi + 3};
    const Mask m = dual_threshold(v, cfg);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const bool slice1 = i >= 64 && cfg.per_slice_overrides.count(1);
      const double a = slice1 ? hi - 1 : lo, b = slice1 ? hi + 3 : hi;
      ASSERT_EQ(m[i] != 0, a < v[i] && v[i] <= b);
    }
  }
}

TEST(DualThreshold, ConfigErrors) {
  const Volume v({2, 2, 2}, {}, 1.0f);
  EXPECT_THROW(dual_threshold(v, {5, 5, {}}), config_error);
  ThresholdConfig c{0, 10, {}};
  c.per_slice_overrides[2] = {0, 1};
  EXPECT_THROW(dual_threshold(v, c), config_error);
}

// ---------------------------------------------------------------------------
// Flood fill

TEST(FloodFill, ZeroToleranceUniqueSeed) {
  Volume v({5, 5, 1}, {}, 1.0f);
  v.at({2, 2, 0}) = 9.0f;
  const Mask m = flood_fill(v, {{2, 2, 0}, 0.0, Connectivity::face6});
  EXPECT_EQ(count_foreground(m), 1u);
  EXPECT_EQ(m.at({2, 2, 0}), 1);
}

TEST(FloodFill, SaturatesWithLargeTolerance) {
  std::mt19937_64 rng(2);
  const Volume v = oracle::random_volume(rng, {6, 6, 4}, {}, 0, 100);
  const Mask m = flood_fill(v, {{0, 0, 0}, 100.0, Connectivity::face6});
  EXPECT_EQ(count_foreground(m), v.size());
}

TEST(FloodFill, InSliceConnectivityStaysOnSeedSlice) {
  const Volume v({4, 4, 3}, {}, 5.0f);
  const Mask m = flood_fill(v, {{1, 1, 1}, 0.0, Connectivity::edge4});
  EXPECT_EQ(count_foreground(m), 16u);
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_EQ(m[i] != 0, index_of(m.dims(), i).z == 1);
}

TEST(FloodFill, SeedOutOfBounds) {
  const Volume v({4, 4, 1}, {}, 1.0f);
  EXPECT_THROW(flood_fill(v, {{4, 0, 0}, 1.0, Connectivity::face6}), bounds_error);
}

TEST(FloodFill, MatchesBfsAndSatisfiesInvariants) {
  std::mt19937_64 rng(21);
  const Dims shapes[] = {{16, 16, 1}, {8, 8, 4}};
  const Connectivity conns[] = {Connectivity::face6, Connectivity::vertex26};
  int cases = 0;
  for (const Dims& d : shapes)
    for (Connectivity c : conns)
      for (int trial = 0; trial < 30; ++trial, ++cases) {
        const Volume v = oracle::random_volume(rng, d, {}, 0, 30);
        const Index3 seed = index_of(d, std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng));
        const double tol = std::uniform_int_distribution<int>(0, 15)(rng);
        const Mask m = flood_fill(v, {seed, tol, c});
        ASSERT_EQ(m, oracle::bfs_flood(v, seed, tol, c));

        const double ref = v.at(seed);
        ASSERT_EQ(m.at(seed), 1);
        ASSERT_EQ(oracle::union_find_count(m, c), 1u);
        for (std::size_t i = 0; i < m.size(); ++i) {
          if (m[i]) {
            ASSERT_LE(std::abs(v[i] - ref), tol);
            continue;
          }
          // Maximality: no in-tolerance background voxel touches the fill.
          if (std::abs(v[i] - ref) > tol) continue;
          for (std::size_t j = 0; j < m.size(); ++j)
            if (m[j]) { ASSERT_FALSE(oracle::adjacent(d, i, j, c)); }
        }
      }
  EXPECT_GE(cases, 100);
}

// ---------------------------------------------------------------------------
// Sauvola

TEST(Sauvola, UniformWindow) {
  const std::vector<double> w(9, 100.0);
  EXPECT_EQ(sauvola_threshold(w, 0.3, 100.0), 70.0);
}

TEST(Sauvola, SingleBrightPixel) {
  const std::vector<double> w{0, 0, 0, 0, 255, 0, 0, 0, 0};
  const double m = 255.0 / 9.0;
  const double s = std::sqrt(57800.0 / 9.0);
  EXPECT_NEAR(s, 80.1387, 1e-4);
  EXPECT_NEAR(sauvola_threshold(w, 0.3, 100.0), m * (1 + 0.3 * (s / 100 - 1)), 1e-12);
  EXPECT_NEAR(sauvola_threshold(w, 0.3, 100.0), 26.6451, 1e-4);
}

TEST(Sauvola, ZeroKGivesMean) {
  const std::vector<double> w{3, 8, 1, 9, 4};
  EXPECT_DOUBLE_EQ(sauvola_threshold(w, 0.0, 100.0), 5.0);
}

TEST(Sauvola, BorderWindowsAreClipped) {
  const Volume v({3, 3, 1}, {}, std::vector<float>{10, 20, 30, 40, 50, 60, 70, 80, 90});
  std::vector<double> scratch;
  // Corner (0,0) sees {10,20,40,50}.
  const double t = sauvola_threshold_at(v, {0, 0, 0}, 3, 0.0, 100.0, scratch);
  EXPECT_DOUBLE_EQ(t, 30.0);
  EXPECT_EQ(scratch.size(), 4u);
}

// ---------------------------------------------------------------------------
// Region growing

TEST(RegionGrow, SaturatedVolumeFillsGrid) {
  const Volume v({6, 6, 3}, {}, 255.0f);
  const Mask m = region_grow(v, {{2, 2, 1}});
  EXPECT_EQ(count_foreground(m), v.size());
}

TEST(RegionGrow, TubeAcrossSlicesAndPropagationSwitch) {
  const Dims d{24, 24, 10};
  const Volume v = tube_volume(d, 12, 12, 3.0, 200.0f, 10.0f);
  RegionGrowConfig cfg;
  cfg.seed = {12, 12, 4};
  const Mask m = region_grow(v, cfg);
  for (std::size_t i = 0; i < v.size(); ++i) ASSERT_EQ(m[i] != 0, v[i] == 200.0f) << i;

  cfg.propagate_slices = false;
  const Mask single = region_grow(v, cfg);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const bool on_slice = index_of(d, i).z == 4;
    ASSERT_EQ(single[i] != 0, on_slice && v[i] == 200.0f);
  }
}

TEST(RegionGrow, SeedAlwaysIncluded) {
  Volume v({5, 5, 1}, {}, 200.0f);
  v.at({2, 2, 0}) = 0.0f;  // far below its own threshold
  const Mask m = region_grow(v, {{2, 2, 0}});
  EXPECT_EQ(m.at({2, 2, 0}), 1);
}

TEST(RegionGrow, MatchesReachabilityOracle) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 60; ++trial) {
    const Dims d{10, 9, 5};
    const Volume v = oracle::random_volume(rng, d, {}, 0, 255);
    RegionGrowConfig cfg;
    cfg.seed = index_of(d, std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng));
    cfg.in_slice_connectivity = trial % 2 ? Connectivity::vertex8 : Connectivity::edge4;
    cfg.propagate_slices = trial % 5 != 0;
    cfg.window = trial % 3 == 0 ? 5 : 3;
    cfg.k = 0.1 + 0.1 * (trial % 7);
    const Mask m = region_grow(v, cfg);
    ASSERT_EQ(m, region_grow_oracle(v, cfg)) << "trial " << trial;
    ASSERT_EQ(m, region_grow(v, cfg));
  }
}

TEST(RegionGrow, ConfigValidation) {
  const Volume v({4, 4, 1}, {}, 1.0f);
  RegionGrowConfig c;
  c.window = 4;
  EXPECT_THROW(region_grow(v, c), config_error);
  c = {};
  c.k = 1.0;
  EXPECT_THROW(region_grow(v, c), config_error);
  c = {};
  c.in_slice_connectivity = Connectivity::face6;
  EXPECT_THROW(region_grow(v, c), config_error);
  c = {};
  c.seed = {0, 0, 1};
  EXPECT_THROW(region_grow(v, c), bounds_error);
}

// ---------------------------------------------------------------------------
// Post-processing

namespace {

// Components of 100, 5 and 3 voxels along separate rows.
Mask three_components() {
  Mask m({110, 5, 1}, {}, std::uint8_t{0});
  for (int x = 0; x < 100; ++x) m.at({x, 0, 0}) = 1;
  for (int x = 0; x < 5; ++x) m.at({x, 2, 0}) = 1;
  for (int x = 0; x < 3; ++x) m.at({x, 4, 0}) = 1;
  return m;
}

}  // namespace

TEST(Postprocess, KeepLargest) {
  const PostprocessPolicy p[] = {KeepLargest{}};
  const Mask out = postprocess(three_components(), p);
  EXPECT_EQ(count_foreground(out), 100u);
}

TEST(Postprocess, MinSize) {
  const PostprocessPolicy p[] = {MinSize{4}};
  const Mask out = postprocess(three_components(), p);
  EXPECT_EQ(count_foreground(out), 105u);
  EXPECT_EQ(out.at({0, 4, 0}), 0);
}

TEST(Postprocess, KeepSeeded) {
  const PostprocessPolicy p[] = {KeepSeeded{{{2, 2, 0}}}};
  const Mask out = postprocess(three_components(), p);
  EXPECT_EQ(count_foreground(out), 5u);
  const PostprocessPolicy bg[] = {KeepSeeded{{{105, 1, 0}}}};
  EXPECT_THROW(postprocess(three_components(), bg), degenerate_input_error);
}

TEST(Postprocess, ResultIsSubsetForEveryPolicyChain) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const Mask m = oracle::random_nonempty_mask(rng, {8, 8, 4}, {}, 0.2);
    std::vector<PostprocessPolicy> chain{MinSize{std::size_t(1 + trial % 4)}};
    if (trial % 2) chain.push_back(KeepLargest{});
    const Mask out = postprocess(m, chain);
    for (std::size_t i = 0; i < m.size(); ++i)
      if (out[i]) { ASSERT_EQ(m[i], 1); }
  }
}
