#include <map>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "biliseg/metrics.hpp"
#include "test_util.hpp"

using namespace biliseg;

TEST(Dice, IdentityDisjointAndHalf) {
  Mask a({4, 4, 1}, {}, std::uint8_t{0});
  Mask b = a;
  for (int x = 0; x < 4; ++x) a.at({x, 0, 0}) = 1;
  EXPECT_EQ(dice(a, a), 1.0);
  for (int x = 0; x < 4; ++x) b.at({x, 2, 0}) = 1;
  EXPECT_EQ(dice(a, b), 0.0);

  Mask c({4, 4, 1}, {}, std::uint8_t{0});
  c.at({0, 0, 0}) = c.at({1, 0, 0}) = c.at({0, 1, 0}) = c.at({1, 1, 0}) = 1;
  EXPECT_EQ(dice(a, c), 0.5);
}

TEST(Dice, EmptyConventionsAndGeometry) {
  Mask e({3, 3, 3}, {}, std::uint8_t{0});
  Mask f = e;
  f[0] = 1;
  EXPECT_EQ(dice(e, e), 1.0);
  EXPECT_EQ(dice(e, f), 0.0);
  Mask other({3, 3, 2}, {}, std::uint8_t{0});
  EXPECT_THROW(dice(e, other), geometry_error);
  Mask spaced({3, 3, 3}, {1, 1, 2}, std::uint8_t{0});
  EXPECT_THROW(dice(e, spaced), geometry_error);
}

TEST(DistanceTransform, HandExamples) {
  Mask m({5, 5, 3}, {}, std::uint8_t{0});
  m.at({0, 0, 0}) = 1;
  const DistanceField df = distance_transform(m);
  EXPECT_DOUBLE_EQ(df.distance.at({3, 4, 0}), 5.0);
  EXPECT_EQ(df.distance.at({0, 0, 0}), 0.0);

  Mask n({2, 2, 2}, {1, 1, 2}, std::uint8_t{0});
  n.at({0, 0, 0}) = 1;
  EXPECT_DOUBLE_EQ(distance_transform(n).distance.at({0, 0, 1}), 2.0);
}

TEST(DistanceTransform, EmptyMaskIsDegenerate) {
  Mask m({2, 2, 2}, {}, std::uint8_t{0});
  EXPECT_THROW(distance_transform(m), degenerate_input_error);
}

TEST(DistanceTransform, MatchesBruteForceOnRandomMasks) {
  std::mt19937_64 rng(100);
  const Spacing spacings[] = {{1, 1, 1}, {1.094, 1.094, 1.5}, {0.664, 0.664, 2}, {2, 0.5, 1}};
  for (int trial = 0; trial < 220; ++trial) {
    const Spacing s = spacings[trial % 4];
    const Mask m = oracle::random_nonempty_mask(rng, {8, 8, 4}, s, 0.02 + 0.2 * (trial % 6) / 6);
    const DistanceField df = distance_transform(m);
    const auto ref = oracle::brute_distance_field(m);
    for (std::size_t i = 0; i < m.size(); ++i) {
      ASSERT_NEAR(df.distance[i], ref[i], 1e-9) << "trial " << trial << " voxel " << i;
      if (m[i]) { ASSERT_EQ(df.distance[i], 0.0); }
    }
  }
}

TEST(Hausdorff, IdentityAndSinglePair) {
  Mask x({5, 5, 1}, {}, std::uint8_t{0});
  Mask y = x;
  x.at({0, 0, 0}) = 1;
  y.at({3, 4, 0}) = 1;
  EXPECT_EQ(hausdorff(x, x), 0.0);
  EXPECT_DOUBLE_EQ(hausdorff(x, y, HausdorffMode::directed), 5.0);
  EXPECT_DOUBLE_EQ(hausdorff(x, y, HausdorffMode::symmetric), 5.0);
}

TEST(Hausdorff, EmptyMaskIsDegenerate) {
  Mask x({3, 3, 1}, {}, std::uint8_t{0});
  Mask y = x;
  y[0] = 1;
  EXPECT_THROW(hausdorff(x, y), degenerate_input_error);
  EXPECT_THROW(hausdorff(y, x), degenerate_input_error);
}

TEST(Hausdorff, MatchesPairwiseOracleAndIsSymmetric) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 150; ++trial) {
    const Spacing s{1.0 + 0.1 * (trial % 3), 1.0, 1.5 + 0.5 * (trial % 2)};
    const Mask x = oracle::random_nonempty_mask(rng, {8, 8, 4}, s, 0.05 + 0.05 * (trial % 5));
    const Mask y = oracle::random_nonempty_mask(rng, {8, 8, 4}, s, 0.05 + 0.04 * (trial % 7));
    const double xy = oracle::brute_directed_hd(x, y), yx = oracle::brute_directed_hd(y, x);
    ASSERT_NEAR(hausdorff(x, y, HausdorffMode::directed), xy, 1e-9);
    ASSERT_NEAR(hausdorff(y, x, HausdorffMode::directed), yx, 1e-9);
    ASSERT_NEAR(hausdorff(x, y), std::max(xy, yx), 1e-9);
    ASSERT_EQ(hausdorff(x, y), hausdorff(y, x));
  }
}

TEST(Hausdorff, AddingToTargetNeverIncreasesDirectedFromOther) {
  // Directed HD(Y, X) can only drop when X gains voxels.
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 50; ++trial) {
    Mask x = oracle::random_nonempty_mask(rng, {8, 8, 4}, {}, 0.05);
    const Mask y = oracle::random_nonempty_mask(rng, {8, 8, 4}, {}, 0.1);
    const double before = directed_hausdorff(y, x);
    x[std::uniform_int_distribution<std::size_t>(0, x.size() - 1)(rng)] = 1;
    ASSERT_LE(directed_hausdorff(y, x), before);
  }
}

TEST(Rvd, Examples) {
  Mask y({10, 10, 2}, {}, std::uint8_t{0});
  Mask x = y;
  for (int i = 0; i < 100; ++i) y[i] = 1;
  for (int i = 0; i < 120; ++i) x[i] = 1;
  EXPECT_DOUBLE_EQ(rvd(x, y), 0.2);
  EXPECT_EQ(rvd(y, y), 0.0);
  Mask empty({10, 10, 2}, {}, std::uint8_t{0});
  EXPECT_EQ(rvd(empty, y), 1.0);
  EXPECT_THROW(rvd(y, empty), degenerate_input_error);
}

TEST(Rvd, ScaleConsistentUnderGridDuplication) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Mask x = oracle::random_mask(rng, {6, 6, 2}, {}, 0.3);
    const Mask y = oracle::random_nonempty_mask(rng, {6, 6, 2}, {}, 0.3);
    Mask x2({6, 6, 4}, {}, std::uint8_t{0}), y2 = x2;
    for (std::size_t i = 0; i < x.size(); ++i) {
      x2[i] = x2[i + x.size()] = x[i];
      y2[i] = y2[i + y.size()] = y[i];
    }
    EXPECT_DOUBLE_EQ(rvd(x, y), rvd(x2, y2));
    EXPECT_EQ(rvd(x, y) == 0.0, count_foreground(x) == count_foreground(y));
  }
}

TEST(Dice, PropertiesOnRandomPairs) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Mask x = oracle::random_nonempty_mask(rng, {5, 5, 3}, {}, 0.3);
    const Mask y = trial % 4 == 0 ? x : oracle::random_nonempty_mask(rng, {5, 5, 3}, {}, 0.3);
    const double d = dice(x, y);
    EXPECT_EQ(d, dice(y, x));
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
    EXPECT_EQ(d == 1.0, x == y);
  }
}

// ---------------------------------------------------------------------------
// Topology proxies

namespace {

// Overlap-matrix counts recomputed from union-find roots.
TopologyCounts topology_oracle(const Mask& p, const Mask& g, Connectivity c) {
  const auto rp = oracle::union_find_roots(p, c), rg = oracle::union_find_roots(g, c);
  std::map<std::size_t, std::set<std::size_t>> p_to_g, g_to_p;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i]) p_to_g[rp[i]];
    if (g[i]) g_to_p[rg[i]];
    if (p[i] && g[i]) {
      p_to_g[rp[i]].insert(rg[i]);
      g_to_p[rg[i]].insert(rp[i]);
    }
  }
  TopologyCounts t;
  for (auto& [k, s] : p_to_g) s.empty() ? ++t.outliers : t.false_communicating += s.size() - 1;
  for (auto& [k, s] : g_to_p) s.empty() ? ++t.missed_components : t.false_non_communicating += s.size() - 1;
  return t;
}

}  // namespace

TEST(Topology, IdentityHasNoErrors) {
  std::mt19937_64 rng(1);
  const Mask m = oracle::random_nonempty_mask(rng, {8, 8, 4}, {}, 0.2);
  EXPECT_EQ(topology_report(m, m), TopologyCounts{});
}

TEST(Topology, MergeCase) {
  Mask gt({12, 5, 1}, {}, std::uint8_t{0});
  for (int x = 0; x < 5; ++x) gt.at({x, 2, 0}) = 1;
  for (int x = 7; x < 12; ++x) gt.at({x, 2, 0}) = 1;
  Mask pred({12, 5, 1}, {}, std::uint8_t{0});
  for (int x = 0; x < 12; ++x) pred.at({x, 2, 0}) = 1;
  const TopologyCounts t = topology_report(pred, gt);
  EXPECT_EQ(t.false_communicating, 1u);
  EXPECT_EQ(t.false_non_communicating, 0u);
  EXPECT_EQ(t, topology_oracle(pred, gt, Connectivity::vertex26));
}

TEST(Topology, SplitPlusOutlierCase) {
  Mask gt({16, 8, 1}, {}, std::uint8_t{0});
  for (int x = 0; x < 10; ++x) gt.at({x, 1, 0}) = 1;
  Mask pred = gt;
  pred.at({5, 1, 0}) = 0;
  pred.at({14, 6, 0}) = 1;
  const TopologyCounts t = topology_report(pred, gt);
  EXPECT_EQ(t.false_non_communicating, 1u);
  EXPECT_EQ(t.outliers, 1u);
  EXPECT_EQ(t.false_communicating, 0u);
  EXPECT_EQ(t.missed_components, 0u);
  EXPECT_EQ(t, topology_oracle(pred, gt, Connectivity::vertex26));
}

TEST(Topology, OracleAgreementAndSwapDuality) {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 100; ++trial) {
    const Mask p = oracle::random_mask(rng, {8, 8, 4}, {}, 0.15);
    const Mask g = oracle::random_mask(rng, {8, 8, 4}, {}, 0.15);
    const Connectivity c = trial % 2 ? Connectivity::face6 : Connectivity::vertex26;
    const TopologyCounts t = topology_report(p, g, c);
    ASSERT_EQ(t, topology_oracle(p, g, c));
    const TopologyCounts s = topology_report(g, p, c);
    ASSERT_EQ(t.outliers, s.missed_components);
    ASSERT_EQ(t.missed_components, s.outliers);
    ASSERT_EQ(t.false_communicating, s.false_non_communicating);
    ASSERT_EQ(t.false_non_communicating, s.false_communicating);
  }
}

TEST(Evaluate, FullReport) {
  Mask gt({10, 10, 3}, {1, 1, 2}, std::uint8_t{0});
  for (int x = 2; x < 8; ++x) gt.at({x, 5, 1}) = 1;
  const MetricsReport same = evaluate(gt, gt);
  EXPECT_EQ(same.dsc, 1.0);
  EXPECT_EQ(same.hd_mm, 0.0);
  EXPECT_EQ(same.rvd, 0.0);
  EXPECT_EQ(same.outliers + same.missed_components + same.false_communicating +
                same.false_non_communicating,
            0u);

  Mask pred = gt;
  pred.at({2, 5, 2}) = 1;  // one slice up: 2 mm
  const MetricsReport r = evaluate(pred, gt);
  EXPECT_DOUBLE_EQ(r.hd_directed_pred_to_gt, 2.0);
  EXPECT_EQ(r.hd_directed_gt_to_pred, 0.0);
  EXPECT_EQ(r.hd_mm, std::max(r.hd_directed_pred_to_gt, r.hd_directed_gt_to_pred));
}
