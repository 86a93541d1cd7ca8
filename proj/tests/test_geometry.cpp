#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "vrpc/error.hpp"
#include "vrpc/geometry.hpp"
#include "vrpc/random.hpp"

namespace vrpc {
namespace {

using testing::brute_knn;
using testing::random_cloud;

// Brute-force FPS with the same seeding rule.
std::vector<std::size_t> brute_fps(const PointCloud& pc, std::size_t m, std::size_t first) {
  std::vector<std::size_t> out{first};
  while (out.size() < m) {
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < pc.size(); ++i) {
      double d = INFINITY;
      for (const auto c : out) d = std::min(d, squared_distance(pc[i], pc[c]));
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    out.push_back(best);
  }
  return out;
}

TEST(KdIndex, SelfQueryAndSquareCorners) {
  const PointCloud sq({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}});
  const KdIndex index(sq);
  const auto [i, d] = index.nearest(sq[2]);
  EXPECT_EQ(i, 2u);
  EXPECT_EQ(d, 0.0);
  auto all = knn(index, {0.5, 0.5, 0}, 4);
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, (std::vector<std::size_t>{0, 1, 2, 3}));
  // Equidistant ties resolve to the lower index.
  EXPECT_EQ(knn(index, {0.5, 0.5, 0}, 2), (std::vector<std::size_t>{0, 1}));
}

TEST(KdIndex, MatchesBruteForceOn200Instances) {
  Rng rng(17);
  for (std::uint64_t t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.below(80);
    auto pc = random_cloud(n, 1000 + t);
    if (t % 4 == 0) {
      // Lattice points force many exact ties.
      for (auto& p : pc.points) {
        for (double& c : p) c = std::round(c * 2.0) / 2.0;
      }
    }
    const KdIndex index(pc);
    const std::size_t k = 1 + rng.below(std::min<std::size_t>(n, 10));
    const Point3 q{rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2)};
    EXPECT_EQ(index.knn(q, k), brute_knn(pc, q, k)) << "instance " << t;
    EXPECT_EQ(index.nearest(q).first, testing::brute_nearest(pc, q));
  }
}

TEST(KdIndex, FiftyPointsKFive) {
  const auto pc = random_cloud(50, 5);
  const KdIndex index(pc);
  Rng rng(6);
  for (int i = 0; i < 50; ++i) {
    const Point3 q{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    EXPECT_EQ(knn(index, q, 5), brute_knn(pc, q, 5));
  }
}

TEST(KdIndex, TooManyNeighborsIsError) {
  const auto pc = random_cloud(4, 1);
  EXPECT_THROW(KdIndex(pc).knn({0, 0, 0}, 5), Error);
}

TEST(Fps, CollinearExample) {
  const PointCloud line({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {10, 0, 0}});
  EXPECT_EQ(farthest_point_sample(line, 2, 4), (std::vector<std::size_t>{0, 3}));
  EXPECT_EQ(farthest_point_sample(line, 1, 4), (std::vector<std::size_t>{0}));
  EXPECT_EQ(farthest_point_sample(line, 1, 6), (std::vector<std::size_t>{2}));
  // seed 0: farthest from the centroid 3.25 is index 3.
  EXPECT_EQ(farthest_point_sample(line, 1, 0), (std::vector<std::size_t>{3}));
}

TEST(Fps, FullSampleIsPermutation) {
  const auto pc = random_cloud(40, 2);
  auto idx = farthest_point_sample(pc, 40, 0);
  std::sort(idx.begin(), idx.end());
  std::vector<std::size_t> expect(40);
  std::iota(expect.begin(), expect.end(), std::size_t{0});
  EXPECT_EQ(idx, expect);
}

TEST(Fps, MatchesBruteForce) {
  for (std::uint64_t s = 1; s < 20; ++s) {
    const auto pc = random_cloud(60, s);
    EXPECT_EQ(farthest_point_sample(pc, 15, s), brute_fps(pc, 15, s % 60));
  }
}

TEST(Fps, TooManySamplesIsError) {
  EXPECT_THROW(farthest_point_sample(random_cloud(3, 1), 4), Error);
}

TEST(Fps, StableUnderShuffledTail) {
  // Moving the unselected points around must not change which points are
  // picked once indices are mapped back.
  const auto pc = random_cloud(50, 8);
  const auto picked = farthest_point_sample(pc, 10, 1);
  std::vector<bool> chosen(pc.size(), false);
  for (auto i : picked) chosen[i] = true;
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    if (!chosen[i]) rest.push_back(i);
  }
  Rng rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    for (std::size_t i = rest.size(); i > 1; --i) std::swap(rest[i - 1], rest[rng.below(i)]);
    // Selected points keep their indices; the rest fill the free slots.
    std::vector<std::size_t> map(pc.size());
    std::size_t r = 0;
    PointCloud shuffled;
    shuffled.points.resize(pc.size());
    for (std::size_t i = 0; i < pc.size(); ++i) {
      const std::size_t src = chosen[i] ? i : rest[r++];
      shuffled[i] = pc[src];
      map[i] = src;
    }
    std::vector<std::size_t> got;
    for (auto i : farthest_point_sample(shuffled, 10, 1)) got.push_back(map[i]);
    EXPECT_EQ(got, picked);
  }
}

TEST(Group, SelfGroupAndDirectSubtraction) {
  const auto pc = random_cloud(30, 3);
  const std::vector<std::size_t> centers{0, 7, 29};
  const auto g1 = group(std::span<const Point3>(pc.points), centers, 1);
  for (std::size_t i = 0; i < centers.size(); ++i) {
    EXPECT_EQ(g1.neighbor_idx[i], centers[i]);
    EXPECT_EQ(g1.relative_coords[i], (Point3{0, 0, 0}));
  }
  const auto g = group(std::span<const Point3>(pc.points), centers, 6);
  ASSERT_EQ(g.groups(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(g.centers[i], pc[centers[i]]);
    const auto expect = brute_knn(pc, pc[centers[i]], 6);
    for (std::size_t j = 0; j < 6; ++j) {
      EXPECT_EQ(g.neighbor_idx[i * 6 + j], expect[j]);
      EXPECT_EQ(g.relative_coords[i * 6 + j], pc[expect[j]] - pc[centers[i]]);
    }
  }
}

TEST(Group, TranslationInvariant) {
  // Dyadic coordinates keep the shifted differences exact.
  auto pc = random_cloud(40, 4);
  for (auto& p : pc.points) {
    for (double& c : p) c = std::round(c * 1024.0) / 1024.0;
  }
  PointCloud moved = pc;
  for (auto& p : moved.points) p = p + Point3{4.0, -8.0, 0.5};
  const std::vector<std::size_t> centers{1, 5, 9};
  const auto a = group(std::span<const Point3>(pc.points), centers, 8);
  const auto b = group(std::span<const Point3>(moved.points), centers, 8);
  EXPECT_EQ(a.neighbor_idx, b.neighbor_idx);
  EXPECT_EQ(a.relative_coords, b.relative_coords);
}

TEST(Normals, PlaneGivesAxisNormals) {
  Rng rng(3);
  PointCloud plane;
  for (int i = 0; i < 100; ++i) plane.points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0});
  const auto n16 = estimate_normals(plane, 16);
  const auto nall = estimate_normals(plane, plane.size());
  for (std::size_t i = 0; i < plane.size(); ++i) {
    EXPECT_NEAR(std::abs(n16[i][2]), 1.0, 1e-6);
    EXPECT_NEAR(n16[i][2], nall[i][2], 1e-6);
    EXPECT_NEAR(std::sqrt(dot(n16[i], n16[i])), 1.0, 1e-9);
  }
}

// Random sampling leaves a few lopsided neighborhoods at n = 1024; the bound
// holds everywhere once the sample is dense enough.
TEST(Normals, DenseSphereWithinFiveDegrees) {
  const double cos5 = std::cos(5.0 * M_PI / 180.0);
  const auto dense = synth_dataset(parse_synth_spec("shapes=sphere,n=4096,seed=4"))[0];
  const auto normals = estimate_normals(dense, 16);
  for (std::size_t i = 0; i < dense.size(); ++i) EXPECT_GE(std::abs(dot(normals[i], dense[i])), cos5);

  const auto sparse = synth_dataset(parse_synth_spec("shapes=sphere,n=1024,seed=4"))[0];
  const auto coarse = estimate_normals(sparse, 16);
  std::size_t within = 0;
  for (std::size_t i = 0; i < sparse.size(); ++i) within += std::abs(dot(coarse[i], sparse[i])) >= cos5;
  EXPECT_GE(within, 1014u);
}

TEST(Normals, DegenerateNeighborhoodAndBadK) {
  const PointCloud same({{1, 1, 1}, {1, 1, 1}, {1, 1, 1}, {1, 1, 1}});
  for (const auto& n : estimate_normals(same, 3)) EXPECT_EQ(n, (Point3{0, 0, 1}));
  EXPECT_THROW(estimate_normals(same, 2), Error);
  EXPECT_THROW(estimate_normals(same, 5), Error);
}

}  // namespace
}  // namespace vrpc
