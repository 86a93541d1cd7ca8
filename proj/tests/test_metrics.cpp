#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "vrpc/error.hpp"
#include "vrpc/geometry.hpp"
#include "vrpc/metrics.hpp"
#include "vrpc/network.hpp"
#include "vrpc/random.hpp"

namespace vrpc {
namespace {

using testing::brute_chamfer;
using testing::brute_emd;
using testing::random_cloud;

PointCloud plane_grid(std::size_t side, double spacing) {
  PointCloud pc;
  for (std::size_t i = 0; i < side; ++i) {
    for (std::size_t j = 0; j < side; ++j) {
      pc.points.push_back({spacing * static_cast<double>(i), spacing * static_cast<double>(j), 0.0});
    }
  }
  return pc;
}

PointCloud rigid(const PointCloud& pc, double angle, const Point3& t) {
  const double c = std::cos(angle), s = std::sin(angle);
  PointCloud out = pc;
  for (auto& p : out.points) p = Point3{c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]} + t;
  return out;
}

PointCloud shuffled(const PointCloud& pc, std::uint64_t seed) {
  PointCloud out = pc;
  Rng rng(seed);
  for (std::size_t i = out.size(); i > 1; --i) std::swap(out[i - 1], out[rng.below(i)]);
  return out;
}

TEST(Chamfer, Examples) {
  const auto x = random_cloud(30, 1);
  EXPECT_EQ(chamfer(x, x), 0.0);
  EXPECT_EQ(chamfer(PointCloud({{0, 0, 0}}), PointCloud({{1, 0, 0}})), 2.0);
  const auto y = random_cloud(40, 2);
  EXPECT_EQ(chamfer(x, y), brute_chamfer(x, y));
  EXPECT_EQ(chamfer(x, y), chamfer(y, x));
  EXPECT_THROW(chamfer(x, PointCloud{}), Error);
}

TEST(Chamfer, MatchesBruteForceOn200Instances) {
  Rng rng(3);
  for (std::uint64_t t = 0; t < 200; ++t) {
    const auto x = random_cloud(1 + rng.below(120), 100 + t);
    const auto y = random_cloud(1 + rng.below(120), 500 + t);
    EXPECT_EQ(chamfer(x, y), brute_chamfer(x, y)) << "instance " << t;
  }
}

TEST(Chamfer, LossValueMatchesMetric) {
  const auto target = random_cloud(25, 4);
  const auto recon = random_cloud(31, 5);
  ad::Tape tape;
  const auto loss = chamfer_loss(tape.constant(cloud_to_tensor(recon)), target);
  EXPECT_EQ(loss.value().item(), chamfer(target, recon));
}

TEST(Emd, Examples) {
  const auto x = random_cloud(20, 6);
  EXPECT_EQ(emd_exact(x, x), 0.0);
  EXPECT_EQ(emd_exact(PointCloud({{0, 0, 0}, {1, 0, 0}}), PointCloud({{1, 0, 0}, {0, 0, 0}})), 0.0);
  EXPECT_THROW(emd_exact(x, random_cloud(19, 7)), Error);
  EXPECT_THROW(emd_approx(x, random_cloud(19, 7)), Error);
  EXPECT_NEAR(emd_approx(x, x), 0.0, 1e-9);
}

TEST(Emd, ExactMatchesFactorialBruteForce) {
  for (std::uint64_t t = 0; t < 20; ++t) {
    const auto x = random_cloud(8, 700 + t);
    const auto y = random_cloud(8, 800 + t);
    EXPECT_NEAR(emd_exact(x, y), brute_emd(x, y), 1e-12) << "instance " << t;
  }
}

TEST(Emd, AuctionWithinTwoPercentOfHungarian) {
  for (std::uint64_t t = 0; t < 20; ++t) {
    const auto x = random_cloud(64, 900 + t);
    const auto y = random_cloud(64, 1000 + t);
    const double exact = emd_exact(x, y);
    const double approx = emd_approx(x, y);
    EXPECT_GE(approx, exact - 1e-12);
    EXPECT_LE(approx, 1.02 * exact) << "instance " << t;
  }
}

TEST(Emd, MorePhasesNeverWorse) {
  for (std::uint64_t t = 0; t < 10; ++t) {
    const auto x = random_cloud(48, 1100 + t);
    const auto y = random_cloud(48, 1200 + t);
    for (std::size_t phases = 1; phases <= 8; phases *= 2) {
      EXPECT_LE(emd_approx(x, y, 2 * phases), emd_approx(x, y, phases) + 1e-9);
    }
  }
}

TEST(Emd, AssignmentsAreBijections) {
  const auto x = random_cloud(40, 13);
  const auto y = random_cloud(40, 14);
  for (const auto& a : {hungarian_assignment(x, y), auction_assignment(x, y)}) {
    std::vector<bool> seen(40, false);
    for (const auto j : a) {
      ASSERT_LT(j, 40u);
      EXPECT_FALSE(seen[j]);
      seen[j] = true;
    }
  }
  EXPECT_NEAR(assignment_cost(x, y, hungarian_assignment(x, y)), emd_exact(x, y), 1e-12);
}

TEST(Fscore, Examples) {
  const auto x = random_cloud(50, 15);
  EXPECT_EQ(fscore(x, x), 1.0);
  PointCloud far = x;
  for (auto& p : far.points) p = p + Point3{10, 0, 0};
  EXPECT_EQ(fscore(x, far), 0.0);
  // Half the recon on top of the reference, half far away.
  PointCloud recon = x;
  for (const auto& p : far.points) recon.points.push_back(p);
  EXPECT_NEAR(fscore(x, recon, 0.05), 2.0 / 3.0, 1e-15);
}

TEST(P2p, PlanarOffsetAlongNormal) {
  const auto plane = plane_grid(12, 0.1);
  PointCloud lifted = plane;
  for (auto& p : lifted.points) p[2] += 0.1;
  const std::vector<Point3> normals(plane.size(), Point3{0, 0, 1});
  EXPECT_NEAR(p2p(plane, lifted), 0.1, 1e-12);
  EXPECT_NEAR(p2plane(plane, lifted, normals), 0.1, 1e-12);
  EXPECT_EQ(p2p(plane, plane), 0.0);
  EXPECT_EQ(p2plane(plane, plane, normals), 0.0);
}

TEST(P2p, TangentialShiftOnlyMovesP2p) {
  // Interior points shifted by a third of the spacing keep their nearest
  // neighbor; the edge rows are dropped from the recon.
  const auto plane = plane_grid(14, 0.1);
  PointCloud recon;
  for (const auto& p : plane.points) {
    if (p[0] > 0.05 && p[0] < 1.25 && p[1] > 0.05 && p[1] < 1.25) recon.points.push_back(p + Point3{0.03, 0, 0});
  }
  const std::vector<Point3> normals(plane.size(), Point3{0, 0, 1});
  EXPECT_NEAR(p2plane(plane, recon, normals), 0.0, 1e-15);
  EXPECT_GT(p2p(plane, recon), 0.0);
  EXPECT_THROW(p2plane(plane, recon, std::vector<Point3>(3, Point3{0, 0, 1})), Error);
}

TEST(Metrics, SelfReportIsZero) {
  const auto x = synth_dataset(parse_synth_spec("shapes=sphere,n=128,seed=1"))[0];
  const auto r = evaluate_metrics(x, x);
  EXPECT_EQ(r.cd, 0.0);
  EXPECT_EQ(r.emd, 0.0);
  EXPECT_EQ(r.fscore, 1.0);
  EXPECT_EQ(r.p2p, 0.0);
  EXPECT_EQ(r.p2plane, 0.0);
  EXPECT_TRUE(std::isnan(evaluate_metrics(x, random_cloud(10, 2)).emd));
}

TEST(Metrics, RigidMotionInvariance) {
  const auto x = synth_dataset(parse_synth_spec("shapes=torus,n=96,seed=3"))[0];
  const auto y = synth_dataset(parse_synth_spec("shapes=torus,n=96,seed=4"))[0];
  const auto xn = estimate_normals(x);
  const auto a = evaluate_metrics(x, y, xn);
  const auto rx = rigid(x, 0.7, {0.3, -0.2, 1.0});
  const auto ry = rigid(y, 0.7, {0.3, -0.2, 1.0});
  const auto rn = rigid(PointCloud(xn), 0.7, {0, 0, 0});
  const auto b = evaluate_metrics(rx, ry, rn.points);
  EXPECT_NEAR(a.cd, b.cd, 1e-9);
  EXPECT_NEAR(a.emd, b.emd, 1e-9);
  EXPECT_EQ(a.fscore, b.fscore);
  EXPECT_NEAR(a.p2p, b.p2p, 1e-9);
  EXPECT_NEAR(a.p2plane, b.p2plane, 1e-9);
}

TEST(Metrics, PermutationInvariance) {
  const auto x = random_cloud(60, 21);
  const auto y = random_cloud(60, 22);
  const auto px = shuffled(x, 1);
  const auto py = shuffled(y, 2);
  EXPECT_DOUBLE_EQ(chamfer(x, y), chamfer(px, py));
  EXPECT_NEAR(emd_exact(x, y), emd_exact(px, py), 1e-12);
}

TEST(Metrics, LossGradientsAgainstFiniteDifferences) {
  const auto target = random_cloud(12, 30);
  ad::ParamStore store;
  store.add("r", cloud_to_tensor(random_cloud(12, 31)));
  const auto cd = testing::check_gradients(
      store, [&](ad::Tape& tape) { return chamfer_loss(tape.parameter(store, "r"), target); });
  EXPECT_LT(cd.max_rel_error, 1e-4);
  const auto em = testing::check_gradients(
      store, [&](ad::Tape& tape) { return emd_loss(tape.parameter(store, "r"), target); });
  EXPECT_LT(em.max_rel_error, 1e-4);
}

}  // namespace
}  // namespace vrpc
