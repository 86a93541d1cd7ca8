#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vrpc/autodiff.hpp"
#include "vrpc/pointcloud.hpp"

namespace vrpc {

// Squared-distance chamfer, mean-reduced per side and summed:
//   mean_p min_q |p - q|^2 + mean_q min_p |q - p|^2.
double chamfer(const PointCloud& x, const PointCloud& y);

// Chamfer between a reconstruction (m x 3 on the tape) and a fixed target.
// Gradients flow through the nearest-neighbor assignment.
ad::Var chamfer_loss(ad::Var recon, const PointCloud& target);

// Optimal bijection minimizing the summed Euclidean distance, as
// assignment[i] = index into y matched with x[i].
std::vector<std::size_t> hungarian_assignment(const PointCloud& x, const PointCloud& y);
// Mean matched Euclidean distance under the optimal bijection.
double emd_exact(const PointCloud& x, const PointCloud& y);

inline constexpr std::size_t kDefaultAuctionPhases = 10;

// Forward auction with epsilon scaling; each phase divides epsilon by 4.
// Returns the cheapest complete assignment seen over all phases, so extra
// phases never make the result worse.
std::vector<std::size_t> auction_assignment(const PointCloud& x, const PointCloud& y,
                                            std::size_t phases = kDefaultAuctionPhases);
double emd_approx(const PointCloud& x, const PointCloud& y, std::size_t phases = kDefaultAuctionPhases);

// Mean matched distance between target and recon under the auction
// matching, differentiable with respect to recon.
ad::Var emd_loss(ad::Var recon, const PointCloud& target, std::size_t phases = kDefaultAuctionPhases);

// Mean Euclidean distance of a fixed assignment.
double assignment_cost(const PointCloud& x, const PointCloud& y, std::span<const std::size_t> assignment);

inline constexpr double kDefaultFscoreThreshold = 0.05;

// Precision counts recon points within d of the reference, recall counts
// reference points within d of the recon.
double fscore(const PointCloud& reference, const PointCloud& recon, double d = kDefaultFscoreThreshold);

// RMS nearest-neighbor distance, max over both directions.
double p2p(const PointCloud& reference, const PointCloud& recon);
// RMS of nearest-neighbor error vectors projected onto the reference
// normal at the reference end of each pair, max over both directions.
double p2plane(const PointCloud& reference, const PointCloud& recon, std::span<const Point3> reference_normals);

struct MetricReport {
  double cd = 0.0;
  double emd = 0.0;
  double fscore = 0.0;
  double p2p = 0.0;
  double p2plane = 0.0;
};

struct MetricOptions {
  double fscore_threshold = kDefaultFscoreThreshold;
  // Exact assignment up to this many points, auction beyond.
  std::size_t exact_emd_limit = 512;
};

// Normals are estimated from the reference when not supplied. EMD is
// reported only when both clouds have equal size; otherwise it is NaN.
MetricReport evaluate_metrics(const PointCloud& reference, const PointCloud& recon,
                              std::span<const Point3> reference_normals = {}, const MetricOptions& opts = {});

}  // namespace vrpc
