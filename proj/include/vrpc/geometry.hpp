#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "vrpc/pointcloud.hpp"

namespace vrpc {

// Exact kd-tree over a fixed point set. Results are ordered by
// (squared distance, index), matching a brute-force scan with the same key.
class KdIndex {
 public:
  explicit KdIndex(std::span<const Point3> points);
  explicit KdIndex(const PointCloud& pc) : KdIndex(std::span<const Point3>(pc.points)) {}

  std::size_t size() const { return points_.size(); }
  const Point3& point(std::size_t i) const { return points_[i]; }

  // k nearest indices, ascending distance, ties to the lower index.
  std::vector<std::size_t> knn(const Point3& query, std::size_t k) const;
  // Index and squared distance of the nearest point.
  std::pair<std::size_t, double> nearest(const Point3& query) const;

 private:
  struct Node {
    std::uint32_t begin = 0, end = 0;
    std::int32_t left = -1, right = -1;
    int dim = 0;
    double split = 0.0;
  };
  using Candidate = std::pair<double, std::size_t>;

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node, const Point3& q, std::size_t k,
              std::vector<Candidate>& heap) const;

  std::vector<Point3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

// Iterative farthest point sampling. seed == 0 starts from the lowest-index
// point among those farthest from the centroid; otherwise from index
// seed % n. Later picks maximize the distance to the chosen set, ties to
// the lowest index.
std::vector<std::size_t> farthest_point_sample(std::span<const Point3> points,
                                               std::size_t m, std::uint64_t seed = 0);
inline std::vector<std::size_t> farthest_point_sample(const PointCloud& pc, std::size_t m,
                                                      std::uint64_t seed = 0) {
  return farthest_point_sample(std::span<const Point3>(pc.points), m, seed);
}

std::vector<std::size_t> knn(const KdIndex& index, const Point3& query, std::size_t k);

// Neighborhoods around sampled centers, stored row-major as m groups of k.
struct GroupedFeatures {
  std::size_t k = 0;
  std::vector<Point3> centers;
  std::vector<std::size_t> neighbor_idx;
  std::vector<Point3> relative_coords;

  std::size_t groups() const { return centers.size(); }
};

GroupedFeatures group(std::span<const Point3> points, std::span<const std::size_t> centers,
                      std::size_t k);
GroupedFeatures group(const KdIndex& index, std::span<const std::size_t> centers, std::size_t k);

inline constexpr std::size_t kDefaultNormalNeighbors = 16;

// Local PCA normals, oriented away from the neighborhood centroid. When the
// point lies on that centroid's tangent plane the largest-magnitude
// component is made positive. All-identical neighborhoods yield (0, 0, 1).
std::vector<Point3> estimate_normals(const PointCloud& pc,
                                     std::size_t k = kDefaultNormalNeighbors);

}  // namespace vrpc
