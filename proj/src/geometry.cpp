#include "vrpc/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "vrpc/error.hpp"

namespace vrpc {

namespace {
constexpr std::uint32_t kLeafSize = 8;
}

KdIndex::KdIndex(std::span<const Point3> points) : points_(points.begin(), points.end()) {
  if (points_.empty()) throw Error(ErrorCode::kShape, "KdIndex: empty point set");
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.reserve(2 * points_.size() / kLeafSize + 1);
  build(0, static_cast<std::uint32_t>(points_.size()));
}

std::int32_t KdIndex::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= kLeafSize) return id;

  Point3 lo = points_[order_[begin]], hi = lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    const auto& p = points_[order_[i]];
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  int dim = 0;
  for (int a = 1; a < 3; ++a) {
    if (hi[a] - lo[a] > hi[dim] - lo[dim]) dim = a;
  }
  if (hi[dim] == lo[dim]) return id;  // all points coincide

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double pa = points_[a][dim], pb = points_[b][dim];
                     return pa < pb || (pa == pb && a < b);
                   });
  const double split = points_[order_[mid]][dim];
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[id].dim = dim;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdIndex::search(std::int32_t node_id, const Point3& q, std::size_t k,
                     std::vector<Candidate>& heap) const {
  const Node& node = nodes_[node_id];
  if (node.left < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::size_t idx = order_[i];
      const Candidate c{squared_distance(points_[idx], q), idx};
      if (heap.size() < k) {
        heap.push_back(c);
        std::push_heap(heap.begin(), heap.end());
      } else if (c < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = c;
        std::push_heap(heap.begin(), heap.end());
      }
    }
    return;
  }
  const double diff = q[node.dim] - node.split;
  const std::int32_t near = diff <= 0.0 ? node.left : node.right;
  const std::int32_t far = diff <= 0.0 ? node.right : node.left;
  search(near, q, k, heap);
  // Equal distances must still be visited so lower-index ties win.
  if (heap.size() < k || diff * diff <= heap.front().first) search(far, q, k, heap);
}

std::vector<std::size_t> KdIndex::knn(const Point3& query, std::size_t k) const {
  if (k > points_.size()) {
    throw Error(ErrorCode::kRange, "knn: k = " + std::to_string(k) + " exceeds n = " +
                                       std::to_string(points_.size()));
  }
  std::vector<Candidate> heap;
  heap.reserve(k + 1);
  if (k > 0) search(0, query, k, heap);
  std::sort_heap(heap.begin(), heap.end());
  std::vector<std::size_t> out(heap.size());
  for (std::size_t i = 0; i < heap.size(); ++i) out[i] = heap[i].second;
  return out;
}

std::pair<std::size_t, double> KdIndex::nearest(const Point3& query) const {
  std::vector<Candidate> heap;
  heap.reserve(2);
  search(0, query, 1, heap);
  return {heap.front().second, heap.front().first};
}

std::vector<std::size_t> farthest_point_sample(std::span<const Point3> points, std::size_t m,
                                               std::uint64_t seed) {
  const std::size_t n = points.size();
  if (m < 1 || m > n) {
    throw Error(ErrorCode::kRange, "farthest_point_sample: m = " + std::to_string(m) +
                                       " outside [1, " + std::to_string(n) + "]");
  }
  std::size_t first = 0;
  if (seed == 0) {
    Point3 centroid{0.0, 0.0, 0.0};
    for (const auto& p : points) {
      for (int a = 0; a < 3; ++a) centroid[a] += p[a];
    }
    for (auto& c : centroid) c /= static_cast<double>(n);
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = squared_distance(points[i], centroid);
      if (d > best) {
        best = d;
        first = i;
      }
    }
  } else {
    first = static_cast<std::size_t>(seed % n);
  }

  std::vector<std::size_t> chosen;
  chosen.reserve(m);
  chosen.push_back(first);
  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  std::size_t last = first;
  while (chosen.size() < m) {
    double best = -1.0;
    std::size_t best_idx = 0;
    for (std::size_t i = 0; i < n; ++i) {
      min_dist[i] = std::min(min_dist[i], squared_distance(points[i], points[last]));
      if (min_dist[i] > best) {
        best = min_dist[i];
        best_idx = i;
      }
    }
    chosen.push_back(best_idx);
    last = best_idx;
  }
  return chosen;
}

std::vector<std::size_t> knn(const KdIndex& index, const Point3& query, std::size_t k) {
  return index.knn(query, k);
}

GroupedFeatures group(const KdIndex& index, std::span<const std::size_t> centers, std::size_t k) {
  GroupedFeatures g;
  g.k = k;
  g.centers.reserve(centers.size());
  g.neighbor_idx.reserve(centers.size() * k);
  g.relative_coords.reserve(centers.size() * k);
  for (const std::size_t c : centers) {
    if (c >= index.size()) {
      throw Error(ErrorCode::kRange, "group: center index " + std::to_string(c) + " out of range");
    }
    const Point3& center = index.point(c);
    g.centers.push_back(center);
    for (const std::size_t j : index.knn(center, k)) {
      g.neighbor_idx.push_back(j);
      g.relative_coords.push_back(index.point(j) - center);
    }
  }
  return g;
}

GroupedFeatures group(std::span<const Point3> points, std::span<const std::size_t> centers,
                      std::size_t k) {
  return group(KdIndex(points), centers, k);
}

std::vector<Point3> estimate_normals(const PointCloud& pc, std::size_t k) {
  if (k < 3 || k > pc.size()) {
    throw Error(ErrorCode::kRange, "estimate_normals: need 3 <= k <= n, got k = " +
                                       std::to_string(k));
  }
  const KdIndex index(pc);
  std::vector<Point3> normals;
  normals.reserve(pc.size());
  for (const auto& p : pc.points) {
    const auto nbrs = index.knn(p, k);
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto j : nbrs) mean += Eigen::Vector3d(pc[j][0], pc[j][1], pc[j][2]);
    mean /= static_cast<double>(k);
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto j : nbrs) {
      const Eigen::Vector3d d = Eigen::Vector3d(pc[j][0], pc[j][1], pc[j][2]) - mean;
      cov += d * d.transpose();
    }
    if (cov.cwiseAbs().maxCoeff() == 0.0) {
      normals.push_back({0.0, 0.0, 1.0});
      continue;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
    Eigen::Vector3d nrm = solver.eigenvectors().col(0).normalized();
    const Eigen::Vector3d outward = Eigen::Vector3d(p[0], p[1], p[2]) - mean;
    const double side = nrm.dot(outward);
    const double tol = 1e-12 * std::max(1.0, outward.norm());
    if (std::abs(side) > tol) {
      if (side < 0.0) nrm = -nrm;
    } else {
      Eigen::Index axis = 0;
      nrm.cwiseAbs().maxCoeff(&axis);
      if (nrm[axis] < 0.0) nrm = -nrm;
    }
    normals.push_back({nrm[0], nrm[1], nrm[2]});
  }
  return normals;
}

}  // namespace vrpc
