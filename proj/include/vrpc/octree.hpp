#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "vrpc/pointcloud.hpp"

namespace vrpc {

inline constexpr int kMaxOctreeDepth = 12;

// Axis-aligned cubic root cell.
struct OctreeBounds {
  Point3 min{-1.0, -1.0, -1.0};
  Point3 max{1.0, 1.0, 1.0};

  double side() const { return max[0] - min[0]; }
  bool operator==(const OctreeBounds&) const = default;
};

// Breadth-first occupancy: one byte per occupied internal node, level by
// level, nodes in Morton order, bit c set when child c is occupied. Child
// c has offsets (c >> 2 & 1, c >> 1 & 1, c & 1) along (x, y, z).
struct OctreeCode {
  int depth = 0;
  OctreeBounds bounds;
  std::vector<std::uint8_t> occupancy;

  std::size_t bits() const { return occupancy.size() * 8; }
  bool operator==(const OctreeCode&) const = default;
};

// Requires 1 <= depth <= 12 and every point inside the bounds (kRange
// otherwise). Points on the upper faces belong to the last cell.
OctreeCode octree_encode(const PointCloud& pc, int depth, const OctreeBounds& bounds = {});
// Occupied leaf-cell centers in Morton order.
PointCloud octree_decode(const OctreeCode& code);

// Largest distance from a point to the center of its leaf cell.
double octree_error_bound(int depth, const OctreeBounds& bounds = {});

double octree_bpp(const OctreeCode& code, std::size_t num_points);

// "VOCT", depth u8, bounds min then max (6 x f64), occupancy bytes.
std::vector<std::uint8_t> serialize_octree(const OctreeCode& code);
OctreeCode parse_octree(std::span<const std::uint8_t> bytes);

}  // namespace vrpc
