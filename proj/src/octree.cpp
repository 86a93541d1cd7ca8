#include "vrpc/octree.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vrpc/bytes.hpp"
#include "vrpc/error.hpp"

namespace vrpc {

namespace {

void check_depth(int depth) {
  if (depth < 1 || depth > kMaxOctreeDepth) {
    throw Error(ErrorCode::kRange, "octree depth " + std::to_string(depth) + " outside [1, 12]");
  }
}

void check_bounds(const OctreeBounds& b) {
  const double side = b.side();
  for (int a = 0; a < 3; ++a) {
    if (!(b.max[a] > b.min[a]) || b.max[a] - b.min[a] != side || !std::isfinite(b.min[a]) || !std::isfinite(b.max[a])) {
      throw Error(ErrorCode::kRange, "octree bounds must be a finite cube");
    }
  }
}

std::uint64_t interleave(std::uint32_t ix, std::uint32_t iy, std::uint32_t iz, int depth) {
  std::uint64_t code = 0;
  for (int bit = depth - 1; bit >= 0; --bit) {
    code = (code << 3) | (std::uint64_t{(ix >> bit) & 1u} << 2) | (std::uint64_t{(iy >> bit) & 1u} << 1) |
           std::uint64_t{(iz >> bit) & 1u};
  }
  return code;
}

std::array<std::uint32_t, 3> deinterleave(std::uint64_t code, int depth) {
  std::array<std::uint32_t, 3> idx{0, 0, 0};
  for (int bit = 0; bit < depth; ++bit) {
    const auto child = static_cast<std::uint32_t>(code >> (3 * bit)) & 7u;
    idx[0] |= ((child >> 2) & 1u) << bit;
    idx[1] |= ((child >> 1) & 1u) << bit;
    idx[2] |= (child & 1u) << bit;
  }
  return idx;
}

}  // namespace

OctreeCode octree_encode(const PointCloud& pc, int depth, const OctreeBounds& bounds) {
  check_depth(depth);
  check_bounds(bounds);
  if (pc.empty()) throw Error(ErrorCode::kShape, "octree_encode: empty point cloud");
  const std::uint32_t cells = 1u << depth;
  const double side = bounds.side();

  std::vector<std::uint64_t> leaves;
  leaves.reserve(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) {
    std::array<std::uint32_t, 3> idx{};
    for (int a = 0; a < 3; ++a) {
      const double v = pc[i][a];
      if (!(v >= bounds.min[a] && v <= bounds.max[a])) {
        throw Error(ErrorCode::kRange, "octree_encode: point " + std::to_string(i) + " lies outside the root cell");
      }
      const double t = std::floor((v - bounds.min[a]) / side * cells);
      idx[a] = std::min(cells - 1, static_cast<std::uint32_t>(t));
    }
    leaves.push_back(interleave(idx[0], idx[1], idx[2], depth));
  }
  std::sort(leaves.begin(), leaves.end());
  leaves.erase(std::unique(leaves.begin(), leaves.end()), leaves.end());

  OctreeCode code{depth, bounds, {}};
  for (int level = 0; level < depth; ++level) {
    // Children at level+1 are the leaf prefixes; consecutive runs share a parent.
    const int child_shift = 3 * (depth - level - 1);
    std::uint64_t parent = ~std::uint64_t{0};
    std::uint64_t last_child = ~std::uint64_t{0};
    for (const auto leaf : leaves) {
      const std::uint64_t child = leaf >> child_shift;
      if (child == last_child) continue;
      last_child = child;
      if ((child >> 3) != parent) {
        parent = child >> 3;
        code.occupancy.push_back(0);
      }
      code.occupancy.back() |= static_cast<std::uint8_t>(1u << (child & 7u));
    }
  }
  return code;
}

PointCloud octree_decode(const OctreeCode& code) {
  check_depth(code.depth);
  check_bounds(code.bounds);
  std::vector<std::uint64_t> nodes{0};
  std::size_t pos = 0;
  for (int level = 0; level < code.depth; ++level) {
    std::vector<std::uint64_t> next;
    for (const auto node : nodes) {
      if (pos >= code.occupancy.size()) throw Error(ErrorCode::kCorrupt, "octree: occupancy stream truncated");
      const std::uint8_t byte = code.occupancy[pos++];
      if (byte == 0) throw Error(ErrorCode::kCorrupt, "octree: empty occupancy byte at " + std::to_string(pos - 1));
      for (std::uint64_t c = 0; c < 8; ++c) {
        if (byte & (1u << c)) next.push_back((node << 3) | c);
      }
    }
    nodes = std::move(next);
  }
  if (pos != code.occupancy.size()) throw Error(ErrorCode::kCorrupt, "octree: trailing occupancy bytes");

  const double cell = code.bounds.side() / static_cast<double>(1u << code.depth);
  PointCloud out;
  out.points.reserve(nodes.size());
  for (const auto leaf : nodes) {
    const auto idx = deinterleave(leaf, code.depth);
    Point3 p;
    for (int a = 0; a < 3; ++a) p[a] = code.bounds.min[a] + (static_cast<double>(idx[a]) + 0.5) * cell;
    out.points.push_back(p);
  }
  return out;
}

double octree_error_bound(int depth, const OctreeBounds& bounds) {
  check_depth(depth);
  return std::sqrt(3.0) / 2.0 * std::ldexp(bounds.side(), -depth);
}

double octree_bpp(const OctreeCode& code, std::size_t num_points) {
  if (num_points == 0) throw Error(ErrorCode::kRange, "octree_bpp: zero points");
  return static_cast<double>(code.bits()) / static_cast<double>(num_points);
}

std::vector<std::uint8_t> serialize_octree(const OctreeCode& code) {
  ByteWriter w;
  w.raw(std::string_view("VOCT"));
  w.u8(static_cast<std::uint8_t>(code.depth));
  for (const double v : code.bounds.min) w.f64(v);
  for (const double v : code.bounds.max) w.f64(v);
  w.raw(code.occupancy);
  return w.take();
}

OctreeCode parse_octree(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.str(4) != "VOCT") throw Error(ErrorCode::kCorrupt, "octree: bad magic");
  OctreeCode code;
  code.depth = r.u8();
  check_depth(code.depth);
  for (double& v : code.bounds.min) v = r.f64();
  for (double& v : code.bounds.max) v = r.f64();
  const auto rest = r.raw(r.remaining());
  code.occupancy.assign(rest.begin(), rest.end());
  octree_decode(code);  // structural validation
  return code;
}

}  // namespace vrpc
