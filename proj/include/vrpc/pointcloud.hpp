#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vrpc {

using Point3 = std::array<double, 3>;

inline Point3 operator-(const Point3& a, const Point3& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline Point3 operator+(const Point3& a, const Point3& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline double dot(const Point3& a, const Point3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

// Ordered storage for what is semantically an unordered set of points.
struct PointCloud {
  std::vector<Point3> points;

  PointCloud() = default;
  explicit PointCloud(std::vector<Point3> pts) : points(std::move(pts)) {}

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  const Point3& operator[](std::size_t i) const { return points[i]; }
  Point3& operator[](std::size_t i) { return points[i]; }

  bool operator==(const PointCloud&) const = default;
};

// Throws kParse if the cloud is empty or holds a non-finite coordinate.
void validate(const PointCloud& pc);

struct NormalizationRecord {
  Point3 offset{0.0, 0.0, 0.0};
  double scale = 1.0;
};

enum class CloudFormat { kXyzText, kPlyAscii, kPlyBinaryLE };

CloudFormat parse_format(std::string_view name);
// Picks a format from the extension (.xyz/.txt, .ply); PLY flavor is read
// from the header on load and defaults to binary on save.
CloudFormat format_for_path(const std::filesystem::path& path);

PointCloud read_xyz(std::istream& in);
// Accepts ascii and binary_little_endian; the stream must be binary-safe.
PointCloud read_ply(std::istream& in);
void write_xyz(std::ostream& out, const PointCloud& pc);
void write_ply(std::ostream& out, const PointCloud& pc, bool binary);

PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format);
PointCloud load_cloud(const std::filesystem::path& path);
void save_cloud(const PointCloud& pc, const std::filesystem::path& path,
                CloudFormat format);

// Centers on the centroid and scales the farthest point onto the unit
// sphere. A cloud of identical points keeps scale 1.
std::pair<PointCloud, NormalizationRecord> normalize(const PointCloud& pc);
PointCloud denormalize(const PointCloud& pc, const NormalizationRecord& rec);

enum class Shape { kSphere, kCubeSurface, kTorus, kPlane };

Shape parse_shape(std::string_view name);
std::string_view shape_name(Shape shape);

// Surfaces are generated centered at the origin with circumradius 1, so no
// empirical normalization is applied and points stay exactly on the surface:
//   sphere: unit sphere
//   cube-surface: axis-aligned cube of half-side 1/sqrt(3)
//   torus: major radius 0.7, minor radius 0.3, axis z
//   plane: square of half-side 1/sqrt(2) in z = 0
// With random_rotation each cloud is rotated by a uniformly random rotation.
struct SynthSpec {
  std::vector<Shape> shapes{Shape::kSphere};
  std::size_t n = 256;
  std::uint64_t seed = 0;
  std::size_t count = 1;
  bool random_rotation = false;
};

inline constexpr double kTorusMajor = 0.7;
inline constexpr double kTorusMinor = 0.3;

// Shapes cycle through spec.shapes in order: cloud i uses shapes[i % size].
std::vector<PointCloud> synth_dataset(const SynthSpec& spec);

// "synth:shapes=sphere+torus,n=256,count=32,seed=7,rotate=1"; the "synth:"
// prefix is optional and every key has the SynthSpec default.
SynthSpec parse_synth_spec(std::string_view text);
bool is_synth_spec(std::string_view text);

// All .xyz/.txt/.ply files in a directory, sorted by file name.
std::vector<std::filesystem::path> list_cloud_files(
    const std::filesystem::path& dir);

}  // namespace vrpc
