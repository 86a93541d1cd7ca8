#include "vrpc/pointcloud.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "vrpc/error.hpp"
#include "vrpc/random.hpp"

namespace vrpc {

namespace {

Error parse_error(const std::string& msg) { return Error(ErrorCode::kParse, msg); }

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_double(std::string_view tok, double& out) {
  const char* begin = tok.data();
  const char* end = tok.data() + tok.size();
  if (begin != end && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v,
                                 std::chars_format::general, 9);
  return std::string(buf, ptr);
}

enum class PlyType { kInt8, kUint8, kInt16, kUint16, kInt32, kUint32, kFloat32, kFloat64 };

PlyType parse_ply_type(std::string_view name, std::size_t line) {
  if (name == "char" || name == "int8") return PlyType::kInt8;
  if (name == "uchar" || name == "uint8") return PlyType::kUint8;
  if (name == "short" || name == "int16") return PlyType::kInt16;
  if (name == "ushort" || name == "uint16") return PlyType::kUint16;
  if (name == "int" || name == "int32") return PlyType::kInt32;
  if (name == "uint" || name == "uint32") return PlyType::kUint32;
  if (name == "float" || name == "float32") return PlyType::kFloat32;
  if (name == "double" || name == "float64") return PlyType::kFloat64;
  throw parse_error("ply header line " + std::to_string(line) +
                    ": unknown property type '" + std::string(name) + "'");
}

std::size_t ply_type_size(PlyType t) {
  switch (t) {
    case PlyType::kInt8:
    case PlyType::kUint8: return 1;
    case PlyType::kInt16:
    case PlyType::kUint16: return 2;
    case PlyType::kInt32:
    case PlyType::kUint32:
    case PlyType::kFloat32: return 4;
    case PlyType::kFloat64: return 8;
  }
  return 0;
}

double decode_le(const unsigned char* p, PlyType t) {
  std::uint64_t raw = 0;
  const std::size_t size = ply_type_size(t);
  for (std::size_t i = 0; i < size; ++i) raw |= std::uint64_t{p[i]} << (8 * i);
  switch (t) {
    case PlyType::kInt8: return static_cast<std::int8_t>(raw);
    case PlyType::kUint8: return static_cast<std::uint8_t>(raw);
    case PlyType::kInt16: return static_cast<std::int16_t>(raw);
    case PlyType::kUint16: return static_cast<std::uint16_t>(raw);
    case PlyType::kInt32: return static_cast<std::int32_t>(raw);
    case PlyType::kUint32: return static_cast<std::uint32_t>(raw);
    case PlyType::kFloat32: return std::bit_cast<float>(static_cast<std::uint32_t>(raw));
    case PlyType::kFloat64: return std::bit_cast<double>(raw);
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::kFloat32;
  bool is_list = false;
  PlyType count_type = PlyType::kUint8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> props;
};

struct PlyHeader {
  bool binary = false;
  std::vector<PlyElement> elements;
  std::size_t lines = 0;
};

PlyHeader read_ply_header(std::istream& in) {
  PlyHeader header;
  std::string line;
  bool saw_format = false;
  while (std::getline(in, line)) {
    ++header.lines;
    const std::string_view view = trim(line);
    const auto tokens = split_ws(view);
    const std::string where = "ply header line " + std::to_string(header.lines);
    if (header.lines == 1) {
      if (view != "ply") throw parse_error(where + ": missing 'ply' magic");
      continue;
    }
    if (tokens.empty() || tokens[0] == "comment" || tokens[0] == "obj_info") continue;
    if (tokens[0] == "end_header") {
      if (!saw_format) throw parse_error(where + ": missing format line");
      return header;
    }
    if (tokens[0] == "format") {
      if (tokens.size() < 2) throw parse_error(where + ": malformed format line");
      if (tokens[1] == "ascii") {
        header.binary = false;
      } else if (tokens[1] == "binary_little_endian") {
        header.binary = true;
      } else {
        throw parse_error(where + ": unsupported format '" + std::string(tokens[1]) + "'");
      }
      saw_format = true;
    } else if (tokens[0] == "element") {
      if (tokens.size() != 3) throw parse_error(where + ": malformed element line");
      PlyElement el;
      el.name = std::string(tokens[1]);
      auto [ptr, ec] = std::from_chars(tokens[2].data(), tokens[2].data() + tokens[2].size(), el.count);
      if (ec != std::errc() || ptr != tokens[2].data() + tokens[2].size()) {
        throw parse_error(where + ": bad element count '" + std::string(tokens[2]) + "'");
      }
      header.elements.push_back(std::move(el));
    } else if (tokens[0] == "property") {
      if (header.elements.empty()) throw parse_error(where + ": property before element");
      PlyProperty prop;
      if (tokens.size() == 5 && tokens[1] == "list") {
        prop.is_list = true;
        prop.count_type = parse_ply_type(tokens[2], header.lines);
        prop.type = parse_ply_type(tokens[3], header.lines);
        prop.name = std::string(tokens[4]);
      } else if (tokens.size() == 3) {
        prop.type = parse_ply_type(tokens[1], header.lines);
        prop.name = std::string(tokens[2]);
      } else {
        throw parse_error(where + ": malformed property line");
      }
      header.elements.back().props.push_back(std::move(prop));
    } else {
      throw parse_error(where + ": unexpected keyword '" + std::string(tokens[0]) + "'");
    }
  }
  throw parse_error("ply header: missing end_header");
}

struct XyzSlots {
  int x = -1, y = -1, z = -1;
};

XyzSlots locate_xyz(const PlyElement& vertex) {
  XyzSlots slots;
  for (std::size_t i = 0; i < vertex.props.size(); ++i) {
    const auto& p = vertex.props[i];
    int* slot = p.name == "x" ? &slots.x : p.name == "y" ? &slots.y : p.name == "z" ? &slots.z : nullptr;
    if (!slot) continue;
    if (p.is_list || (p.type != PlyType::kFloat32 && p.type != PlyType::kFloat64)) {
      throw parse_error("ply header: vertex property '" + p.name + "' must be float32 or float64");
    }
    *slot = static_cast<int>(i);
  }
  if (slots.x < 0 || slots.y < 0 || slots.z < 0) {
    throw parse_error("ply header: vertex element lacks x, y, z properties");
  }
  return slots;
}

void check_point(const Point3& p, const std::string& where) {
  if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2])) {
    throw parse_error(where + ": non-finite coordinate");
  }
}

PointCloud read_ply_ascii(std::istream& in, const PlyHeader& header) {
  PointCloud pc;
  std::size_t line_no = header.lines;
  std::string line;
  for (const auto& el : header.elements) {
    const bool is_vertex = el.name == "vertex";
    XyzSlots slots;
    if (is_vertex) {
      slots = locate_xyz(el);
      pc.points.reserve(el.count);
    }
    for (std::size_t row = 0; row < el.count; ++row) {
      do {
        if (!std::getline(in, line)) {
          throw parse_error("ply data line " + std::to_string(line_no + 1) + ": element '" +
                            el.name + "' declares " + std::to_string(el.count) +
                            " rows but data ended after " + std::to_string(row));
        }
        ++line_no;
      } while (trim(line).empty());
      if (!is_vertex) continue;
      const auto tokens = split_ws(line);
      const std::string where = "ply data line " + std::to_string(line_no);
      std::vector<double> values;
      std::size_t t = 0;
      for (const auto& prop : el.props) {
        if (prop.is_list) {
          double count = 0;
          if (t >= tokens.size() || !parse_double(tokens[t++], count)) {
            throw parse_error(where + ": bad list count");
          }
          t += static_cast<std::size_t>(count);
          values.push_back(0.0);
          continue;
        }
        double v = 0;
        if (t >= tokens.size() || !parse_double(tokens[t++], v)) {
          throw parse_error(where + ": cannot parse property '" + prop.name + "'");
        }
        values.push_back(v);
      }
      if (t != tokens.size()) throw parse_error(where + ": unexpected extra values");
      Point3 p{values[slots.x], values[slots.y], values[slots.z]};
      check_point(p, where);
      pc.points.push_back(p);
    }
  }
  return pc;
}

PointCloud read_ply_binary(std::istream& in, const PlyHeader& header) {
  PointCloud pc;
  std::uint64_t offset = static_cast<std::uint64_t>(in.tellg());
  auto read_bytes = [&](unsigned char* dst, std::size_t n, const std::string& what) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
      throw parse_error("ply byte offset " + std::to_string(offset) + ": truncated data in " + what);
    }
    offset += n;
  };
  unsigned char buf[8];
  for (const auto& el : header.elements) {
    const bool is_vertex = el.name == "vertex";
    XyzSlots slots;
    if (is_vertex) {
      slots = locate_xyz(el);
      pc.points.reserve(el.count);
    }
    for (std::size_t row = 0; row < el.count; ++row) {
      const std::uint64_t row_offset = offset;
      Point3 p{};
      for (std::size_t pi = 0; pi < el.props.size(); ++pi) {
        const auto& prop = el.props[pi];
        const std::string what = "element '" + el.name + "' row " + std::to_string(row);
        if (prop.is_list) {
          read_bytes(buf, ply_type_size(prop.count_type), what);
          const auto count = static_cast<std::size_t>(decode_le(buf, prop.count_type));
          for (std::size_t c = 0; c < count; ++c) read_bytes(buf, ply_type_size(prop.type), what);
          continue;
        }
        read_bytes(buf, ply_type_size(prop.type), what);
        if (!is_vertex) continue;
        const double v = decode_le(buf, prop.type);
        if (static_cast<int>(pi) == slots.x) p[0] = v;
        if (static_cast<int>(pi) == slots.y) p[1] = v;
        if (static_cast<int>(pi) == slots.z) p[2] = v;
      }
      if (is_vertex) {
        check_point(p, "ply byte offset " + std::to_string(row_offset));
        pc.points.push_back(p);
      }
    }
  }
  return pc;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

void validate(const PointCloud& pc) {
  if (pc.empty()) throw parse_error("point cloud is empty");
  for (std::size_t i = 0; i < pc.size(); ++i) {
    check_point(pc[i], "point " + std::to_string(i));
  }
}

CloudFormat parse_format(std::string_view name) {
  if (name == "xyz" || name == "xyz-text") return CloudFormat::kXyzText;
  if (name == "ply-ascii") return CloudFormat::kPlyAscii;
  if (name == "ply" || name == "ply-binary" || name == "ply-binary-le") return CloudFormat::kPlyBinaryLE;
  throw Error(ErrorCode::kConfig, "unknown cloud format '" + std::string(name) + "'");
}

CloudFormat format_for_path(const std::filesystem::path& path) {
  const std::string ext = lower(path.extension().string());
  if (ext == ".ply") return CloudFormat::kPlyBinaryLE;
  if (ext == ".xyz" || ext == ".txt") return CloudFormat::kXyzText;
  throw Error(ErrorCode::kConfig, "cannot infer cloud format from '" + path.string() + "'");
}

PointCloud read_xyz(std::istream& in) {
  PointCloud pc;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto tokens = split_ws(view);
    const std::string where = "xyz line " + std::to_string(line_no);
    if (tokens.size() != 3) {
      throw parse_error(where + ": expected 3 values, got " + std::to_string(tokens.size()));
    }
    Point3 p{};
    for (int i = 0; i < 3; ++i) {
      if (!parse_double(tokens[i], p[i])) {
        throw parse_error(where + ": cannot parse '" + std::string(tokens[i]) + "'");
      }
    }
    check_point(p, where);
    pc.points.push_back(p);
  }
  if (pc.empty()) throw parse_error("xyz: no points");
  return pc;
}

PointCloud read_ply(std::istream& in) {
  const PlyHeader header = read_ply_header(in);
  const auto vertex = std::find_if(header.elements.begin(), header.elements.end(),
                                   [](const PlyElement& e) { return e.name == "vertex"; });
  if (vertex == header.elements.end()) throw parse_error("ply header: no vertex element");
  PointCloud pc = header.binary ? read_ply_binary(in, header) : read_ply_ascii(in, header);
  if (pc.empty()) throw parse_error("ply: no points");
  return pc;
}

void write_xyz(std::ostream& out, const PointCloud& pc) {
  for (const auto& p : pc.points) {
    out << format_double(p[0]) << ' ' << format_double(p[1]) << ' ' << format_double(p[2]) << '\n';
  }
}

void write_ply(std::ostream& out, const PointCloud& pc, bool binary) {
  out << "ply\n"
      << "format " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
      << "element vertex " << pc.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "end_header\n";
  if (!binary) {
    write_xyz(out, pc);
    return;
  }
  std::vector<char> bytes(pc.size() * 24);
  std::size_t pos = 0;
  for (const auto& p : pc.points) {
    for (double v : p) {
      const auto raw = std::bit_cast<std::uint64_t>(v);
      for (int b = 0; b < 8; ++b) bytes[pos++] = static_cast<char>((raw >> (8 * b)) & 0xFF);
    }
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  try {
    if (format == CloudFormat::kXyzText) return read_xyz(in);
    return read_ply(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

PointCloud load_cloud(const std::filesystem::path& path) {
  return load_cloud(path, format_for_path(path));
}

void save_cloud(const PointCloud& pc, const std::filesystem::path& path, CloudFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  if (format == CloudFormat::kXyzText) {
    write_xyz(out, pc);
  } else {
    write_ply(out, pc, format == CloudFormat::kPlyBinaryLE);
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

std::pair<PointCloud, NormalizationRecord> normalize(const PointCloud& pc) {
  validate(pc);
  const double inv_n = 1.0 / static_cast<double>(pc.size());
  Point3 centroid{0.0, 0.0, 0.0};
  for (const auto& p : pc.points) {
    for (int a = 0; a < 3; ++a) centroid[a] += p[a];
  }
  for (auto& c : centroid) c *= inv_n;

  double radius = 0.0;
  for (const auto& p : pc.points) radius = std::max(radius, squared_distance(p, centroid));
  radius = std::sqrt(radius);

  NormalizationRecord rec{centroid, radius > 0.0 ? radius : 1.0};
  PointCloud out;
  out.points.reserve(pc.size());
  for (const auto& p : pc.points) {
    const Point3 d = p - centroid;
    out.points.push_back({d[0] / rec.scale, d[1] / rec.scale, d[2] / rec.scale});
  }
  return {std::move(out), rec};
}

PointCloud denormalize(const PointCloud& pc, const NormalizationRecord& rec) {
  if (!(rec.scale > 0.0) || !std::isfinite(rec.scale)) {
    throw Error(ErrorCode::kRange, "normalization scale must be positive");
  }
  PointCloud out;
  out.points.reserve(pc.size());
  for (const auto& p : pc.points) {
    out.points.push_back({p[0] * rec.scale + rec.offset[0], p[1] * rec.scale + rec.offset[1],
                          p[2] * rec.scale + rec.offset[2]});
  }
  validate(out);
  return out;
}

Shape parse_shape(std::string_view name) {
  if (name == "sphere") return Shape::kSphere;
  if (name == "cube-surface" || name == "cube") return Shape::kCubeSurface;
  if (name == "torus") return Shape::kTorus;
  if (name == "plane") return Shape::kPlane;
  throw Error(ErrorCode::kConfig, "unknown shape '" + std::string(name) + "'");
}

std::string_view shape_name(Shape shape) {
  switch (shape) {
    case Shape::kSphere: return "sphere";
    case Shape::kCubeSurface: return "cube-surface";
    case Shape::kTorus: return "torus";
    case Shape::kPlane: return "plane";
  }
  return "?";
}

namespace {

Point3 sample_surface(Shape shape, Rng& rng) {
  switch (shape) {
    case Shape::kSphere: {
      while (true) {
        const Point3 g{rng.normal(), rng.normal(), rng.normal()};
        const double norm = std::sqrt(dot(g, g));
        if (norm > 1e-12) return {g[0] / norm, g[1] / norm, g[2] / norm};
      }
    }
    case Shape::kCubeSurface: {
      const double h = 1.0 / std::sqrt(3.0);
      const auto face = rng.below(6);
      const double u = rng.uniform(-h, h);
      const double v = rng.uniform(-h, h);
      const double w = (face % 2 == 0) ? h : -h;
      switch (face / 2) {
        case 0: return {w, u, v};
        case 1: return {u, w, v};
        default: return {u, v, w};
      }
    }
    case Shape::kTorus: {
      // Area element is proportional to (R + r cos(theta)).
      while (true) {
        const double theta = rng.uniform(0.0, 2.0 * M_PI);
        const double accept = (kTorusMajor + kTorusMinor * std::cos(theta)) / (kTorusMajor + kTorusMinor);
        if (rng.uniform() >= accept) continue;
        const double phi = rng.uniform(0.0, 2.0 * M_PI);
        const double ring = kTorusMajor + kTorusMinor * std::cos(theta);
        return {ring * std::cos(phi), ring * std::sin(phi), kTorusMinor * std::sin(theta)};
      }
    }
    case Shape::kPlane: {
      const double h = 1.0 / std::sqrt(2.0);
      return {rng.uniform(-h, h), rng.uniform(-h, h), 0.0};
    }
  }
  return {0.0, 0.0, 0.0};
}

// Uniform random rotation from a unit quaternion.
std::array<double, 9> random_rotation(Rng& rng) {
  const double u1 = rng.uniform();
  const double u2 = rng.uniform(0.0, 2.0 * M_PI);
  const double u3 = rng.uniform(0.0, 2.0 * M_PI);
  const double a = std::sqrt(1.0 - u1);
  const double b = std::sqrt(u1);
  const double w = a * std::sin(u2), x = a * std::cos(u2);
  const double y = b * std::sin(u3), z = b * std::cos(u3);
  return {1 - 2 * (y * y + z * z), 2 * (x * y - z * w),     2 * (x * z + y * w),
          2 * (x * y + z * w),     1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
          2 * (x * z - y * w),     2 * (y * z + x * w),     1 - 2 * (x * x + y * y)};
}

}  // namespace

std::vector<PointCloud> synth_dataset(const SynthSpec& spec) {
  if (spec.n < 8) throw Error(ErrorCode::kConfig, "synthetic clouds need n >= 8");
  if (spec.shapes.empty()) throw Error(ErrorCode::kConfig, "synthetic spec lists no shapes");
  std::vector<PointCloud> out;
  out.reserve(spec.count);
  for (std::size_t c = 0; c < spec.count; ++c) {
    Rng rng(mix_seed(spec.seed, c, 0x5EED));
    const Shape shape = spec.shapes[c % spec.shapes.size()];
    PointCloud pc;
    pc.points.reserve(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) pc.points.push_back(sample_surface(shape, rng));
    if (spec.random_rotation) {
      const auto r = random_rotation(rng);
      for (auto& p : pc.points) {
        const Point3 q = p;
        p = {r[0] * q[0] + r[1] * q[1] + r[2] * q[2], r[3] * q[0] + r[4] * q[1] + r[5] * q[2],
             r[6] * q[0] + r[7] * q[1] + r[8] * q[2]};
      }
    }
    out.push_back(std::move(pc));
  }
  return out;
}

bool is_synth_spec(std::string_view text) { return text.rfind("synth:", 0) == 0; }

SynthSpec parse_synth_spec(std::string_view text) {
  if (is_synth_spec(text)) text.remove_prefix(6);
  SynthSpec spec;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    const std::string_view item = trim(text.substr(pos, comma - pos));
    pos = comma + 1;
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kConfig, "synth spec item '" + std::string(item) + "' lacks '='");
    }
    const std::string_view key = trim(item.substr(0, eq));
    const std::string_view value = trim(item.substr(eq + 1));
    auto as_uint = [&](std::string_view v) {
      std::uint64_t out = 0;
      auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
      if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw Error(ErrorCode::kConfig, "synth spec: bad integer '" + std::string(v) + "'");
      }
      return out;
    };
    if (key == "shapes" || key == "shape") {
      spec.shapes.clear();
      std::size_t s = 0;
      while (s <= value.size()) {
        std::size_t plus = value.find('+', s);
        if (plus == std::string_view::npos) plus = value.size();
        spec.shapes.push_back(parse_shape(trim(value.substr(s, plus - s))));
        s = plus + 1;
      }
    } else if (key == "n") {
      spec.n = as_uint(value);
    } else if (key == "count") {
      spec.count = as_uint(value);
    } else if (key == "seed") {
      spec.seed = as_uint(value);
    } else if (key == "rotate") {
      spec.random_rotation = as_uint(value) != 0;
    } else {
      throw Error(ErrorCode::kConfig, "synth spec: unknown key '" + std::string(key) + "'");
    }
  }
  return spec;
}

std::vector<std::filesystem::path> list_cloud_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::kIo, "'" + dir.string() + "' is not a directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = lower(entry.path().extension().string());
    if (ext == ".ply" || ext == ".xyz" || ext == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace vrpc
