#include "vrpc/network.hpp"

#include "vrpc/error.hpp"
#include "vrpc/geometry.hpp"
#include "vrpc/random.hpp"

namespace vrpc {

namespace {

struct Layer {
  std::string name;
  std::size_t in, out;
};

// Layer tables shared by init_params and the forward passes.
std::vector<Layer> encoder_layers(const EncoderConfig& c) {
  return {
      {"enc.global.l0", 3, c.global_hidden},
      {"enc.global.l1", c.global_hidden, c.global_width},
      {"enc.sa1.l0", 3, c.sa1_width},
      {"enc.sa1.l1", c.sa1_width, c.sa1_width},
      {"enc.sa2.l0", 3 + c.sa1_width, c.sa2_width},
      {"enc.sa2.l1", c.sa2_width, c.sa2_width},
      {"enc.sa3.l0", 3 + c.sa2_width, c.sa3_width},
      {"enc.sa3.l1", c.sa3_width, c.sa3_width},
      {"enc.fc.l0", c.sa3_width + c.global_width, c.compressor_hidden},
      {"enc.fc.l1", c.compressor_hidden, c.latent},
  };
}

std::vector<Layer> decoder_layers(const DecoderConfig& c) {
  std::vector<Layer> layers;
  for (std::size_t b = 0; b < c.branches; ++b) {
    const std::string prefix = "dec.branch" + std::to_string(b) + ".l";
    std::size_t in = c.latent;
    for (std::size_t i = 0; i < c.hidden.size(); ++i) {
      layers.push_back({prefix + std::to_string(i), in, c.hidden[i]});
      in = c.hidden[i];
    }
    layers.push_back({prefix + std::to_string(c.hidden.size()), in, 3 * c.points_per_branch});
  }
  return layers;
}

ad::Var dense(ad::Tape& tape, const ad::ParamStore& params, const std::string& name, ad::Var x, bool activate) {
  ad::Var w = tape.parameter(params, name + ".w");
  ad::Var b = tape.parameter(params, name + ".b");
  ad::Var y = ad::add_bias(ad::matmul(x, w), b);
  return activate ? ad::relu(y) : y;
}

ad::Tensor relative_tensor(const GroupedFeatures& g) {
  ad::Tensor t({g.relative_coords.size(), 3});
  for (std::size_t i = 0; i < g.relative_coords.size(); ++i) {
    for (int a = 0; a < 3; ++a) t[i * 3 + a] = g.relative_coords[i][a];
  }
  return t;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kConfig, what);
}

}  // namespace

void EncoderConfig::validate() const {
  require(points >= sa1_points && sa1_points >= sa2_points && sa2_points >= 1,
          "encoder needs n >= n1 >= n2 >= 1");
  require(latent >= 1, "encoder latent length must be >= 1");
  require(sa1_neighbors >= 1 && sa1_neighbors <= points, "sa1_neighbors must lie in [1, n]");
  require(sa2_neighbors >= 1 && sa2_neighbors <= sa1_points, "sa2_neighbors must lie in [1, n1]");
  require(sa1_width && sa2_width && sa3_width && global_hidden && global_width && compressor_hidden,
          "encoder widths must be positive");
}

void DecoderConfig::validate() const {
  require(latent >= 1, "decoder latent length must be >= 1");
  require(points_per_branch >= 1 && branches >= 1, "decoder must emit points");
  for (const auto h : hidden) require(h >= 1, "decoder hidden widths must be positive");
}

CodecConfig CodecConfig::full_scale() {
  CodecConfig c;
  c.encoder = EncoderConfig{2048, 512, 128, 256, 512, 512, 32, 32, 512, 512, 512, 1024};
  c.decoder = DecoderConfig{1024, {512, 512, 1024}, 1024, 2};
  return c;
}

CodecConfig CodecConfig::toy() { return CodecConfig{}; }

CodecConfig CodecConfig::from_keys(const KeyValues& kv, const CodecConfig& base) {
  CodecConfig c = base;
  auto& e = c.encoder;
  e.points = kv.get_size("points", e.points);
  e.sa1_points = kv.get_size("sa1_points", e.sa1_points);
  e.sa2_points = kv.get_size("sa2_points", e.sa2_points);
  e.sa1_width = kv.get_size("sa1_width", e.sa1_width);
  e.sa2_width = kv.get_size("sa2_width", e.sa2_width);
  e.sa3_width = kv.get_size("sa3_width", e.sa3_width);
  e.sa1_neighbors = kv.get_size("sa1_neighbors", e.sa1_neighbors);
  e.sa2_neighbors = kv.get_size("sa2_neighbors", e.sa2_neighbors);
  e.global_hidden = kv.get_size("global_hidden", e.global_hidden);
  e.global_width = kv.get_size("global_width", e.global_width);
  e.compressor_hidden = kv.get_size("compressor_hidden", e.compressor_hidden);
  e.latent = kv.get_size("latent", e.latent);
  c.decoder.latent = e.latent;
  c.decoder.hidden = kv.get_sizes("decoder_hidden", c.decoder.hidden);
  c.decoder.branches = 2;
  c.decoder.points_per_branch = e.points / 2;
  c.fill = parse_fill(kv.get("truncation_fill", fill_name(c.fill)));
  c.validate();
  return c;
}

void CodecConfig::write_keys(KeyValues& kv) const {
  const auto& e = encoder;
  kv.set("points", std::to_string(e.points));
  kv.set("sa1_points", std::to_string(e.sa1_points));
  kv.set("sa2_points", std::to_string(e.sa2_points));
  kv.set("sa1_width", std::to_string(e.sa1_width));
  kv.set("sa2_width", std::to_string(e.sa2_width));
  kv.set("sa3_width", std::to_string(e.sa3_width));
  kv.set("sa1_neighbors", std::to_string(e.sa1_neighbors));
  kv.set("sa2_neighbors", std::to_string(e.sa2_neighbors));
  kv.set("global_hidden", std::to_string(e.global_hidden));
  kv.set("global_width", std::to_string(e.global_width));
  kv.set("compressor_hidden", std::to_string(e.compressor_hidden));
  kv.set("latent", std::to_string(e.latent));
  kv.set("decoder_hidden", join_sizes(decoder.hidden));
  kv.set("truncation_fill", fill_name(fill));
}

std::string CodecConfig::to_text() const {
  KeyValues kv;
  write_keys(kv);
  std::string out;
  for (const auto& [k, v] : kv.entries()) out += k + " = " + v + "\n";
  return out;
}

void CodecConfig::validate() const {
  encoder.validate();
  decoder.validate();
  require(encoder.latent == decoder.latent, "encoder and decoder latent lengths differ");
  require(encoder.points % 2 == 0, "point count must be even (two equal decoder branches)");
  require(decoder.total_points() == encoder.points, "decoder must emit n points");
}

CodecNetwork::CodecNetwork(CodecConfig config) : config_(std::move(config)) { config_.validate(); }

void CodecNetwork::init_params(ad::ParamStore& params, std::uint64_t seed) const {
  auto layers = encoder_layers(config_.encoder);
  const auto dec = decoder_layers(config_.decoder);
  layers.insert(layers.end(), dec.begin(), dec.end());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    params.add(l.name + ".w", ad::glorot_uniform(l.in, l.out, mix_seed(seed, i, 0x1A7E)));
    params.add(l.name + ".b", ad::Tensor({1, l.out}, 0.0));
  }
  FactorizedDensity::add_params(params, config_.encoder.latent);
}

EncoderPlan CodecNetwork::plan(const PointCloud& pc) const {
  const auto& c = config_.encoder;
  if (pc.size() < c.sa1_points || pc.size() < c.sa1_neighbors) {
    throw Error(ErrorCode::kShape, "encode: cloud of " + std::to_string(pc.size()) +
                                       " points is smaller than the first sampling level");
  }
  EncoderPlan plan;
  plan.sa1_neighbors = c.sa1_neighbors;
  plan.sa2_neighbors = c.sa2_neighbors;

  const auto centers1 = farthest_point_sample(pc, c.sa1_points);
  const GroupedFeatures g1 = group(KdIndex(pc), centers1, c.sa1_neighbors);
  plan.sa1_relative = relative_tensor(g1);

  const std::vector<Point3>& level1 = g1.centers;
  const auto centers2 = farthest_point_sample(std::span<const Point3>(level1), c.sa2_points);
  const GroupedFeatures g2 = group(KdIndex(level1), centers2, c.sa2_neighbors);
  plan.sa2_relative = relative_tensor(g2);
  plan.sa2_neighbor_idx = g2.neighbor_idx;

  const std::vector<Point3>& level2 = g2.centers;
  const auto center3 = farthest_point_sample(std::span<const Point3>(level2), 1);
  const GroupedFeatures g3 = group(KdIndex(level2), center3, level2.size());
  plan.sa3_relative = relative_tensor(g3);
  plan.sa3_neighbor_idx = g3.neighbor_idx;
  return plan;
}

ad::Var CodecNetwork::global_feature(ad::Tape& tape, const ad::ParamStore& params, const PointCloud& pc) const {
  ad::Var x = tape.constant(cloud_to_tensor(pc));
  x = dense(tape, params, "enc.global.l0", x, true);
  x = dense(tape, params, "enc.global.l1", x, true);
  return ad::max_pool_rows(x);
}

ad::Var CodecNetwork::local_feature(ad::Tape& tape, const ad::ParamStore& params, const EncoderPlan& plan) const {
  ad::Var f1 = tape.constant(plan.sa1_relative);
  f1 = dense(tape, params, "enc.sa1.l0", f1, true);
  f1 = dense(tape, params, "enc.sa1.l1", f1, true);
  f1 = ad::max_pool_groups(f1, plan.sa1_neighbors);

  ad::Var f2 = ad::concat_cols(tape.constant(plan.sa2_relative), ad::gather_rows(f1, plan.sa2_neighbor_idx));
  f2 = dense(tape, params, "enc.sa2.l0", f2, true);
  f2 = dense(tape, params, "enc.sa2.l1", f2, true);
  f2 = ad::max_pool_groups(f2, plan.sa2_neighbors);

  ad::Var f3 = ad::concat_cols(tape.constant(plan.sa3_relative), ad::gather_rows(f2, plan.sa3_neighbor_idx));
  f3 = dense(tape, params, "enc.sa3.l0", f3, true);
  f3 = dense(tape, params, "enc.sa3.l1", f3, true);
  return ad::max_pool_rows(f3);
}

ad::Var CodecNetwork::encode(ad::Tape& tape, const ad::ParamStore& params, const PointCloud& pc,
                             const EncoderPlan& plan) const {
  ad::Var local = local_feature(tape, params, plan);
  ad::Var global = global_feature(tape, params, pc);
  ad::Var h = dense(tape, params, "enc.fc.l0", ad::concat_cols(local, global), true);
  return dense(tape, params, "enc.fc.l1", h, false);
}

ad::Var CodecNetwork::encode(ad::Tape& tape, const ad::ParamStore& params, const PointCloud& pc) const {
  return encode(tape, params, pc, plan(pc));
}

ad::Var CodecNetwork::decode(ad::Tape& tape, const ad::ParamStore& params, ad::Var latent) const {
  const auto& c = config_.decoder;
  if (latent.value().size() != c.latent) {
    throw Error(ErrorCode::kShape, "decode: latent of " + std::to_string(latent.value().size()) +
                                       " values, expected " + std::to_string(c.latent));
  }
  if (latent.shape() != ad::Shape{1, c.latent}) latent = ad::reshape(latent, {1, c.latent});
  std::vector<ad::Var> parts;
  for (std::size_t b = 0; b < c.branches; ++b) {
    const std::string prefix = "dec.branch" + std::to_string(b) + ".l";
    ad::Var h = latent;
    for (std::size_t i = 0; i < c.hidden.size(); ++i) {
      h = dense(tape, params, prefix + std::to_string(i), h, true);
    }
    h = dense(tape, params, prefix + std::to_string(c.hidden.size()), h, false);
    parts.push_back(ad::reshape(h, {c.points_per_branch, 3}));
  }
  return ad::concat_rows(parts);
}

std::vector<double> CodecNetwork::encode_values(const ad::ParamStore& params, const PointCloud& pc) const {
  ad::Tape tape(ad::Tape::Mode::kInference);
  return encode(tape, params, pc).value().vector();
}

PointCloud CodecNetwork::decode_values(const ad::ParamStore& params, std::span<const double> latent) const {
  ad::Tape tape(ad::Tape::Mode::kInference);
  ad::Var y = tape.constant(ad::Tensor({1, latent.size()}, std::vector<double>(latent.begin(), latent.end())));
  return tensor_to_cloud(decode(tape, params, y).value());
}

PointCloud tensor_to_cloud(const ad::Tensor& t) {
  if (t.cols() != 3) throw Error(ErrorCode::kShape, "expected an N x 3 tensor, got " + ad::shape_string(t.shape()));
  PointCloud pc;
  pc.points.resize(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) pc.points[i] = {t[i * 3], t[i * 3 + 1], t[i * 3 + 2]};
  return pc;
}

ad::Tensor cloud_to_tensor(const PointCloud& pc) {
  ad::Tensor t({pc.size(), 3});
  for (std::size_t i = 0; i < pc.size(); ++i) {
    for (int a = 0; a < 3; ++a) t[i * 3 + a] = pc[i][a];
  }
  return t;
}

}  // namespace vrpc
