#include "vrpc/codec.hpp"

#include <cmath>
#include <string>

#include "vrpc/bytes.hpp"
#include "vrpc/config.hpp"
#include "vrpc/error.hpp"

namespace vrpc {

namespace {

std::vector<std::uint8_t> checkpoint_bytes(const CodecConfig& config, const ad::ParamStore& params) {
  const std::string text = config.to_text();
  ByteWriter w;
  w.raw(std::string_view("VRPM"));
  w.u8(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.raw(std::string_view(text));
  w.raw(params.serialize());
  return w.take();
}

void require_matching_params(const CodecConfig& config, const ad::ParamStore& params) {
  ad::ParamStore expected;
  CodecNetwork(config).init_params(expected, 0);
  if (expected.size() != params.size()) {
    throw Error(ErrorCode::kShape, "checkpoint holds " + std::to_string(params.size()) + " tensors, config needs " +
                                       std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (expected[i].name != params[i].name || expected[i].value.shape() != params[i].value.shape()) {
      throw Error(ErrorCode::kShape, "checkpoint tensor '" + params[i].name + "' " +
                                         ad::shape_string(params[i].value.shape()) + " does not match config ('" +
                                         expected[i].name + "' " + ad::shape_string(expected[i].value.shape()) + ")");
    }
  }
}

}  // namespace

CodecModel::CodecModel(CodecConfig config, ad::ParamStore params)
    : network_(std::move(config)),
      params_(std::move(params)),
      density_(FactorizedDensity::from_params(params_)),
      table_(CdfTable::build(density_)) {
  require_matching_params(network_.config(), params_);
  hash_ = fnv1a64(serialize());
}

std::vector<std::uint8_t> CodecModel::serialize() const { return checkpoint_bytes(config(), params_); }

CodecModel CodecModel::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.str(4) != "VRPM") throw Error(ErrorCode::kCorrupt, "checkpoint: bad magic");
  const std::uint8_t version = r.u8();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kCorrupt, "checkpoint: unsupported version " + std::to_string(version));
  }
  const std::string text = r.str(r.u32());
  const KeyValues kv = KeyValues::parse(text);
  CodecConfig config = CodecConfig::from_keys(kv);
  ad::ParamStore params = ad::ParamStore::deserialize(r.raw(r.remaining()));
  return CodecModel(std::move(config), std::move(params));
}

CodecModel CodecModel::load(const std::filesystem::path& path) { return deserialize(read_file_bytes(path.string())); }

void CodecModel::save(const std::filesystem::path& path) const { write_file_bytes(path.string(), serialize()); }

std::vector<std::int32_t> quantized_latent(const CodecModel& model, const PointCloud& pc) {
  validate(pc);
  const auto [normalized, record] = normalize(pc);
  return hard_quantize(model.network().encode_values(model.params(), normalized));
}

Bitstream compress(const CodecModel& model, const PointCloud& pc, std::size_t keep) {
  validate(pc);
  if (pc.size() > 0xFFFFFFFFu) throw Error(ErrorCode::kRange, "compress: too many points");
  const std::size_t l = model.latent();
  if (keep < 1 || keep > l) {
    throw Error(ErrorCode::kRange, "compress: keep = " + std::to_string(keep) + " outside [1, " + std::to_string(l) + "]");
  }
  const auto [normalized, record] = normalize(pc);
  const auto symbols = hard_quantize(model.network().encode_values(model.params(), normalized));
  const auto kept = truncate(symbols, keep);

  Bitstream bs;
  bs.points = static_cast<std::uint32_t>(pc.size());
  bs.latent = static_cast<std::uint16_t>(l);
  bs.kept = static_cast<std::uint16_t>(keep);
  bs.normalization = record;
  bs.model_hash = model.hash();
  bs.payload = encode_symbols(kept, model.table());
  return bs;
}

PointCloud decompress(const CodecModel& model, const Bitstream& bs) {
  if (bs.model_hash != model.hash()) {
    throw Error(ErrorCode::kHashMismatch, "bitstream was produced by a different model");
  }
  if (bs.latent != model.latent()) {
    throw Error(ErrorCode::kCorrupt, "bitstream latent length " + std::to_string(bs.latent) + " differs from model " +
                                         std::to_string(model.latent()));
  }
  if (bs.kept < 1) throw Error(ErrorCode::kCorrupt, "bitstream keeps no latent elements");
  const auto symbols = decode_symbols(bs.payload, bs.kept, model.table());
  const auto latent = pad_latent(symbols, model.latent(), model.config().fill, &model.density());
  return denormalize(model.network().decode_values(model.params(), latent), bs.normalization);
}

double payload_bpp(const Bitstream& bs) {
  if (bs.points == 0) throw Error(ErrorCode::kRange, "payload_bpp: zero points");
  return static_cast<double>(bs.payload.size()) * 8.0 / static_cast<double>(bs.points);
}

std::size_t keep_for_bpp(const CodecModel& model, const PointCloud& pc, double target_bpp) {
  if (!(target_bpp > 0.0)) throw Error(ErrorCode::kRange, "keep_for_bpp: target must be positive");
  const auto symbols = quantized_latent(model, pc);
  const auto bpp_at = [&](std::size_t k) {
    return static_cast<double>(encode_symbols(truncate(symbols, k), model.table()).size()) * 8.0 /
           static_cast<double>(pc.size());
  };
  // Smallest k with bpp(k) >= target.
  std::size_t lo = 1, hi = symbols.size();
  if (bpp_at(hi) < target_bpp) return hi;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (bpp_at(mid) >= target_bpp) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  if (lo > 1 && std::abs(bpp_at(lo - 1) - target_bpp) <= std::abs(bpp_at(lo) - target_bpp)) return lo - 1;
  return lo;
}

}  // namespace vrpc
