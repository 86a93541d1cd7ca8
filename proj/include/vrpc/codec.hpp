#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vrpc/autodiff.hpp"
#include "vrpc/entropy.hpp"
#include "vrpc/network.hpp"
#include "vrpc/pointcloud.hpp"
#include "vrpc/range_coder.hpp"

namespace vrpc {

inline constexpr std::uint8_t kCheckpointVersion = 1;

// A trained codec: configuration, parameters, and the derived density and
// coding tables. The hash is FNV-1a 64 over the checkpoint bytes.
class CodecModel {
 public:
  CodecModel(CodecConfig config, ad::ParamStore params);

  const CodecConfig& config() const { return network_.config(); }
  const CodecNetwork& network() const { return network_; }
  const ad::ParamStore& params() const { return params_; }
  const FactorizedDensity& density() const { return density_; }
  const CdfTable& table() const { return table_; }
  std::uint64_t hash() const { return hash_; }
  std::size_t latent() const { return config().encoder.latent; }

  // "VRPM", version u8, u32 config text length, config text
  // (key = value lines), then the tensor container.
  std::vector<std::uint8_t> serialize() const;
  static CodecModel deserialize(std::span<const std::uint8_t> bytes);
  static CodecModel load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  CodecNetwork network_;
  ad::ParamStore params_;
  FactorizedDensity density_;
  CdfTable table_;
  std::uint64_t hash_ = 0;
};

// Normalize, encode, round, keep the first `keep` symbols, range code.
Bitstream compress(const CodecModel& model, const PointCloud& pc, std::size_t keep);
// Reconstruction with the configured point count in the input frame.
// Raises kHashMismatch when the bitstream names a different model.
PointCloud decompress(const CodecModel& model, const Bitstream& bs);

// Latent symbols of a cloud before truncation.
std::vector<std::int32_t> quantized_latent(const CodecModel& model, const PointCloud& pc);

// Payload bits per input point; the fixed header is not counted.
double payload_bpp(const Bitstream& bs);

// k whose payload bpp is closest to target (ties to the smaller k).
// Payload length is non-decreasing in k, so the crossing point is found by
// binary search.
std::size_t keep_for_bpp(const CodecModel& model, const PointCloud& pc, double target_bpp);

}  // namespace vrpc
