#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vrpc/autodiff.hpp"
#include "vrpc/config.hpp"
#include "vrpc/entropy.hpp"
#include "vrpc/pointcloud.hpp"

namespace vrpc {

// Two-branch analysis transform. The local branch stacks three set
// abstraction levels (sampled centers -> kNN groups -> shared MLP -> max
// pool); the last level pools every surviving point into one vector. The
// global branch is a shared per-point MLP followed by a max pool.
struct EncoderConfig {
  std::size_t points = 256;           // n
  std::size_t sa1_points = 64;        // n1
  std::size_t sa2_points = 16;        // n2
  std::size_t sa1_width = 32;         // f1
  std::size_t sa2_width = 64;         // f2
  std::size_t sa3_width = 64;         // f3
  std::size_t sa1_neighbors = 16;
  std::size_t sa2_neighbors = 8;
  std::size_t global_hidden = 64;
  std::size_t global_width = 64;      // f'
  std::size_t compressor_hidden = 64;
  std::size_t latent = 64;            // l

  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

// Fully connected synthesis transform with `branches` parallel stacks that
// each emit points_per_branch points.
struct DecoderConfig {
  std::size_t latent = 64;
  std::vector<std::size_t> hidden{128, 128, 256};
  std::size_t points_per_branch = 128;
  std::size_t branches = 2;

  std::size_t total_points() const { return points_per_branch * branches; }
  void validate() const;
  bool operator==(const DecoderConfig&) const = default;
};

struct CodecConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  TruncationFill fill = TruncationFill::kZero;

  // Layer sizes used for ShapeNet-scale clouds of 2048 points.
  static CodecConfig full_scale();
  // Desk-scale default (n = 256, l = 64).
  static CodecConfig toy();

  // Reads architecture keys on top of `base`; decoder points follow
  // `points` as two equal branches.
  static CodecConfig from_keys(const KeyValues& kv, const CodecConfig& base = toy());
  void write_keys(KeyValues& kv) const;
  std::string to_text() const;

  void validate() const;
  bool operator==(const CodecConfig&) const = default;
};

// Precomputed sampling and grouping for one cloud; depends only on the
// coordinates, never on parameters.
struct EncoderPlan {
  std::size_t sa1_neighbors = 0;
  std::size_t sa2_neighbors = 0;
  std::vector<std::size_t> sa2_neighbor_idx;  // into level-1 centers
  std::vector<std::size_t> sa3_neighbor_idx;  // into level-2 centers
  ad::Tensor sa1_relative;                    // (n1*k1) x 3
  ad::Tensor sa2_relative;                    // (n2*k2) x 3
  ad::Tensor sa3_relative;                    // n2 x 3
};

class CodecNetwork {
 public:
  explicit CodecNetwork(CodecConfig config);

  const CodecConfig& config() const { return config_; }

  // Adds encoder, decoder and entropy-model parameters with seeded
  // Glorot-uniform weights and zero biases.
  void init_params(ad::ParamStore& params, std::uint64_t seed) const;

  EncoderPlan plan(const PointCloud& pc) const;

  // 1 x f' max-pooled global feature.
  ad::Var global_feature(ad::Tape& tape, const ad::ParamStore& params, const PointCloud& pc) const;
  // 1 x f3 local feature.
  ad::Var local_feature(ad::Tape& tape, const ad::ParamStore& params, const EncoderPlan& plan) const;
  // 1 x l latent y.
  ad::Var encode(ad::Tape& tape, const ad::ParamStore& params, const PointCloud& pc,
                 const EncoderPlan& plan) const;
  ad::Var encode(ad::Tape& tape, const ad::ParamStore& params, const PointCloud& pc) const;
  // (branches * points_per_branch) x 3 reconstruction.
  ad::Var decode(ad::Tape& tape, const ad::ParamStore& params, ad::Var latent) const;

  std::vector<double> encode_values(const ad::ParamStore& params, const PointCloud& pc) const;
  PointCloud decode_values(const ad::ParamStore& params, std::span<const double> latent) const;

 private:
  CodecConfig config_;
};

PointCloud tensor_to_cloud(const ad::Tensor& t);
ad::Tensor cloud_to_tensor(const PointCloud& pc);

}  // namespace vrpc
