#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "vrpc/autodiff.hpp"
#include "vrpc/codec.hpp"
#include "vrpc/config.hpp"
#include "vrpc/metrics.hpp"
#include "vrpc/network.hpp"
#include "vrpc/octree.hpp"
#include "vrpc/pointcloud.hpp"

namespace vrpc {

enum class Distortion { kChamfer, kEmd };

Distortion parse_distortion(const std::string& name);
std::string distortion_name(Distortion d);

// Config keys (key = value):
//   lambda, distortion (cd|emd), weight_a, weight_b, lr, lr_final, beta1,
//   beta2, eps,
//   batch, epochs, steps (overrides epochs when > 0), seed, clip_norm
//   (0 = off), checkpoint_every (steps, 0 = off), threads, deterministic,
//   plus the architecture keys read by CodecConfig::from_keys.
struct TrainConfig {
  CodecConfig codec = CodecConfig::toy();
  double lambda = 1e-3;
  Distortion distortion = Distortion::kChamfer;
  double weight_a = 15.0;
  double weight_b = 0.003;
  ad::AdamConfig adam;
  // Cosine decay from adam.lr to lr_final over the run; negative keeps the
  // rate constant.
  double lr_final = -1.0;
  std::size_t batch = 16;
  std::size_t epochs = 300;
  std::size_t steps = 0;
  std::uint64_t seed = 1;
  double clip_norm = 0.0;
  std::size_t checkpoint_every = 0;
  std::size_t threads = 1;
  // Serial evaluation and zero wall-time column, so logs are byte-stable.
  bool deterministic = false;

  static TrainConfig from_keys(const KeyValues& kv);
  static TrainConfig load(const std::filesystem::path& path);
  void write_keys(KeyValues& kv) const;
  void validate() const;

  // Total optimizer steps for a dataset of the given size.
  std::size_t total_steps(std::size_t dataset_size) const;
  double learning_rate(std::size_t step, std::size_t total) const;
};

// Rates are batch means: rate_bits = sum -log2 P, rate_weighted =
// sum -omega_i ln P_i. loss = distortion + lambda * rate_weighted.
struct TrainLogRow {
  std::size_t step = 0;
  double distortion = 0.0;
  double rate_bits = 0.0;
  double rate_weighted = 0.0;
  double loss = 0.0;
  double wall_time = 0.0;
};

struct TrainLog {
  std::vector<TrainLogRow> rows;

  // Columns: step,D,R_bits,R_weighted,L,wall_time
  void write_csv(std::ostream& out) const;
  void save_csv(const std::filesystem::path& path) const;
};

struct TrainResult {
  CodecModel model;
  TrainLog log;
};

struct TrainHooks {
  // Called after every optimizer step.
  std::function<void(const TrainLogRow&)> on_step;
  // Called every checkpoint_every steps with the current model.
  std::function<void(std::size_t step, const CodecModel&)> on_checkpoint;
};

// Normalizes each cloud, then minimizes the batch-mean loss with Adam.
// Per-item gradients are reduced in item order, so thread count never
// changes the result. A non-finite loss raises kNumeric.
TrainResult train(const std::vector<PointCloud>& dataset, const TrainConfig& cfg, const TrainHooks& hooks = {});

// Loss terms for one item, without updating parameters.
struct ItemLoss {
  double distortion = 0.0;
  double rate_bits = 0.0;
  double rate_weighted = 0.0;
  double loss = 0.0;
};

// Seed of the quantization noise for batch slot `slot` at `step`.
std::uint64_t training_noise_seed(std::uint64_t seed, std::size_t step, std::size_t slot);

// Builds the training objective for one normalized cloud on the tape and
// returns the scalar loss variable.
ad::Var item_objective(ad::Tape& tape, const CodecNetwork& net, const ad::ParamStore& params,
                       const PointCloud& cloud, const TrainConfig& cfg, const WeightSchedule& schedule,
                       std::uint64_t noise_seed, ItemLoss* terms = nullptr);

// A directory of cloud files, a single file, or a synthetic spec.
std::vector<PointCloud> load_dataset(const std::string& source);

// One row of a rate-distortion table: codec is "learned" (parameter = k)
// or "octree" (parameter = depth). Values are dataset means.
struct RdRow {
  std::string codec;
  std::size_t parameter = 0;
  double bpp = 0.0;
  MetricReport metrics;
};

struct PairRow {
  std::string codec;
  std::size_t parameter = 0;
  std::size_t item = 0;
  double bpp = 0.0;
  MetricReport metrics;
};

struct RdTable {
  std::vector<RdRow> rows;
  std::vector<PairRow> pairs;
};

// Learned rows sorted by k; truncation points must lie in [1, l].
RdTable evaluate(const CodecModel& model, const std::vector<PointCloud>& dataset,
                 std::vector<std::size_t> truncations, const MetricOptions& opts = {});
// Octree rows sorted by depth. Clouds are normalized into the root cell
// first and errors are measured in the input frame.
RdTable evaluate_octree(const std::vector<PointCloud>& dataset, std::vector<int> depths,
                        const MetricOptions& opts = {});

// Columns: codec,k_or_depth,bpp,cd,emd,fscore,p2p,p2plane
void write_rd_csv(std::ostream& out, const std::vector<RdRow>& rows);
// Columns: codec,k_or_depth,item,bpp,cd,emd,fscore,p2p,p2plane
void write_pairs_csv(std::ostream& out, const std::vector<PairRow>& rows);

}  // namespace vrpc
