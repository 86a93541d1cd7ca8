#pragma once

#include <vector>

#include "vrpc/network.hpp"
#include "vrpc/pointcloud.hpp"
#include "vrpc/trainer.hpp"

namespace vrpc::testing {

// n = 64, l = 16; small enough that a training step takes milliseconds.
CodecConfig small_codec_config();

// small_codec_config, batch 4, a handful of steps, deterministic.
TrainConfig small_train_config(std::size_t steps);

// Eight mixed synthetic shapes at 64 points.
std::vector<PointCloud> small_dataset(std::uint64_t seed = 1);

}  // namespace vrpc::testing
