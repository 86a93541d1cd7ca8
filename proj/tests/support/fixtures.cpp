#include "fixtures.hpp"

namespace vrpc::testing {

CodecConfig small_codec_config() {
  CodecConfig c;
  auto& e = c.encoder;
  e.points = 64;
  e.sa1_points = 16;
  e.sa2_points = 4;
  e.sa1_width = 16;
  e.sa2_width = 16;
  e.sa3_width = 16;
  e.sa1_neighbors = 8;
  e.sa2_neighbors = 4;
  e.global_hidden = 16;
  e.global_width = 16;
  e.compressor_hidden = 32;
  e.latent = 16;
  c.decoder.latent = 16;
  c.decoder.hidden = {32, 32};
  c.decoder.points_per_branch = 32;
  return c;
}

TrainConfig small_train_config(std::size_t steps) {
  TrainConfig t;
  t.codec = small_codec_config();
  t.batch = 4;
  t.steps = steps;
  t.adam.lr = 1e-3;
  t.deterministic = true;
  return t;
}

std::vector<PointCloud> small_dataset(std::uint64_t seed) {
  SynthSpec spec = parse_synth_spec("shapes=sphere+cube-surface+torus+plane,n=64,count=8,rotate=1");
  spec.seed = seed;
  return synth_dataset(spec);
}

}  // namespace vrpc::testing
