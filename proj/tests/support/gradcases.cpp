#include "gradcases.hpp"

#include <cmath>

#include "vrpc/entropy.hpp"
#include "vrpc/metrics.hpp"
#include "vrpc/network.hpp"
#include "vrpc/random.hpp"
#include "vrpc/trainer.hpp"

namespace vrpc::testing {

namespace {

using ad::Shape;
using ad::Tensor;
using ad::Var;

// Uniform in [lo, hi], optionally pushed away from zero by `gap`.
Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0, double gap = 0.0) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (double& v : t.values()) {
    v = rng.uniform(lo, hi);
    if (gap > 0.0 && std::abs(v) < gap) v = v < 0.0 ? v - gap : v + gap;
  }
  return t;
}

// sum(op(inputs) * R) for a fixed random R.
Var project(ad::Tape& tape, Var out, std::uint64_t seed) {
  Var r = tape.constant(random_tensor(out.shape(), seed));
  return ad::reduce_sum(ad::mul(out, r));
}

using Builder = std::function<Var(ad::Tape&, const std::vector<Var>&)>;

OpCase make_case(std::string name, std::vector<Tensor> inputs, Builder op) {
  return {name, [inputs = std::move(inputs), op = std::move(op)] {
            ad::ParamStore store;
            for (std::size_t i = 0; i < inputs.size(); ++i) store.add("in" + std::to_string(i), inputs[i]);
            return check_gradients(store, [&](ad::Tape& tape) {
              std::vector<Var> vars;
              for (std::size_t i = 0; i < store.size(); ++i) vars.push_back(tape.parameter(store, i));
              return project(tape, op(tape, vars), 0xBEEF);
            });
          }};
}

}  // namespace

std::vector<OpCase> op_gradient_cases() {
  std::vector<OpCase> cases;
  const auto x45 = random_tensor({4, 5}, 1);
  const auto y45 = random_tensor({4, 5}, 2);
  const auto pos45 = random_tensor({4, 5}, 3, 0.5, 2.0);
  const auto away45 = random_tensor({4, 5}, 4, -1.0, 1.0, 0.1);

  cases.push_back(make_case("matmul", {random_tensor({3, 4}, 5), random_tensor({4, 5}, 6)},
                            [](ad::Tape&, const std::vector<Var>& v) { return ad::matmul(v[0], v[1]); }));
  cases.push_back(make_case("add_bias", {x45, random_tensor({1, 5}, 7)},
                            [](ad::Tape&, const std::vector<Var>& v) { return ad::add_bias(v[0], v[1]); }));
  cases.push_back(make_case("add", {x45, y45}, [](ad::Tape&, const std::vector<Var>& v) { return ad::add(v[0], v[1]); }));
  cases.push_back(make_case("sub", {x45, y45}, [](ad::Tape&, const std::vector<Var>& v) { return ad::sub(v[0], v[1]); }));
  cases.push_back(make_case("mul", {x45, y45}, [](ad::Tape&, const std::vector<Var>& v) { return ad::mul(v[0], v[1]); }));
  cases.push_back(make_case("scale", {x45}, [](ad::Tape&, const std::vector<Var>& v) { return ad::scale(v[0], -1.7); }));
  cases.push_back(
      make_case("add_scalar", {x45}, [](ad::Tape&, const std::vector<Var>& v) { return ad::add_scalar(v[0], 0.3); }));
  cases.push_back(make_case("relu", {away45}, [](ad::Tape&, const std::vector<Var>& v) { return ad::relu(v[0]); }));
  cases.push_back(make_case("softplus", {x45}, [](ad::Tape&, const std::vector<Var>& v) { return ad::softplus(v[0]); }));
  cases.push_back(make_case("sigmoid", {x45}, [](ad::Tape&, const std::vector<Var>& v) { return ad::sigmoid(v[0]); }));
  cases.push_back(make_case("log", {pos45}, [](ad::Tape&, const std::vector<Var>& v) { return ad::log(v[0]); }));
  cases.push_back(make_case("exp", {x45}, [](ad::Tape&, const std::vector<Var>& v) { return ad::exp(v[0]); }));
  cases.push_back(make_case("square", {x45}, [](ad::Tape&, const std::vector<Var>& v) { return ad::square(v[0]); }));
  cases.push_back(make_case("sqrt", {pos45}, [](ad::Tape&, const std::vector<Var>& v) { return ad::sqrt(v[0]); }));
  cases.push_back(
      make_case("max_pool_rows", {x45}, [](ad::Tape&, const std::vector<Var>& v) { return ad::max_pool_rows(v[0]); }));
  cases.push_back(make_case("max_pool_groups", {random_tensor({6, 3}, 8)},
                            [](ad::Tape&, const std::vector<Var>& v) { return ad::max_pool_groups(v[0], 2); }));
  cases.push_back(make_case("concat_cols", {random_tensor({4, 2}, 9), random_tensor({4, 3}, 10)},
                            [](ad::Tape&, const std::vector<Var>& v) { return ad::concat_cols(v[0], v[1]); }));
  cases.push_back(make_case("concat_rows", {random_tensor({2, 3}, 11), random_tensor({3, 3}, 12)},
                            [](ad::Tape&, const std::vector<Var>& v) { return ad::concat_rows(v); }));
  cases.push_back(
      make_case("slice_cols", {x45}, [](ad::Tape&, const std::vector<Var>& v) { return ad::slice_cols(v[0], 1, 4); }));
  cases.push_back(
      make_case("slice_rows", {x45}, [](ad::Tape&, const std::vector<Var>& v) { return ad::slice_rows(v[0], 1, 3); }));
  cases.push_back(make_case("gather_rows", {x45}, [](ad::Tape&, const std::vector<Var>& v) {
    const std::vector<std::size_t> rows{2, 0, 2, 3, 1};
    return ad::gather_rows(v[0], rows);
  }));
  cases.push_back(make_case("reshape", {random_tensor({4, 6}, 13)},
                            [](ad::Tape&, const std::vector<Var>& v) { return ad::reshape(v[0], {6, 4}); }));
  cases.push_back(
      make_case("reduce_sum", {x45}, [](ad::Tape&, const std::vector<Var>& v) { return ad::reduce_sum(v[0]); }));
  cases.push_back(
      make_case("reduce_mean", {x45}, [](ad::Tape&, const std::vector<Var>& v) { return ad::reduce_mean(v[0]); }));
  cases.push_back(make_case(
      "log_likelihood", {random_tensor({1, 6}, 14, -3.0, 3.0), random_tensor({1, 6}, 15), random_tensor({1, 6}, 16)},
      [](ad::Tape&, const std::vector<Var>& v) { return log_likelihood(v[0], v[1], v[2]); }));
  cases.push_back(make_case("weighted_rate", {random_tensor({1, 8}, 17, -4.0, -0.1)},
                            [](ad::Tape&, const std::vector<Var>& v) {
                              return weighted_rate(v[0], WeightSchedule::make(15.0, 0.003, 8));
                            }));
  cases.push_back(make_case("noisy_quantize", {random_tensor({1, 8}, 18, -3.0, 3.0)},
                            [](ad::Tape&, const std::vector<Var>& v) { return noisy_quantize(v[0], 42); }));
  cases.push_back(make_case("chamfer_loss", {random_tensor({10, 3}, 19)}, [](ad::Tape&, const std::vector<Var>& v) {
    static const PointCloud target = random_cloud(12, 20);
    return chamfer_loss(v[0], target);
  }));
  cases.push_back(make_case("emd_loss", {random_tensor({8, 3}, 21)}, [](ad::Tape&, const std::vector<Var>& v) {
    static const PointCloud target = random_cloud(8, 22);
    return emd_loss(v[0], target);
  }));
  return cases;
}

GradCheckResult pipeline_gradient_check(std::uint64_t seed) {
  CodecConfig cfg;
  auto& e = cfg.encoder;
  e.points = 16;
  e.sa1_points = 8;
  e.sa2_points = 4;
  e.sa1_width = 8;
  e.sa2_width = 8;
  e.sa3_width = 8;
  e.sa1_neighbors = 4;
  e.sa2_neighbors = 2;
  e.global_hidden = 8;
  e.global_width = 8;
  e.compressor_hidden = 8;
  e.latent = 8;
  cfg.decoder.latent = 8;
  cfg.decoder.hidden = {16, 16};
  cfg.decoder.points_per_branch = 8;

  const CodecNetwork net(cfg);
  ad::ParamStore params;
  net.init_params(params, seed);
  // Nonzero biases so every ReLU sees a generic input.
  Rng rng(mix_seed(seed, 77));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name.ends_with(".b")) {
      for (double& v : params[i].value.values()) v = rng.uniform(-0.1, 0.1);
    }
  }
  const PointCloud cloud = normalize(random_cloud(16, mix_seed(seed, 1))).first;
  TrainConfig tc;
  tc.codec = cfg;
  tc.lambda = 1e-2;
  const auto schedule = WeightSchedule::make(tc.weight_a, tc.weight_b, e.latent);
  return check_gradients(
      params, [&](ad::Tape& tape) { return item_objective(tape, net, params, cloud, tc, schedule, 1234); }, 1e-6,
      1u << 30, 1e-6, true);
}

}  // namespace vrpc::testing
