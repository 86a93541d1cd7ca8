#pragma once

#include <functional>
#include <string>
#include <vector>

#include "oracles.hpp"

namespace vrpc::testing {

// One finite-difference check per differentiable op. Each case projects
// the op output onto a fixed random tensor so the whole Jacobian is probed.
struct OpCase {
  std::string name;
  std::function<GradCheckResult()> run;
};

std::vector<OpCase> op_gradient_cases();

// Central differences over every parameter tensor of a tiny codec
// (n = 16, l = 8): encode, noisy quantize, rate, decode, chamfer.
GradCheckResult pipeline_gradient_check(std::uint64_t seed);

}  // namespace vrpc::testing
