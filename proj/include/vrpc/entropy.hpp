#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vrpc/autodiff.hpp"

namespace vrpc {

// Probabilities are clamped here before taking logs, bounding the cost of
// any single element at 32 bits.
inline constexpr double kLikelihoodFloor = 0x1p-32;
inline const double kBitsPerNat = 1.0 / std::log(2.0);

inline constexpr const char* kLocationParam = "entropy.location";
inline constexpr const char* kScaleParam = "entropy.scale_raw";

double softplus(double x);
double logistic_cdf(double x, double location, double scale);

// Independent logistic density per latent element. Scales are stored raw
// and mapped through softplus so they stay positive.
struct FactorizedDensity {
  std::vector<double> location;
  std::vector<double> scale_raw;

  static FactorizedDensity from_params(const ad::ParamStore& params);
  // Registers location (zeros) and raw scale (unit scale) parameters.
  static void add_params(ad::ParamStore& params, std::size_t length);

  std::size_t size() const { return location.size(); }
  double scale(std::size_t i) const { return softplus(scale_raw[i]); }
  double cdf(std::size_t i, double x) const { return logistic_cdf(x, location[i], scale(i)); }
  // Unclamped mass of [v - 1/2, v + 1/2] and its natural log.
  double interval_mass(std::size_t i, double v) const;
  double log_interval_mass(std::size_t i, double v) const;
  // Clamped to [kLikelihoodFloor, 1].
  double likelihood(std::size_t i, double v) const;
};

// Interval log-likelihood ln max(P_i(v), floor) per element, where
// P_i(v) = CDF_i(v + 1/2) - CDF_i(v - 1/2).
std::vector<double> log_likelihood(const FactorizedDensity& model, std::span<const double> values);
std::vector<double> likelihood(const FactorizedDensity& model, std::span<const double> values);

// Differentiable form of log_likelihood with respect to the values and both
// density parameter rows (1 x l each). Clamped elements have zero gradient.
ad::Var log_likelihood(ad::Var values, ad::Var location, ad::Var scale_raw);

// y + u with u ~ U(-1/2, 1/2) drawn from the seed.
std::vector<double> uniform_noise(std::size_t length, std::uint64_t seed);
std::vector<double> noisy_quantize(std::span<const double> y, std::uint64_t seed);
ad::Var noisy_quantize(ad::Var y, std::uint64_t seed);

// Round half away from zero.
std::vector<std::int32_t> hard_quantize(std::span<const double> y);

// omega_i = a * exp(-b * i), i counted from 0.
struct WeightSchedule {
  double a = 15.0;
  double b = 0.003;
  std::vector<double> weights;

  static WeightSchedule make(double a, double b, std::size_t length);
  std::size_t size() const { return weights.size(); }
};

struct RateReport {
  std::vector<double> bits;  // -log2 P per element
  double total_bits = 0.0;
  double bpp = 0.0;
};

RateReport rate_report(std::span<const double> likelihoods, std::size_t num_points);

// Mean over the batch of sum_i -ln P_i (nats). Multiply by kBitsPerNat for
// bits.
double rate(std::span<const std::vector<double>> batch_likelihoods);
// Mean over the batch of sum_i -omega_i ln P_i (nats).
double weighted_rate(std::span<const std::vector<double>> batch_likelihoods,
                     const WeightSchedule& schedule);
// -sum_i omega_i * log_p_i for one item on the tape.
ad::Var weighted_rate(ad::Var log_p, const WeightSchedule& schedule);

enum class TruncationFill { kZero, kLocation };

TruncationFill parse_fill(const std::string& name);
std::string fill_name(TruncationFill fill);

// The first `keep` symbols, 1 <= keep <= size.
std::vector<std::int32_t> truncate(std::span<const std::int32_t> symbols, std::size_t keep);
// Expands kept symbols back to `length`, filling positions keep..length-1
// with zero or with the density locations.
std::vector<double> pad_latent(std::span<const std::int32_t> kept, std::size_t length,
                               TruncationFill fill, const FactorizedDensity* model = nullptr);

}  // namespace vrpc
