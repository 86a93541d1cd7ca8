#include "vrpc/entropy.hpp"

#include <algorithm>

#include "vrpc/error.hpp"
#include "vrpc/random.hpp"

namespace vrpc {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)) = -softplus(-x)
double log_sigmoid(double x) { return -softplus(-x); }

const double kLogFloor = std::log(kLikelihoodFloor);

// ln P for the unit interval around v, with upper/lower standardized ends
// hi = (v + 1/2 - mu)/s and lo = (v - 1/2 - mu)/s. Uses
// P = sigmoid(hi) * sigmoid(-lo) * (1 - exp(-(hi - lo))), stable in both
// tails.
double log_mass(double v, double mu, double s) {
  const double hi = (v + 0.5 - mu) / s;
  const double lo = (v - 0.5 - mu) / s;
  return log_sigmoid(hi) + log_sigmoid(-lo) + std::log(-std::expm1(-1.0 / s));
}

}  // namespace

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double logistic_cdf(double x, double location, double scale) { return sigmoid((x - location) / scale); }

FactorizedDensity FactorizedDensity::from_params(const ad::ParamStore& params) {
  FactorizedDensity d;
  d.location = params.at(kLocationParam).value.vector();
  d.scale_raw = params.at(kScaleParam).value.vector();
  if (d.location.size() != d.scale_raw.size()) {
    throw Error(ErrorCode::kShape, "density location/scale length mismatch");
  }
  return d;
}

void FactorizedDensity::add_params(ad::ParamStore& params, std::size_t length) {
  // softplus(log(e - 1)) = 1
  const double unit_scale_raw = std::log(std::exp(1.0) - 1.0);
  params.add(kLocationParam, ad::Tensor({1, length}, 0.0));
  params.add(kScaleParam, ad::Tensor({1, length}, unit_scale_raw));
}

double FactorizedDensity::log_interval_mass(std::size_t i, double v) const {
  return log_mass(v, location[i], scale(i));
}

double FactorizedDensity::interval_mass(std::size_t i, double v) const {
  return std::exp(log_interval_mass(i, v));
}

double FactorizedDensity::likelihood(std::size_t i, double v) const {
  return std::clamp(interval_mass(i, v), kLikelihoodFloor, 1.0);
}

std::vector<double> log_likelihood(const FactorizedDensity& model, std::span<const double> values) {
  if (values.size() != model.size()) {
    throw Error(ErrorCode::kShape, "likelihood: " + std::to_string(values.size()) +
                                       " values for a density of length " + std::to_string(model.size()));
  }
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = std::max(model.log_interval_mass(i, values[i]), kLogFloor);
  }
  return out;
}

std::vector<double> likelihood(const FactorizedDensity& model, std::span<const double> values) {
  auto out = log_likelihood(model, values);
  for (double& v : out) v = std::min(std::exp(v), 1.0);
  return out;
}

ad::Var log_likelihood(ad::Var values, ad::Var location, ad::Var scale_raw) {
  const ad::Tensor& y = values.value();
  const ad::Tensor& mu = location.value();
  const ad::Tensor& rho = scale_raw.value();
  if (y.size() != mu.size() || y.size() != rho.size()) {
    throw Error(ErrorCode::kShape, "log_likelihood: shapes " + ad::shape_string(y.shape()) + ", " +
                                       ad::shape_string(mu.shape()) + ", " + ad::shape_string(rho.shape()));
  }
  const std::size_t n = y.size();
  ad::Tensor out(y.shape());
  // Per-element partials of ln P with respect to value, location, raw scale.
  std::vector<double> d_value(n), d_location(n), d_scale_raw(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = softplus(rho[i]);
    const double lp = log_mass(y[i], mu[i], s);
    if (lp < kLogFloor) {
      out[i] = kLogFloor;
      continue;
    }
    out[i] = lp;
    const double hi = (y[i] + 0.5 - mu[i]) / s;
    const double lo = (y[i] - 0.5 - mu[i]) / s;
    const double d_hi = sigmoid(-hi);
    const double d_lo = -sigmoid(lo);
    d_value[i] = (d_hi + d_lo) / s;
    d_location[i] = -d_value[i];
    const double d_s = -(d_hi * hi + d_lo * lo) / s - 1.0 / (std::expm1(1.0 / s) * s * s);
    d_scale_raw[i] = d_s * sigmoid(rho[i]);
  }
  ad::Tape& tape = *values.tape();
  return tape.record(std::move(out), {values, location, scale_raw},
                     [d_value = std::move(d_value), d_location = std::move(d_location),
                      d_scale_raw = std::move(d_scale_raw)](const ad::BackwardPass& bp) {
                       const ad::Tensor& g = bp.out_grad();
                       const std::vector<double>* partials[3] = {&d_value, &d_location, &d_scale_raw};
                       for (std::size_t k = 0; k < 3; ++k) {
                         ad::Tensor* dst = bp.grad(k);
                         if (!dst) continue;
                         for (std::size_t i = 0; i < g.size(); ++i) (*dst)[i] += g[i] * (*partials[k])[i];
                       }
                     });
}

std::vector<double> uniform_noise(std::size_t length, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> u(length);
  for (double& v : u) v = rng.uniform() - 0.5;
  return u;
}

std::vector<double> noisy_quantize(std::span<const double> y, std::uint64_t seed) {
  const auto u = uniform_noise(y.size(), seed);
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] + u[i];
  return out;
}

ad::Var noisy_quantize(ad::Var y, std::uint64_t seed) {
  ad::Tensor noise(y.shape(), uniform_noise(y.value().size(), seed));
  return ad::add(y, y.tape()->constant(std::move(noise)));
}

std::vector<std::int32_t> hard_quantize(std::span<const double> y) {
  std::vector<std::int32_t> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = std::round(y[i]);
    if (!(std::abs(r) < 2147483647.0)) {
      throw Error(ErrorCode::kNumeric, "hard_quantize: latent " + std::to_string(i) + " is not representable");
    }
    out[i] = static_cast<std::int32_t>(r);
  }
  return out;
}

WeightSchedule WeightSchedule::make(double a, double b, std::size_t length) {
  if (!(a > 0.0) || !(b >= 0.0)) throw Error(ErrorCode::kConfig, "weight schedule needs a > 0 and b >= 0");
  WeightSchedule s{a, b, std::vector<double>(length)};
  for (std::size_t i = 0; i < length; ++i) s.weights[i] = a * std::exp(-b * static_cast<double>(i));
  return s;
}

RateReport rate_report(std::span<const double> likelihoods, std::size_t num_points) {
  RateReport r;
  r.bits.reserve(likelihoods.size());
  for (const double p : likelihoods) {
    const double bits = -std::log2(std::clamp(p, kLikelihoodFloor, 1.0));
    r.bits.push_back(bits);
    r.total_bits += bits;
  }
  r.bpp = num_points ? r.total_bits / static_cast<double>(num_points) : 0.0;
  return r;
}

double rate(std::span<const std::vector<double>> batch_likelihoods) {
  if (batch_likelihoods.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& item : batch_likelihoods) {
    for (const double p : item) sum -= std::log(std::clamp(p, kLikelihoodFloor, 1.0));
  }
  return sum / static_cast<double>(batch_likelihoods.size());
}

double weighted_rate(std::span<const std::vector<double>> batch_likelihoods, const WeightSchedule& schedule) {
  if (batch_likelihoods.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& item : batch_likelihoods) {
    if (item.size() != schedule.size()) {
      throw Error(ErrorCode::kShape, "weighted_rate: " + std::to_string(item.size()) +
                                         " likelihoods for a schedule of length " + std::to_string(schedule.size()));
    }
    for (std::size_t i = 0; i < item.size(); ++i) {
      sum -= schedule.weights[i] * std::log(std::clamp(item[i], kLikelihoodFloor, 1.0));
    }
  }
  return sum / static_cast<double>(batch_likelihoods.size());
}

ad::Var weighted_rate(ad::Var log_p, const WeightSchedule& schedule) {
  if (log_p.value().size() != schedule.size()) {
    throw Error(ErrorCode::kShape, "weighted_rate: schedule length " + std::to_string(schedule.size()) +
                                       " vs " + ad::shape_string(log_p.shape()));
  }
  ad::Var w = log_p.tape()->constant(ad::Tensor(log_p.shape(), schedule.weights));
  return ad::scale(ad::reduce_sum(ad::mul(log_p, w)), -1.0);
}

TruncationFill parse_fill(const std::string& name) {
  if (name == "zero") return TruncationFill::kZero;
  if (name == "location") return TruncationFill::kLocation;
  throw Error(ErrorCode::kConfig, "unknown truncation fill '" + name + "'");
}

std::string fill_name(TruncationFill fill) { return fill == TruncationFill::kZero ? "zero" : "location"; }

std::vector<std::int32_t> truncate(std::span<const std::int32_t> symbols, std::size_t keep) {
  if (keep < 1 || keep > symbols.size()) {
    throw Error(ErrorCode::kRange, "truncate: keep = " + std::to_string(keep) + " outside [1, " +
                                       std::to_string(symbols.size()) + "]");
  }
  return std::vector<std::int32_t>(symbols.begin(), symbols.begin() + static_cast<std::ptrdiff_t>(keep));
}

std::vector<double> pad_latent(std::span<const std::int32_t> kept, std::size_t length, TruncationFill fill,
                               const FactorizedDensity* model) {
  if (kept.size() > length) throw Error(ErrorCode::kRange, "pad_latent: more symbols than latent length");
  if (fill == TruncationFill::kLocation && (!model || model->size() != length)) {
    throw Error(ErrorCode::kConfig, "pad_latent: location fill needs a density of matching length");
  }
  std::vector<double> out(length, 0.0);
  for (std::size_t i = 0; i < length; ++i) {
    if (i < kept.size()) {
      out[i] = kept[i];
    } else if (fill == TruncationFill::kLocation) {
      out[i] = model->location[i];
    }
  }
  return out;
}

}  // namespace vrpc
