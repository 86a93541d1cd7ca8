#include "vrpc/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "vrpc/entropy.hpp"
#include "vrpc/error.hpp"
#include "vrpc/geometry.hpp"
#include "vrpc/random.hpp"

namespace vrpc {

namespace {

constexpr std::uint64_t kShuffleSalt = 0x5401;
constexpr std::uint64_t kNoiseSalt = 0x9015E;

std::string join_keys(const std::vector<std::string>& keys) {
  std::string out;
  for (const auto& k : keys) out += (out.empty() ? "" : ", ") + k;
  return out;
}

std::string fmt(double v) { return format_double_exact(v); }

void write_metrics(std::ostream& out, const MetricReport& m) {
  out << fmt(m.cd) << ',' << fmt(m.emd) << ',' << fmt(m.fscore) << ',' << fmt(m.p2p) << ',' << fmt(m.p2plane);
}

void add_into(MetricReport& acc, const MetricReport& m) {
  acc.cd += m.cd;
  acc.emd += m.emd;
  acc.fscore += m.fscore;
  acc.p2p += m.p2p;
  acc.p2plane += m.p2plane;
}

MetricReport divided(MetricReport m, double n) {
  m.cd /= n;
  m.emd /= n;
  m.fscore /= n;
  m.p2p /= n;
  m.p2plane /= n;
  return m;
}

// Item stream over successive shuffled epochs.
class BatchSampler {
 public:
  BatchSampler(std::size_t size, std::uint64_t seed) : order_(size), seed_(seed) { reshuffle(); }

  std::vector<std::size_t> next(std::size_t batch) {
    std::vector<std::size_t> out;
    out.reserve(batch);
    while (out.size() < batch) {
      if (pos_ == order_.size()) {
        ++epoch_;
        reshuffle();
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    Rng rng(mix_seed(seed_, epoch_, kShuffleSalt));
    for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng.below(i)]);
    pos_ = 0;
  }

  std::vector<std::size_t> order_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  std::size_t pos_ = 0;
};

}  // namespace

Distortion parse_distortion(const std::string& name) {
  if (name == "cd") return Distortion::kChamfer;
  if (name == "emd") return Distortion::kEmd;
  throw Error(ErrorCode::kConfig, "unknown distortion '" + name + "' (expected cd or emd)");
}

std::string distortion_name(Distortion d) { return d == Distortion::kChamfer ? "cd" : "emd"; }

// ---- config ------------------------------------------------------------

TrainConfig TrainConfig::from_keys(const KeyValues& kv) {
  TrainConfig c;
  c.codec = CodecConfig::from_keys(kv);
  c.lambda = kv.get_double("lambda", c.lambda);
  c.distortion = parse_distortion(kv.get("distortion", distortion_name(c.distortion)));
  c.weight_a = kv.get_double("weight_a", c.weight_a);
  c.weight_b = kv.get_double("weight_b", c.weight_b);
  c.adam.lr = kv.get_double("lr", c.adam.lr);
  c.lr_final = kv.get_double("lr_final", c.lr_final);
  c.adam.beta1 = kv.get_double("beta1", c.adam.beta1);
  c.adam.beta2 = kv.get_double("beta2", c.adam.beta2);
  c.adam.eps = kv.get_double("eps", c.adam.eps);
  c.batch = kv.get_size("batch", c.batch);
  c.epochs = kv.get_size("epochs", c.epochs);
  c.steps = kv.get_size("steps", c.steps);
  c.seed = kv.get_u64("seed", c.seed);
  c.clip_norm = kv.get_double("clip_norm", c.clip_norm);
  c.checkpoint_every = kv.get_size("checkpoint_every", c.checkpoint_every);
  c.threads = kv.get_size("threads", c.threads);
  c.deterministic = kv.get_bool("deterministic", c.deterministic);
  const auto unused = kv.unused();
  if (!unused.empty()) throw Error(ErrorCode::kConfig, "unknown config keys: " + join_keys(unused));
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) { return from_keys(KeyValues::load(path.string())); }

void TrainConfig::write_keys(KeyValues& kv) const {
  codec.write_keys(kv);
  kv.set("lambda", fmt(lambda));
  kv.set("distortion", distortion_name(distortion));
  kv.set("weight_a", fmt(weight_a));
  kv.set("weight_b", fmt(weight_b));
  kv.set("lr", fmt(adam.lr));
  kv.set("lr_final", fmt(lr_final));
  kv.set("beta1", fmt(adam.beta1));
  kv.set("beta2", fmt(adam.beta2));
  kv.set("eps", fmt(adam.eps));
  kv.set("batch", std::to_string(batch));
  kv.set("epochs", std::to_string(epochs));
  kv.set("steps", std::to_string(steps));
  kv.set("seed", std::to_string(seed));
  kv.set("clip_norm", fmt(clip_norm));
  kv.set("checkpoint_every", std::to_string(checkpoint_every));
  kv.set("threads", std::to_string(threads));
  kv.set("deterministic", deterministic ? "true" : "false");
}

void TrainConfig::validate() const {
  codec.validate();
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(ErrorCode::kConfig, "lambda must be finite and >= 0");
  if (!(weight_a > 0.0) || !(weight_b >= 0.0)) throw Error(ErrorCode::kConfig, "weights need a > 0 and b >= 0");
  if (!(adam.lr > 0.0)) throw Error(ErrorCode::kConfig, "lr must be positive");
  if (lr_final > adam.lr) throw Error(ErrorCode::kConfig, "lr_final must not exceed lr");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw Error(ErrorCode::kConfig, "Adam betas must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw Error(ErrorCode::kConfig, "eps must be positive");
  if (batch < 1) throw Error(ErrorCode::kConfig, "batch must be >= 1");
  if (epochs < 1) throw Error(ErrorCode::kConfig, "epochs must be >= 1");
  if (!(clip_norm >= 0.0)) throw Error(ErrorCode::kConfig, "clip_norm must be >= 0");
  if (threads < 1) throw Error(ErrorCode::kConfig, "threads must be >= 1");
}

std::size_t TrainConfig::total_steps(std::size_t dataset_size) const {
  if (steps > 0) return steps;
  const std::size_t per_epoch = (dataset_size + batch - 1) / batch;
  return epochs * std::max<std::size_t>(per_epoch, 1);
}

double TrainConfig::learning_rate(std::size_t step, std::size_t total) const {
  if (lr_final < 0.0 || total <= 1) return adam.lr;
  const double t = static_cast<double>(step) / static_cast<double>(total - 1);
  return lr_final + 0.5 * (adam.lr - lr_final) * (1.0 + std::cos(M_PI * t));
}

// ---- log ---------------------------------------------------------------

void TrainLog::write_csv(std::ostream& out) const {
  out << "step,D,R_bits,R_weighted,L,wall_time\n";
  for (const auto& r : rows) {
    out << r.step << ',' << fmt(r.distortion) << ',' << fmt(r.rate_bits) << ',' << fmt(r.rate_weighted) << ','
        << fmt(r.loss) << ',' << fmt(r.wall_time) << '\n';
  }
}

void TrainLog::save_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  write_csv(out);
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

// ---- training ----------------------------------------------------------

namespace {

ad::Var objective(ad::Tape& tape, const CodecNetwork& net, const ad::ParamStore& params, const PointCloud& cloud,
                  const EncoderPlan& plan, const TrainConfig& cfg, const WeightSchedule& schedule,
                  std::uint64_t noise_seed, ItemLoss* terms) {
  ad::Var y = net.encode(tape, params, cloud, plan);
  ad::Var y_noisy = noisy_quantize(y, noise_seed);
  ad::Var log_p = log_likelihood(y_noisy, tape.parameter(params, kLocationParam), tape.parameter(params, kScaleParam));
  ad::Var rate_w = weighted_rate(log_p, schedule);
  ad::Var recon = net.decode(tape, params, y_noisy);
  ad::Var dist = cfg.distortion == Distortion::kChamfer ? chamfer_loss(recon, cloud) : emd_loss(recon, cloud);
  ad::Var loss = ad::add(dist, ad::scale(rate_w, cfg.lambda));
  if (terms) {
    double sum_log_p = 0.0;
    for (const double v : log_p.value().values()) sum_log_p += v;
    terms->distortion = dist.value().item();
    terms->rate_bits = -sum_log_p * kBitsPerNat;
    terms->rate_weighted = rate_w.value().item();
    terms->loss = loss.value().item();
  }
  return loss;
}

}  // namespace

std::uint64_t training_noise_seed(std::uint64_t seed, std::size_t step, std::size_t slot) {
  return mix_seed(seed ^ kNoiseSalt, step, slot);
}

ad::Var item_objective(ad::Tape& tape, const CodecNetwork& net, const ad::ParamStore& params,
                       const PointCloud& cloud, const TrainConfig& cfg, const WeightSchedule& schedule,
                       std::uint64_t noise_seed, ItemLoss* terms) {
  return objective(tape, net, params, cloud, net.plan(cloud), cfg, schedule, noise_seed, terms);
}

TrainResult train(const std::vector<PointCloud>& dataset, const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  if (dataset.empty()) throw Error(ErrorCode::kConfig, "train: empty dataset");
  const auto start = std::chrono::steady_clock::now();

  const CodecNetwork net(cfg.codec);
  std::vector<PointCloud> clouds;
  std::vector<EncoderPlan> plans;
  clouds.reserve(dataset.size());
  for (const auto& pc : dataset) {
    validate(pc);
    clouds.push_back(normalize(pc).first);
    plans.push_back(net.plan(clouds.back()));
  }

  ad::ParamStore params;
  net.init_params(params, cfg.seed);
  const WeightSchedule schedule = WeightSchedule::make(cfg.weight_a, cfg.weight_b, cfg.codec.encoder.latent);
  BatchSampler sampler(clouds.size(), cfg.seed);
  const std::size_t total = cfg.total_steps(clouds.size());
  const std::size_t threads = cfg.deterministic ? 1 : cfg.threads;

  TrainLog log;
  for (std::size_t step = 0; step < total; ++step) {
    const auto batch = sampler.next(cfg.batch);
    const std::size_t b = batch.size();
    std::vector<ad::Gradients> grads(b);
    std::vector<ItemLoss> terms(b);
    const auto run_item = [&](std::size_t j) {
      ad::Tape tape;
      ad::Var loss = objective(tape, net, params, clouds[batch[j]], plans[batch[j]], cfg, schedule,
                               training_noise_seed(cfg.seed, step, j),
                               &terms[j]);
      if (std::isfinite(terms[j].loss)) grads[j] = tape.backward(loss);
    };
    if (threads <= 1 || b == 1) {
      for (std::size_t j = 0; j < b; ++j) run_item(j);
    } else {
      const std::size_t workers = std::min(threads, b);
      std::vector<std::thread> pool;
      std::vector<std::exception_ptr> errors(workers);
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t j = w; j < b; j += workers) run_item(j);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      for (auto& t : pool) t.join();
      for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
    }

    TrainLogRow row;
    row.step = step;
    for (std::size_t j = 0; j < b; ++j) {
      if (!std::isfinite(terms[j].loss)) {
        std::ostringstream msg;
        msg << "non-finite loss at step " << step << " (item " << batch[j] << "): D=" << terms[j].distortion
            << " R_bits=" << terms[j].rate_bits << " R_weighted=" << terms[j].rate_weighted;
        throw Error(ErrorCode::kNumeric, msg.str());
      }
      row.distortion += terms[j].distortion;
      row.rate_bits += terms[j].rate_bits;
      row.rate_weighted += terms[j].rate_weighted;
      params.accumulate(grads[j], 1.0 / static_cast<double>(b));
    }
    row.distortion /= static_cast<double>(b);
    row.rate_bits /= static_cast<double>(b);
    row.rate_weighted /= static_cast<double>(b);
    row.loss = row.distortion + cfg.lambda * row.rate_weighted;

    if (cfg.clip_norm > 0.0) params.clip_grad_norm(cfg.clip_norm);
    ad::AdamConfig adam = cfg.adam;
    adam.lr = cfg.learning_rate(step, total);
    params.adam_step(adam);
    if (!cfg.deterministic) {
      row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    log.rows.push_back(row);
    if (hooks.on_step) hooks.on_step(row);
    if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 && hooks.on_checkpoint) {
      hooks.on_checkpoint(step + 1, CodecModel(cfg.codec, params));
    }
  }
  return TrainResult{CodecModel(cfg.codec, std::move(params)), std::move(log)};
}

// ---- data --------------------------------------------------------------

std::vector<PointCloud> load_dataset(const std::string& source) {
  if (is_synth_spec(source)) return synth_dataset(parse_synth_spec(source));
  const std::filesystem::path path(source);
  std::error_code ec;
  if (std::filesystem::is_directory(path, ec)) {
    std::vector<PointCloud> out;
    for (const auto& f : list_cloud_files(path)) out.push_back(load_cloud(f));
    if (out.empty()) throw Error(ErrorCode::kIo, "no .ply/.xyz/.txt files in " + source);
    return out;
  }
  if (!std::filesystem::exists(path, ec)) throw Error(ErrorCode::kIo, "no such file or directory: " + source);
  return {load_cloud(path)};
}

// ---- evaluation --------------------------------------------------------

RdTable evaluate(const CodecModel& model, const std::vector<PointCloud>& dataset, std::vector<std::size_t> truncations,
                 const MetricOptions& opts) {
  if (dataset.empty()) throw Error(ErrorCode::kConfig, "evaluate: empty dataset");
  std::sort(truncations.begin(), truncations.end());
  truncations.erase(std::unique(truncations.begin(), truncations.end()), truncations.end());
  for (const auto k : truncations) {
    if (k < 1 || k > model.latent()) {
      throw Error(ErrorCode::kRange, "truncation point " + std::to_string(k) + " outside [1, " +
                                         std::to_string(model.latent()) + "]");
    }
  }
  std::vector<std::vector<Point3>> normals;
  for (const auto& pc : dataset) normals.push_back(estimate_normals(pc, std::min(kDefaultNormalNeighbors, pc.size())));

  RdTable table;
  for (const auto k : truncations) {
    RdRow row{"learned", k, 0.0, {}};
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const Bitstream bs = compress(model, dataset[i], k);
      const PointCloud recon = decompress(model, bs);
      PairRow pair{"learned", k, i, payload_bpp(bs), evaluate_metrics(dataset[i], recon, normals[i], opts)};
      row.bpp += pair.bpp;
      add_into(row.metrics, pair.metrics);
      table.pairs.push_back(pair);
    }
    const auto n = static_cast<double>(dataset.size());
    row.bpp /= n;
    row.metrics = divided(row.metrics, n);
    table.rows.push_back(row);
  }
  return table;
}

RdTable evaluate_octree(const std::vector<PointCloud>& dataset, std::vector<int> depths, const MetricOptions& opts) {
  if (dataset.empty()) throw Error(ErrorCode::kConfig, "evaluate_octree: empty dataset");
  std::sort(depths.begin(), depths.end());
  depths.erase(std::unique(depths.begin(), depths.end()), depths.end());
  std::vector<std::vector<Point3>> normals;
  for (const auto& pc : dataset) normals.push_back(estimate_normals(pc, std::min(kDefaultNormalNeighbors, pc.size())));

  RdTable table;
  for (const int depth : depths) {
    RdRow row{"octree", static_cast<std::size_t>(depth), 0.0, {}};
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const auto [normalized, record] = normalize(dataset[i]);
      const OctreeCode code = octree_encode(normalized, depth);
      const PointCloud recon = denormalize(octree_decode(code), record);
      // Octree output rarely matches the input size; EMD is then NaN.
      PairRow pair{"octree", row.parameter, i, octree_bpp(code, dataset[i].size()),
                   evaluate_metrics(dataset[i], recon, normals[i], opts)};
      row.bpp += pair.bpp;
      add_into(row.metrics, pair.metrics);
      table.pairs.push_back(pair);
    }
    const auto n = static_cast<double>(dataset.size());
    row.bpp /= n;
    row.metrics = divided(row.metrics, n);
    table.rows.push_back(row);
  }
  return table;
}

void write_rd_csv(std::ostream& out, const std::vector<RdRow>& rows) {
  out << "codec,k_or_depth,bpp,cd,emd,fscore,p2p,p2plane\n";
  for (const auto& r : rows) {
    out << r.codec << ',' << r.parameter << ',' << fmt(r.bpp) << ',';
    write_metrics(out, r.metrics);
    out << '\n';
  }
}

void write_pairs_csv(std::ostream& out, const std::vector<PairRow>& rows) {
  out << "codec,k_or_depth,item,bpp,cd,emd,fscore,p2p,p2plane\n";
  for (const auto& r : rows) {
    out << r.codec << ',' << r.parameter << ',' << r.item << ',' << fmt(r.bpp) << ',';
    write_metrics(out, r.metrics);
    out << '\n';
  }
}

}  // namespace vrpc
