// Command-line front end: train, compress, decompress, eval.
#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "vrpc/bytes.hpp"
#include "vrpc/codec.hpp"
#include "vrpc/config.hpp"
#include "vrpc/error.hpp"
#include "vrpc/trainer.hpp"

namespace {

using vrpc::Error;
using vrpc::ErrorCode;

// "8,16,24" or "start:stop:step" segments, comma separated.
std::vector<std::size_t> parse_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find(',', pos);
    if (end == std::string::npos) end = text.size();
    const std::string item = text.substr(pos, end - pos);
    pos = end + 1;
    if (item.empty()) continue;
    if (item.find(':') == std::string::npos) {
      const auto v = vrpc::parse_size_list(item);
      out.insert(out.end(), v.begin(), v.end());
      continue;
    }
    std::string spec = item;
    for (char& c : spec) c = c == ':' ? ',' : c;
    const auto parts = vrpc::parse_size_list(spec);
    if (parts.size() != 3 || parts[2] == 0 || parts[1] < parts[0]) {
      throw Error(ErrorCode::kConfig, "bad range '" + item + "' (expected start:stop:step)");
    }
    for (std::size_t v = parts[0]; v <= parts[1]; v += parts[2]) out.push_back(v);
  }
  return out;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  return out;
}

struct TrainArgs {
  std::string config, data, out, log;
  std::vector<std::string> overrides;
  std::size_t progress = 0;
};

int run_train(const TrainArgs& a) {
  vrpc::KeyValues kv;
  if (!a.config.empty()) kv = vrpc::KeyValues::load(a.config);
  for (const auto& o : a.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kConfig, "--set expects key=value, got '" + o + "'");
    const auto parsed = vrpc::KeyValues::parse(o.substr(0, eq) + " = " + o.substr(eq + 1));
    for (const auto& [k, v] : parsed.entries()) kv.set(k, v);
  }
  if (!kv.has("threads")) {
    if (const char* env = std::getenv("VRPC_THREADS")) kv.set("threads", env);
  }
  const auto cfg = vrpc::TrainConfig::from_keys(kv);
  const auto dataset = vrpc::load_dataset(a.data);

  vrpc::TrainHooks hooks;
  if (a.progress > 0) {
    hooks.on_step = [&](const vrpc::TrainLogRow& r) {
      if ((r.step + 1) % a.progress == 0) {
        std::cerr << "step " << r.step + 1 << " D=" << r.distortion << " R_bits=" << r.rate_bits << " L=" << r.loss
                  << " t=" << r.wall_time << "s\n";
      }
    };
  }
  hooks.on_checkpoint = [&](std::size_t step, const vrpc::CodecModel& m) {
    m.save(a.out + ".step" + std::to_string(step));
  };
  const auto result = vrpc::train(dataset, cfg, hooks);
  result.model.save(a.out);
  if (!a.log.empty()) result.log.save_csv(a.log);
  return 0;
}

// Accepts an element count ("24") or a bpp target ("0.3bpp").
std::size_t resolve_keep(const std::string& keep, const vrpc::CodecModel& model, const vrpc::PointCloud& pc) {
  if (keep.size() > 3 && keep.compare(keep.size() - 3, 3, "bpp") == 0) {
    const std::string num = keep.substr(0, keep.size() - 3);
    char* end = nullptr;
    const double target = std::strtod(num.c_str(), &end);
    if (end != num.c_str() + num.size() || !(target > 0.0)) {
      throw Error(ErrorCode::kRange, "bad bpp target '" + keep + "'");
    }
    return vrpc::keep_for_bpp(model, pc, target);
  }
  const auto v = vrpc::parse_size_list(keep);
  if (v.size() != 1) throw Error(ErrorCode::kRange, "bad --keep value '" + keep + "'");
  return v.front();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variable-rate learned point cloud codec"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a codec model");
  train->add_option("--config", ta.config, "key = value config file");
  train->add_option("--data", ta.data, "Directory, cloud file, or synth:... spec")->required();
  train->add_option("--out", ta.out, "Checkpoint path")->required();
  train->add_option("--log", ta.log, "Training log CSV");
  train->add_option("--set", ta.overrides, "Config override key=value (repeatable)");
  train->add_option("--progress", ta.progress, "Print a status line every N steps");

  std::string model_path, in_path, out_path, keep, format;
  auto* compress = app.add_subcommand("compress", "Compress one point cloud");
  compress->add_option("--model", model_path)->required();
  compress->add_option("--in", in_path)->required();
  compress->add_option("--keep", keep, "Kept latent elements k, or a target like 0.3bpp")->required();
  compress->add_option("--out", out_path)->required();

  auto* decompress = app.add_subcommand("decompress", "Reconstruct a point cloud from a bitstream");
  decompress->add_option("--model", model_path)->required();
  decompress->add_option("--in", in_path)->required();
  decompress->add_option("--out", out_path)->required();
  decompress->add_option("--format", format, "xyz, ply-ascii or ply-binary (default from extension)");

  std::string data, truncations, depths, pairs_out;
  double threshold = vrpc::kDefaultFscoreThreshold;
  auto* eval = app.add_subcommand("eval", "Rate-distortion table over a dataset");
  eval->add_option("--model", model_path);
  eval->add_option("--data", data)->required();
  eval->add_option("--truncations", truncations, "k values, e.g. 8,16,32 or 8:64:8");
  eval->add_option("--baseline-octree", depths, "Octree depths, e.g. 4:9:1");
  eval->add_option("--out", out_path)->required();
  eval->add_option("--pairs-out", pairs_out, "Per-cloud CSV");
  eval->add_option("--fscore-threshold", threshold);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error code=usage exit=2 msg=\"" << e.what() << "\"\n";
    return 2;
  }

  try {
    if (*train) return run_train(ta);
    if (*compress) {
      const auto model = vrpc::CodecModel::load(model_path);
      const auto pc = vrpc::load_cloud(in_path);
      const auto bs = vrpc::compress(model, pc, resolve_keep(keep, model, pc));
      vrpc::write_file_bytes(out_path, vrpc::serialize_bitstream(bs));
      std::cout << "k=" << bs.kept << " bytes=" << vrpc::kBitstreamHeaderBytes + bs.payload.size()
                << " bpp=" << vrpc::payload_bpp(bs) << "\n";
      return 0;
    }
    if (*decompress) {
      const auto model = vrpc::CodecModel::load(model_path);
      const auto bs = vrpc::parse_bitstream(vrpc::read_file_bytes(in_path));
      const auto pc = vrpc::decompress(model, bs);
      const auto fmt = format.empty() ? vrpc::format_for_path(out_path) : vrpc::parse_format(format);
      vrpc::save_cloud(pc, out_path, fmt);
      return 0;
    }
    if (*eval) {
      const auto dataset = vrpc::load_dataset(data);
      vrpc::MetricOptions opts;
      opts.fscore_threshold = threshold;
      vrpc::RdTable table;
      if (!truncations.empty()) {
        if (model_path.empty()) throw Error(ErrorCode::kConfig, "--truncations needs --model");
        table = vrpc::evaluate(vrpc::CodecModel::load(model_path), dataset, parse_list(truncations), opts);
      }
      if (!depths.empty()) {
        std::vector<int> ds;
        for (const auto d : parse_list(depths)) ds.push_back(static_cast<int>(d));
        auto oct = vrpc::evaluate_octree(dataset, ds, opts);
        table.rows.insert(table.rows.end(), oct.rows.begin(), oct.rows.end());
        table.pairs.insert(table.pairs.end(), oct.pairs.begin(), oct.pairs.end());
      }
      if (table.rows.empty()) throw Error(ErrorCode::kConfig, "nothing to evaluate: give --truncations and/or --baseline-octree");
      auto out = open_out(out_path);
      vrpc::write_rd_csv(out, table.rows);
      if (!pairs_out.empty()) {
        auto pairs = open_out(pairs_out);
        vrpc::write_pairs_csv(pairs, table.pairs);
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error code=" << vrpc::to_string(e.code()) << " exit=" << vrpc::exit_status(e.code())
              << " msg=\"" << e.what() << "\"\n";
    return vrpc::exit_status(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error code=internal exit=1 msg=\"" << e.what() << "\"\n";
    return 1;
  }
  return 1;
}
