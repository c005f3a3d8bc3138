// Command-line interface: ingestion, training, evaluation, baselines,
// autoregressive rollout and data export.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "mign/checkpoint.hpp"
#include "mign/errors.hpp"
#include "mign/eval.hpp"
#include "mign/gsod.hpp"
#include "mign/healpix.hpp"
#include "mign/train.hpp"

using namespace mign;

namespace {

struct SplitRanges {
  DateRange train{20170101, 20221231};
  DateRange val{20230101, 20231231};
  DateRange test{20240101, 20241231};

  DateRange get(const std::string& name) const {
    if (name == "train") return train;
    if (name == "val") return val;
    if (name == "test") return test;
    throw ConfigError("unknown split: " + name + " (expected train, val or test)");
  }
};

struct CliConfig {
  TrainConfig train;
  ModelConfig model;
  SplitRanges splits;
  bool generalization = false;
  double split_fraction = 0.5;
  std::uint64_t split_seed = 0;
};

void apply_json(CliConfig& cfg, const nlohmann::json& j) {
  auto opt = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  opt("learning_rate", cfg.train.learning_rate);
  opt("batch_size", cfg.train.batch_size);
  opt("max_epochs", cfg.train.max_epochs);
  opt("patience", cfg.train.patience);
  opt("seed", cfg.train.seed);
  opt("generalization", cfg.generalization);
  opt("split_fraction", cfg.split_fraction);
  opt("split_seed", cfg.split_seed);
  auto range = [&](const char* key, DateRange& r) {
    if (j.contains(key)) {
      r.first = j.at(key).at(0).get<int>();
      r.last = j.at(key).at(1).get<int>();
    }
  };
  range("train_range", cfg.splits.train);
  range("val_range", cfg.splits.val);
  range("test_range", cfg.splits.test);
  if (j.contains("model")) {
    const auto& m = j.at("model");
    auto mopt = [&](const char* key, auto& field) {
      if (m.contains(key)) field = m.at(key).get<std::decay_t<decltype(field)>>();
    };
    mopt("mesh_level", cfg.model.mesh_level);
    mopt("k_station_mesh", cfg.model.k_station_mesh);
    mopt("k_mesh_mesh", cfg.model.k_mesh_mesh);
    mopt("sh_degree", cfg.model.sh_degree);
    mopt("hidden", cfg.model.hidden);
    mopt("proc_layers", cfg.model.proc_layers);
    mopt("mlp_hidden_layers", cfg.model.mlp_hidden_layers);
    mopt("edge_distance", cfg.model.edge_distance);
    mopt("use_mesh", cfg.model.use_mesh);
    mopt("encoder_sh", cfg.model.encoder_sh);
    mopt("processor_sh", cfg.model.processor_sh);
    mopt("input_steps", cfg.model.input_steps);
    mopt("output_steps", cfg.model.output_steps);
    if (m.contains("activation"))
      cfg.model.act = activation_from_string(m.at("activation").get<std::string>());
    if (m.contains("aggregation"))
      cfg.model.agg = agg_from_string(m.at("aggregation").get<std::string>());
    if (m.contains("decoder_location"))
      cfg.model.decoder_location =
          decoder_location_from_string(m.at("decoder_location").get<std::string>());
  }
}

RecordStore load_store(const std::string& cache) {
  if (cache.empty()) throw ConfigError("--cache is required for this command");
  return load_record_cache(cache);
}

std::optional<std::set<std::string>> station_filter(const RecordStore& store,
                                                    const CliConfig& cfg, bool unseen_half) {
  if (!cfg.generalization) return std::nullopt;
  const auto [a, b] = split_stations(store, cfg.split_fraction, cfg.split_seed);
  const auto& ids = unseen_half ? b : a;
  return std::set<std::string>(ids.begin(), ids.end());
}

void maybe_write_outputs(MetricsReport& report, const std::string& json_out,
                         const std::string& errors_out, const std::string& format,
                         const std::string& regions_file) {
  if (!regions_file.empty()) {
    regional_breakdown(report, load_regions(regions_file));
  } else if (report.per_region.empty()) {
    regional_breakdown(report, default_regions());
  }
  std::cout << report_table(report);
  if (!json_out.empty()) save_report_json(report, json_out);
  if (!errors_out.empty()) {
    if (format == "geojson")
      export_station_errors_geojson(report, errors_out);
    else
      export_station_errors_csv(report, errors_out);
  }
}

int run(int argc, char** argv) {
  CLI::App app{"mesh interpolation graph network for station forecasts"};
  app.require_subcommand(1);

  bool serial = false;
  app.add_flag("--serial", serial, "run kernels on the serial reference path");

  // ---- ingest ----
  auto* ingest = app.add_subcommand("ingest", "parse GSOD files into a binary cache");
  std::string ingest_dir, ingest_cache;
  ingest->add_option("dir", ingest_dir, "directory of GSOD csv/tar files")->required();
  ingest->add_option("--cache", ingest_cache, "output cache path")->required();

  // ---- shared options ----
  std::string cache, config_path, variable = "MAX", split = "test";
  std::string ckpt_path, json_out, errors_out, errors_format = "csv", regions_file;
  bool per_prediction = false;

  auto add_common = [&](CLI::App* cmd, bool with_split) {
    cmd->add_option("--cache", cache, "record cache from `ingest`");
    cmd->add_option("--config", config_path, "JSON config file");
    if (with_split) cmd->add_option("--split", split, "train|val|test");
  };

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "train a model for one variable");
  std::string train_out, history_out;
  double lr_flag = -1.0;
  int batch_flag = -1, epochs_flag = -1, seed_flag = -1;
  bool gen_flag = false;
  add_common(train_cmd, false);
  train_cmd->add_option("--variable", variable, "MAX|MIN|DEWP|SLP|WDSP|MXSPD");
  train_cmd->add_option("--out", train_out, "checkpoint output path")->required();
  train_cmd->add_option("--history", history_out, "training history CSV path");
  train_cmd->add_option("--learning-rate", lr_flag, "Adam learning rate");
  train_cmd->add_option("--batch-size", batch_flag, "samples per optimizer step");
  train_cmd->add_option("--max-epochs", epochs_flag, "epoch cap");
  train_cmd->add_option("--seed", seed_flag, "initialization and shuffle seed");
  train_cmd->add_flag("--generalization", gen_flag, "train on a seeded half of the stations");

  // ---- evaluate ----
  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint");
  bool eval_gen = false;
  int eval_seed = -1;
  add_common(eval_cmd, true);
  eval_cmd->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
  eval_cmd->add_flag("--generalization", eval_gen, "evaluate on the unseen station half");
  eval_cmd->add_option("--seed", eval_seed, "station split seed");
  eval_cmd->add_option("--regions", regions_file, "regions JSON for the breakdown");
  eval_cmd->add_option("--json", json_out, "write the full report as JSON");
  eval_cmd->add_option("--export-errors", errors_out, "write per-station errors");
  eval_cmd->add_option("--format", errors_format, "csv|geojson for --export-errors");
  eval_cmd->add_flag("--per-prediction", per_prediction, "keep per-prediction rows");

  // ---- rollout ----
  auto* roll_cmd = app.add_subcommand("rollout", "autoregressive multi-day inference");
  int steps = 3;
  add_common(roll_cmd, true);
  roll_cmd->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
  roll_cmd->add_option("--steps", steps, "number of autoregressive steps")->required();
  roll_cmd->add_option("--json", json_out, "write the full report as JSON");

  // ---- baseline ----
  auto* base_cmd = app.add_subcommand("baseline", "parameter-free baselines");
  std::string baseline_name;
  base_cmd->add_option("name", baseline_name, "persistence")->required();
  add_common(base_cmd, true);
  base_cmd->add_option("--variable", variable, "MAX|MIN|DEWP|SLP|WDSP|MXSPD");
  base_cmd->add_option("--json", json_out, "write the full report as JSON");
  base_cmd->add_flag("--per-prediction", per_prediction, "keep per-prediction rows");
  base_cmd->add_option("--regions", regions_file, "regions JSON for the breakdown");

  // ---- export-errors ----
  auto* export_cmd = app.add_subcommand("export-errors", "convert a report to CSV/GeoJSON");
  std::string report_path, export_out;
  export_cmd->add_option("--report", report_path, "report JSON from `evaluate`")->required();
  export_cmd->add_option("--out", export_out, "output path")->required();
  export_cmd->add_option("--format", errors_format, "csv|geojson");

  // ---- mesh-export ----
  auto* mesh_cmd = app.add_subcommand("mesh-export", "write mesh node coordinates as CSV");
  int mesh_level = 3;
  std::string mesh_out;
  mesh_cmd->add_option("--level", mesh_level, "refinement level 0..6");
  mesh_cmd->add_option("--out", mesh_out, "output path (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);
  set_default_exec(serial ? Exec::serial : Exec::openmp);

  CliConfig cfg;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot open config: " + config_path);
    nlohmann::json j;
    in >> j;
    apply_json(cfg, j);
  }

  if (ingest->parsed()) {
    IngestReport report;
    const RecordStore store = ingest_directory(ingest_dir, report);
    save_record_cache(store, ingest_cache, directory_fingerprint(ingest_dir));
    std::cout << report.to_text();
    std::cout << "cached " << store.size() << " records at " << ingest_cache << "\n";
    return 0;
  }

  if (train_cmd->parsed()) {
    if (lr_flag >= 0) cfg.train.learning_rate = lr_flag;
    if (batch_flag > 0) cfg.train.batch_size = batch_flag;
    if (epochs_flag > 0) cfg.train.max_epochs = epochs_flag;
    if (seed_flag >= 0) cfg.train.seed = static_cast<std::uint64_t>(seed_flag);
    if (gen_flag) cfg.generalization = true;

    const Variable var = variable_from_string(variable);
    const RecordStore store = load_store(cache);
    const NormStats stats = compute_norm_stats(store, var, cfg.splits.train);
    const auto filter = station_filter(store, cfg, /*unseen_half=*/false);
    const auto* fp = filter ? &*filter : nullptr;

    const Dataset train_data = build_dataset(store, var, cfg.splits.train,
                                             cfg.model.input_steps, cfg.model.output_steps,
                                             stats, fp);
    const Dataset val_data = build_dataset(store, var, cfg.splits.val, cfg.model.input_steps,
                                           cfg.model.output_steps, stats, fp);
    std::printf("training %s: %zu train samples, %zu val samples\n", variable.c_str(),
                train_data.samples.size(), val_data.samples.size());
    const TrainResult result = train(cfg.train, cfg.model, train_data, val_data);
    save_checkpoint(Checkpoint{result.model, variable, stats}, train_out);
    if (!history_out.empty()) write_history_csv(result.history, history_out);
    std::printf("best validation MSE %.4f at epoch %d; checkpoint: %s\n", result.best_val_mse,
                result.best_epoch, train_out.c_str());
    return 0;
  }

  if (eval_cmd->parsed()) {
    if (eval_gen) cfg.generalization = true;
    if (eval_seed >= 0) cfg.split_seed = static_cast<std::uint64_t>(eval_seed);
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const Variable var = variable_from_string(ckpt.variable);
    const RecordStore store = load_store(cache);
    const auto filter = station_filter(store, cfg, /*unseen_half=*/true);
    const Dataset data = build_dataset(store, var, cfg.splits.get(split),
                                       ckpt.model.cfg.input_steps, ckpt.model.cfg.output_steps,
                                       ckpt.stats, filter ? &*filter : nullptr);
    LatentSpace latent;
    const LatentSpace* shared = nullptr;
    if (ckpt.model.cfg.use_mesh) {
      latent = make_latent_space(build_mesh(ckpt.model.cfg.mesh_level), ckpt.model.cfg);
      shared = &latent;
    }
    EvalOptions opts;
    opts.keep_predictions = per_prediction;
    MetricsReport report = evaluate_model(ckpt.model, shared, data, opts);
    maybe_write_outputs(report, json_out, errors_out, errors_format, regions_file);
    return 0;
  }

  if (roll_cmd->parsed()) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    if (ckpt.model.cfg.multistep())
      throw ConfigError("rollout requires a single-step checkpoint");
    const Variable var = variable_from_string(ckpt.variable);
    const RecordStore store = load_store(cache);
    const Dataset data =
        build_dataset(store, var, cfg.splits.get(split), 1, steps, ckpt.stats, nullptr);
    LatentSpace latent;
    const LatentSpace* shared = nullptr;
    if (ckpt.model.cfg.use_mesh) {
      latent = make_latent_space(build_mesh(ckpt.model.cfg.mesh_level), ckpt.model.cfg);
      shared = &latent;
    }
    EvalOptions opts;
    MetricsReport report = evaluate_rollout(ckpt.model, shared, data, opts);
    maybe_write_outputs(report, json_out, "", errors_format, regions_file);
    return 0;
  }

  if (base_cmd->parsed()) {
    if (baseline_name != "persistence")
      throw ConfigError("unknown baseline: " + baseline_name);
    const Variable var = variable_from_string(variable);
    const RecordStore store = load_store(cache);
    // Physical units directly; persistence needs no normalization.
    const Dataset data =
        build_dataset(store, var, cfg.splits.get(split), 1, 1, NormStats{}, nullptr);
    EvalOptions opts;
    opts.keep_predictions = per_prediction;
    MetricsReport report = evaluate_persistence(data, opts);
    maybe_write_outputs(report, json_out, errors_out, errors_format, regions_file);
    return 0;
  }

  if (export_cmd->parsed()) {
    const MetricsReport report = load_report_json(report_path);
    if (errors_format == "geojson")
      export_station_errors_geojson(report, export_out);
    else if (errors_format == "csv")
      export_station_errors_csv(report, export_out);
    else
      throw ConfigError("unknown format: " + errors_format);
    std::cout << "wrote " << report.per_station.size() << " stations to " << export_out << "\n";
    return 0;
  }

  if (mesh_cmd->parsed()) {
    const HealpixMesh mesh = build_mesh(mesh_level);
    if (mesh_out.empty()) {
      write_mesh_csv(mesh, std::cout);
    } else {
      std::ofstream out(mesh_out, std::ios::trunc);
      if (!out) throw DataError("cannot open for writing: " + mesh_out);
      write_mesh_csv(mesh, out);
    }
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
