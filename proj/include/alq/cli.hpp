#pragma once

// Command-line driver: synth, train, quantize, eval, sweep, report.
//
// Exit codes: 0 success, 1 validation error (bad flags, config, inputs),
// 2 runtime or numeric failure. Every successful command writes a JSON
// manifest (config digest, seed, versions, input/output hashes).

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "alq/bitpack.hpp"
#include "alq/digest.hpp"
#include "alq/ecgnet.hpp"
#include "alq/error.hpp"
#include "alq/eval.hpp"
#include "alq/qinfer.hpp"
#include "alq/quantizer.hpp"
#include "alq/signal_data.hpp"

namespace alq::cli {

inline constexpr const char* kVersion = "0.1.0";

namespace detail {

using nlohmann::json;

/// Raised for user-facing validation failures (exit code 1).
class UsageError : public Error {
public:
  using Error::Error;
};

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("invalid JSON in " + path + ": " + e.what());
  }
}

inline void require_file(const std::string& path, const std::string& flag) {
  if (!std::filesystem::is_regular_file(path)) throw UsageError(flag + ": no such file " + path);
}

struct Manifest {
  std::string command;
  std::vector<std::string> args;
  std::uint64_t seed = 0;
  std::string config_digest;
  json config = json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  json results = json::object();

  void write(const std::string& path) const {
    json j;
    j["command"] = command;
    j["args"] = args;
    j["seed"] = seed;
    j["config_digest"] = config_digest;
    j["config"] = config;
    j["versions"] = {{"alq", kVersion},
                     {"checkpoint_format", kCheckpointVersion},
                     {"quant_format", kQuantFormatVersion}};
    json in = json::object();
    for (const auto& p : inputs) in[p] = sha256_file(p);
    j["inputs"] = in;
    json out = json::object();
    for (const auto& p : outputs) out[p] = sha256_file(p);
    j["outputs"] = out;
    j["results"] = results;
    io::write_text(path, j.dump(2) + "\n");
  }
};

inline Dataset load_normalized(const std::string& path, const std::string& format) {
  return normalize(load_dataset(path, parse_data_format(format)));
}

inline std::string read_magic(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char m[4] = {};
  in.read(m, 4);
  return std::string(m, static_cast<std::size_t>(in.gcount()));
}

inline std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(what + ": cannot parse '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError(what + ": empty list");
  return out;
}

inline TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "epochs") c.epochs = value.get<int>();
      else if (key == "batch_size") c.batch_size = value.get<int>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "optimizer") {
        const auto s = value.get<std::string>();
        if (s == "adam") c.optimizer = OptimizerKind::adam;
        else if (s == "sgd") c.optimizer = OptimizerKind::sgd;
        else throw ConfigError("optimizer must be adam or sgd");
      } else {
        throw ConfigError("unknown train config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid train config: ") + e.what());
  }
  return c;
}

inline json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"seed", c.seed},
          {"optimizer", c.optimizer == OptimizerKind::adam ? "adam" : "sgd"}};
}

inline json to_json(const PipelineReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"recon_error_init", r.recon_error_init},
          {"recon_error_pruned", r.recon_error_pruned},
          {"recon_error_final", r.recon_error_final},
          {"calib_loss_full_precision", num(r.calib_loss_full_precision)},
          {"calib_loss_init", num(r.calib_loss_init)},
          {"calib_loss_pruned", num(r.calib_loss_pruned)},
          {"calib_loss_final", num(r.calib_loss_final)},
          {"coords_initial", r.coords_initial},
          {"coords_removed", r.coords_removed},
          {"avg_bitwidth_initial", r.avg_bitwidth_initial},
          {"avg_bitwidth_final", r.avg_bitwidth_final},
          {"notice", r.notice}};
}

/// Flag overrides applied on top of the JSON config.
struct AlqOverrides {
  std::optional<int> group_size, refine_iters, calib_batch, i_max;
  std::optional<double> prune_rate, target_bitwidth;
  std::optional<std::string> scorer;
  std::optional<std::uint64_t> seed;

  void add_to(CLI::App* app) {
    app->add_option("--group-size", group_size, "Weight group size n");
    app->add_option("--refine-iters", refine_iters, "Alternating refinement rounds");
    app->add_option("--calib-batch", calib_batch, "Calibration records used for scoring");
    app->add_option("--i-max", i_max, "Default per-layer maximum bitwidth");
    app->add_option("--prune-rate", prune_rate, "Fraction of coordinates to prune, in [0,1)");
    app->add_option("--target-bitwidth", target_bitwidth, "Target weight-weighted average bitwidth");
    app->add_option("--scorer", scorer, "magnitude or loss_aware");
    app->add_option("--seed", seed, "Seed for calibration sampling");
  }

  AlqConfig apply(const std::optional<std::string>& config_path) const {
    json j = config_path ? read_json_file(*config_path) : json::object();
    if (group_size) j["group_size"] = *group_size;
    if (refine_iters) j["refine_iters"] = *refine_iters;
    if (calib_batch) j["calib_batch"] = *calib_batch;
    if (i_max) {
      if (!j.contains("i_max") || !j["i_max"].is_object()) j["i_max"] = json::object();
      j["i_max"]["default"] = *i_max;
    }
    if (prune_rate && target_bitwidth) throw UsageError("give either --prune-rate or --target-bitwidth, not both");
    if (prune_rate) j["prune"] = {{"rate", *prune_rate}};
    if (target_bitwidth) j["prune"] = {{"target_avg_bitwidth", *target_bitwidth}};
    if (scorer) j["scorer"] = *scorer;
    if (seed) j["seed"] = *seed;
    return alq_config_from_json(j);
  }
};

}  // namespace detail

/// Parses argv and runs one command. Diagnostics go to `err`.
inline int run(const std::vector<std::string>& argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace detail;
  CLI::App app{"Adaptive loss-aware quantization toolkit for 1-D CNN ECG classifiers", "alq"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string data_format = "csv";

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic 17-class dataset");
  std::string synth_out, synth_test_out;
  int n_per_class = 40;
  std::uint64_t synth_seed = 0;
  double noise = 0.0, train_fraction = 0.8;
  synth->add_option("--out", synth_out, "Dataset file (all records, or the train split with --test-out)")->required();
  synth->add_option("--test-out", synth_test_out, "Write a stratified test split here");
  synth->add_option("--n-per-class", n_per_class, "Records per class");
  synth->add_option("--seed", synth_seed, "Noise and split seed");
  synth->add_option("--noise", noise, "Gaussian noise standard deviation");
  synth->add_option("--train-fraction", train_fraction, "Train share when splitting");
  synth->add_option("--format", data_format, "csv or raw-f32");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a full-precision network");
  std::string train_data, train_out;
  std::optional<std::string> train_config_path;
  std::optional<int> epochs, batch_size;
  std::optional<double> lr;
  std::optional<std::uint64_t> train_seed;
  std::optional<std::string> optimizer;
  train_cmd->add_option("--data", train_data, "Training dataset")->required();
  train_cmd->add_option("--out", train_out, "Checkpoint path (ALQF)")->required();
  train_cmd->add_option("--config", train_config_path, "Training JSON config");
  train_cmd->add_option("--epochs", epochs);
  train_cmd->add_option("--batch-size", batch_size);
  train_cmd->add_option("--lr", lr);
  train_cmd->add_option("--seed", train_seed);
  train_cmd->add_option("--optimizer", optimizer, "adam or sgd");
  train_cmd->add_option("--format", data_format, "csv or raw-f32");

  // quantize
  auto* quant_cmd = app.add_subcommand("quantize", "Quantize a checkpoint into an ALQQ model");
  std::string quant_model, quant_out;
  std::optional<std::string> quant_config, quant_calib;
  AlqOverrides quant_over;
  quant_cmd->add_option("--model", quant_model, "Full-precision checkpoint (ALQF)")->required();
  quant_cmd->add_option("--out", quant_out, "Quantized model path (ALQQ)")->required();
  quant_cmd->add_option("--config", quant_config, "ALQ JSON config");
  quant_cmd->add_option("--calib", quant_calib, "Calibration dataset (required for loss_aware)");
  quant_cmd->add_option("--format", data_format, "csv or raw-f32");
  quant_over.add_to(quant_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate an ALQF or ALQQ model");
  std::string eval_model, eval_data, eval_out = "alq_eval";
  eval_cmd->add_option("--model", eval_model, "ALQF checkpoint or ALQQ model")->required();
  eval_cmd->add_option("--data", eval_data, "Test dataset")->required();
  eval_cmd->add_option("--out", eval_out, "Output directory");
  eval_cmd->add_option("--format", data_format, "csv or raw-f32");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Prune-rate sweep");
  std::string sweep_model, sweep_calib, sweep_out = "alq_sweep", sweep_rates = "0,0.25,0.5,0.75,0.95";
  std::optional<std::string> sweep_config, sweep_test;
  AlqOverrides sweep_over;
  sweep_cmd->add_option("--model", sweep_model, "Full-precision checkpoint (ALQF)")->required();
  sweep_cmd->add_option("--calib", sweep_calib, "Calibration dataset")->required();
  sweep_cmd->add_option("--test", sweep_test, "Test dataset for accuracy");
  sweep_cmd->add_option("--config", sweep_config, "ALQ JSON config");
  sweep_cmd->add_option("--rates", sweep_rates, "Comma-separated ascending prune rates");
  sweep_cmd->add_option("--out", sweep_out, "Output directory");
  sweep_cmd->add_option("--format", data_format, "csv or raw-f32");
  sweep_over.add_to(sweep_cmd);

  // report
  auto* report_cmd = app.add_subcommand("report", "Memory report for an ALQQ model or injected bitwidths");
  std::optional<std::string> report_model, report_bitwidths;
  std::string report_out = "alq_report";
  report_cmd->add_option("--model", report_model, "Quantized model (ALQQ)");
  report_cmd->add_option("--bitwidths", report_bitwidths,
                         "Comma-separated per-layer average bitwidths for the default network");
  report_cmd->add_option("--out", report_out, "Output directory");

  std::vector<std::string> args(argv.rbegin(), argv.rend());
  if (!args.empty()) args.pop_back();  // program name
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 1;
  }

  Manifest manifest;
  manifest.args.assign(argv.begin() + (argv.empty() ? 0 : 1), argv.end());
  try {
    if (*synth) {
      manifest.command = "synth";
      const auto fmt = parse_data_format(data_format);
      auto ds = synth_generate(n_per_class, synth_seed, noise);
      manifest.seed = synth_seed;
      manifest.config = {{"n_per_class", n_per_class}, {"noise", noise}, {"format", data_format}};
      if (!synth_test_out.empty()) {
        auto [tr, te] = split(ds, {train_fraction, synth_seed, true});
        save_dataset(tr, synth_out, fmt);
        save_dataset(te, synth_test_out, fmt);
        manifest.outputs = {synth_out, synth_test_out};
        manifest.config["train_fraction"] = train_fraction;
      } else {
        save_dataset(ds, synth_out, fmt);
        manifest.outputs = {synth_out};
      }
      manifest.config_digest = sha256_hex(manifest.config.dump());
      manifest.write(synth_out + ".manifest.json");
      return 0;
    }

    if (*train_cmd) {
      manifest.command = "train";
      require_file(train_data, "--data");
      TrainConfig tc = train_config_path ? train_config_from_json(read_json_file(*train_config_path), {}) : TrainConfig{};
      if (epochs) tc.epochs = *epochs;
      if (batch_size) tc.batch_size = *batch_size;
      if (lr) tc.learning_rate = *lr;
      if (train_seed) tc.seed = *train_seed;
      if (optimizer) tc = train_config_from_json({{"optimizer", *optimizer}}, tc);
      tc.validate();
      const auto data = load_normalized(train_data, data_format);
      auto result = train(init_network(default_ecgnet_spec(), tc.seed), data, tc);
      save_checkpoint(result.network, train_out);
      manifest.seed = tc.seed;
      manifest.config = to_json(tc);
      manifest.config_digest = sha256_hex(manifest.config.dump());
      manifest.inputs = {train_data};
      manifest.outputs = {train_out};
      manifest.results = {{"epoch_loss", result.epoch_loss}};
      manifest.write(train_out + ".manifest.json");
      out << "final epoch loss " << result.epoch_loss.back() << "\n";
      return 0;
    }

    if (*quant_cmd) {
      manifest.command = "quantize";
      require_file(quant_model, "--model");
      if (quant_config) require_file(*quant_config, "--config");
      const AlqConfig cfg = quant_over.apply(quant_config);
      Dataset calib;
      if (quant_calib) {
        require_file(*quant_calib, "--calib");
        calib = load_normalized(*quant_calib, data_format);
      } else if (cfg.scorer == Scorer::loss_aware) {
        throw UsageError("loss_aware scoring needs --calib");
      }
      const auto net = load_checkpoint(quant_model);
      auto result = alq_pipeline(net, calib, cfg);
      serialize(result.model, quant_out);
      const auto mem = memory_report(result.model);
      io::write_text(quant_out + ".memory.txt", memory_table(mem));
      manifest.seed = cfg.seed;
      manifest.config = to_json(cfg);
      manifest.config_digest = config_digest(cfg);
      manifest.inputs = {quant_model};
      if (quant_calib) manifest.inputs.push_back(*quant_calib);
      manifest.outputs = {quant_out, quant_out + ".memory.txt"};
      manifest.results = {{"pipeline", to_json(result.report)}, {"memory", alq::to_json(mem)}};
      manifest.write(quant_out + ".manifest.json");
      if (!result.report.notice.empty()) err << "notice: " << result.report.notice << "\n";
      out << memory_table(mem);
      return 0;
    }

    if (*eval_cmd) {
      manifest.command = "eval";
      require_file(eval_model, "--model");
      require_file(eval_data, "--data");
      const auto data = load_normalized(eval_data, data_format);
      ReportBundle bundle;
      const auto magic = read_magic(eval_model);
      if (magic == "ALQQ") {
        const auto model = deserialize(eval_model);
        bundle.evaluation = evaluate(model, data);
        bundle.memory = memory_report(model);
      } else if (magic == "ALQF") {
        bundle.evaluation = evaluate(load_checkpoint(eval_model), data);
      } else {
        throw FormatError("bad magic", 0);
      }
      manifest.inputs = {eval_model, eval_data};
      manifest.outputs = emit_reports(bundle, eval_out);
      manifest.results = {{"oa", bundle.evaluation->metrics.oa},
                          {"sen", bundle.evaluation->metrics.sen},
                          {"spe", bundle.evaluation->metrics.spe}};
      manifest.write((std::filesystem::path(eval_out) / "manifest.json").string());
      out << "OA " << bundle.evaluation->metrics.oa << "%  Sen " << bundle.evaluation->metrics.sen << "%  Spe "
          << bundle.evaluation->metrics.spe << "%\n";
      return 0;
    }

    if (*sweep_cmd) {
      manifest.command = "sweep";
      require_file(sweep_model, "--model");
      require_file(sweep_calib, "--calib");
      if (sweep_test) require_file(*sweep_test, "--test");
      if (sweep_config) require_file(*sweep_config, "--config");
      const AlqConfig cfg = sweep_over.apply(sweep_config);
      const auto rates = parse_list(sweep_rates, "--rates");
      const auto net = load_checkpoint(sweep_model);
      const auto calib = load_normalized(sweep_calib, data_format);
      const Dataset test = sweep_test ? load_normalized(*sweep_test, data_format) : Dataset{};
      ReportBundle bundle;
      bundle.sweep = sweep(net, calib, test, rates, cfg);
      manifest.seed = cfg.seed;
      manifest.config = to_json(cfg);
      manifest.config["rates"] = rates;
      manifest.config_digest = sha256_hex(manifest.config.dump());
      manifest.inputs = {sweep_model, sweep_calib};
      if (sweep_test) manifest.inputs.push_back(*sweep_test);
      manifest.outputs = emit_reports(bundle, sweep_out);
      manifest.write((std::filesystem::path(sweep_out) / "manifest.json").string());
      out << sweep_csv(bundle.sweep);
      return 0;
    }

    if (*report_cmd) {
      manifest.command = "report";
      if (report_model.has_value() == report_bitwidths.has_value()) {
        throw UsageError("report needs exactly one of --model or --bitwidths");
      }
      ReportBundle bundle;
      if (report_model) {
        require_file(*report_model, "--model");
        bundle.memory = memory_report(deserialize(*report_model));
        manifest.inputs = {*report_model};
      } else {
        const auto bw = parse_list(*report_bitwidths, "--bitwidths");
        bundle.memory = memory_report_from_bitwidths(default_ecgnet_spec(), bw);
        manifest.config = {{"bitwidths", bw}};
        manifest.config_digest = sha256_hex(manifest.config.dump());
      }
      manifest.outputs = emit_reports(bundle, report_out);
      manifest.write((std::filesystem::path(report_out) / "manifest.json").string());
      out << memory_table(*bundle.memory);
      return 0;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const IngestError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace alq::cli
