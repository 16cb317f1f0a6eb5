#pragma once

// Command pipelines behind the tgsample executable: synth, train, eval, bench.
// A RunConfig is assembled from defaults, an optional key=value file, the
// TGSAMPLE_SEED environment variable (seed only, when nothing else sets it)
// and command-line flags, in increasing priority.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tgsample/bench.hpp"
#include "tgsample/config.hpp"
#include "tgsample/dataio.hpp"
#include "tgsample/synthgen.hpp"
#include "tgsample/trainer.hpp"
#include "tgsample/workload.hpp"

namespace tgsample {

/// Invalid configuration; reported before any work starts (exit code 2).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string data;            // CSV path
  std::string synth;           // thm1 | thm2 | lemma1 | uci | workload
  std::size_t synth_k = 2;     // thm1 set size, lemma1 truncation size
  std::size_t horizon = 4000;
  std::size_t nodes = 1000;    // workload only
  std::size_t events = 100000; // workload only
  std::string strategy = "truncation";
  std::string backbone = "attn_lite";
  std::size_t k = 2;
  std::size_t n_pool = 32;
  std::size_t d_m = 16;
  std::size_t d_z = 32;
  std::size_t d_h = 64;
  std::size_t d_time = 8;
  std::string time_encoding = "auto";  // auto: off on proof-paired data
  std::uint64_t seed = 0;
  std::size_t epochs = 100;
  std::size_t patience = 20;
  std::size_t batch_size = 200;
  double lr = 1e-4;
  double lambda_rank = 1.0;
  std::string mode = "transductive";
  double inductive_frac = 0.10;
  std::string out = "out";
  std::size_t threads = 1;
  std::string checkpoint;      // eval: run directory of a training run
  std::string split = "test";  // eval
  std::size_t repetitions = 5; // bench
  std::size_t bench_events = 0;
  std::string dump_probs;      // eval: optional CSV of pair probabilities

  [[nodiscard]] KeyValues to_kv() const {
    auto num = [](auto v) { return std::to_string(v); };
    return {{"data", data},
            {"synth", synth},
            {"synth_k", num(synth_k)},
            {"horizon", num(horizon)},
            {"nodes", num(nodes)},
            {"events", num(events)},
            {"strategy", strategy},
            {"backbone", backbone},
            {"k", num(k)},
            {"n_pool", num(n_pool)},
            {"d_m", num(d_m)},
            {"d_z", num(d_z)},
            {"d_h", num(d_h)},
            {"d_time", num(d_time)},
            {"time_encoding", time_encoding},
            {"seed", num(seed)},
            {"epochs", num(epochs)},
            {"patience", num(patience)},
            {"batch_size", num(batch_size)},
            {"lr", detail::format_double(lr)},
            {"lambda_rank", detail::format_double(lambda_rank)},
            {"mode", mode},
            {"inductive_frac", detail::format_double(inductive_frac)},
            {"out", out},
            {"threads", num(threads)},
            {"repetitions", num(repetitions)},
            {"bench_events", num(bench_events)}};
  }

  /// Applies known keys; unknown keys are a usage error.
  void apply(const KeyValues& kv) {
    for (const auto& [key, value] : kv) set(key, value);
  }

  void set(const std::string& key, const std::string& value) {
    auto as_size = [&](std::size_t& dst) {
      try {
        std::size_t pos = 0;
        const auto v = std::stoull(value, &pos);
        if (pos != value.size() || value.find('-') != std::string::npos) throw std::invalid_argument(value);
        dst = static_cast<std::size_t>(v);
      } catch (const std::exception&) {
        throw UsageError("'" + key + "' expects a non-negative integer, got '" + value + "'");
      }
    };
    auto as_double = [&](double& dst) {
      try {
        std::size_t pos = 0;
        dst = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
      } catch (const std::exception&) {
        throw UsageError("'" + key + "' expects a number, got '" + value + "'");
      }
    };
    if (key == "data") data = value;
    else if (key == "synth") synth = value;
    else if (key == "synth_k") as_size(synth_k);
    else if (key == "horizon") as_size(horizon);
    else if (key == "nodes") as_size(nodes);
    else if (key == "events") as_size(events);
    else if (key == "strategy") strategy = value;
    else if (key == "backbone") backbone = value;
    else if (key == "k") as_size(k);
    else if (key == "n_pool") as_size(n_pool);
    else if (key == "d_m") as_size(d_m);
    else if (key == "d_z") as_size(d_z);
    else if (key == "d_h") as_size(d_h);
    else if (key == "d_time") as_size(d_time);
    else if (key == "time_encoding") time_encoding = value;
    else if (key == "seed") {
      std::size_t s = 0;
      as_size(s);
      seed = s;
    } else if (key == "epochs") as_size(epochs);
    else if (key == "patience") as_size(patience);
    else if (key == "batch_size") as_size(batch_size);
    else if (key == "lr") as_double(lr);
    else if (key == "lambda_rank") as_double(lambda_rank);
    else if (key == "mode") mode = value;
    else if (key == "inductive_frac") as_double(inductive_frac);
    else if (key == "out") out = value;
    else if (key == "threads") as_size(threads);
    else if (key == "checkpoint") checkpoint = value;
    else if (key == "split") split = value;
    else if (key == "repetitions") as_size(repetitions);
    else if (key == "bench_events") as_size(bench_events);
    else if (key == "dump_probs") dump_probs = value;
    else throw UsageError("unknown config key '" + key + "'");
  }

  /// Checks every value against module preconditions.
  void validate(const std::string& command) const {
    auto check = [](bool ok, const std::string& what) {
      if (!ok) throw UsageError(what);
    };
    auto parses = [](auto parse, const std::string& v) {
      try {
        parse(v);
        return true;
      } catch (const Error&) {
        return false;
      }
    };
    check(parses(parse_strategy, strategy), "invalid strategy '" + strategy + "' (truncation|uniform|nlb|flash)");
    check(parses(parse_backbone, backbone), "invalid backbone '" + backbone + "' (attn_lite|mixer_lite)");
    check(time_encoding == "auto" || time_encoding == "on" || time_encoding == "off",
          "time_encoding must be auto, on or off");
    check(mode == "transductive" || mode == "inductive", "mode must be transductive or inductive");
    check(k >= 1, "k must be at least 1");
    check(d_m >= 1 && d_z >= 1 && d_h >= 1, "widths must be positive");
    check(d_time >= 2, "d_time must be at least 2");
    check(batch_size >= 1, "batch_size must be positive");
    check(lr > 0.0, "lr must be positive");
    check(lambda_rank >= 0.0, "lambda_rank must be non-negative");
    check(inductive_frac > 0.0 && inductive_frac < 1.0, "inductive_frac must be in (0, 1)");
    check(threads >= 1, "threads must be at least 1");
    check(repetitions >= 1, "repetitions must be at least 1");
    if (command == "train" || command == "bench" || command == "synth") {
      check(!data.empty() || !synth.empty(), "give --data or --synth");
      check(data.empty() || synth.empty(), "give only one of --data and --synth");
    }
    if (!synth.empty()) {
      check(synth == "uci" || synth == "workload" || parses([](const std::string& s) { parse_synthetic_kind(s); }, synth),
            "invalid synthetic kind '" + synth + "' (thm1|thm2|lemma1|uci|workload)");
    }
    if (command == "train") check(epochs >= 1, "epochs must be at least 1");
    if (command == "eval") {
      check(!checkpoint.empty(), "eval needs --checkpoint");
      check(split == "train" || split == "val" || split == "test", "split must be train, val or test");
    }
  }

  [[nodiscard]] ModelConfig model_config(bool time_encoding_on) const {
    ModelConfig mc;
    mc.strategy = parse_strategy(strategy);
    mc.k = k;
    mc.pool = n_pool;
    mc.d_m = d_m;
    mc.seed = seed;
    mc.threads = threads;
    mc.backbone.variant = parse_backbone(backbone);
    mc.backbone.d_z = d_z;
    mc.backbone.d_time = d_time;
    mc.backbone.time_encoding = time_encoding_on;
    mc.flash.d_hidden = d_h;
    mc.flash.d_time = d_time;
    return mc;
  }

  [[nodiscard]] TrainConfig train_config() const {
    TrainConfig tc;
    tc.batch_size = batch_size;
    tc.lr = lr;
    tc.epochs = epochs;
    tc.patience = patience;
    tc.lambda_rank = lambda_rank;
    tc.mode = mode == "inductive" ? EvalMode::Inductive : EvalMode::Transductive;
    tc.inductive_frac = inductive_frac;
    return tc;
  }

  /// Time encoding resolved for a dataset: auto turns it off on data with
  /// proof-paired negatives, where elapsed times alone reveal the answer.
  [[nodiscard]] bool time_encoding_for(const Dataset& ds) const {
    if (time_encoding == "on") return true;
    if (time_encoding == "off") return false;
    return !ds.has_paired_negatives();
  }
};

/// Defaults, then the config file, then TGSAMPLE_SEED if no seed was set,
/// then flag values.
inline RunConfig resolve_config(const std::string& config_path, const KeyValues& flags) {
  RunConfig cfg;
  KeyValues file;
  if (!config_path.empty()) {
    try {
      file = load_key_values(config_path);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }
  cfg.apply(file);
  if (!file.count("seed") && !flags.count("seed")) {
    if (const char* env = std::getenv("TGSAMPLE_SEED")) cfg.set("seed", env);
  }
  cfg.apply(flags);
  return cfg;
}

inline std::string pairs_path_for(const std::string& csv) {
  std::filesystem::path p(csv);
  return (p.parent_path() / (p.stem().string() + ".pairs.csv")).string();
}

inline Dataset make_dataset(const RunConfig& cfg) {
  if (!cfg.data.empty()) {
    auto ds = load_csv(cfg.data);
    const auto pairs = pairs_path_for(cfg.data);
    if (std::filesystem::exists(pairs)) load_eval_pairs(ds, pairs);
    return ds;
  }
  if (cfg.synth == "uci") return gen_uci_shaped(cfg.seed);
  if (cfg.synth == "workload") {
    WorkloadSpec spec;
    spec.nodes = cfg.nodes;
    spec.events = cfg.events;
    spec.seed = cfg.seed;
    return gen_workload(spec);
  }
  SyntheticSpec spec;
  spec.kind = parse_synthetic_kind(cfg.synth);
  spec.k = cfg.synth_k;
  spec.horizon = cfg.horizon;
  spec.seed = cfg.seed;
  return generate(spec);
}

/// Writes <out>/<name>.csv and, for proof-paired data, <out>/<name>.pairs.csv.
inline std::string cmd_synth(const RunConfig& cfg, std::ostream& log) {
  const auto ds = make_dataset(cfg);
  std::filesystem::create_directories(cfg.out);
  const auto csv = (std::filesystem::path(cfg.out) / (ds.name + ".csv")).string();
  write_csv(ds, csv);
  log << "wrote " << ds.events.size() << " events over " << ds.num_nodes << " nodes to " << csv << "\n";
  if (ds.has_paired_negatives()) {
    const auto pairs = pairs_path_for(csv);
    write_eval_pairs(ds, pairs);
    log << "wrote " << ds.paired_negative.size() << " evaluation pairs to " << pairs << "\n";
  }
  return csv;
}

inline void write_run_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path);
  auto kv = cfg.to_kv();
  if (!cfg.data.empty()) kv["data"] = std::filesystem::absolute(cfg.data).string();
  write_key_values(kv, out);
}

struct TrainOutcome {
  TrainResult result;
  std::vector<EpochRecord> final_records;  // test (and inductive test) metrics
};

/// Trains, keeps the best-validation parameters, evaluates on test and writes
/// metrics.jsonl, run.cfg, split.csv and the best checkpoint into cfg.out.
inline TrainOutcome cmd_train(const RunConfig& cfg, std::ostream& log) {
  const auto ds = make_dataset(cfg);
  std::filesystem::create_directories(cfg.out);
  const std::filesystem::path out(cfg.out);
  write_run_config(cfg, (out / "run.cfg").string());
  Trainer trainer(ds, cfg.model_config(cfg.time_encoding_for(ds)), cfg.train_config());
  write_split_manifest(trainer.split(), (out / "split.csv").string());
  std::ofstream jsonl(out / "metrics.jsonl");
  require(static_cast<bool>(jsonl), ErrorCode::Io, "cannot write metrics.jsonl");
  log << "training " << cfg.strategy << "/" << cfg.backbone << " on " << ds.name << " (" << ds.events.size()
      << " events)\n";
  TrainOutcome outcome;
  outcome.result = trainer.fit(&jsonl);
  nn::save_checkpoint(trainer.model().store(), (out / "best").string());
  const auto epoch = outcome.result.best_epoch;
  outcome.final_records.push_back(trainer.eval_record(SplitName::Test, EvalMode::Transductive, epoch));
  if (trainer.inductive()) outcome.final_records.push_back(trainer.eval_record(SplitName::Test, EvalMode::Inductive, epoch));
  for (const auto& r : outcome.final_records) {
    jsonl << r.to_json().dump() << '\n';
    log << r.split << ": ap=" << r.metrics.ap << " auc=" << r.metrics.auc << " acc=" << r.metrics.acc << "\n";
  }
  log << "best epoch " << epoch << ", checkpoint " << (out / "best").string() << "\n";
  return outcome;
}

/// Rebuilds a training run from <checkpoint>/run.cfg, loads its parameters and
/// evaluates one split. Evaluation flags (split, mode, dump_probs) come from
/// `cfg`.
inline EvalResult cmd_eval(const RunConfig& cfg, std::ostream& jsonl, std::ostream& log) {
  const std::filesystem::path dir(cfg.checkpoint);
  RunConfig run;
  run.apply(load_key_values((dir / "run.cfg").string()));
  const auto ds = make_dataset(run);
  auto tc = run.train_config();
  const auto mode = cfg.mode == "inductive" ? EvalMode::Inductive : EvalMode::Transductive;
  if (mode == EvalMode::Inductive) tc.mode = EvalMode::Inductive;
  Trainer trainer(ds, run.model_config(run.time_encoding_for(ds)), tc);
  nn::load_checkpoint(trainer.model().store(), (dir / "best").string());
  const auto which = parse_split(cfg.split);
  const auto result = trainer.evaluate(which, mode);
  EpochRecord r;
  r.split = std::string(to_string(which)) + (mode == EvalMode::Inductive ? "_inductive" : "");
  r.metrics = result.metrics;
  jsonl << r.to_json().dump() << '\n';
  log << r.split << ": pairs=" << result.metrics.pairs << " ap=" << result.metrics.ap << " auc=" << result.metrics.auc
      << " acc=" << result.metrics.acc << "\n";
  if (!cfg.dump_probs.empty()) {
    std::ofstream probs(cfg.dump_probs);
    require(static_cast<bool>(probs), ErrorCode::Io, "cannot write " + cfg.dump_probs);
    probs << "pair,p_pos,p_neg\n";
    for (std::size_t i = 0; i < result.pos.size(); ++i) {
      probs << i << ',' << detail::format_double(result.pos[i]) << ',' << detail::format_double(result.neg[i]) << '\n';
    }
  }
  return result;
}

inline BenchReport cmd_bench(const RunConfig& cfg, std::ostream& jsonl, std::ostream& table) {
  const auto ds = make_dataset(cfg);
  BenchConfig bc;
  bc.model = cfg.model_config(cfg.time_encoding_for(ds));
  bc.repetitions = cfg.repetitions;
  bc.max_events = cfg.bench_events;
  const auto report = run_bench(ds, bc);
  write_bench_jsonl(report, jsonl);
  write_bench_table(report, table);
  return report;
}

}  // namespace tgsample
