// tgsample: synthetic data generation, training, evaluation and benchmarking
// for temporal link prediction with pluggable neighbor samplers.
//
// Exit codes: 0 ok, 1 runtime failure, 2 usage error.

#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "tgsample/run.hpp"

namespace {

struct FlagSpec {
  const char* flag;
  const char* key;
  const char* help;
};

// flags shared by every subcommand; each maps onto a config key
constexpr FlagSpec kFlags[] = {
    {"--data", "data", "input CSV (src,dst,t[,label][,features...])"},
    {"--synth", "synth", "generated dataset: thm1 | thm2 | lemma1 | uci | workload"},
    {"--synth-k", "synth_k", "thm1 set size or lemma1 truncation size"},
    {"--horizon", "horizon", "time steps of a generated dataset"},
    {"--nodes", "nodes", "workload node count"},
    {"--events", "events", "workload event count"},
    {"--strategy", "strategy", "truncation | uniform | nlb | flash"},
    {"--backbone", "backbone", "attn_lite | mixer_lite"},
    {"--k", "k", "neighbors kept per node"},
    {"--n-pool", "n_pool", "FLASH candidate pool N (0 = whole history)"},
    {"--d-m", "d_m", "width of the learnable node features"},
    {"--d-z", "d_z", "backbone embedding width"},
    {"--d-h", "d_h", "FLASH hidden width"},
    {"--d-time", "d_time", "time-encoding width"},
    {"--time-encoding", "time_encoding", "auto | on | off"},
    {"--seed", "seed", "seed (falls back to TGSAMPLE_SEED)"},
    {"--epochs", "epochs", "maximum training epochs"},
    {"--patience", "patience", "early-stopping patience in epochs"},
    {"--batch-size", "batch_size", "events per optimizer step"},
    {"--lr", "lr", "Adam learning rate"},
    {"--lambda-rank", "lambda_rank", "weight of the ranking loss"},
    {"--mode", "mode", "transductive | inductive"},
    {"--inductive-frac", "inductive_frac", "share of nodes held out in inductive mode"},
    {"--out", "out", "output directory"},
    {"--threads", "threads", "FLASH scoring threads"},
    {"--checkpoint", "checkpoint", "eval: directory of a training run"},
    {"--split", "split", "eval: train | val | test"},
    {"--dump-probs", "dump_probs", "eval: write pair probabilities to this CSV"},
    {"--repetitions", "repetitions", "bench: timed repetitions (median reported)"},
    {"--bench-events", "bench_events", "bench: events predicted per pass (0 = all)"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"temporal link prediction with pluggable neighbor sampling"};
  app.require_subcommand(1);
  std::string config_path;
  std::map<std::string, std::string> values;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value config file; flags take precedence");
    for (const auto& f : kFlags) sub->add_option(f.flag, values[f.key], f.help);
  };
  auto* synth = app.add_subcommand("synth", "write a generated dataset (and its evaluation pairs) as CSV");
  auto* train = app.add_subcommand("train", "train, select on validation AP, evaluate on test");
  auto* eval = app.add_subcommand("eval", "evaluate a saved training run");
  auto* bench = app.add_subcommand("bench", "throughput per sampling strategy");
  for (auto* sub : {synth, train, eval, bench}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto* active = app.get_subcommands().front();
  const auto command = active->get_name();
  tgsample::KeyValues flags;
  for (const auto& f : kFlags) {
    if (active->count(f.flag) > 0) flags[f.key] = values[f.key];
  }

  tgsample::RunConfig cfg;
  try {
    cfg = tgsample::resolve_config(config_path, flags);
    cfg.validate(command);
  } catch (const tgsample::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (command == "synth") {
      tgsample::cmd_synth(cfg, std::cout);
    } else if (command == "train") {
      tgsample::cmd_train(cfg, std::cout);
    } else if (command == "eval") {
      std::filesystem::create_directories(cfg.out);
      std::ofstream jsonl(std::filesystem::path(cfg.out) / "eval.jsonl");
      tgsample::cmd_eval(cfg, jsonl, std::cout);
    } else {
      std::filesystem::create_directories(cfg.out);
      std::ofstream jsonl(std::filesystem::path(cfg.out) / "bench.jsonl");
      tgsample::cmd_bench(cfg, jsonl, std::cout);
    }
  } catch (const tgsample::Error& e) {
    std::cerr << "error [" << tgsample::to_string(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
