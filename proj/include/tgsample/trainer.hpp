#pragma once

// Training and evaluation of a backbone with a pluggable neighbor sampler.
//
// Streaming protocol: events are visited in stream order. Before predicting
// an event at time t, every stream event with time < t is appended to the
// history (and to the NLB buffers); the event itself is appended only once
// time moves past it. History queries are strict, so no prediction can see
// its own event or any event sharing its timestamp.
//
// Each event yields a positive pair (src, dst) and a negative pair
// (src, dst'). With the flash strategy each pair also gets a uniform
// reference selection from the same candidate pool; the sign of
// p_flash - p_uni picks the branch of the pairwise ranking loss on the mean
// scorer outputs of the four subsets.

#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tgsample/backbone.hpp"
#include "tgsample/dataio.hpp"
#include "tgsample/flash.hpp"
#include "tgsample/metrics.hpp"
#include "tgsample/samplers.hpp"

namespace tgsample {

enum class EvalMode { Transductive, Inductive };

inline std::string_view to_string(EvalMode m) { return m == EvalMode::Transductive ? "transductive" : "inductive"; }

enum class SplitName { Train, Val, Test };

inline std::string_view to_string(SplitName s) {
  switch (s) {
    case SplitName::Train: return "train";
    case SplitName::Val: return "val";
    case SplitName::Test: return "test";
  }
  return "unknown";
}

inline SplitName parse_split(std::string_view s) {
  if (s == "train") return SplitName::Train;
  if (s == "val") return SplitName::Val;
  if (s == "test") return SplitName::Test;
  fail(ErrorCode::InvalidArgument, "unknown split '" + std::string(s) + "' (train|val|test)");
}

/// Which hand-built scorer weights to install before training.
enum class ScorerInit { Random, Truncation, Uniform };

struct ModelConfig {
  Strategy strategy = Strategy::Truncation;
  std::size_t k = 2;
  std::size_t pool = 32;  // FLASH candidate pool N; 0 = whole history
  std::size_t d_m = 16;
  BackboneConfig backbone;
  FlashConfig flash;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct TrainConfig {
  std::size_t batch_size = 200;
  double lr = 1e-4;
  std::size_t epochs = 100;
  std::size_t patience = 20;
  double lambda_rank = 1.0;
  ScorerInit scorer_init = ScorerInit::Random;
  bool freeze_scorer = false;
  EvalMode mode = EvalMode::Transductive;
  double inductive_frac = 0.10;
};

/// Parameters and modules of one run. Modules point into `store`, so a Model
/// is neither copied nor moved.
class Model {
 public:
  Model(std::size_t num_nodes, std::size_t d_edge, const ModelConfig& cfg)
      : cfg_(cfg), store_(derive_seed(cfg.seed, "params")) {
    require(cfg.d_m > 0, ErrorCode::InvalidArgument, "d_m must be positive");
    require(num_nodes > 0, ErrorCode::InvalidArgument, "model needs at least one node");
    cfg_.backbone.slots = cfg.k;
    embedding_ = NodeEmbedding::create(store_, num_nodes, cfg.d_m);
    backbone_ = Backbone::create(store_, embedding_, d_edge, cfg_.backbone);
    if (cfg.strategy == Strategy::Flash) scorer_ = FlashScorer::create(store_, embedding_, d_edge, cfg.flash);
  }
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  [[nodiscard]] const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& store() { return store_; }
  [[nodiscard]] const nn::ParamStore& store() const { return store_; }
  [[nodiscard]] const NodeEmbedding& embedding() const { return embedding_; }
  [[nodiscard]] const Backbone& backbone() const { return backbone_; }
  [[nodiscard]] bool has_scorer() const { return scorer_.has_value(); }
  [[nodiscard]] const FlashScorer& scorer() const {
    require(scorer_.has_value(), ErrorCode::InvalidArgument, "model has no scorer");
    return *scorer_;
  }

 private:
  ModelConfig cfg_;
  nn::ParamStore store_;
  NodeEmbedding embedding_;
  Backbone backbone_;
  std::optional<FlashScorer> scorer_;
};

/// Replays a subset of a dataset's events into a history store as time advances.
class StreamState {
 public:
  StreamState(const Dataset& ds, std::vector<std::size_t> stream, std::size_t k, std::uint64_t nlb_seed)
      : ds_(&ds), stream_(std::move(stream)), nlb_(k, nlb_seed) {
    history_.reserve_nodes(ds.num_nodes);
  }

  /// Appends every pending stream event with time < t.
  void advance_to(Timestamp t) {
    while (cursor_ < stream_.size() && ds_->events[stream_[cursor_]].t < t) {
      const auto idx = stream_[cursor_++];
      const auto& e = ds_->events[idx];
      history_.append(e.src, e.dst, e.t, idx);
      nlb_.observe(e.src, e.dst, e.t, idx);
    }
  }

  [[nodiscard]] const HistoryStore& history() const { return history_; }
  [[nodiscard]] const NlbBuffer& nlb() const { return nlb_; }
  [[nodiscard]] std::size_t appended() const { return cursor_; }

 private:
  const Dataset* ds_;
  std::vector<std::size_t> stream_;
  std::size_t cursor_ = 0;
  HistoryStore history_;
  NlbBuffer nlb_;
};

struct PairOutcome {
  double p_flash = 0.0;  // probability under the run's strategy
  double p_uni = 0.0;
  double delta = 0.0;
  double s_vi = 0.0;
  double s_vj = 0.0;
  double s_uni_vi = 0.0;
  double s_uni_vj = 0.0;
  int y = 0;
  bool has_reference = false;  // the uniform pass ran (flash strategy only)
};

/// True when the ranking loss rewards the flash subsets over the uniform ones.
inline bool ranking_prefers_flash(int y, double delta) { return (y == 1 && delta > 0.0) || (y == 0 && delta <= 0.0); }

inline double ranking_loss(const PairOutcome& o) {
  const double sign = ranking_prefers_flash(o.y, o.delta) ? 1.0 : -1.0;
  auto nls = [](double x) { return nn::softplus(-x); };
  return nls(sign * (o.s_vj - o.s_uni_vj)) + nls(sign * (o.s_vi - o.s_uni_vi));
}

inline nn::Var ranking_loss(nn::Var s_vi, nn::Var s_vj, nn::Var s_uni_vi, nn::Var s_uni_vj, int y, double delta) {
  const double sign = ranking_prefers_flash(y, delta) ? 1.0 : -1.0;
  return nn::add(nn::neg_log_sigmoid(nn::scale(nn::sub(s_vj, s_uni_vj), sign)),
                 nn::neg_log_sigmoid(nn::scale(nn::sub(s_vi, s_uni_vi), sign)));
}

/// RNG streams consumed while predicting; independent so that enabling one
/// consumer never shifts another's draws.
struct PairRngs {
  Rng sampler;    // uniform strategy draws and flash tie-breaks
  Rng reference;  // uniform reference subsets for the ranking loss
};

struct PairVars {
  nn::Var p;
  std::optional<nn::Var> rank_loss;
  PairOutcome outcome;
};

/// One endpoint's selection together with the scorer candidates it used.
struct EndpointPick {
  SampledNeighborhood nb;
  std::vector<Candidate> chosen;
  std::vector<Candidate> reference;
  SampledNeighborhood reference_nb;
};

inline EndpointPick pick_endpoint(const Model& model, const StreamState& st, const Dataset& ds, NodeId v,
                                  NodeId other, Timestamp t, PairRngs& rngs, bool with_reference) {
  const auto& cfg = model.config();
  const auto h = st.history().query(v, t);
  EndpointPick out;
  switch (cfg.strategy) {
    case Strategy::Truncation: out.nb = sample_truncation(h, cfg.k); return out;
    case Strategy::Uniform: out.nb = sample_uniform(h, cfg.k, rngs.sampler); return out;
    case Strategy::Nlb: out.nb = st.nlb().sample(v); return out;
    case Strategy::Flash: break;
  }
  const EdgeFeatures edges{ds.events, ds.d_edge};
  const auto cands = make_candidates(h, cfg.pool);
  const auto offset = h.size() - cands.size();
  const ScoreQuery q{v, other, t};
  const auto scores = model.scorer().score_values_parallel(q, cands, edges, cfg.threads);
  const auto top = top_k_indices(scores, cfg.k, rngs.sampler);
  std::vector<std::size_t> positions;
  std::vector<double> by_position(h.size(), 0.0);
  for (const auto i : top) {
    positions.push_back(offset + i);
    by_position[offset + i] = scores[i];
    out.chosen.push_back(cands[i]);
  }
  out.nb = detail::make_neighborhood(Strategy::Flash, h, cfg.k, std::move(positions), by_position);
  if (with_reference) {
    std::vector<std::size_t> ref_positions;
    for (const auto i : uniform_subset(cands.size(), cfg.k, rngs.reference)) {
      ref_positions.push_back(offset + i);
      out.reference.push_back(cands[i]);
    }
    out.reference_nb = detail::make_neighborhood(Strategy::Uniform, h, cfg.k, std::move(ref_positions));
  }
  return out;
}

/// Mean scorer outputs over the flash subset and the reference subset of one
/// endpoint, from a single scorer pass; the constant 0 for an empty subset.
inline std::pair<nn::Var, nn::Var> mean_scores(nn::Tape& tape, const Model& model, const Dataset& ds,
                                               const ScoreQuery& q, const EndpointPick& pick) {
  const auto zero = [&] { return tape.constant(nn::Tensor::scalar(0.0)); };
  if (pick.chosen.empty() && pick.reference.empty()) return {zero(), zero()};
  std::vector<Candidate> both = pick.chosen;
  both.insert(both.end(), pick.reference.begin(), pick.reference.end());
  const auto scores = model.scorer().score(tape, q, both, EdgeFeatures{ds.events, ds.d_edge});
  auto block_mean = [&](std::size_t begin, std::size_t end) {
    if (begin == end) return zero();
    std::vector<std::size_t> rows(end - begin);
    std::iota(rows.begin(), rows.end(), begin);
    return nn::mean(nn::gather_rows(scores, std::move(rows)));
  };
  return {block_mean(0, pick.chosen.size()), block_mean(pick.chosen.size(), both.size())};
}

/// Link probability for (v_i, v_j) at t from the two neighborhoods.
inline nn::Var predict(nn::Tape& tape, const Model& model, const Dataset& ds, NodeId v_i, NodeId v_j, Timestamp t,
                       const SampledNeighborhood& s_i, const SampledNeighborhood& s_j) {
  const EdgeFeatures edges{ds.events, ds.d_edge};
  const auto z_i = model.backbone().aggregate(tape, v_i, t, s_i, edges);
  const auto z_j = model.backbone().aggregate(tape, v_j, t, s_j, edges);
  return model.backbone().merge_predict(tape, z_i, z_j);
}

/// Prediction for one pair. With `with_reference` and the flash strategy, the
/// uniform reference pass runs and the ranking loss is recorded on `tape`.
inline PairVars forward_pair(nn::Tape& tape, const Model& model, const StreamState& st, const Dataset& ds,
                             NodeId v_i, NodeId v_j, Timestamp t, int y, PairRngs& rngs, bool with_reference) {
  const bool reference = with_reference && model.config().strategy == Strategy::Flash;
  const auto a = pick_endpoint(model, st, ds, v_i, v_j, t, rngs, reference);
  const auto b = pick_endpoint(model, st, ds, v_j, v_i, t, rngs, reference);
  PairVars out;
  out.p = predict(tape, model, ds, v_i, v_j, t, a.nb, b.nb);
  out.outcome.y = y;
  out.outcome.p_flash = nn::val(out.p).item();
  if (!reference) return out;
  {
    nn::Tape ref(false);
    out.outcome.p_uni = nn::val(predict(ref, model, ds, v_i, v_j, t, a.reference_nb, b.reference_nb)).item();
  }
  out.outcome.delta = out.outcome.p_flash - out.outcome.p_uni;
  out.outcome.has_reference = true;
  const ScoreQuery qi{v_i, v_j, t};
  const ScoreQuery qj{v_j, v_i, t};
  const auto [s_vi, s_uni_vi] = mean_scores(tape, model, ds, qi, a);
  const auto [s_vj, s_uni_vj] = mean_scores(tape, model, ds, qj, b);
  out.outcome.s_vi = nn::val(s_vi).item();
  out.outcome.s_vj = nn::val(s_vj).item();
  out.outcome.s_uni_vi = nn::val(s_uni_vi).item();
  out.outcome.s_uni_vj = nn::val(s_uni_vj).item();
  out.rank_loss = ranking_loss(s_vi, s_vj, s_uni_vi, s_uni_vj, y, out.outcome.delta);
  return out;
}

/// Per-epoch (or final) record, serialized as one JSON line.
struct EpochRecord {
  std::size_t epoch = 0;
  std::string split;
  double loss_task = 0.0;
  double loss_rank = 0.0;
  Metrics metrics;
  double wall_ms = 0.0;

  [[nodiscard]] nlohmann::json to_json() const {
    return {{"epoch", epoch},     {"split", split},     {"loss_task", loss_task}, {"loss_rank", loss_rank},
            {"ap", metrics.ap},   {"auc", metrics.auc}, {"acc", metrics.acc},     {"mrr", metrics.mrr},
            {"pairs", metrics.pairs}, {"wall_ms", wall_ms}};
  }
};

struct EvalResult {
  Metrics metrics;
  std::vector<double> pos;  // probabilities of the positive pairs, in event order
  std::vector<double> neg;
};

struct TrainResult {
  std::vector<EpochRecord> records;
  std::size_t best_epoch = 0;
  double best_val_ap = 0.0;
  bool stopped_early = false;
};

class Trainer {
 public:
  Trainer(const Dataset& ds, const ModelConfig& mcfg, const TrainConfig& tcfg, const SplitSpec& split = {})
      : ds_(&ds), tcfg_(tcfg), split_(chrono_split(ds, split)), sampler_(ds), model_(ds.num_nodes, ds.d_edge, mcfg) {
    require(tcfg.batch_size > 0 && tcfg.lr > 0.0 && tcfg.lambda_rank >= 0.0, ErrorCode::InvalidArgument,
            "batch size and learning rate must be positive, lambda_rank non-negative");
    if (tcfg.mode == EvalMode::Inductive) {
      view_ = inductive_mask(ds, split_, tcfg.inductive_frac, derive_seed(mcfg.seed, "inductive"));
    }
    if (model_.has_scorer()) {
      if (tcfg.scorer_init == ScorerInit::Truncation) model_.scorer().construct_truncation_weights(model_.store());
      if (tcfg.scorer_init == ScorerInit::Uniform) model_.scorer().construct_uniform_weights();
      if (tcfg.freeze_scorer) model_.store().set_trainable(FlashScorer::kPrefix, false);
    }
  }

  Model& model() { return model_; }
  [[nodiscard]] const Model& model() const { return model_; }
  [[nodiscard]] const ChronoSplit& split() const { return split_; }
  [[nodiscard]] const std::optional<InductiveView>& inductive() const { return view_; }
  [[nodiscard]] const Dataset& dataset() const { return *ds_; }

  /// Training events for the configured mode, in stream order.
  [[nodiscard]] std::vector<std::size_t> train_events() const {
    if (view_) return view_->train_events;
    return range_indices(split_.train);
  }

  /// Events predicted when evaluating `which` under `mode`.
  [[nodiscard]] std::vector<std::size_t> eval_events(SplitName which, EvalMode mode) const {
    if (which == SplitName::Train) return train_events();
    if (mode == EvalMode::Inductive) {
      require(view_.has_value(), ErrorCode::InvalidArgument, "inductive evaluation needs an inductive run");
      return which == SplitName::Val ? view_->val_events : view_->test_events;
    }
    return range_indices(which == SplitName::Val ? split_.val : split_.test);
  }

  /// Negative destination for event `i`.
  NodeId negative_for(std::size_t i, Rng& rng) const {
    if (ds_->has_paired_negatives()) return ds_->paired_negative[i];
    return sampler_.sample(ds_->events[i], rng).dst;
  }

  EpochRecord train_epoch(std::size_t epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto events = train_events();
    require(!events.empty(), ErrorCode::EmptyEvalSet, "training split is empty");
    const auto& mcfg = model_.config();
    const auto epoch_seed = mix_seed(mcfg.seed + 0x9e37 * epoch);
    StreamState st(*ds_, events, mcfg.k, derive_seed(epoch_seed, "nlb"));
    Rng neg_rng(derive_seed(epoch_seed, "negatives"));
    PairRngs rngs{Rng(derive_seed(epoch_seed, "sampler")), Rng(derive_seed(epoch_seed, "reference"))};
    const bool rank_active = mcfg.strategy == Strategy::Flash;
    const bool rank_grad = rank_active && tcfg_.lambda_rank > 0.0;
    const nn::AdamConfig adam{tcfg_.lr};
    double task_total = 0.0;
    double rank_total = 0.0;
    std::size_t pairs = 0;
    std::vector<double> pos;
    std::vector<double> neg;
    for (std::size_t b = 0; b < events.size(); b += tcfg_.batch_size) {
      const auto end = std::min(events.size(), b + tcfg_.batch_size);
      for (auto i = b; i < end; ++i) {
        const auto idx = events[i];
        const auto& e = ds_->events[idx];
        st.advance_to(e.t);
        const NodeId negative = negative_for(idx, neg_rng);
        for (const int y : {1, 0}) {
          nn::Tape tape;
          const auto pv = forward_pair(tape, model_, st, *ds_, e.src, y ? e.dst : negative, e.t, y, rngs, rank_active);
          const double label = y;
          const auto task = nn::bce_loss(pv.p, std::span<const double>(&label, 1));
          task_total += nn::val(task).item();
          auto total = task;
          if (pv.rank_loss) {
            rank_total += nn::val(*pv.rank_loss).item();
            if (rank_grad) total = nn::add(task, nn::scale(*pv.rank_loss, tcfg_.lambda_rank));
          }
          tape.backward(total);
          (y ? pos : neg).push_back(pv.outcome.p_flash);
          ++pairs;
        }
      }
      nn::adam_step(model_.store(), adam);
    }
    EpochRecord r;
    r.epoch = epoch;
    r.split = "train";
    r.loss_task = task_total / static_cast<double>(pairs);
    r.loss_rank = rank_active ? rank_total / static_cast<double>(pairs) : 0.0;
    r.metrics = pair_metrics(pos, neg);
    r.wall_ms = elapsed_ms(start);
    return r;
  }

  /// Streaming evaluation: the history replays every event before each
  /// prediction, from all splits; only `which`'s events are predicted.
  EvalResult evaluate(SplitName which, EvalMode mode = EvalMode::Transductive) const {
    const auto targets = eval_events(which, mode);
    require(!targets.empty(), ErrorCode::EmptyEvalSet, std::string("no events to evaluate in ") + std::string(to_string(which)));
    const auto& mcfg = model_.config();
    const auto eval_seed = derive_seed(mcfg.seed, std::string("eval-") + std::string(to_string(which)));
    std::vector<std::size_t> all(ds_->events.size());
    std::iota(all.begin(), all.end(), 0);
    StreamState st(*ds_, std::move(all), mcfg.k, derive_seed(eval_seed, "nlb"));
    Rng neg_rng(derive_seed(eval_seed, "negatives"));
    PairRngs rngs{Rng(derive_seed(eval_seed, "sampler")), Rng(derive_seed(eval_seed, "reference"))};
    EvalResult out;
    for (const auto idx : targets) {
      const auto& e = ds_->events[idx];
      st.advance_to(e.t);
      const NodeId negative = negative_for(idx, neg_rng);
      for (const int y : {1, 0}) {
        nn::Tape tape(false);
        const auto pv = forward_pair(tape, model_, st, *ds_, e.src, y ? e.dst : negative, e.t, y, rngs, false);
        (y ? out.pos : out.neg).push_back(pv.outcome.p_flash);
      }
    }
    out.metrics = pair_metrics(out.pos, out.neg);
    return out;
  }

  EpochRecord eval_record(SplitName which, EvalMode mode, std::size_t epoch) const {
    const auto start = std::chrono::steady_clock::now();
    EpochRecord r;
    r.epoch = epoch;
    r.split = std::string(to_string(which));
    if (mode == EvalMode::Inductive) r.split += "_inductive";
    r.metrics = evaluate(which, mode).metrics;
    r.wall_ms = elapsed_ms(start);
    return r;
  }

  /// Epoch loop with early stopping on validation AP (ties broken by
  /// validation accuracy); the best parameters are restored at the end.
  /// Records are streamed to `jsonl` when given.
  TrainResult fit(std::ostream* jsonl = nullptr) {
    TrainResult result;
    std::vector<nn::Tensor> best;
    std::size_t since_best = 0;
    double best_ap = -1.0;
    double best_acc = -1.0;
    auto emit = [&](const EpochRecord& r) {
      result.records.push_back(r);
      if (jsonl) *jsonl << r.to_json().dump() << '\n' << std::flush;
    };
    for (std::size_t epoch = 1; epoch <= tcfg_.epochs; ++epoch) {
      emit(train_epoch(epoch));
      const auto val = eval_record(SplitName::Val, EvalMode::Transductive, epoch);
      emit(val);
      if (val.metrics.ap > best_ap || (val.metrics.ap == best_ap && val.metrics.acc > best_acc)) {
        best_ap = val.metrics.ap;
        best_acc = val.metrics.acc;
        result.best_epoch = epoch;
        best = snapshot();
        since_best = 0;
      } else if (++since_best >= tcfg_.patience) {
        result.stopped_early = true;
        break;
      }
    }
    if (!best.empty()) restore(best);
    result.best_val_ap = best_ap;
    return result;
  }

  [[nodiscard]] std::vector<nn::Tensor> snapshot() const {
    std::vector<nn::Tensor> out;
    for (const auto& p : model_.store().all()) out.push_back(p.value);
    return out;
  }

  void restore(const std::vector<nn::Tensor>& values) {
    auto& params = model_.store().all();
    require(values.size() == params.size(), ErrorCode::CheckpointMismatch, "snapshot size");
    std::size_t i = 0;
    for (auto& p : params) p.value = values[i++];
  }

 private:
  static std::vector<std::size_t> range_indices(const IndexRange& r) {
    std::vector<std::size_t> out(r.size());
    std::iota(out.begin(), out.end(), r.begin);
    return out;
  }

  static double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }

  const Dataset* ds_;
  TrainConfig tcfg_;
  ChronoSplit split_;
  NegativeSampler sampler_;
  std::optional<InductiveView> view_;
  Model model_;
};

}  // namespace tgsample
