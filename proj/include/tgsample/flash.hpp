#pragma once

// Learnable link-aware neighbor scorer and top-k selection.
//
// For a candidate u in the history of v_i, predicting a link (v_i, v_j) at t:
//
//   h_u    = [F_E(v_i, u, t_u) | M(u)]
//   h_vi   = [M(v_i)]            h_vj = [M(v_j)]
//   h_temp = [phi1(log(1 + t - t_u)) | phi2(rank_u)]
//   score  = MLP( MIXER_self(h_u, h_temp) | MIXER_link(h_u, h_vi, h_vj) )
//
// Node features F_V are empty for every supported dataset and are omitted.
// Each token is projected to the common width d_h by its own linear map.
// Scores are per-candidate: a candidate's score never depends on the rest of
// the history, which is what allows scoring to be split across threads.

#include <algorithm>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "tgsample/ctdg.hpp"
#include "tgsample/features.hpp"
#include "tgsample/nn/layers.hpp"
#include "tgsample/random.hpp"
#include "tgsample/samplers.hpp"

namespace tgsample {

struct FlashConfig {
  std::size_t d_time = 8;  // Time2Vec width of phi1 and phi2
  std::size_t d_hidden = 64;
  std::size_t token_hidden = 8;
  std::size_t mlp_hidden = 0;  // 0: same as d_hidden
  nn::LinearInit init = nn::LinearInit::InverseSqrtFanIn;
};

struct ScoreQuery {
  NodeId v_i = 0;
  NodeId v_j = 0;
  Timestamp t = 0.0;
};

struct Candidate {
  NeighborRecord record;
  std::size_t rank = 1;  // 1 = most recent record of H(v_i, t)
};

/// Candidates for the `pool` most recent records of `h` (0 = all), oldest first.
inline std::vector<Candidate> make_candidates(History h, std::size_t pool) {
  const auto p = candidate_pool(h, pool);
  const auto offset = h.size() - p.size();
  std::vector<Candidate> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = {p[i], rank_of(h, offset + i)};
  return out;
}

class FlashScorer {
 public:
  static constexpr const char* kPrefix = "flash.";

  static FlashScorer create(nn::ParamStore& store, NodeEmbedding m, std::size_t d_edge, const FlashConfig& cfg = {}) {
    require(cfg.d_hidden >= 1 && cfg.d_time >= 2, ErrorCode::InvalidArgument, "flash scorer dimensions");
    FlashScorer s;
    s.m_ = m;
    s.d_edge_ = d_edge;
    s.d_time_ = cfg.d_time;
    s.d_hidden_ = cfg.d_hidden;
    const auto h = cfg.d_hidden;
    const auto p = std::string(kPrefix);
    const auto d_u = d_edge + m.dim();
    s.phi1_ = nn::Time2Vec::create(store, p + "phi1", cfg.d_time);
    s.phi2_ = nn::Time2Vec::create(store, p + "phi2", cfg.d_time);
    s.proj_u_self_ = nn::Linear::create(store, p + "proj_u_self", d_u, h, cfg.init);
    s.proj_temp_ = nn::Linear::create(store, p + "proj_temp", 2 * cfg.d_time, h, cfg.init);
    s.proj_u_link_ = nn::Linear::create(store, p + "proj_u_link", d_u, h, cfg.init);
    s.proj_vi_ = nn::Linear::create(store, p + "proj_vi", m.dim(), h, cfg.init);
    s.proj_vj_ = nn::Linear::create(store, p + "proj_vj", m.dim(), h, cfg.init);
    s.mixer_self_ = nn::Mixer::create(store, p + "mixer_self", 2, h, cfg.token_hidden, h, cfg.init);
    s.mixer_link_ = nn::Mixer::create(store, p + "mixer_link", 3, h, cfg.token_hidden, h, cfg.init);
    const auto hidden = cfg.mlp_hidden ? cfg.mlp_hidden : h;
    s.head_ = nn::Mlp::create(store, p + "head", {2 * h, hidden, 1}, cfg.init);
    return s;
  }

  /// Scores [n, 1] for the candidates of v_i.
  nn::Var score(nn::Tape& tape, const ScoreQuery& q, std::span<const Candidate> cands,
                const EdgeFeatures& edges) const {
    const auto n = cands.size();
    require(n > 0, ErrorCode::InvalidArgument, "score needs at least one candidate");
    require(edges.dim == d_edge_, ErrorCode::ShapeMismatch,
            "edge features have " + std::to_string(edges.dim) + " dims, scorer expects " + std::to_string(d_edge_));
    std::vector<std::size_t> ids(n);
    std::vector<NeighborRecord> records(n);
    nn::Tensor dt(n, 1);
    nn::Tensor rank(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& r = cands[i].record;
      require(r.t < q.t, ErrorCode::InvalidArgument, "candidate interaction is not strictly before the query time");
      ids[i] = static_cast<std::size_t>(r.neighbor);
      records[i] = r;
      dt[i] = elapsed_feature(q.t - r.t);
      rank[i] = static_cast<double>(cands[i].rank);
    }
    nn::Var h_u = m_.rows(tape, std::move(ids));
    if (d_edge_ > 0) h_u = nn::concat_cols({tape.constant(edges.gather(records)), h_u});
    const nn::Var h_vi = nn::repeat_rows(m_.row(tape, q.v_i), n);
    const nn::Var h_vj = nn::repeat_rows(m_.row(tape, q.v_j), n);
    const nn::Var h_temp = nn::concat_cols({phi1_(tape, tape.constant(std::move(dt))), phi2_(tape, tape.constant(std::move(rank)))});

    const nn::Var self = mixer_self_(tape, {proj_u_self_(tape, h_u), proj_temp_(tape, h_temp)});
    const nn::Var link = mixer_link_(tape, {proj_u_link_(tape, h_u), proj_vi_(tape, h_vi), proj_vj_(tape, h_vj)});
    return head_(tape, nn::concat_cols({self, link}));
  }

  /// Forward-only scores.
  std::vector<double> score_values(const ScoreQuery& q, std::span<const Candidate> cands, const EdgeFeatures& edges) const {
    if (cands.empty()) return {};
    nn::Tape tape(false);
    return nn::val(score(tape, q, cands, edges)).data;
  }

  /// Forward-only scores with candidates split across `threads` workers.
  std::vector<double> score_values_parallel(const ScoreQuery& q, std::span<const Candidate> cands,
                                            const EdgeFeatures& edges, std::size_t threads) const {
    if (threads <= 1 || cands.size() < 2 * threads) return score_values(q, cands, edges);
    std::vector<double> out(cands.size());
    std::vector<std::thread> pool;
    const auto chunk = (cands.size() + threads - 1) / threads;
    for (std::size_t w = 0; w < threads; ++w) {
      const auto begin = w * chunk;
      if (begin >= cands.size()) break;
      const auto end = std::min(cands.size(), begin + chunk);
      pool.emplace_back([&, begin, end] {
        const auto part = score_values(q, cands.subspan(begin, end - begin), edges);
        std::copy(part.begin(), part.end(), out.begin() + static_cast<std::ptrdiff_t>(begin));
      });
    }
    for (auto& t : pool) t.join();
    return out;
  }

  [[nodiscard]] std::size_t d_time() const { return d_time_; }
  [[nodiscard]] std::size_t d_hidden() const { return d_hidden_; }
  [[nodiscard]] const nn::Mlp& head() const { return head_; }

  /// Weights under which every candidate scores exactly -rank_u: the rank
  /// passes through the linear channel of phi2 and identity projections, and
  /// every other path is zero. The node table M is shared and left untouched.
  void construct_truncation_weights(nn::ParamStore& store) const {
    require(d_hidden_ >= 1 && !head_.layers.empty(), ErrorCode::InvalidArgument, "scorer too small for truncation weights");
    for (auto& p : store.all()) {
      if (p.name.rfind(kPrefix, 0) == 0) p.value.fill(0.0);
    }
    phi2_.omega->value[0] = 1.0;
    // h_temp = [phi1 | phi2]; phi2's linear channel sits at column d_time
    proj_temp_.weight->value.at(d_time_, 0) = 1.0;
    // the self mixer averages the (zero) neighbor token with the temporal token
    if (head_.layers.size() == 1) {
      head_.layers[0].weight->value.at(0, 0) = -2.0;
    } else {
      head_.layers[0].weight->value.at(0, 0) = 2.0;
      for (std::size_t i = 1; i + 1 < head_.layers.size(); ++i) head_.layers[i].weight->value.at(0, 0) = 1.0;
      head_.layers.back().weight->value.at(0, 0) = -1.0;
    }
  }

  /// Weights under which every candidate scores 0: only the final layer is zeroed.
  void construct_uniform_weights() const { head_.layers.back().zero(); }

 private:
  NodeEmbedding m_;
  std::size_t d_edge_ = 0;
  std::size_t d_time_ = 0;
  std::size_t d_hidden_ = 0;
  nn::Time2Vec phi1_;
  nn::Time2Vec phi2_;
  nn::Linear proj_u_self_;
  nn::Linear proj_temp_;
  nn::Linear proj_u_link_;
  nn::Linear proj_vi_;
  nn::Linear proj_vj_;
  nn::Mixer mixer_self_;
  nn::Mixer mixer_link_;
  nn::Mlp head_;
};

/// Top-k candidates of H(v_i, t) under the scorer, drawn from the `pool` most
/// recent records (0 = whole history).
inline SampledNeighborhood flash_select(History h, const ScoreQuery& q, const FlashScorer& scorer,
                                        const EdgeFeatures& edges, std::size_t k, std::size_t pool, Rng& rng,
                                        std::size_t threads = 1) {
  const auto cands = make_candidates(h, pool);
  const auto scores = scorer.score_values_parallel(q, cands, edges, threads);
  const auto offset = h.size() - cands.size();
  const auto top = top_k_indices(scores, k, rng);
  std::vector<std::size_t> positions;
  std::vector<double> by_position(h.size(), 0.0);
  for (const auto i : top) {
    positions.push_back(offset + i);
    by_position[offset + i] = scores[i];
  }
  return detail::make_neighborhood(Strategy::Flash, h, k, std::move(positions), by_position);
}

}  // namespace tgsample
