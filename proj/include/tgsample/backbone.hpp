#pragma once

// Lightweight neighborhood aggregators and the link head.
//
// attn_lite   TGAT-style single-head attention. The query is built from
//             [M(v) | TE(0)], keys and values from each valid slot's
//             [M(u) | F_E | TE(t - t_u)]. z = readout + W_self M(v).
// mixer_lite  GraphMixer-style: every slot (padding included, as zeros) is
//             projected to a token, one mixer block runs over the k tokens,
//             then z = pooled + W_self M(v).
//
// An empty neighborhood yields the learned default vector as z.
// With time encoding disabled, slots carry only node identity and edge
// features, so a neighborhood is seen as a multiset of nodes.

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "tgsample/features.hpp"
#include "tgsample/nn/layers.hpp"
#include "tgsample/samplers.hpp"

namespace tgsample {

enum class BackboneVariant { AttnLite, MixerLite };

inline std::string_view to_string(BackboneVariant v) {
  return v == BackboneVariant::AttnLite ? "attn_lite" : "mixer_lite";
}

inline BackboneVariant parse_backbone(std::string_view s) {
  if (s == "attn_lite") return BackboneVariant::AttnLite;
  if (s == "mixer_lite") return BackboneVariant::MixerLite;
  fail(ErrorCode::InvalidArgument, "unknown backbone '" + std::string(s) + "' (attn_lite|mixer_lite)");
}

struct BackboneConfig {
  BackboneVariant variant = BackboneVariant::AttnLite;
  std::size_t d_z = 32;
  std::size_t d_time = 8;
  bool time_encoding = true;
  std::size_t slots = 2;  // k; mixer_lite mixes exactly this many tokens
  std::size_t token_hidden = 8;
  nn::LinearInit init = nn::LinearInit::InverseSqrtFanIn;
};

class Backbone {
 public:
  static constexpr const char* kPrefix = "backbone.";

  static Backbone create(nn::ParamStore& store, NodeEmbedding m, std::size_t d_edge, const BackboneConfig& cfg) {
    require(cfg.d_z > 0, ErrorCode::InvalidArgument, "backbone width must be positive");
    Backbone b;
    b.cfg_ = cfg;
    b.m_ = m;
    b.d_edge_ = d_edge;
    const auto p = std::string(kPrefix);
    const auto d_te = cfg.time_encoding ? cfg.d_time : 0;
    const auto d_slot = m.dim() + d_edge + d_te;
    if (cfg.time_encoding) b.time_ = nn::Time2Vec::create(store, p + "time", cfg.d_time);
    b.self_ = nn::Linear::create(store, p + "self", m.dim(), cfg.d_z, cfg.init);
    b.default_ = &store.add_uniform(p + "default", {1, cfg.d_z}, 1.0 / std::sqrt(static_cast<double>(cfg.d_z)));
    if (cfg.variant == BackboneVariant::AttnLite) {
      b.query_ = nn::Linear::create(store, p + "attn.query", m.dim() + d_te, cfg.d_z, cfg.init);
      b.key_ = nn::Linear::create(store, p + "attn.key", d_slot, cfg.d_z, cfg.init);
      b.value_ = nn::Linear::create(store, p + "attn.value", d_slot, cfg.d_z, cfg.init);
    } else {
      require(cfg.slots >= 1, ErrorCode::InvalidArgument, "mixer_lite needs at least one slot");
      b.slot_proj_ = nn::Linear::create(store, p + "mixer.slot", d_slot, cfg.d_z, cfg.init);
      b.mixer_ = nn::Mixer::create(store, p + "mixer", cfg.slots, cfg.d_z, cfg.token_hidden, cfg.d_z, cfg.init);
    }
    b.merge_ = nn::Mlp::create(store, p + "merge", {2 * cfg.d_z, cfg.d_z, 1}, cfg.init);
    return b;
  }

  [[nodiscard]] const BackboneConfig& config() const { return cfg_; }
  [[nodiscard]] const nn::Mlp& merge_mlp() const { return merge_; }
  [[nodiscard]] nn::Parameter& default_vector() const { return *default_; }

  /// Slot features [c, d_M + d_E + d_te] for the valid slots.
  nn::Var slot_features(nn::Tape& tape, Timestamp t, std::span<const NeighborRecord> recs, const EdgeFeatures& edges) const {
    std::vector<std::size_t> ids(recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) ids[i] = static_cast<std::size_t>(recs[i].neighbor);
    std::vector<nn::Var> parts{m_.rows(tape, std::move(ids))};
    if (d_edge_ > 0) parts.push_back(tape.constant(edges.gather(recs)));
    if (cfg_.time_encoding) {
      nn::Tensor dt(recs.size(), 1);
      for (std::size_t i = 0; i < recs.size(); ++i) dt[i] = elapsed_feature(t - recs[i].t);
      parts.push_back(time_(tape, tape.constant(std::move(dt))));
    }
    return parts.size() == 1 ? parts[0] : nn::concat_cols(parts);
  }

  /// Attention readout over the valid slots, before the self term.
  nn::Var attention_readout(nn::Tape& tape, NodeId v, Timestamp t, std::span<const NeighborRecord> recs,
                            const EdgeFeatures& edges) const {
    require(cfg_.variant == BackboneVariant::AttnLite, ErrorCode::InvalidArgument, "attention_readout on mixer_lite");
    nn::Var q_in = m_.row(tape, v);
    if (cfg_.time_encoding) q_in = nn::concat_cols({q_in, time_(tape, tape.constant(nn::Tensor::scalar(0.0)))});
    const nn::Var q = query_(tape, q_in);
    const nn::Var feats = slot_features(tape, t, recs, edges);
    const nn::Var keys = key_(tape, feats);
    const nn::Var values = value_(tape, feats);
    const nn::Var logits = nn::scale(nn::matmul(keys, nn::transpose(q)), 1.0 / std::sqrt(static_cast<double>(cfg_.d_z)));
    const nn::Var weights = nn::softmax_col(logits);
    return nn::matmul(nn::transpose(weights), values);
  }

  /// Node representation z [1, d_z] from a sampled neighborhood.
  nn::Var aggregate(nn::Tape& tape, NodeId v, Timestamp t, const SampledNeighborhood& s, const EdgeFeatures& edges) const {
    const auto recs = s.selected();
    if (recs.empty()) return tape.param(*default_);
    const nn::Var self = self_(tape, m_.row(tape, v));
    if (cfg_.variant == BackboneVariant::AttnLite) {
      return nn::add(attention_readout(tape, v, t, recs, edges), self);
    }
    require(s.capacity() == cfg_.slots, ErrorCode::ShapeMismatch,
            "mixer_lite built for " + std::to_string(cfg_.slots) + " slots, got " + std::to_string(s.capacity()));
    const nn::Var tokens = slot_proj_(tape, slot_features(tape, t, recs, edges));
    std::vector<nn::Var> blocks;
    blocks.reserve(cfg_.slots);
    std::size_t next = 0;
    nn::Var zero = tape.constant(nn::Tensor(1, cfg_.d_z));
    for (std::size_t i = 0; i < s.capacity(); ++i) {
      blocks.push_back(s.valid[i] ? nn::gather_rows(tokens, {next++}) : zero);
    }
    return nn::add(mixer_(tape, blocks), self);
  }

  /// Link logit from [z_i | z_j]; the head is not symmetric in (i, j).
  nn::Var merge_logit(nn::Tape& tape, nn::Var z_i, nn::Var z_j) const { return merge_(tape, nn::concat_cols({z_i, z_j})); }

  /// p(v_i, v_j | t) in [eps, 1 - eps].
  nn::Var merge_predict(nn::Tape& tape, nn::Var z_i, nn::Var z_j) const {
    return clamp_probability(nn::sigmoid(merge_logit(tape, z_i, z_j)));
  }

  static nn::Var clamp_probability(nn::Var p) {
    auto& tape = *p.tape;
    nn::Tensor out = nn::val(p);
    for (auto& v : out.data) v = nn::clamp_prob(v);
    return tape.record(std::move(out), {p}, [&tape, p](const nn::Tensor&, const nn::Tensor& g) {
      const auto& P = nn::val(p);
      auto& gp = tape.grad(p);
      for (std::size_t i = 0; i < gp.size(); ++i) {
        if (P[i] > nn::kProbEps && P[i] < 1.0 - nn::kProbEps) gp[i] += g[i];
      }
    });
  }

 private:
  BackboneConfig cfg_;
  NodeEmbedding m_;
  std::size_t d_edge_ = 0;
  nn::Time2Vec time_;
  nn::Linear self_;
  nn::Parameter* default_ = nullptr;
  nn::Linear query_;
  nn::Linear key_;
  nn::Linear value_;
  nn::Linear slot_proj_;
  nn::Mixer mixer_;
  nn::Mlp merge_;
};

}  // namespace tgsample
