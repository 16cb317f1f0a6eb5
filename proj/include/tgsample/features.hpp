#pragma once

// Inputs shared by the scorer and the backbones: the learnable node table M,
// edge-feature lookup and the elapsed-time transform.

#include <cmath>
#include <span>
#include <vector>

#include "tgsample/ctdg.hpp"
#include "tgsample/nn/ops.hpp"
#include "tgsample/nn/params.hpp"

namespace tgsample {

/// Learnable per-node features M, one row per node, initialized N(0, 1).
struct NodeEmbedding {
  nn::Parameter* table = nullptr;

  static NodeEmbedding create(nn::ParamStore& store, std::size_t num_nodes, std::size_t dim) {
    return {&store.add_normal("M", {num_nodes, dim}, 1.0)};
  }

  [[nodiscard]] std::size_t dim() const { return table->value.cols(); }
  [[nodiscard]] std::size_t num_nodes() const { return table->value.rows(); }

  nn::Var rows(nn::Tape& tape, std::vector<std::size_t> ids) const {
    return nn::gather_rows(tape.param(*table), std::move(ids));
  }
  nn::Var row(nn::Tape& tape, NodeId v) const { return rows(tape, {static_cast<std::size_t>(v)}); }
};

/// Edge features by event index; empty when the stream has none.
struct EdgeFeatures {
  std::span<const Event> events;
  std::size_t dim = 0;

  /// [records, dim] matrix of the records' edge features.
  [[nodiscard]] nn::Tensor gather(std::span<const NeighborRecord> records) const {
    nn::Tensor out(records.size(), dim);
    for (std::size_t i = 0; i < records.size() && dim > 0; ++i) {
      const auto& f = events[records[i].edge_index].edge_feat;
      std::copy(f.begin(), f.end(), out.data.begin() + static_cast<std::ptrdiff_t>(i * dim));
    }
    return out;
  }
};

/// Elapsed time as fed to time encoders: log(1 + dt). Keeps second-resolution
/// timestamps over months in a range Time2Vec frequencies can resolve.
inline double elapsed_feature(double dt) { return std::log1p(std::max(dt, 0.0)); }

}  // namespace tgsample
