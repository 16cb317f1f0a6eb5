#pragma once

// Event stream representation and the per-node historical-neighborhood store.
//
// A node's history H(v, t) is the multiset of nodes that interacted with v
// strictly before t. Records are kept per node in ascending time order, with
// equal timestamps kept in stream order, so every history query is a prefix
// of the node's record list.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tgsample/error.hpp"

namespace tgsample {

using NodeId = std::int64_t;
using Timestamp = double;

struct Event {
  NodeId src = 0;
  NodeId dst = 0;
  Timestamp t = 0.0;
  std::vector<double> edge_feat;
  std::optional<int> label;
};

/// One side of a recorded interaction, as seen from the owning node.
struct NeighborRecord {
  NodeId neighbor = 0;
  Timestamp t = 0.0;
  std::size_t edge_index = 0;  // position of the source event in the stream

  friend bool operator==(const NeighborRecord&, const NeighborRecord&) = default;
};

using History = std::span<const NeighborRecord>;

/// Rank of the record at `index` in a time-sorted history: the most recent
/// record has rank 1 and the oldest has rank `records.size()`.
inline std::size_t rank_of(History records, std::size_t index) {
  require(index < records.size(), ErrorCode::IndexOutOfRange,
          "rank_of index " + std::to_string(index) + " outside history of size " +
              std::to_string(records.size()));
  return records.size() - index;
}

class HistoryStore {
 public:
  explicit HistoryStore(bool allow_self_loops = false) : allow_self_loops_(allow_self_loops) {}

  /// Records the interaction on both endpoints. Streams must be
  /// non-decreasing in time.
  void append(const Event& e) { append(e.src, e.dst, e.t); }

  void append(NodeId src, NodeId dst, Timestamp t) { append(src, dst, t, count_); }

  /// `edge_index` names the event's position in its dataset, for streams that
  /// skip events (inductive training).
  void append(NodeId src, NodeId dst, Timestamp t, std::size_t edge_index) {
    if (count_ > 0 && t < last_t_) {
      fail(ErrorCode::MonotonicityViolation,
           "event at t=" + std::to_string(t) + " after t=" + std::to_string(last_t_));
    }
    require(t >= 0.0, ErrorCode::InvalidArgument, "negative timestamp");
    require(src >= 0 && dst >= 0, ErrorCode::InvalidArgument, "negative node id");
    if (src == dst && !allow_self_loops_) {
      fail(ErrorCode::SelfLoop, "self-loop on node " + std::to_string(src));
    }
    const auto needed = static_cast<std::size_t>(std::max(src, dst)) + 1;
    if (lists_.size() < needed) lists_.resize(needed);
    lists_[static_cast<std::size_t>(src)].push_back({dst, t, edge_index});
    if (src != dst) lists_[static_cast<std::size_t>(dst)].push_back({src, t, edge_index});
    last_t_ = t;
    ++count_;
  }

  /// Records of `v` with record.t < t, oldest first. Unknown nodes yield an
  /// empty view. The view stays valid until the next append.
  [[nodiscard]] History query(NodeId v, Timestamp t) const {
    const auto all = full(v);
    const auto it = std::lower_bound(all.begin(), all.end(), t,
                                     [](const NeighborRecord& r, Timestamp x) { return r.t < x; });
    return all.first(static_cast<std::size_t>(it - all.begin()));
  }

  [[nodiscard]] History full(NodeId v) const {
    if (v < 0 || static_cast<std::size_t>(v) >= lists_.size()) return {};
    return lists_[static_cast<std::size_t>(v)];
  }

  [[nodiscard]] std::size_t event_count() const noexcept { return count_; }
  [[nodiscard]] std::size_t node_capacity() const noexcept { return lists_.size(); }
  [[nodiscard]] Timestamp last_time() const noexcept { return last_t_; }

  void reserve_nodes(std::size_t n) {
    if (lists_.size() < n) lists_.resize(n);
  }

 private:
  std::vector<std::vector<NeighborRecord>> lists_;
  std::size_t count_ = 0;
  Timestamp last_t_ = -std::numeric_limits<Timestamp>::infinity();
  bool allow_self_loops_;
};

}  // namespace tgsample
