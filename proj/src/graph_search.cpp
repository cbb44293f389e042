#include <algorithm>
#include <cmath>
#include <limits>

#include "tiervec/bytes.hpp"
#include "tiervec/graph_index.hpp"

namespace tiervec {

void SearchParams::validate() const {
  if (k < 1 || L < k) throw InvalidArgument("search: need L >= k >= 1");
}

GraphSearchCursor::GraphSearchCursor(VectorView query, std::uint32_t start_node,
                                     std::uint64_t node_count,
                                     SearchParams params, Metric metric)
    : query_(query), params_(params), metric_(metric), state_(node_count, kUnseen) {
  params_.validate();
  if (node_count == 0) {
    next_ = kNone;
    return;
  }
  if (start_node >= node_count) throw InvalidArgument("start node out of range");
  list_.reserve(params_.L + 1);
  list_.push_back({-std::numeric_limits<double>::infinity(), 0, 0, start_node,
                   false});
  state_[start_node] = kListed;
  next_ = 0;
}

bool GraphSearchCursor::before(const Candidate& a, const Candidate& b) {
  if (a.key != b.key) return a.key < b.key;
  if (a.parent_seq != b.parent_seq) return a.parent_seq < b.parent_seq;
  if (a.rank != b.rank) return a.rank < b.rank;
  return a.id < b.id;
}

void GraphSearchCursor::find_next(std::size_t from) {
  for (std::size_t i = from; i < list_.size(); ++i) {
    if (!list_[i].fetched) {
      next_ = i;
      return;
    }
  }
  next_ = kNone;
}

void GraphSearchCursor::complete(std::uint32_t node, VectorView vec,
                                 std::span<const std::uint32_t> edges) {
  if (done() || list_[next_].id != node) {
    throw InvalidArgument("cursor completed with a node it did not request");
  }
  const double d = distance(query_, vec, metric_);
  // Everything ahead of the earliest touched slot is already fetched.
  std::size_t from = next_;
  list_.erase(list_.begin() + static_cast<std::ptrdiff_t>(next_));
  const Candidate self{d, 0, 0, node, true};
  const auto self_at =
      std::lower_bound(list_.begin(), list_.end(), self, before);
  from = std::min<std::size_t>(from, self_at - list_.begin());
  list_.insert(self_at, self);
  state_[node] = kFetched;
  fetched_.push_back({d, node});

  // Children share the key and sequence number, so they form one contiguous
  // run in edge order.
  const std::uint64_t seq = fetched_.size();
  std::vector<Candidate> children;
  children.reserve(edges.size());
  for (std::uint32_t r = 0; r < edges.size(); ++r) {
    const auto e = edges[r];
    if (e >= state_.size()) throw FormatError("edge target out of range", e);
    if (state_[e] != kUnseen) continue;
    state_[e] = kListed;
    children.push_back({d, seq, r, e, false});
  }
  if (!children.empty()) {
    const auto at =
        std::lower_bound(list_.begin(), list_.end(), children.front(), before);
    from = std::min<std::size_t>(from, at - list_.begin());
    list_.insert(at, children.begin(), children.end());
  }
  while (list_.size() > params_.L) {
    if (!list_.back().fetched) state_[list_.back().id] = kUnseen;
    list_.pop_back();
  }
  find_next(from);
}

TopKResult GraphSearchCursor::result() const {
  return make_topk(fetched_, params_.k);
}

void decode_node_record(const SerializedGraph& graph, std::uint32_t node,
                        std::span<const std::byte> record, NodeRecord& out) {
  const std::uint64_t vb = graph.vector_bytes();
  const std::uint64_t base = graph.offsets[node];
  const auto degree = bytes::get<std::uint32_t>(record, vb);
  const std::uint64_t slots = (record.size() - vb - 4) / 4;
  const bool padded = graph.layout.kind == GraphLayoutKind::Padded;
  if (degree > graph.max_degree || (padded ? degree > slots : degree != slots)) {
    throw FormatError("node " + std::to_string(node) + " has a bad degree",
                      base + vb);
  }
  out.vector = VectorView(graph.elem_type, graph.dim, record.data());
  out.edges.resize(degree);
  for (std::uint32_t e = 0; e < degree; ++e) {
    const auto at = vb + 4 + 4ull * e;
    const auto id = bytes::get<std::uint32_t>(record, at);
    if (id >= graph.count) {
      throw FormatError("edge target out of range", base + at);
    }
    out.edges[e] = id;
  }
}

SearchTrace search(const SerializedGraph& graph, VectorView query,
                   SearchParams params, const SimulatedDevice& device) {
  if (query.dim() != graph.dim || query.elem_type() != graph.elem_type) {
    throw InvalidArgument("query does not match the graph's vectors");
  }
  SearchTrace trace;
  GraphSearchCursor cursor(query, graph.start_node, graph.count, params,
                           graph.metric);
  NodeRecord rec;
  while (!cursor.done()) {
    const auto node = cursor.next_node();
    const auto bytes = device.read(graph.region, graph.offsets[node],
                                   graph.record_length(node), trace.io);
    decode_node_record(graph, node, bytes, rec);
    cursor.complete(node, rec.vector, rec.edges);
  }
  trace.hops = cursor.hops();
  trace.result = cursor.result();
  return trace;
}

TopKResult search_in_memory(const GraphIndex& graph, VectorView query,
                            SearchParams params, std::uint64_t* hops) {
  GraphSearchCursor cursor(query, graph.start_node(), graph.size(), params,
                           graph.metric());
  while (!cursor.done()) {
    const auto node = cursor.next_node();
    cursor.complete(node, graph.data()[node], graph.neighbors(node));
  }
  if (hops != nullptr) *hops = cursor.hops();
  return cursor.result();
}

double predict_graph_throughput(const DeviceProfile& profile, double avg_hops,
                                double record_bytes) {
  if (!(avg_hops > 0) || !(record_bytes > 0)) {
    throw InvalidArgument("predict_graph_throughput: positive arguments only");
  }
  const auto charged = static_cast<double>(charged_bytes(
      static_cast<std::uint64_t>(std::ceil(record_bytes)), profile.block_bytes));
  return std::min(profile.bandwidth_bytes_per_s / (avg_hops * charged),
                  profile.iops_cap / avg_hops);
}

}  // namespace tiervec
