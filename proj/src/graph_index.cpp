#include "tiervec/graph_index.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "tiervec/bytes.hpp"

namespace tiervec {

void GraphBuildParams::validate() const {
  if (max_degree < 1 || max_degree > knn_k) {
    throw InvalidArgument("graph build: need 1 <= max_degree <= knn_k");
  }
  if (!(prune_alpha >= 1.0)) {
    throw InvalidArgument("graph build: prune_alpha must be >= 1");
  }
}

namespace {

template <class T>
void knn_scan(const VectorDataset& ds, Metric metric,
              std::vector<TopKCollector>& tops) {
  const std::size_t n = ds.count();
  const std::size_t dim = ds.dim();
  const T* base = reinterpret_cast<const T*>(ds.bytes().data());
  // Square tiles keep both row blocks cache resident; each unordered pair is
  // evaluated once and offered to both endpoints.
  constexpr std::size_t kTile = 128;
  for (std::size_t ib = 0; ib < n; ib += kTile) {
    const std::size_t ie = std::min(n, ib + kTile);
    for (std::size_t jb = ib; jb < n; jb += kTile) {
      const std::size_t je = std::min(n, jb + kTile);
      for (std::size_t i = ib; i < ie; ++i) {
        const T* a = base + i * dim;
        auto& top_i = tops[i];
        for (std::size_t j = (jb == ib ? i + 1 : jb); j < je; ++j) {
          const double d = distance_typed(a, base + j * dim, dim, metric);
          const Neighbor to_j{d, static_cast<std::uint32_t>(j)};
          if (top_i.accepts(to_j)) top_i.push(to_j);
          const Neighbor to_i{d, static_cast<std::uint32_t>(i)};
          if (tops[j].accepts(to_i)) tops[j].push(to_i);
        }
      }
    }
  }
}

std::vector<bool> reachable_from(const Adjacency& adj, std::uint32_t start) {
  std::vector<bool> seen(adj.size(), false);
  if (adj.empty()) return seen;
  std::deque<std::uint32_t> queue{start};
  seen[start] = true;
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    for (auto v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        queue.push_back(v);
      }
    }
  }
  return seen;
}

void extend_reach(const Adjacency& adj, std::uint32_t from,
                  std::vector<bool>& seen) {
  std::deque<std::uint32_t> queue{from};
  seen[from] = true;
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    for (auto v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        queue.push_back(v);
      }
    }
  }
}

bool contains(const std::vector<std::uint32_t>& list, std::uint32_t id) {
  return std::find(list.begin(), list.end(), id) != list.end();
}

std::size_t repair_impl(Adjacency& adj, const VectorDataset& ds,
                        std::uint32_t start, std::uint32_t max_degree,
                        Metric metric, const NeighborLists* hints) {
  const std::size_t n = adj.size();
  if (n == 0) return 0;
  std::vector<std::uint32_t> in_degree(n, 0);
  for (const auto& list : adj) {
    for (auto v : list) ++in_degree[v];
  }

  std::size_t written = 0;
  constexpr int kMaxPasses = 32;
  for (int pass = 0; pass < kMaxPasses; ++pass) {
    auto seen = reachable_from(adj, start);
    if (std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
      return written;
    }
    for (std::uint32_t u = 0; u < n; ++u) {
      if (seen[u]) continue;

      // Nearest reachable node, preferring one that still has room. The kNN
      // list of u answers most lookups; the full scan is the fallback.
      std::uint32_t nearest = kNoEdge;
      std::uint32_t nearest_with_room = kNoEdge;
      if (hints != nullptr) {
        for (const auto& c : (*hints)[u]) {
          if (!seen[c.id]) continue;
          if (nearest == kNoEdge) nearest = c.id;
          if (adj[c.id].size() < max_degree) {
            nearest_with_room = c.id;
            break;
          }
        }
      }
      if (nearest == kNoEdge) {
        Neighbor best{std::numeric_limits<double>::infinity(), kNoEdge};
        for (std::uint32_t r = 0; r < n; ++r) {
          if (!seen[r]) continue;
          const Neighbor cand{distance(ds[r], ds[u], metric), r};
          if (cand < best) best = cand;
        }
        nearest = best.id;
      }
      const std::uint32_t r =
          nearest_with_room != kNoEdge ? nearest_with_room : nearest;
      auto& list = adj[r];
      if (list.size() >= max_degree) {
        // Redirect the most redundant edge r -> x (largest in-degree, later
        // slots win ties) through u, so x stays reachable via r -> u -> x.
        // u's dropped edge, if any, was not carrying reachability.
        std::size_t victim = 0;
        for (std::size_t e = 1; e < list.size(); ++e) {
          if (in_degree[list[e]] >= in_degree[list[victim]]) victim = e;
        }
        const auto x = list[victim];
        list.erase(list.begin() + static_cast<std::ptrdiff_t>(victim));
        auto& out = adj[u];
        if (!contains(out, x)) {
          if (out.size() >= max_degree) {
            --in_degree[out.back()];
            out.pop_back();
          }
          out.push_back(x);
        } else {
          --in_degree[x];
        }
        ++written;
      }
      list.push_back(u);
      ++in_degree[u];
      ++written;
      extend_reach(adj, u, seen);
    }
  }
  throw std::logic_error("graph connectivity repair did not converge");
}

Adjacency finish_graph(Adjacency adj, const VectorDataset& ds,
                       const NeighborLists& raw, std::uint32_t max_degree,
                       Metric metric, std::uint32_t start) {
  add_reverse_edges(adj, max_degree);
  repair_impl(adj, ds, start, max_degree, metric, &raw);
  return adj;
}

}  // namespace

NeighborLists build_knn_graph(const VectorDataset& ds, std::uint32_t knn_k,
                              Metric metric) {
  if (knn_k == 0 || knn_k >= ds.count()) {
    throw InvalidArgument("build_knn_graph: need 1 <= knn_k < count");
  }
  std::vector<TopKCollector> tops(ds.count(), TopKCollector(knn_k));
  visit_elem(ds.elem_type(), [&](auto tag) {
    using T = std::remove_cv_t<std::remove_pointer_t<decltype(tag)>>;
    knn_scan<T>(ds, metric, tops);
  });
  NeighborLists out(ds.count());
  for (std::size_t i = 0; i < ds.count(); ++i) {
    out[i] = tops[i].sorted();
    tops[i] = TopKCollector(0);
  }
  return out;
}

std::uint32_t medoid(const VectorDataset& ds) {
  if (ds.empty()) throw InvalidArgument("medoid of an empty dataset");
  std::vector<double> sum(ds.dim(), 0.0);
  for (std::size_t i = 0; i < ds.count(); ++i) {
    const auto v = ds[i].to_floats();
    for (std::size_t d = 0; d < ds.dim(); ++d) sum[d] += v[d];
  }
  std::vector<float> mean(ds.dim());
  for (std::size_t d = 0; d < ds.dim(); ++d) {
    mean[d] = static_cast<float>(sum[d] / static_cast<double>(ds.count()));
  }
  Neighbor best{std::numeric_limits<double>::infinity(), 0};
  for (std::size_t i = 0; i < ds.count(); ++i) {
    const Neighbor n{distance_to_floats(ds[i], mean, Metric::L2Squared),
                     static_cast<std::uint32_t>(i)};
    if (n < best) best = n;
  }
  return best.id;
}

std::vector<std::uint32_t> select_sng_neighbors(
    std::span<const Neighbor> candidates, const VectorDataset& ds,
    std::uint32_t max_degree, double alpha, Metric metric) {
  std::vector<std::uint32_t> kept;
  kept.reserve(max_degree);
  for (const auto& c : candidates) {
    if (kept.size() >= max_degree) break;
    bool occluded = false;
    for (auto n : kept) {
      if (alpha * distance(ds[n], ds[c.id], metric) < c.distance) {
        occluded = true;
        break;
      }
    }
    if (!occluded) kept.push_back(c.id);
  }
  return kept;
}

void add_reverse_edges(Adjacency& adj, std::uint32_t max_degree) {
  const Adjacency forward = adj;
  for (std::uint32_t u = 0; u < forward.size(); ++u) {
    for (auto v : forward[u]) {
      if (v == u) continue;
      auto& back = adj[v];
      if (back.size() < max_degree && !contains(back, u)) back.push_back(u);
    }
  }
}

std::size_t repair_connectivity(Adjacency& adj, const VectorDataset& ds,
                                std::uint32_t start, std::uint32_t max_degree,
                                Metric metric) {
  return repair_impl(adj, ds, start, max_degree, metric, nullptr);
}

Adjacency prune_sng(const NeighborLists& raw, const VectorDataset& ds,
                    std::uint32_t max_degree, double alpha, Metric metric,
                    std::uint32_t start) {
  Adjacency adj(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    adj[i] = select_sng_neighbors(raw[i], ds, max_degree, alpha, metric);
  }
  return finish_graph(std::move(adj), ds, raw, max_degree, metric, start);
}

Adjacency truncate_knn(const NeighborLists& raw, const VectorDataset& ds,
                       std::uint32_t max_degree, Metric metric,
                       std::uint32_t start) {
  Adjacency adj(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto n = std::min<std::size_t>(max_degree, raw[i].size());
    for (std::size_t e = 0; e < n; ++e) adj[i].push_back(raw[i][e].id);
  }
  return finish_graph(std::move(adj), ds, raw, max_degree, metric, start);
}

// ---------------------------------------------------------------------------

GraphIndex::GraphIndex(std::shared_ptr<const VectorDataset> data,
                       Adjacency adjacency, std::uint32_t start_node,
                       std::uint32_t max_degree, Metric metric)
    : data_(std::move(data)),
      adjacency_(std::move(adjacency)),
      start_node_(start_node),
      max_degree_(max_degree),
      metric_(metric) {
  if (!data_) throw InvalidArgument("graph index without a dataset");
  if (adjacency_.size() != data_->count()) {
    throw InvalidArgument("adjacency size does not match dataset count");
  }
}

GraphIndex GraphIndex::build(std::shared_ptr<const VectorDataset> data,
                             const GraphBuildParams& params) {
  params.validate();
  if (!data || data->empty()) {
    throw InvalidArgument("graph build: empty dataset");
  }
  if (data->count() == 1) {
    return GraphIndex(data, Adjacency(1), 0, params.max_degree, params.metric);
  }
  auto p = params;
  p.knn_k = std::min<std::uint32_t>(
      p.knn_k, static_cast<std::uint32_t>(data->count() - 1));
  p.max_degree = std::min(p.max_degree, p.knn_k);
  const auto knn = build_knn_graph(*data, p.knn_k, p.metric);
  auto g = build_from_knn(data, knn, p);
  g.max_degree_ = params.max_degree;
  return g;
}

GraphIndex GraphIndex::build_from_knn(
    std::shared_ptr<const VectorDataset> data, const NeighborLists& knn,
    const GraphBuildParams& params) {
  params.validate();
  NeighborLists raw(knn.size());
  for (std::size_t i = 0; i < knn.size(); ++i) {
    const auto n = std::min<std::size_t>(params.knn_k, knn[i].size());
    raw[i].assign(knn[i].begin(), knn[i].begin() + static_cast<long>(n));
  }
  const auto start = medoid(*data);
  auto adj = prune_sng(raw, *data, params.max_degree, params.prune_alpha,
                       params.metric, start);
  return GraphIndex(std::move(data), std::move(adj), start, params.max_degree,
                    params.metric);
}

void GraphIndex::validate() const {
  const auto n = adjacency_.size();
  if (n > 0 && start_node_ >= n) throw InvalidArgument("start node out of range");
  for (std::uint32_t u = 0; u < n; ++u) {
    const auto& list = adjacency_[u];
    if (list.size() > max_degree_) {
      throw InvalidArgument("node " + std::to_string(u) + " exceeds R");
    }
    for (auto v : list) {
      if (v == u) throw InvalidArgument("self edge at " + std::to_string(u));
      if (v >= n) throw InvalidArgument("edge target out of range");
    }
  }
  if (!all_reachable()) throw InvalidArgument("graph is not connected");
}

bool GraphIndex::all_reachable() const {
  const auto seen = reachable_from(adjacency_, start_node_);
  return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

// ---------------------------------------------------------------------------

std::string to_string(GraphLayout layout) {
  if (layout.kind == GraphLayoutKind::Csr) return "csr";
  return "padded" + std::to_string(layout.block_bytes);
}

std::uint64_t SerializedGraph::record_length(std::uint32_t node) const {
  if (layout.kind == GraphLayoutKind::Padded) {
    return vector_bytes() + 4 + 4ull * max_degree;
  }
  return offsets[node + 1] - offsets[node];
}

double SerializedGraph::mean_record_length() const {
  if (count == 0) return 0.0;
  if (layout.kind == GraphLayoutKind::Padded) {
    return static_cast<double>(record_length(0));
  }
  return static_cast<double>(region.length()) / static_cast<double>(count);
}

SerializedGraph serialize(const GraphIndex& graph, GraphLayout layout) {
  const auto& ds = graph.data();
  SerializedGraph out;
  out.layout = layout;
  out.elem_type = ds.elem_type();
  out.metric = graph.metric();
  out.dim = static_cast<std::uint32_t>(ds.dim());
  out.max_degree = graph.max_degree();
  out.count = ds.count();
  out.start_node = graph.start_node();

  const std::uint64_t vb = ds.vector_bytes();
  const bool padded = layout.kind == GraphLayoutKind::Padded;
  const std::uint64_t full_record = vb + 4 + 4ull * graph.max_degree();
  if (padded && layout.block_bytes == 0) {
    throw InvalidArgument("padded layout needs a positive block size");
  }
  if (full_record > std::numeric_limits<std::uint32_t>::max()) {
    throw InvalidArgument("node record too large to serialize");
  }
  const std::uint64_t stride =
      padded ? charged_bytes(full_record, layout.block_bytes) : 0;

  out.offsets.resize(out.count + 1);
  std::uint64_t total = 0;
  for (std::uint64_t i = 0; i < out.count; ++i) {
    out.offsets[i] = total;
    total += padded ? stride : vb + 4 + 4ull * graph.neighbors(i).size();
  }
  out.offsets[out.count] = total;

  std::vector<std::byte> bytes(total, std::byte{0});
  std::span<std::byte> view(bytes);
  for (std::uint32_t i = 0; i < out.count; ++i) {
    auto at = out.offsets[i];
    std::memcpy(bytes.data() + at, ds[i].data(), vb);
    at += vb;
    const auto edges = graph.neighbors(i);
    bytes::put_at<std::uint32_t>(view, at,
                                 static_cast<std::uint32_t>(edges.size()));
    at += 4;
    for (auto e : edges) {
      bytes::put_at<std::uint32_t>(view, at, e);
      at += 4;
    }
    if (padded) {
      for (std::size_t e = edges.size(); e < graph.max_degree(); ++e) {
        bytes::put_at<std::uint32_t>(view, at, kNoEdge);
        at += 4;
      }
    }
  }
  out.region = StorageRegion(std::move(bytes));
  return out;
}

// File layout (little-endian):
//   0  char[4] "GVX1"        4  u8 layout (0 padded, 1 csr)
//   5  u8 elem_type          6  u8 metric          7  u8 reserved
//   8  u32 dim              12  u32 max_degree    16  u64 count
//  24  u32 start_node       28  u32 reserved      32  u64 block_bytes
//  40  u64 region_length    48  u64 offsets[count + 1]   then region bytes
namespace {
constexpr char kGraphMagic[4] = {'G', 'V', 'X', '1'};
constexpr std::uint64_t kGraphHeaderBytes = 48;
}  // namespace

void write_graph_file(const std::string& path, const SerializedGraph& g) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("cannot open for writing: " + path);
  out.write(kGraphMagic, 4);
  bytes::write<std::uint8_t>(out, static_cast<std::uint8_t>(g.layout.kind));
  bytes::write<std::uint8_t>(out, static_cast<std::uint8_t>(g.elem_type));
  bytes::write<std::uint8_t>(out, static_cast<std::uint8_t>(g.metric));
  bytes::write<std::uint8_t>(out, 0);
  bytes::write<std::uint32_t>(out, g.dim);
  bytes::write<std::uint32_t>(out, g.max_degree);
  bytes::write<std::uint64_t>(out, g.count);
  bytes::write<std::uint32_t>(out, g.start_node);
  bytes::write<std::uint32_t>(out, 0);
  bytes::write<std::uint64_t>(out, g.layout.block_bytes);
  bytes::write<std::uint64_t>(out, g.region.length());
  for (auto off : g.offsets) bytes::write<std::uint64_t>(out, off);
  bytes::write_bytes(out, g.region.bytes());
  if (!out) throw InvalidArgument("write failed: " + path);
}

SerializedGraph read_graph_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open graph file: " + path);
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kGraphMagic)) {
    throw FormatError("not a GVX1 graph file", 0);
  }
  SerializedGraph g;
  const auto layout = bytes::read<std::uint8_t>(in);
  if (layout > 1) throw FormatError("unknown graph layout tag", 4);
  g.layout.kind = static_cast<GraphLayoutKind>(layout);
  const auto et = bytes::read<std::uint8_t>(in);
  if (et > 2) throw FormatError("unknown element type", 5);
  g.elem_type = static_cast<ElemType>(et);
  const auto metric = bytes::read<std::uint8_t>(in);
  if (metric > 1) throw FormatError("unknown metric", 6);
  g.metric = static_cast<Metric>(metric);
  bytes::read<std::uint8_t>(in);
  g.dim = bytes::read<std::uint32_t>(in);
  if (g.dim == 0) throw FormatError("zero dimension", 8);
  g.max_degree = bytes::read<std::uint32_t>(in);
  g.count = bytes::read<std::uint64_t>(in);
  g.start_node = bytes::read<std::uint32_t>(in);
  bytes::read<std::uint32_t>(in);
  g.layout.block_bytes = bytes::read<std::uint64_t>(in);
  const auto region_len = bytes::read<std::uint64_t>(in);
  if (g.count > 0 && g.start_node >= g.count) {
    throw FormatError("start node out of range", 24);
  }
  if (g.layout.kind == GraphLayoutKind::Padded && g.layout.block_bytes == 0) {
    throw FormatError("padded layout with zero block size", 32);
  }

  in.seekg(0, std::ios::end);
  const auto file_len = static_cast<std::uint64_t>(in.tellg());
  in.seekg(static_cast<std::streamoff>(kGraphHeaderBytes));
  const std::uint64_t table_len = (g.count + 1) * 8;
  if (g.count > file_len / 8 ||
      kGraphHeaderBytes + table_len + region_len != file_len) {
    throw FormatError("file length does not match header", kGraphHeaderBytes);
  }
  g.offsets.resize(g.count + 1);
  for (std::uint64_t i = 0; i <= g.count; ++i) {
    g.offsets[i] = bytes::read<std::uint64_t>(in);
    const auto at = kGraphHeaderBytes + i * 8;
    if (i > 0 && g.offsets[i] < g.offsets[i - 1]) {
      throw FormatError("offset table is not monotone", at);
    }
  }
  if (g.offsets.front() != 0 || g.offsets.back() != region_len) {
    throw FormatError("offset table does not cover the region",
                      kGraphHeaderBytes);
  }
  const std::uint64_t vb = g.vector_bytes();
  for (std::uint64_t i = 0; i < g.count; ++i) {
    const auto span = g.offsets[i + 1] - g.offsets[i];
    const bool ok = g.layout.kind == GraphLayoutKind::Padded
                        ? span >= vb + 4 + 4ull * g.max_degree
                        : span >= vb + 4 && (span - vb - 4) % 4 == 0;
    if (!ok) {
      throw FormatError("node record has an invalid size",
                        kGraphHeaderBytes + i * 8);
    }
  }
  std::vector<std::byte> region(region_len);
  bytes::read_bytes(in, region);
  g.region = StorageRegion(std::move(region));
  return g;
}

double index_amplification(std::uint64_t region_bytes, std::uint64_t count,
                           std::uint64_t vector_bytes) {
  const double raw = static_cast<double>(count) *
                     static_cast<double>(vector_bytes);
  return raw > 0 ? static_cast<double>(region_bytes) / raw : 0.0;
}

double index_amplification(const StorageRegion& region,
                           const VectorDataset& ds) {
  return index_amplification(region.length(), ds.count(), ds.vector_bytes());
}

double edge_amplification(const SerializedGraph& graph) {
  const auto raw = graph.count * graph.vector_bytes();
  return index_amplification(graph.region.length() - raw, graph.count,
                             graph.vector_bytes());
}

}  // namespace tiervec
