#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tiervec/core.hpp"
#include "tiervec/device.hpp"

namespace tiervec {

struct GraphBuildParams {
  std::uint32_t knn_k = 64;       // exact neighbors computed per vector
  std::uint32_t max_degree = 32;  // R, edge bound after pruning
  double prune_alpha = 1.2;
  Metric metric = Metric::L2Squared;

  /// 1 <= max_degree <= knn_k, prune_alpha >= 1.
  void validate() const;
};

/// Per-node candidate lists with distances, ascending by (distance, id).
using NeighborLists = std::vector<std::vector<Neighbor>>;
using Adjacency = std::vector<std::vector<std::uint32_t>>;

/// Exact knn_k nearest neighbors of every vector, excluding itself.
/// Throws InvalidArgument unless knn_k < ds.count().
NeighborLists build_knn_graph(const VectorDataset& ds, std::uint32_t knn_k,
                              Metric metric = Metric::L2Squared);

/// Vector nearest (in L2) to the dataset mean; ties go to the smaller id.
std::uint32_t medoid(const VectorDataset& ds);

/// Scans candidates nearest-first and keeps c unless a kept neighbor n has
/// alpha * dist(n, c) < dist(node, c). Stops after max_degree kept edges.
std::vector<std::uint32_t> select_sng_neighbors(
    std::span<const Neighbor> candidates, const VectorDataset& ds,
    std::uint32_t max_degree, double alpha, Metric metric);

/// Adds v -> u for every u -> v where v still has room below max_degree.
void add_reverse_edges(Adjacency& adj, std::uint32_t max_degree);

/// Links every node unreachable from `start` to its nearest reachable node.
/// Returns the number of edges written.
std::size_t repair_connectivity(Adjacency& adj, const VectorDataset& ds,
                                std::uint32_t start, std::uint32_t max_degree,
                                Metric metric);

/// SNG selection, then reverse edges where room permits, then repair.
Adjacency prune_sng(const NeighborLists& raw, const VectorDataset& ds,
                    std::uint32_t max_degree, double alpha, Metric metric,
                    std::uint32_t start);

/// Baseline for pruning comparisons: first max_degree candidates, followed by
/// the same reverse-edge and repair passes as prune_sng.
Adjacency truncate_knn(const NeighborLists& raw, const VectorDataset& ds,
                       std::uint32_t max_degree, Metric metric,
                       std::uint32_t start);

/// In-memory neighbor graph. Lists hold at most max_degree ids, contain no
/// self edges, and every node is reachable from the start node.
class GraphIndex {
 public:
  GraphIndex(std::shared_ptr<const VectorDataset> data, Adjacency adjacency,
             std::uint32_t start_node, std::uint32_t max_degree,
             Metric metric);

  static GraphIndex build(std::shared_ptr<const VectorDataset> data,
                          const GraphBuildParams& params);

  /// Builds from precomputed neighbor lists; each list's first knn_k entries
  /// are used, so one wide kNN pass can serve several degree settings.
  static GraphIndex build_from_knn(std::shared_ptr<const VectorDataset> data,
                                   const NeighborLists& knn,
                                   const GraphBuildParams& params);

  const VectorDataset& data() const { return *data_; }
  const std::shared_ptr<const VectorDataset>& data_ptr() const { return data_; }
  const Adjacency& adjacency() const { return adjacency_; }
  std::span<const std::uint32_t> neighbors(std::uint32_t node) const {
    return adjacency_[node];
  }
  std::uint32_t start_node() const { return start_node_; }
  std::uint32_t max_degree() const { return max_degree_; }
  Metric metric() const { return metric_; }
  std::size_t size() const { return adjacency_.size(); }

  /// Throws InvalidArgument if a structural invariant is broken.
  void validate() const;
  bool all_reachable() const;

 private:
  std::shared_ptr<const VectorDataset> data_;
  Adjacency adjacency_;
  std::uint32_t start_node_;
  std::uint32_t max_degree_;
  Metric metric_;
};

// ---------------------------------------------------------------------------
// On-storage layouts

enum class GraphLayoutKind : std::uint8_t { Padded = 0, Csr = 1 };

struct GraphLayout {
  GraphLayoutKind kind = GraphLayoutKind::Csr;
  std::uint64_t block_bytes = 0;  // Padded only

  static GraphLayout padded(std::uint64_t block) {
    return {GraphLayoutKind::Padded, block};
  }
  static GraphLayout csr() { return {GraphLayoutKind::Csr, 0}; }
};

std::string to_string(GraphLayout layout);

/// Missing edge slot in a padded record.
inline constexpr std::uint32_t kNoEdge = 0xFFFFFFFFu;

/// A graph image as stored on the device plus its in-memory offset table.
///
/// Node record: vector bytes | u32 degree | u32 edge ids.
///   Padded(b): R edge slots (unused = 0xFFFFFFFF), record padded with zeros
///              to the next multiple of b.
///   CSR:       exactly `degree` edge ids, records packed back to back.
struct SerializedGraph {
  GraphLayout layout;
  ElemType elem_type = ElemType::Float32;
  Metric metric = Metric::L2Squared;
  std::uint32_t dim = 0;
  std::uint32_t max_degree = 0;
  std::uint64_t count = 0;
  std::uint32_t start_node = 0;
  std::vector<std::uint64_t> offsets;  // count + 1 entries
  StorageRegion region;

  std::uint64_t vector_bytes() const { return dim * elem_size(elem_type); }

  /// Bytes fetched for one hop: the unpadded record.
  std::uint64_t record_length(std::uint32_t node) const;
  double mean_record_length() const;
};

SerializedGraph serialize(const GraphIndex& graph, GraphLayout layout);

void write_graph_file(const std::string& path, const SerializedGraph& graph);
SerializedGraph read_graph_file(const std::string& path);

/// Region length over raw dataset bytes.
double index_amplification(const StorageRegion& region,
                           const VectorDataset& ds);
double index_amplification(std::uint64_t region_bytes, std::uint64_t count,
                           std::uint64_t vector_bytes);
/// Same ratio with the vector bytes removed from the numerator.
double edge_amplification(const SerializedGraph& graph);

// ---------------------------------------------------------------------------
// Search

struct SearchParams {
  std::uint32_t L = 64;  // candidate-set capacity
  std::uint32_t k = 10;

  void validate() const;  // L >= k >= 1
};

struct SearchTrace {
  std::uint64_t hops = 0;
  IoStats io;
  TopKResult result;
};

/// Resumable best-first traversal. The caller fetches the node returned by
/// next_node() and hands its vector and edges back through complete(); the
/// cursor never performs I/O itself, so several cursors can be interleaved.
///
/// A node's exact distance is known only once its record is fetched. Until
/// then it is queued under its parent's distance, after earlier parents, in
/// the parent's edge order. Traversal ends when every entry among the best L
/// has been fetched; the result is the top-k of all fetched nodes.
class GraphSearchCursor {
 public:
  GraphSearchCursor(VectorView query, std::uint32_t start_node,
                    std::uint64_t node_count, SearchParams params,
                    Metric metric);

  bool done() const { return next_ == kNone; }
  std::uint32_t next_node() const { return list_[next_].id; }
  void complete(std::uint32_t node, VectorView vec,
                std::span<const std::uint32_t> edges);

  std::uint64_t hops() const { return fetched_.size(); }
  TopKResult result() const;

 private:
  struct Candidate {
    double key;
    std::uint64_t parent_seq;
    std::uint32_t rank;
    std::uint32_t id;
    bool fetched;
  };
  static bool before(const Candidate& a, const Candidate& b);
  void find_next(std::size_t from);

  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  enum : std::uint8_t { kUnseen = 0, kListed = 1, kFetched = 2 };

  VectorView query_;
  SearchParams params_;
  Metric metric_;
  std::vector<Candidate> list_;
  std::vector<std::uint8_t> state_;
  std::vector<Neighbor> fetched_;
  std::size_t next_ = 0;
};

/// Decodes one node record. Throws FormatError on a corrupt record.
struct NodeRecord {
  VectorView vector;
  std::vector<std::uint32_t> edges;
};
void decode_node_record(const SerializedGraph& graph, std::uint32_t node,
                        std::span<const std::byte> record, NodeRecord& out);

/// One device read per hop.
SearchTrace search(const SerializedGraph& graph, VectorView query,
                   SearchParams params, const SimulatedDevice& device);

/// Same traversal over the in-memory graph, without I/O accounting.
TopKResult search_in_memory(const GraphIndex& graph, VectorView query,
                            SearchParams params,
                            std::uint64_t* hops = nullptr);

/// Throughput bound min(bandwidth / (hops * charged(record)), iops / hops).
/// Bandwidth is taken over charged bytes, so block waste counts against it.
double predict_graph_throughput(const DeviceProfile& profile, double avg_hops,
                                double record_bytes);

}  // namespace tiervec
