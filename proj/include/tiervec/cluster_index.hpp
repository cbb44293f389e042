#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tiervec/core.hpp"
#include "tiervec/device.hpp"
#include "tiervec/graph_index.hpp"

namespace tiervec {

struct ClusterBuildParams {
  std::uint32_t n_clusters = 256;
  std::uint32_t kmeans_iters = 10;
  double balance_slack = 0.1;  // cluster size cap (1 + slack) * count / n_clusters
  double replica_eps = 0.1;
  std::uint32_t max_replicas = 8;
  std::uint64_t seed = 1;
  Metric metric = Metric::L2Squared;

  void validate() const;
};

/// Largest cluster size allowed by balance_slack, never below ceil(n / C).
std::uint64_t cluster_capacity(std::uint64_t count, std::uint32_t n_clusters,
                               double balance_slack);

struct KMeansResult {
  VectorDataset centroids;  // float32, n_clusters rows
  std::vector<std::uint32_t> assignment;
};

/// Lloyd iterations in L2 with a capacity-constrained assignment step:
/// vectors are placed in order of decreasing margin (second-nearest minus
/// nearest distance) into the nearest centroid that still has room. Seeded
/// initialization picks distinct data vectors. A cluster left empty keeps
/// its previous centroid.
KMeansResult balanced_kmeans(const VectorDataset& ds,
                             const ClusterBuildParams& params);

/// Clusters each vector is stored in, primary first, then the others
/// nearest-first.
using ReplicaLists = std::vector<std::vector<std::uint32_t>>;

/// Vector v joins every cluster j with dist(v, c_j) <= d0 + eps * |d0|, where
/// d0 is its nearest-centroid distance, nearest-first, until max_replicas
/// copies. The primary cluster is always kept.
ReplicaLists replicate_boundary(const VectorDataset& ds,
                                const VectorDataset& centroids,
                                const std::vector<std::uint32_t>& primary,
                                double eps, std::uint32_t max_replicas,
                                Metric metric);

/// Per-cluster member ids, ascending.
std::vector<std::vector<std::uint32_t>> postings_from_replicas(
    const ReplicaLists& replicas, std::uint32_t n_clusters);

enum class NavigatorMode { Auto, ExactScan, Graph };

/// Picks the clusters to probe. Auto scans all centroids when there are at
/// most kExactScanLimit of them and otherwise walks an in-memory graph over
/// the centroids with L = max(2 * top_c, 16).
class CentroidNavigator {
 public:
  static constexpr std::uint32_t kExactScanLimit = 4096;

  CentroidNavigator(std::shared_ptr<const VectorDataset> centroids,
                    Metric metric, NavigatorMode mode = NavigatorMode::Auto);

  std::vector<std::uint32_t> select(VectorView query,
                                    std::uint32_t top_c) const;
  bool uses_graph() const { return graph_.has_value(); }

 private:
  std::shared_ptr<const VectorDataset> centroids_;
  Metric metric_;
  std::optional<GraphIndex> graph_;
};

struct ClusterSearchParams {
  std::uint32_t top_c = 8;
  std::uint32_t k = 10;
};

class ClusterIndex {
 public:
  ClusterIndex(std::shared_ptr<const VectorDataset> data,
               VectorDataset centroids, std::vector<std::uint32_t> primary,
               ReplicaLists replicas, ClusterBuildParams params,
               NavigatorMode mode = NavigatorMode::Auto);

  static ClusterIndex build(std::shared_ptr<const VectorDataset> data,
                            const ClusterBuildParams& params,
                            NavigatorMode mode = NavigatorMode::Auto);

  /// Same centroids and primary assignment, replicas recomputed for `eps`.
  ClusterIndex with_replica_eps(double eps) const;

  const VectorDataset& data() const { return *data_; }
  const VectorDataset& centroids() const { return *centroids_; }
  const std::vector<std::uint32_t>& primary() const { return primary_; }
  const ReplicaLists& replicas() const { return replicas_; }
  const std::vector<std::uint32_t>& postings(std::uint32_t cluster) const {
    return postings_[cluster];
  }
  std::uint32_t n_clusters() const {
    return static_cast<std::uint32_t>(postings_.size());
  }
  Metric metric() const { return params_.metric; }
  const ClusterBuildParams& params() const { return params_; }

  double replication_factor() const;
  const CentroidNavigator& navigator() const { return navigator_; }

  std::vector<std::uint32_t> select_clusters(VectorView query,
                                             std::uint32_t top_c) const;

  /// Throws InvalidArgument if a structural invariant is broken.
  void validate() const;

 private:
  std::shared_ptr<const VectorDataset> data_;
  std::shared_ptr<const VectorDataset> centroids_;
  std::vector<std::uint32_t> primary_;
  ReplicaLists replicas_;
  std::vector<std::vector<std::uint32_t>> postings_;
  ClusterBuildParams params_;
  NavigatorMode mode_;
  CentroidNavigator navigator_;
};

// ---------------------------------------------------------------------------
// On-storage layouts

enum class ClusterLayout : std::uint8_t { Coupled = 0, Decoupled = 1, Grouped = 2 };

std::string to_string(ClusterLayout layout);
ClusterLayout parse_cluster_layout(std::string_view name);

/// Physical home of each vector for the grouped layout: group_of[i] is one of
/// the clusters vector i is replicated to.
struct GroupAssignment {
  std::vector<std::uint32_t> group_of;
};

/// Region contents:
///   Coupled    per cluster: u32 n | n vectors (replicas copy the bytes)
///   Decoupled  heap of all vectors in id order, then per cluster:
///              u32 n | u32 reserved | n u64 heap addresses
///   Grouped    per cluster: u32 n_group | u32 n_overflow | n_group vectors |
///              n_overflow u64 addresses of vectors grouped elsewhere
/// Member ids stay in the in-memory directory; they are never fetched.
struct ClusterEntry {
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
  std::uint32_t n_inline = 0;  // vectors stored inside the record
  std::uint32_t n_addr = 0;    // vectors reached through an address
  std::vector<std::uint32_t> ids;  // inline ids, then address ids
};

struct SerializedCluster {
  ClusterLayout layout = ClusterLayout::Coupled;
  ElemType elem_type = ElemType::Float32;
  Metric metric = Metric::L2Squared;
  std::uint32_t dim = 0;
  std::uint64_t count = 0;
  double replica_eps = 0.0;
  std::uint32_t max_replicas = 1;
  double balance_slack = 0.0;
  VectorDataset centroids;
  std::vector<std::uint32_t> primary;
  std::vector<ClusterEntry> directory;
  StorageRegion region;

  std::uint32_t n_clusters() const {
    return static_cast<std::uint32_t>(directory.size());
  }
  std::uint64_t vector_bytes() const { return dim * elem_size(elem_type); }
  /// Mean bytes of the first read per probed cluster.
  double mean_record_length() const;
};

/// Throws InvalidArgument if `groups` is missing for Grouped or names a
/// cluster the vector is not replicated to.
SerializedCluster serialize(const ClusterIndex& index, ClusterLayout layout,
                            const GroupAssignment* groups = nullptr);

void write_cluster_file(const std::string& path, const SerializedCluster& c);
SerializedCluster read_cluster_file(const std::string& path);

struct ClusterSearchTrace {
  std::vector<std::uint32_t> clusters;
  IoStats io;
  TopKResult result;
};

/// Probes top_c clusters chosen by `navigator` (built over the stored
/// centroids). Coupled issues one read per cluster; Decoupled one record read
/// plus one read per address; Grouped one segment read plus one read per
/// overflow address.
ClusterSearchTrace search(const SerializedCluster& index,
                          const CentroidNavigator& navigator, VectorView query,
                          ClusterSearchParams params,
                          const SimulatedDevice& device);

/// Exact scan of the selected clusters' members without I/O accounting.
TopKResult search_in_memory(const ClusterIndex& index, VectorView query,
                            ClusterSearchParams params);

/// min(bandwidth / (top_c * charged(cluster_bytes)), iops_cap / top_c).
double predict_cluster_throughput(const DeviceProfile& profile, double top_c,
                                  double avg_cluster_bytes);

}  // namespace tiervec
