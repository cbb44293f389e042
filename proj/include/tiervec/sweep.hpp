#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "tiervec/cluster_index.hpp"
#include "tiervec/core.hpp"
#include "tiervec/device.hpp"
#include "tiervec/graph_index.hpp"

namespace tiervec {

using GroundTruth = std::vector<std::vector<std::uint32_t>>;

/// Exact top-k ids per query.
GroundTruth ground_truth(const VectorDataset& base, const VectorDataset& queries,
                         std::size_t k, Metric metric);
std::vector<std::vector<std::int32_t>> to_ivecs_rows(const GroundTruth& truth);
/// Keeps the first k ids of every row; rows shorter than k are a FormatError.
GroundTruth from_ivecs_rows(const std::vector<std::vector<std::int32_t>>& rows,
                            std::size_t k);

/// Mean recall@k of results[i] against truth[i].
double mean_recall(const std::vector<TopKResult>& results,
                   const GroundTruth& truth, std::size_t k);

// ---------------------------------------------------------------------------
// Device microbenchmarks

struct MicroRow {
  std::string device;
  std::string kind;  // "payload" or "mix"
  double x = 0;      // payload bytes, or small-read fraction
  double value = 0;  // bytes/s
  double relative = 0;  // value / peak for payloads, value / value(f = 0) for mixes
};

std::vector<MicroRow> microbench_device(
    const std::vector<DeviceProfile>& profiles,
    const std::vector<std::uint64_t>& payloads,
    const std::vector<double>& small_fractions);

void write_micro_csv(std::ostream& out, const std::vector<MicroRow>& rows);

// ---------------------------------------------------------------------------
// Sweeps

inline constexpr int kCsvSchemaVersion = 1;

struct SweepRow {
  std::string family;  // "graph" or "cluster"
  std::string device;
  std::string layout;
  std::string param_name;  // "R" or "replica_eps"
  double param = 0;
  std::string tuned_name;  // "L" or "top_c"
  std::uint32_t tuned = 0;
  double recall_target = 0;
  double recall = 0;
  bool reached = false;
  double replication_factor = 1;
  double amplification = 0;
  double edge_amplification = 0;
  std::uint64_t index_bytes = 0;
  std::uint64_t n_queries = 0;
  double avg_reads = 0;  // hops for graphs, clusters for cluster indexes
  IoStats io;            // totals over all queries
  double modeled_qps = 0;
  double simulated_qps = 0;

  double per_query(std::uint64_t v) const {
    return n_queries ? static_cast<double>(v) / static_cast<double>(n_queries)
                     : 0.0;
  }
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

void write_sweep_csv(std::ostream& out, const SweepResult& result);

struct Tuning {
  std::uint32_t value = 0;  // chosen L or top_c
  double recall = 0;
  bool reached = false;
};

/// Smallest L in [k, L_cap] found by doubling then bisection whose in-memory
/// mean recall meets the target. If L_cap misses it, L_cap is returned with
/// reached = false.
Tuning tune_graph_L(const GraphIndex& graph, const VectorDataset& queries,
                    const GroundTruth& truth, std::uint32_t k, double target,
                    std::uint32_t L_cap = 4096);

/// Same search over top_c in [1, top_c_cap].
Tuning tune_top_c(const ClusterIndex& index, const VectorDataset& queries,
                  const GroundTruth& truth, std::uint32_t k, double target,
                  std::uint32_t top_c_cap);

struct GraphSweepConfig {
  std::vector<std::uint32_t> degrees{8, 16, 32, 64};
  std::uint32_t knn_k = 128;
  double prune_alpha = 1.2;
  std::uint32_t L_cap = 4096;
  std::uint32_t k = 10;
  double recall_target = 0.9;
  std::uint64_t depth = 64;
  std::vector<DeviceProfile> devices;
  Metric metric = Metric::L2Squared;
};

/// One row per (R, device, layout) with layouts CSR and Padded(device block).
SweepResult sweep_graph(std::shared_ptr<const VectorDataset> base,
                        const VectorDataset& queries, const GroundTruth& truth,
                        const GraphSweepConfig& config);
/// Same, reusing neighbor lists at least as wide as the largest degree.
SweepResult sweep_graph(std::shared_ptr<const VectorDataset> base,
                        const NeighborLists& knn, const VectorDataset& queries,
                        const GroundTruth& truth,
                        const GraphSweepConfig& config);

struct ClusterSweepConfig {
  std::vector<double> replica_eps{0.0, 0.05, 0.1, 0.2};
  std::vector<ClusterLayout> layouts{ClusterLayout::Coupled,
                                     ClusterLayout::Decoupled,
                                     ClusterLayout::Grouped};
  ClusterBuildParams build;
  std::uint32_t top_c_cap = 0;  // 0 = n_clusters
  std::uint32_t k = 10;
  double recall_target = 0.9;
  std::uint64_t depth = 64;
  std::vector<DeviceProfile> devices;
  /// Frequencies for the grouped layout come from this log, or from the
  /// measured queries when it is null.
  const VectorDataset* frequency_log = nullptr;
};

/// One row per (replica_eps, device, layout).
SweepResult sweep_cluster(std::shared_ptr<const VectorDataset> base,
                          const VectorDataset& queries, const GroundTruth& truth,
                          const ClusterSweepConfig& config);
/// Same, starting from an existing index; config.build is ignored.
SweepResult sweep_cluster(const ClusterIndex& root, const VectorDataset& queries,
                          const GroundTruth& truth,
                          const ClusterSweepConfig& config);

/// Per device and family, the row with the highest simulated throughput
/// among rows that reached the recall target (or the best-recall row when
/// none did, left flagged).
SweepResult compare_indexes(const SweepResult& graph_rows,
                            const SweepResult& cluster_rows);

}  // namespace tiervec
