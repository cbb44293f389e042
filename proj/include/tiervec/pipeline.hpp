#pragma once

#include <cstdint>
#include <vector>

#include "tiervec/graph_index.hpp"

namespace tiervec {

struct PipelineConfig {
  std::uint32_t depth = 1;    // in-flight queries per worker
  std::uint32_t workers = 1;
  double compute_per_hop_s = 0.0;

  void validate() const;
};

struct PipelineRun {
  std::vector<SearchTrace> traces;  // indexed like the query set
  IoStats io;
  std::uint64_t total_hops = 0;
  double simulated_time_s = 0.0;
  double throughput_qps = 0.0;
};

/// Modeled time for `io` spread over `workers` workers with `inflight` requests
/// outstanding on each:
///   max(bytes_charged / bandwidth, ops / iops_cap,
///       ops * (latency + overhead + compute) / (inflight * workers),
///       ops * compute / workers)
/// With compute 0 and one worker this equals simulate_time.
double pipeline_time(const IoStats& io, const DeviceProfile& profile,
                     std::uint64_t inflight, std::uint32_t workers,
                     double compute_per_hop_s);

/// Queries are split into contiguous, equal shares per worker. Each worker
/// keeps `depth` cursors in flight, advances them one hop at a time in
/// round-robin order, and refills a slot from its pending queue as soon as
/// that slot's query finishes.
PipelineRun run_pipelined(const SerializedGraph& graph,
                          const VectorDataset& queries, SearchParams params,
                          const SimulatedDevice& device,
                          const PipelineConfig& config);

/// One query at a time per worker, each run to completion through search().
PipelineRun run_synchronous(const SerializedGraph& graph,
                            const VectorDataset& queries, SearchParams params,
                            const SimulatedDevice& device,
                            const PipelineConfig& config);

}  // namespace tiervec
