#include "tiervec/pipeline.hpp"

#include <algorithm>
#include <deque>
#include <optional>

namespace tiervec {

void PipelineConfig::validate() const {
  if (depth < 1) throw InvalidArgument("pipeline depth must be >= 1");
  if (workers < 1) throw InvalidArgument("pipeline workers must be >= 1");
  if (!(compute_per_hop_s >= 0)) {
    throw InvalidArgument("compute_per_hop_s must be >= 0");
  }
}

double pipeline_time(const IoStats& io, const DeviceProfile& profile,
                     std::uint64_t inflight, std::uint32_t workers,
                     double compute_per_hop_s) {
  if (inflight == 0 || workers == 0) {
    throw InvalidArgument("pipeline_time: inflight and workers must be >= 1");
  }
  if (!(compute_per_hop_s >= 0)) {
    throw InvalidArgument("compute_per_hop_s must be >= 0");
  }
  const double ops = static_cast<double>(io.ops);
  const double w = static_cast<double>(workers);
  const double transfer =
      static_cast<double>(io.bytes_charged) / profile.bandwidth_bytes_per_s;
  const double issue = ops / profile.iops_cap;
  const double wait = ops *
                      (profile.latency_s + profile.per_op_overhead_s +
                       compute_per_hop_s) /
                      (static_cast<double>(inflight) * w);
  const double compute = ops * compute_per_hop_s / w;
  return std::max({transfer, issue, wait, compute});
}

namespace {

struct Share {
  std::size_t first;
  std::size_t count;
};

std::vector<Share> partition(std::size_t n, std::uint32_t workers) {
  std::vector<Share> out;
  const std::size_t base = n / workers;
  const std::size_t extra = n % workers;
  std::size_t at = 0;
  for (std::uint32_t w = 0; w < workers; ++w) {
    const std::size_t c = base + (w < extra ? 1 : 0);
    out.push_back({at, c});
    at += c;
  }
  return out;
}

void finish(PipelineRun& run, const DeviceProfile& profile,
            std::uint64_t inflight, const PipelineConfig& config,
            std::size_t n_queries) {
  for (const auto& t : run.traces) {
    run.io += t.io;
    run.total_hops += t.hops;
  }
  run.simulated_time_s = pipeline_time(run.io, profile, inflight,
                                       config.workers, config.compute_per_hop_s);
  run.throughput_qps = run.simulated_time_s > 0
                           ? static_cast<double>(n_queries) / run.simulated_time_s
                           : 0.0;
}

}  // namespace

PipelineRun run_pipelined(const SerializedGraph& graph,
                          const VectorDataset& queries, SearchParams params,
                          const SimulatedDevice& device,
                          const PipelineConfig& config) {
  config.validate();
  params.validate();
  if (queries.dim() != graph.dim || queries.elem_type() != graph.elem_type) {
    throw InvalidArgument("queries do not match the graph's vectors");
  }
  PipelineRun run;
  run.traces.resize(queries.count());

  struct Slot {
    std::size_t query;
    std::optional<GraphSearchCursor> cursor;
  };
  NodeRecord rec;
  std::size_t widest = 0;
  for (const auto& share : partition(queries.count(), config.workers)) {
    widest = std::max(widest, share.count);
    std::size_t pending = share.first;
    const std::size_t end = share.first + share.count;
    std::vector<Slot> slots;
    auto admit = [&](Slot& slot) {
      if (pending >= end) return false;
      slot.query = pending++;
      slot.cursor.emplace(queries[slot.query], graph.start_node, graph.count,
                          params, graph.metric);
      return true;
    };
    for (std::uint32_t s = 0; s < config.depth && pending < end; ++s) {
      Slot slot;
      admit(slot);
      slots.push_back(std::move(slot));
    }
    std::size_t active = slots.size();
    while (active > 0) {
      for (auto& slot : slots) {
        if (!slot.cursor) continue;
        auto& cursor = *slot.cursor;
        auto& trace = run.traces[slot.query];
        if (!cursor.done()) {
          const auto node = cursor.next_node();
          const auto bytes = device.read(graph.region, graph.offsets[node],
                                         graph.record_length(node), trace.io);
          decode_node_record(graph, node, bytes, rec);
          cursor.complete(node, rec.vector, rec.edges);
        }
        if (cursor.done()) {
          trace.hops = cursor.hops();
          trace.result = cursor.result();
          slot.cursor.reset();
          if (!admit(slot)) --active;
        }
      }
    }
  }
  const auto inflight = std::max<std::uint64_t>(
      1, std::min<std::uint64_t>(config.depth, widest));
  finish(run, device.profile(), inflight, config, queries.count());
  return run;
}

PipelineRun run_synchronous(const SerializedGraph& graph,
                            const VectorDataset& queries, SearchParams params,
                            const SimulatedDevice& device,
                            const PipelineConfig& config) {
  config.validate();
  PipelineRun run;
  run.traces.reserve(queries.count());
  for (std::size_t q = 0; q < queries.count(); ++q) {
    run.traces.push_back(search(graph, queries[q], params, device));
  }
  finish(run, device.profile(), 1, config, queries.count());
  return run;
}

}  // namespace tiervec
