#include "tiervec/sweep.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "tiervec/grouping.hpp"

namespace tiervec {

GroundTruth ground_truth(const VectorDataset& base, const VectorDataset& queries,
                         std::size_t k, Metric metric) {
  if (k < 1) throw InvalidArgument("ground truth needs k >= 1");
  GroundTruth out;
  out.reserve(queries.count());
  for (std::size_t q = 0; q < queries.count(); ++q) {
    out.push_back(brute_force_topk(base, queries[q], k, metric).ids);
  }
  return out;
}

std::vector<std::vector<std::int32_t>> to_ivecs_rows(const GroundTruth& truth) {
  std::vector<std::vector<std::int32_t>> rows;
  for (const auto& t : truth) rows.emplace_back(t.begin(), t.end());
  return rows;
}

GroundTruth from_ivecs_rows(const std::vector<std::vector<std::int32_t>>& rows,
                            std::size_t k) {
  GroundTruth out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() < k) {
      throw FormatError("ground-truth row " + std::to_string(i) +
                            " is shorter than k",
                        i);
    }
    std::vector<std::uint32_t> ids;
    for (std::size_t e = 0; e < k; ++e) {
      if (rows[i][e] < 0) throw FormatError("negative id in ground truth", i);
      ids.push_back(static_cast<std::uint32_t>(rows[i][e]));
    }
    out.push_back(std::move(ids));
  }
  return out;
}

double mean_recall(const std::vector<TopKResult>& results,
                   const GroundTruth& truth, std::size_t k) {
  if (results.size() != truth.size()) {
    throw InvalidArgument("result and truth counts differ");
  }
  if (results.empty()) return 0.0;
  double total = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    total += recall(results[i].ids, truth[i], k);
  }
  return total / static_cast<double>(results.size());
}

// ---------------------------------------------------------------------------

std::vector<MicroRow> microbench_device(
    const std::vector<DeviceProfile>& profiles,
    const std::vector<std::uint64_t>& payloads,
    const std::vector<double>& small_fractions) {
  std::vector<MicroRow> rows;
  for (const auto& p : profiles) {
    for (auto payload : payloads) {
      const double bw = effective_bandwidth(p, payload, true);
      rows.push_back({p.name, "payload", static_cast<double>(payload), bw,
                      bw / p.bandwidth_bytes_per_s});
    }
    const double base = mixed_read_throughput(p, 0.0);
    for (auto f : small_fractions) {
      const double t = mixed_read_throughput(p, f);
      rows.push_back({p.name, "mix", f, t, t / base});
    }
  }
  return rows;
}

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

void write_micro_csv(std::ostream& out, const std::vector<MicroRow>& rows) {
  out << "schema_version,device,kind,x,bytes_per_s,relative\n";
  for (const auto& r : rows) {
    out << kCsvSchemaVersion << ',' << r.device << ',' << r.kind << ','
        << num(r.x) << ',' << num(r.value) << ',' << num(r.relative) << '\n';
  }
}

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  out << "schema_version,family,device,layout,param_name,param,tuned_name,"
         "tuned,recall_target,recall,reached,replication_factor,"
         "amplification,edge_amplification,index_bytes,n_queries,avg_reads,"
         "ops_per_query,bytes_requested_per_query,bytes_charged_per_query,"
         "small_op_fraction,modeled_qps,simulated_qps\n";
  for (const auto& r : result.rows) {
    const double small =
        r.io.ops ? static_cast<double>(r.io.small_ops) /
                       static_cast<double>(r.io.ops)
                 : 0.0;
    out << kCsvSchemaVersion << ',' << r.family << ',' << r.device << ','
        << r.layout << ',' << r.param_name << ',' << num(r.param) << ','
        << r.tuned_name << ',' << r.tuned << ',' << num(r.recall_target) << ','
        << num(r.recall) << ',' << (r.reached ? 1 : 0) << ','
        << num(r.replication_factor) << ',' << num(r.amplification) << ','
        << num(r.edge_amplification) << ',' << r.index_bytes << ','
        << r.n_queries << ',' << num(r.avg_reads) << ','
        << num(r.per_query(r.io.ops)) << ','
        << num(r.per_query(r.io.bytes_requested)) << ','
        << num(r.per_query(r.io.bytes_charged)) << ',' << num(small) << ','
        << num(r.modeled_qps) << ',' << num(r.simulated_qps) << '\n';
  }
}

// ---------------------------------------------------------------------------

namespace {

// Doubling from `lo` until the target is met, then bisection on the bracket.
template <class Eval>
Tuning tune(std::uint32_t lo, std::uint32_t cap, double target, Eval&& eval) {
  std::map<std::uint32_t, double> seen;
  auto at = [&](std::uint32_t v) {
    auto it = seen.find(v);
    if (it == seen.end()) it = seen.emplace(v, eval(v)).first;
    return it->second;
  };
  std::uint32_t below = 0;
  std::uint32_t v = lo;
  while (at(v) < target) {
    if (v >= cap) return {cap, at(cap), false};
    below = v;
    v = static_cast<std::uint32_t>(std::min<std::uint64_t>(2ull * v, cap));
  }
  std::uint32_t hi = v;
  std::uint32_t low = below == 0 ? lo : below + 1;
  while (low < hi) {
    const std::uint32_t mid = low + (hi - low) / 2;
    if (at(mid) >= target) {
      hi = mid;
    } else {
      low = mid + 1;
    }
  }
  return {hi, at(hi), true};
}

}  // namespace

Tuning tune_graph_L(const GraphIndex& graph, const VectorDataset& queries,
                    const GroundTruth& truth, std::uint32_t k, double target,
                    std::uint32_t L_cap) {
  return tune(k, std::max(k, L_cap), target, [&](std::uint32_t L) {
    std::vector<TopKResult> results;
    for (std::size_t q = 0; q < queries.count(); ++q) {
      results.push_back(search_in_memory(graph, queries[q], {L, k}));
    }
    return mean_recall(results, truth, k);
  });
}

Tuning tune_top_c(const ClusterIndex& index, const VectorDataset& queries,
                  const GroundTruth& truth, std::uint32_t k, double target,
                  std::uint32_t top_c_cap) {
  const auto cap = std::min(std::max(top_c_cap, 1u), index.n_clusters());
  return tune(1, cap, target, [&](std::uint32_t top_c) {
    std::vector<TopKResult> results;
    for (std::size_t q = 0; q < queries.count(); ++q) {
      results.push_back(search_in_memory(index, queries[q], {top_c, k}));
    }
    return mean_recall(results, truth, k);
  });
}

SweepResult sweep_graph(std::shared_ptr<const VectorDataset> base,
                        const VectorDataset& queries, const GroundTruth& truth,
                        const GraphSweepConfig& config) {
  if (config.degrees.empty()) throw InvalidArgument("no degrees to sweep");
  const auto widest = std::max(
      config.knn_k,
      *std::max_element(config.degrees.begin(), config.degrees.end()));
  const auto knn_k = static_cast<std::uint32_t>(
      std::min<std::size_t>(widest, base->count() - 1));
  return sweep_graph(base, build_knn_graph(*base, knn_k, config.metric),
                     queries, truth, config);
}

SweepResult sweep_graph(std::shared_ptr<const VectorDataset> base,
                        const NeighborLists& knn, const VectorDataset& queries,
                        const GroundTruth& truth,
                        const GraphSweepConfig& config) {
  if (config.degrees.empty()) throw InvalidArgument("no degrees to sweep");
  if (knn.size() != base->count() || knn.empty()) {
    throw InvalidArgument("neighbor lists do not match the dataset");
  }
  std::size_t narrowest = knn.front().size();
  for (const auto& l : knn) narrowest = std::min(narrowest, l.size());
  const auto knn_k = static_cast<std::uint32_t>(
      std::min<std::size_t>(narrowest, std::max(config.knn_k, *std::max_element(
                                                    config.degrees.begin(),
                                                    config.degrees.end()))));

  SweepResult out;
  for (auto R : config.degrees) {
    GraphBuildParams bp;
    bp.knn_k = knn_k;
    bp.max_degree = std::min(R, knn_k);
    bp.prune_alpha = config.prune_alpha;
    bp.metric = config.metric;
    const auto graph = GraphIndex::build_from_knn(base, knn, bp);
    const auto tuned = tune_graph_L(graph, queries, truth, config.k,
                                    config.recall_target, config.L_cap);
    const SearchParams sp{tuned.value, config.k};

    for (const auto& profile : config.devices) {
      const SimulatedDevice device(profile);
      for (auto layout :
           {GraphLayout::csr(), GraphLayout::padded(profile.block_bytes)}) {
        const auto image = serialize(graph, layout);
        SweepRow row;
        row.family = "graph";
        row.device = profile.name;
        row.layout = to_string(layout);
        row.param_name = "R";
        row.param = R;
        row.tuned_name = "L";
        row.tuned = tuned.value;
        row.recall_target = config.recall_target;
        row.reached = tuned.reached;
        row.amplification = index_amplification(image.region, *base);
        row.edge_amplification = edge_amplification(image);
        row.index_bytes = image.region.length();
        row.n_queries = queries.count();
        std::vector<TopKResult> results;
        std::uint64_t hops = 0;
        for (std::size_t q = 0; q < queries.count(); ++q) {
          auto trace = search(image, queries[q], sp, device);
          hops += trace.hops;
          row.io += trace.io;
          results.push_back(std::move(trace.result));
        }
        row.recall = mean_recall(results, truth, config.k);
        row.avg_reads = row.per_query(hops);
        if (hops > 0) {
          row.modeled_qps = predict_graph_throughput(
              profile, row.avg_reads, image.mean_record_length());
          row.simulated_qps = static_cast<double>(row.n_queries) /
                              simulate_time(row.io, profile, config.depth);
        }
        out.rows.push_back(std::move(row));
      }
    }
  }
  return out;
}

SweepResult sweep_cluster(std::shared_ptr<const VectorDataset> base,
                          const VectorDataset& queries, const GroundTruth& truth,
                          const ClusterSweepConfig& config) {
  if (config.replica_eps.empty()) throw InvalidArgument("no eps to sweep");
  return sweep_cluster(ClusterIndex::build(base, config.build), queries, truth,
                       config);
}

SweepResult sweep_cluster(const ClusterIndex& root, const VectorDataset& queries,
                          const GroundTruth& truth,
                          const ClusterSweepConfig& config) {
  if (config.replica_eps.empty()) throw InvalidArgument("no eps to sweep");
  const VectorDataset& base_ref = root.data();
  const auto cap = config.top_c_cap == 0 ? root.n_clusters() : config.top_c_cap;
  const VectorDataset& log =
      config.frequency_log != nullptr ? *config.frequency_log : queries;

  SweepResult out;
  for (auto eps : config.replica_eps) {
    const auto index = root.with_replica_eps(eps);
    const auto tuned = tune_top_c(index, queries, truth, config.k,
                                  config.recall_target, cap);
    const ClusterSearchParams sp{tuned.value, config.k};
    std::optional<GroupAssignment> groups;

    for (auto layout : config.layouts) {
      if (layout == ClusterLayout::Grouped && !groups) {
        groups = greedy_group(make_grouping_problem(
            index, estimate_frequencies(index, log, tuned.value)));
      }
      const auto image =
          serialize(index, layout, groups ? &*groups : nullptr);
      for (const auto& profile : config.devices) {
        const SimulatedDevice device(profile);
        SweepRow row;
        row.family = "cluster";
        row.device = profile.name;
        row.layout = to_string(layout);
        row.param_name = "replica_eps";
        row.param = eps;
        row.tuned_name = "top_c";
        row.tuned = tuned.value;
        row.recall_target = config.recall_target;
        row.reached = tuned.reached;
        row.replication_factor = index.replication_factor();
        row.amplification = index_amplification(image.region, base_ref);
        row.edge_amplification =
            row.amplification - 1.0;  // share beyond one copy of the data
        row.index_bytes = image.region.length();
        row.n_queries = queries.count();
        std::vector<TopKResult> results;
        std::uint64_t probed = 0;
        for (std::size_t q = 0; q < queries.count(); ++q) {
          auto trace = search(image, index.navigator(), queries[q], sp, device);
          probed += trace.clusters.size();
          row.io += trace.io;
          results.push_back(std::move(trace.result));
        }
        row.recall = mean_recall(results, truth, config.k);
        row.avg_reads = row.per_query(probed);
        if (row.io.ops > 0) {
          if (layout == ClusterLayout::Coupled) {
            row.modeled_qps = predict_cluster_throughput(
                profile, row.avg_reads, image.mean_record_length());
          } else {
            row.modeled_qps = std::min(
                profile.bandwidth_bytes_per_s /
                    row.per_query(row.io.bytes_charged),
                profile.iops_cap / row.per_query(row.io.ops));
          }
          row.simulated_qps = static_cast<double>(row.n_queries) /
                              simulate_time(row.io, profile, config.depth);
        }
        out.rows.push_back(std::move(row));
      }
    }
  }
  return out;
}

SweepResult compare_indexes(const SweepResult& graph_rows,
                            const SweepResult& cluster_rows) {
  SweepResult out;
  auto pick = [&](const SweepResult& rows) {
    std::map<std::string, const SweepRow*> best;
    std::vector<std::string> order;
    for (const auto& r : rows.rows) {
      auto [it, fresh] = best.emplace(r.device, &r);
      if (fresh) {
        order.push_back(r.device);
        continue;
      }
      const auto* b = it->second;
      const bool better =
          r.reached != b->reached
              ? r.reached
              : (r.reached ? r.simulated_qps > b->simulated_qps
                           : r.recall > b->recall);
      if (better) it->second = &r;
    }
    for (const auto& d : order) out.rows.push_back(*best[d]);
  };
  pick(graph_rows);
  pick(cluster_rows);
  return out;
}

}  // namespace tiervec
