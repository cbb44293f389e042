// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "tiervec/cluster_index.hpp"
#include "tiervec/device.hpp"
#include "tiervec/graph_index.hpp"
#include "tiervec/grouping.hpp"
#include "tiervec/pipeline.hpp"
#include "tiervec/sweep.hpp"
#include "tiervec/synthetic.hpp"

using namespace tiervec;

namespace {

int failures = 0;

void report(const char* id, bool ok, const std::string& detail) {
  std::printf("[%s] %s %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

void note(const std::string& s) {
  std::printf("  .. %s\n", s.c_str());
  std::fflush(stdout);
}

const SweepRow* find_row(const SweepResult& r, const std::string& device,
                         const std::string& layout, double param) {
  for (const auto& row : r.rows) {
    if (row.device == device && row.layout == layout && row.param == param) {
      return &row;
    }
  }
  return nullptr;
}

bool within(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::abs(b);
}

// Which term of simulate_time sets the time.
const char* binding_term(const IoStats& io, const DeviceProfile& p,
                         std::uint64_t depth) {
  const double bw = static_cast<double>(io.bytes_charged) / p.bandwidth_bytes_per_s;
  const double iops = static_cast<double>(io.ops) / p.iops_cap;
  const double lat = static_cast<double>(io.ops) *
                     (p.latency_s + p.per_op_overhead_s) /
                     static_cast<double>(depth);
  if (lat > bw && lat > iops) return "latency";
  return bw >= iops ? "bandwidth" : "iops";
}

void ac2_grouping() {
  std::mt19937_64 rng(2024);
  int matched = 0;
  int violations = 0;
  const int instances = 100;
  for (int t = 0; t < instances; ++t) {
    GroupingProblem p;
    p.n_clusters = 1 + static_cast<std::uint32_t>(rng() % 4);
    const std::size_t nv = 1 + rng() % 12;
    // Every nonempty subset of clusters is a possible replication pattern.
    for (std::size_t i = 0; i < nv; ++i) {
      const std::uint32_t mask =
          1 + static_cast<std::uint32_t>(rng() % ((1u << p.n_clusters) - 1));
      std::vector<std::uint32_t> row;
      for (std::uint32_t c = 0; c < p.n_clusters; ++c) {
        if (mask & (1u << c)) row.push_back(c);
      }
      std::shuffle(row.begin(), row.end(), rng);
      p.replicas.push_back(row);
    }
    // Small integers keep sums exact and make ties common.
    for (std::uint32_t c = 0; c < p.n_clusters; ++c) {
      p.h.push_back(static_cast<double>(rng() % 6));
    }
    const auto greedy = greedy_group(p);
    const auto best = brute_force_group(p);
    try {
      check_feasible(greedy, p);
    } catch (const InvalidArgument&) {
      ++violations;
    }
    if (objective(greedy, p) == objective(best, p)) ++matched;
  }
  report("AC-2", matched == instances && violations == 0,
         fmt("greedy optimal on %d/%d instances, %d violations", matched,
             instances, violations));
}

void ac8_device() {
  const auto ssd = ssd_profile();
  const auto rdma = rdma_profile();
  const auto cxl = cxl_profile();
  const auto nvm = nvm_profile();
  bool monotone = true;
  for (const auto& p : builtin_profiles()) {
    double prev = 0;
    for (std::uint64_t b = 64; b <= (1u << 20); b *= 2) {
      const double e = effective_bandwidth(p, b);
      if (e < prev) monotone = false;
      prev = e;
    }
  }
  const double cxl128 = effective_bandwidth(cxl, 128) / cxl.bandwidth_bytes_per_s;
  const double nvm256 = effective_bandwidth(nvm, 256) / nvm.bandwidth_bytes_per_s;
  const double ssd512 = effective_bandwidth(ssd, 512) / ssd.bandwidth_bytes_per_s;

  auto slowdown = [](const DeviceProfile& p, double f) {
    return 1.0 - mixed_read_throughput(p, f) / mixed_read_throughput(p, 0.0);
  };
  bool mix_monotone = true;
  double prev = -1;
  for (int i = 0; i <= 20; ++i) {
    const double s = slowdown(ssd, i / 20.0);
    if (s < prev) mix_monotone = false;
    prev = s;
  }
  const double s_ssd = slowdown(ssd, 0.5);
  double s_other = 0;
  for (const auto& p : {rdma, cxl, nvm}) s_other = std::max(s_other, slowdown(p, 0.5));

  report("AC-8",
         monotone && cxl128 >= 0.9 && nvm256 >= 0.9 && ssd512 <= 0.15 &&
             mix_monotone && s_ssd > s_other,
         fmt("monotone=%d cxl@128=%.3f nvm@256=%.3f ssd@512=%.4f "
             "ssd_mix_monotone=%d slowdown@0.5 ssd=%.3f others_max=%.3f",
             monotone, cxl128, nvm256, ssd512, mix_monotone, s_ssd, s_other));
}

// Decoupled vs coupled region size at replication factor exactly 8.
void ac5_decoupled_size(bool& ok, std::string& detail) {
  SyntheticParams sp;
  sp.count = 20000;
  sp.dim = 100;
  sp.components = 64;
  sp.center_range = 60;
  sp.spread = 12;
  sp.n_queries = 1;
  sp.elem_type = ElemType::Int8;
  sp.seed = 11;
  auto data = std::make_shared<const VectorDataset>(make_synthetic(sp).base);
  ClusterBuildParams bp;
  bp.n_clusters = 64;
  bp.replica_eps = 1e9;
  bp.max_replicas = 8;
  const auto index = ClusterIndex::build(data, bp);
  const auto coupled = serialize(index, ClusterLayout::Coupled);
  const auto decoupled = serialize(index, ClusterLayout::Decoupled);
  const double ratio = static_cast<double>(decoupled.region.length()) /
                       static_cast<double>(coupled.region.length());
  ok = index.replication_factor() == 8.0 && ratio <= 0.30;
  detail = fmt("rf=%.2f decoupled/coupled=%.4f", index.replication_factor(),
               ratio);
}

}  // namespace

int main() {
  const auto t_all = std::chrono::steady_clock::now();

  ac2_grouping();
  ac8_device();

  // Uniform workload. Components overlap (spread equals the center range),
  // so no small set of clusters holds a query's neighbors.
  const auto t_ac1 = std::chrono::steady_clock::now();
  SyntheticParams sp;
  sp.count = 100000;
  sp.dim = 64;
  sp.components = 64;
  sp.spread = 1.0;
  sp.query_spread = 1.0;
  sp.n_queries = 1000;
  sp.spectrum_decay = 0.5;
  sp.seed = 7;
  auto uniform = make_synthetic(sp);
  auto base = std::make_shared<const VectorDataset>(std::move(uniform.base));
  const VectorDataset& queries = uniform.queries;
  const std::uint32_t k = 10;
  const auto truth = ground_truth(*base, queries, k, Metric::L2Squared);
  note(fmt("dataset + ground truth %.1fs", seconds_since(t_ac1)));

  const auto rdma = rdma_profile();
  const auto ssd = ssd_profile();

  GraphSweepConfig gc;
  gc.devices = {rdma};
  const auto knn = build_knn_graph(*base, gc.knn_k, gc.metric);
  note(fmt("knn graph %.1fs", seconds_since(t_ac1)));
  const auto graph_sweep = sweep_graph(base, knn, queries, truth, gc);
  note(fmt("graph sweep %.1fs", seconds_since(t_ac1)));

  ClusterSweepConfig cc;
  cc.devices = {rdma, ssd};
  const auto root = ClusterIndex::build(base, cc.build);
  const auto cluster_sweep = sweep_cluster(root, queries, truth, cc);
  const double ac1_seconds = seconds_since(t_ac1);
  note(fmt("cluster sweep %.1fs", ac1_seconds));

  for (const auto& r : graph_sweep.rows) {
    note(fmt("graph %s %s R=%g L=%u recall=%.3f hops=%.1f amp=%.3f "
             "bytes/q=%.0f modeled=%.0f simulated=%.0f",
             r.device.c_str(), r.layout.c_str(), r.param, r.tuned, r.recall,
             r.avg_reads, r.amplification, r.per_query(r.io.bytes_requested),
             r.modeled_qps, r.simulated_qps));
  }
  for (const auto& r : cluster_sweep.rows) {
    note(fmt("cluster %s %s eps=%g top_c=%u recall=%.3f rf=%.3f amp=%.3f "
             "ops/q=%.1f bytes/q=%.0f modeled=%.0f simulated=%.0f",
             r.device.c_str(), r.layout.c_str(), r.param, r.tuned, r.recall,
             r.replication_factor, r.amplification, r.per_query(r.io.ops),
             r.per_query(r.io.bytes_requested), r.modeled_qps,
             r.simulated_qps));
  }

  // AC-1
  {
    const auto* g = find_row(graph_sweep, "rdma", "csr", 32);
    const SweepRow* c = nullptr;
    for (const auto& r : cluster_sweep.rows) {
      if (r.reached && r.recall >= 0.9) {
        c = &r;
        break;
      }
    }
    const bool ok = g != nullptr && g->reached && g->recall >= 0.9 &&
                    c != nullptr && ac1_seconds < 600;
    report("AC-1", ok,
           fmt("graph R=32 L=%u recall=%.3f; cluster top_c=%u recall=%.3f; "
               "%.0fs",
               g ? g->tuned : 0, g ? g->recall : 0.0, c ? c->tuned : 0,
               c ? c->recall : 0.0, ac1_seconds));
  }

  // AC-3
  {
    std::vector<double> hops;
    bool all_reached = true;
    for (double R : {8.0, 16.0, 32.0, 64.0}) {
      const auto* r = find_row(graph_sweep, "rdma", "csr", R);
      hops.push_back(r->avg_reads);
      all_reached = all_reached && r->reached;
    }
    std::vector<std::uint32_t> top_c;
    for (double e : cc.replica_eps) {
      const auto* r = find_row(cluster_sweep, "rdma", "coupled", e);
      top_c.push_back(r->tuned);
      all_reached = all_reached && r->reached;
    }
    bool graph_ok = hops.back() < hops.front();
    for (std::size_t i = 1; i < hops.size(); ++i) {
      graph_ok = graph_ok && hops[i] <= hops[i - 1];
    }
    bool cluster_ok = top_c.back() < top_c.front();
    for (std::size_t i = 1; i < top_c.size(); ++i) {
      cluster_ok = cluster_ok && top_c[i] <= top_c[i - 1];
    }
    report("AC-3", graph_ok && cluster_ok && all_reached,
           fmt("hops R=8,16,32,64: %.1f %.1f %.1f %.1f (%s); "
               "top_c eps=0,.05,.1,.2: %u %u %u %u (%s)",
               hops[0], hops[1], hops[2], hops[3], graph_ok ? "ok" : "not monotone",
               top_c[0], top_c[1], top_c[2], top_c[3],
               cluster_ok ? "ok" : "not monotone"));
  }

  // AC-4
  {
    const auto* g = find_row(graph_sweep, "rdma", "csr", 32);
    const auto* c = find_row(cluster_sweep, "ssd", "coupled", 0.1);
    const char* gb = binding_term(g->io, rdma, gc.depth);
    const char* cb = binding_term(c->io, ssd, cc.depth);
    const bool ok = within(g->modeled_qps, g->simulated_qps, 0.15) &&
                    within(c->modeled_qps, c->simulated_qps, 0.15) &&
                    std::string(gb) != "latency" && std::string(cb) != "latency";
    report("AC-4", ok,
           fmt("graph rdma modeled=%.0f simulated=%.0f (%s-bound); "
               "cluster ssd modeled=%.0f simulated=%.0f (%s-bound)",
               g->modeled_qps, g->simulated_qps, gb, c->modeled_qps,
               c->simulated_qps, cb));
  }

  // AC-5
  {
    const auto* g = find_row(graph_sweep, "rdma", "csr", 32);
    GraphBuildParams bp;
    bp.knn_k = gc.knn_k;
    bp.max_degree = 32;
    bp.prune_alpha = gc.prune_alpha;
    const auto graph = GraphIndex::build_from_knn(base, knn, bp);
    const auto csr = serialize(graph, GraphLayout::csr());
    const auto padded = serialize(graph, GraphLayout::padded(rdma.block_bytes));
    const SimulatedDevice dev(rdma);
    const SearchParams params{g->tuned, k};
    std::size_t graph_mismatch = 0;
    IoStats io_csr, io_pad;
    for (std::size_t q = 0; q < queries.count(); ++q) {
      const auto a = search(csr, queries[q], params, dev);
      const auto b = search(padded, queries[q], params, dev);
      if (a.result.ids != b.result.ids || a.hops != b.hops) ++graph_mismatch;
      io_csr += a.io;
      io_pad += b.io;
    }

    const auto* c = find_row(cluster_sweep, "rdma", "coupled", 0.1);
    const auto index = root.with_replica_eps(0.1);
    const ClusterSearchParams cp{c->tuned, k};
    const auto groups = greedy_group(make_grouping_problem(
        index, estimate_frequencies(index, queries, cp.top_c)));
    const auto coupled = serialize(index, ClusterLayout::Coupled);
    const auto decoupled = serialize(index, ClusterLayout::Decoupled);
    const auto grouped = serialize(index, ClusterLayout::Grouped, &groups);
    std::size_t cluster_mismatch = 0;
    for (std::size_t q = 0; q < queries.count(); ++q) {
      const auto a = search(coupled, index.navigator(), queries[q], cp, dev);
      const auto b = search(decoupled, index.navigator(), queries[q], cp, dev);
      const auto d = search(grouped, index.navigator(), queries[q], cp, dev);
      if (a.result.ids != b.result.ids || a.result.ids != d.result.ids) {
        ++cluster_mismatch;
      }
    }

    bool size_ok = false;
    std::string size_detail;
    ac5_decoupled_size(size_ok, size_detail);
    const bool ok = graph_mismatch == 0 && cluster_mismatch == 0 &&
                    io_csr.bytes_charged < io_pad.bytes_charged && size_ok;
    report("AC-5", ok,
           fmt("graph mismatches=%zu csr_bytes=%llu padded_bytes=%llu; "
               "cluster mismatches=%zu; %s",
               graph_mismatch,
               static_cast<unsigned long long>(io_csr.bytes_charged),
               static_cast<unsigned long long>(io_pad.bytes_charged),
               cluster_mismatch, size_detail.c_str()));
  }

  // AC-6: skewed queries over the same base. The first half is the log the
  // frequencies come from, the second half is measured.
  {
    SyntheticParams skp = sp;
    skp.query_skew = 1.5;
    skp.n_queries = 2000;
    auto skewed = make_synthetic(skp);
    const bool same_base = std::equal(skewed.base.bytes().begin(),
                                      skewed.base.bytes().end(),
                                      base->bytes().begin(), base->bytes().end());
    const auto log = skewed.queries.slice(0, 1000);
    const auto eval = skewed.queries.slice(1000, 1000);
    const auto eval_truth = ground_truth(*base, eval, k, Metric::L2Squared);
    ClusterSweepConfig sc;
    sc.replica_eps = {0.1};
    sc.layouts = {ClusterLayout::Decoupled, ClusterLayout::Grouped};
    sc.devices = {rdma};
    sc.frequency_log = &log;
    const auto rows = sweep_cluster(root, eval, eval_truth, sc);
    const auto* dec = find_row(rows, "rdma", "decoupled", 0.1);
    const auto* grp = find_row(rows, "rdma", "grouped", 0.1);
    const double op_ratio = static_cast<double>(grp->io.ops) /
                            static_cast<double>(dec->io.ops);
    const double speedup = grp->modeled_qps / dec->modeled_qps;
    const double sim_speedup = grp->simulated_qps / dec->simulated_qps;
    report("AC-6",
           same_base && dec->reached && op_ratio <= 0.5 && speedup >= 1.3,
           fmt("top_c=%u recall=%.3f ops/q decoupled=%.1f grouped=%.1f "
               "(ratio %.3f); modeled speedup %.2fx, simulated %.2fx",
               dec->tuned, dec->recall, dec->per_query(dec->io.ops),
               grp->per_query(grp->io.ops), op_ratio, speedup, sim_speedup));
  }

  // AC-7
  {
    const auto* g = find_row(graph_sweep, "rdma", "csr", 32);
    GraphBuildParams bp;
    bp.knn_k = gc.knn_k;
    bp.max_degree = 32;
    bp.prune_alpha = gc.prune_alpha;
    const auto image =
        serialize(GraphIndex::build_from_knn(base, knn, bp), GraphLayout::csr());
    const SimulatedDevice dev(rdma);
    const SearchParams params{g->tuned, k};
    PipelineConfig one{1, 1, 1e-6};
    PipelineConfig eight{8, 1, 1e-6};
    const auto a = run_pipelined(image, queries, params, dev, one);
    const auto b = run_pipelined(image, queries, params, dev, eight);
    std::size_t mismatch = 0;
    for (std::size_t q = 0; q < queries.count(); ++q) {
      const auto& x = a.traces[q];
      const auto& y = b.traces[q];
      if (x.result.ids != y.result.ids || x.result.distances != y.result.distances ||
          x.hops != y.hops) {
        ++mismatch;
      }
    }
    const double ratio = b.throughput_qps / a.throughput_qps;
    report("AC-7", ratio >= 1.2 && mismatch == 0,
           fmt("depth1=%.0f qps depth8=%.0f qps (%.2fx); result mismatches=%zu",
               a.throughput_qps, b.throughput_qps, ratio, mismatch));
  }

  // AC-9
  {
    SweepResult g_rdma, c_rdma;
    for (const auto& r : graph_sweep.rows) {
      if (r.device == "rdma") g_rdma.rows.push_back(r);
    }
    for (const auto& r : cluster_sweep.rows) {
      if (r.device == "rdma") c_rdma.rows.push_back(r);
    }
    const auto best = compare_indexes(g_rdma, c_rdma);
    const SweepRow& g = best.rows.at(0);
    const SweepRow& c = best.rows.at(1);
    const double g_bytes = g.per_query(g.io.bytes_requested);
    const double c_bytes = c.per_query(c.io.bytes_requested);
    const auto* g_csr = find_row(graph_sweep, "rdma", "csr", g.param);
    const auto* c_grp = find_row(cluster_sweep, "rdma", "grouped", c.param);
    const bool ok = g.reached && c.reached && g_bytes <= 0.5 * c_bytes &&
                    c_grp->amplification < g_csr->amplification;
    report("AC-9", ok,
           fmt("graph %s R=%g bytes/q=%.0f; cluster %s eps=%g bytes/q=%.0f "
               "(ratio %.3f); amplification grouped=%.3f csr=%.3f",
               g.layout.c_str(), g.param, g_bytes, c.layout.c_str(), c.param,
               c_bytes, g_bytes / c_bytes, c_grp->amplification,
               g_csr->amplification));
  }

  std::printf("acceptance: %d failing criteria, %.0fs total\n", failures,
              seconds_since(t_all));
  return failures == 0 ? 0 : 1;
}
