// tiervec command-line driver.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tiervec/cluster_index.hpp"
#include "tiervec/device.hpp"
#include "tiervec/graph_index.hpp"
#include "tiervec/grouping.hpp"
#include "tiervec/pipeline.hpp"
#include "tiervec/sweep.hpp"
#include "tiervec/synthetic.hpp"
#include "tiervec/vecs_io.hpp"

using namespace tiervec;

namespace {

constexpr int kExitFormat = 2;
constexpr int kExitRecall = 3;

struct RecallNotReached : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string dataset;
  std::string queries;
  std::string truth;
  std::vector<std::string> devices;
  std::string metric = "l2";
  std::uint32_t k = 10;
  double recall_target = 0.9;
  std::uint64_t depth = 64;
  std::uint32_t workers = 1;
  std::uint64_t seed = 1;
  std::string out;
};

std::vector<DeviceProfile> resolve_devices(const std::vector<std::string>& names) {
  std::vector<DeviceProfile> out;
  if (names.empty()) return builtin_profiles();
  for (const auto& n : names) out.push_back(resolve_profile(n));
  return out;
}

std::shared_ptr<const VectorDataset> load_dataset(const std::string& path) {
  return std::make_shared<const VectorDataset>(read_vectors(path));
}

GroundTruth load_truth(const Common& c, const VectorDataset& base,
                       const VectorDataset& queries) {
  if (!c.truth.empty()) return from_ivecs_rows(read_ivecs(c.truth), c.k);
  return ground_truth(base, queries, c.k, parse_metric(c.metric));
}

// Writes to --out when given, stdout otherwise.
template <class Fn>
void emit(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InvalidArgument("cannot open for writing: " + path);
  fn(out);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string file_magic(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path);
  char magic[4] = {};
  in.read(magic, 4);
  return std::string(magic, static_cast<std::size_t>(in.gcount()));
}

void add_common(CLI::App* app, Common& c, bool need_data) {
  auto* d = app->add_option("--dataset", c.dataset, "Base vectors (.fvecs, .bvecs, .i8vecs)");
  if (need_data) d->required();
  app->add_option("--queries", c.queries, "Query vectors");
  app->add_option("--truth", c.truth, "Ground-truth ids (.ivecs)");
  app->add_option("--device", c.devices, "Built-in profile name or profile file")
      ->delimiter(',');
  app->add_option("--metric", c.metric, "l2 or ip")->capture_default_str();
  app->add_option("--k", c.k, "Results per query")->capture_default_str();
  app->add_option("--recall-target", c.recall_target)->capture_default_str();
  app->add_option("--depth", c.depth, "Requests in flight")->capture_default_str();
  app->add_option("--workers", c.workers)->capture_default_str();
  app->add_option("--seed", c.seed)->capture_default_str();
  app->add_option("--out", c.out, "Output CSV (stdout when omitted)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tiered-storage vector search simulator"};
  app.require_subcommand(1);
  Common c;

  // gen ---------------------------------------------------------------------
  SyntheticParams gen;
  std::string gen_elem = "float32";
  auto* gen_cmd = app.add_subcommand("gen", "Generate a Gaussian-mixture dataset");
  gen_cmd->add_option("--dataset", c.dataset, "Output base vectors")->required();
  gen_cmd->add_option("--queries", c.queries, "Output query vectors")->required();
  gen_cmd->add_option("--count", gen.count)->capture_default_str();
  gen_cmd->add_option("--dim", gen.dim)->capture_default_str();
  gen_cmd->add_option("--components", gen.components)->capture_default_str();
  gen_cmd->add_option("--spread", gen.spread)->capture_default_str();
  gen_cmd->add_option("--center-range", gen.center_range)->capture_default_str();
  gen_cmd->add_option("--n-queries", gen.n_queries)->capture_default_str();
  gen_cmd->add_option("--query-spread", gen.query_spread)->capture_default_str();
  gen_cmd->add_option("--query-skew", gen.query_skew, "Zipf exponent of query components")
      ->capture_default_str();
  gen_cmd->add_option("--spectrum-decay", gen.spectrum_decay,
                      "Per-coordinate scale exponent (0 = isotropic)")
      ->capture_default_str();
  gen_cmd->add_option("--elem", gen_elem, "int8, uint8 or float32")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed)->capture_default_str();

  // gt ----------------------------------------------------------------------
  auto* gt_cmd = app.add_subcommand("gt", "Exact top-k ids per query");
  add_common(gt_cmd, c, true);
  gt_cmd->get_option("--queries")->required();
  gt_cmd->get_option("--truth")->required();

  // build-graph -------------------------------------------------------------
  GraphBuildParams gbp;
  std::string graph_layout = "csr";
  std::uint64_t graph_block = 0;
  std::string index_path;
  auto* bg_cmd = app.add_subcommand("build-graph", "Build and store a graph index");
  add_common(bg_cmd, c, true);
  bg_cmd->add_option("--index", index_path, "Output index file")->required();
  bg_cmd->add_option("--R", gbp.max_degree, "Max degree")->capture_default_str();
  bg_cmd->add_option("--knn-k", gbp.knn_k)->capture_default_str();
  bg_cmd->add_option("--alpha", gbp.prune_alpha)->capture_default_str();
  bg_cmd->add_option("--layout", graph_layout, "csr or padded")->capture_default_str();
  bg_cmd->add_option("--block", graph_block,
                     "Padding block (default: block size of --device or 4096)");

  // build-cluster -----------------------------------------------------------
  ClusterBuildParams cbp;
  std::string cluster_layout = "decoupled";
  std::string groups_path;
  std::string freq_path;
  std::uint32_t top_c = 0;
  auto* bc_cmd = app.add_subcommand("build-cluster", "Build and store a cluster index");
  add_common(bc_cmd, c, true);
  bc_cmd->add_option("--index", index_path, "Output index file")->required();
  bc_cmd->add_option("--clusters", cbp.n_clusters)->capture_default_str();
  bc_cmd->add_option("--iters", cbp.kmeans_iters)->capture_default_str();
  bc_cmd->add_option("--balance-slack", cbp.balance_slack)->capture_default_str();
  bc_cmd->add_option("--replica-eps", cbp.replica_eps)->capture_default_str();
  bc_cmd->add_option("--max-replicas", cbp.max_replicas)->capture_default_str();
  bc_cmd->add_option("--layout", cluster_layout, "coupled, decoupled or grouped")
      ->capture_default_str();
  bc_cmd->add_option("--groups", groups_path, "GRP1 assignment for the grouped layout");
  bc_cmd->add_option("--freq-queries", freq_path,
                     "Query log for frequencies when --groups is absent");
  bc_cmd->add_option("--top-c", top_c, "Clusters per query in the frequency log");

  // group -------------------------------------------------------------------
  bool brute = false;
  auto* grp_cmd = app.add_subcommand("group", "Solve cluster-aware grouping from a query log");
  add_common(grp_cmd, c, false);
  grp_cmd->add_option("--index", index_path, "Cluster index file")->required();
  grp_cmd->get_option("--queries")->required();
  grp_cmd->add_option("--top-c", top_c, "Clusters per query")->required();
  grp_cmd->add_flag("--brute-force", brute, "Exhaustive solver (small instances)");

  // search ------------------------------------------------------------------
  std::uint32_t search_L = 0;
  double compute_per_hop = 0.0;
  auto* s_cmd = app.add_subcommand("search", "Run queries against a stored index");
  add_common(s_cmd, c, false);
  s_cmd->add_option("--index", index_path, "Graph or cluster index file")->required();
  s_cmd->get_option("--queries")->required();
  s_cmd->add_option("--L", search_L, "Candidate list size (graph; tuned when 0)");
  s_cmd->add_option("--top-c", top_c, "Clusters to probe (cluster; tuned when 0)");
  s_cmd->add_option("--compute-per-hop-s", compute_per_hop)->capture_default_str();

  // micro -------------------------------------------------------------------
  std::vector<std::uint64_t> payloads{64,   128,  256,  512,   1024,
                                      2048, 4096, 8192, 16384, 65536};
  std::vector<double> fractions{0.0, 0.1, 0.25, 0.5, 0.75, 0.9};
  auto* m_cmd = app.add_subcommand("micro", "Device payload and mixed-read curves");
  m_cmd->add_option("--device", c.devices)->delimiter(',');
  m_cmd->add_option("--payloads", payloads)->delimiter(',');
  m_cmd->add_option("--fractions", fractions)->delimiter(',');
  m_cmd->add_option("--out", c.out);

  // sweeps ------------------------------------------------------------------
  GraphSweepConfig gsc;
  ClusterSweepConfig csc;
  std::vector<std::string> layouts{"coupled", "decoupled", "grouped"};
  auto add_graph_sweep = [&](CLI::App* cmd) {
    cmd->add_option("--R", gsc.degrees, "Degrees to sweep")->delimiter(',');
    cmd->add_option("--knn-k", gsc.knn_k)->capture_default_str();
    cmd->add_option("--alpha", gsc.prune_alpha)->capture_default_str();
    cmd->add_option("--L-cap", gsc.L_cap)->capture_default_str();
  };
  auto add_cluster_sweep = [&](CLI::App* cmd) {
    cmd->add_option("--replica-eps", csc.replica_eps)->delimiter(',');
    cmd->add_option("--layouts", layouts)->delimiter(',');
    cmd->add_option("--clusters", csc.build.n_clusters)->capture_default_str();
    cmd->add_option("--iters", csc.build.kmeans_iters)->capture_default_str();
    cmd->add_option("--balance-slack", csc.build.balance_slack)->capture_default_str();
    cmd->add_option("--max-replicas", csc.build.max_replicas)->capture_default_str();
    cmd->add_option("--freq-queries", freq_path, "Query log for grouping frequencies");
  };
  auto* sg_cmd = app.add_subcommand("sweep-graph", "Degree sweep with tuned L");
  add_common(sg_cmd, c, true);
  sg_cmd->get_option("--queries")->required();
  add_graph_sweep(sg_cmd);
  auto* sc_cmd = app.add_subcommand("sweep-cluster", "Replication sweep with tuned top_c");
  add_common(sc_cmd, c, true);
  sc_cmd->get_option("--queries")->required();
  add_cluster_sweep(sc_cmd);
  auto* cmp_cmd = app.add_subcommand("compare", "Best graph vs cluster config per device");
  add_common(cmp_cmd, c, true);
  cmp_cmd->get_option("--queries")->required();
  add_graph_sweep(cmp_cmd);
  add_cluster_sweep(cmp_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    const Metric metric = parse_metric(c.metric);

    if (gen_cmd->parsed()) {
      gen.elem_type = parse_elem_type(gen_elem);
      const auto data = make_synthetic(gen);
      write_vectors(c.dataset, data.base);
      write_vectors(c.queries, data.queries);
      std::printf("wrote %zu base and %zu query vectors (dim %zu, %s)\n",
                  data.base.count(), data.queries.count(), data.base.dim(),
                  std::string(to_string(gen.elem_type)).c_str());

    } else if (gt_cmd->parsed()) {
      const auto base = read_vectors(c.dataset);
      const auto queries = read_vectors(c.queries);
      write_ivecs(c.truth, to_ivecs_rows(ground_truth(base, queries, c.k, metric)));

    } else if (bg_cmd->parsed()) {
      gbp.metric = metric;
      const auto base = load_dataset(c.dataset);
      const auto graph = GraphIndex::build(base, gbp);
      GraphLayout layout = GraphLayout::csr();
      if (graph_layout == "padded") {
        std::uint64_t block = graph_block;
        if (block == 0) {
          block = c.devices.empty() ? 4096
                                    : resolve_profile(c.devices.front()).block_bytes;
        }
        layout = GraphLayout::padded(block);
      } else if (graph_layout != "csr") {
        throw InvalidArgument("unknown graph layout '" + graph_layout + "'");
      }
      const auto image = serialize(graph, layout);
      write_graph_file(index_path, image);
      std::printf("graph: %zu nodes, R=%u, layout %s, amplification %.4f\n",
                  graph.size(), graph.max_degree(), to_string(layout).c_str(),
                  index_amplification(image.region, *base));

    } else if (bc_cmd->parsed()) {
      cbp.metric = metric;
      cbp.seed = c.seed;
      const auto base = load_dataset(c.dataset);
      const auto index = ClusterIndex::build(base, cbp);
      const auto layout = parse_cluster_layout(cluster_layout);
      std::optional<GroupAssignment> groups;
      if (layout == ClusterLayout::Grouped) {
        if (!groups_path.empty()) {
          auto parsed = parse_grouping(read_text(groups_path));
          if (!parsed.assignment) {
            throw FormatError("group file carries no assignment", 0);
          }
          groups = std::move(parsed.assignment);
        } else {
          if (freq_path.empty() || top_c == 0) {
            throw InvalidArgument(
                "grouped layout needs --groups or --freq-queries with --top-c");
          }
          const auto log = read_vectors(freq_path);
          groups = greedy_group(make_grouping_problem(
              index, estimate_frequencies(index, log, top_c)));
        }
      }
      const auto image = serialize(index, layout, groups ? &*groups : nullptr);
      write_cluster_file(index_path, image);
      std::printf(
          "cluster: %u clusters, replication %.3f, layout %s, amplification "
          "%.4f\n",
          index.n_clusters(), index.replication_factor(),
          to_string(layout).c_str(), index_amplification(image.region, *base));

    } else if (grp_cmd->parsed()) {
      const auto image = read_cluster_file(index_path);
      const auto log = read_vectors(c.queries);
      const CentroidNavigator nav(
          std::make_shared<const VectorDataset>(image.centroids), image.metric);
      auto problem = make_grouping_problem(
          image, estimate_frequencies(nav, image.n_clusters(), log, top_c));
      const auto p = brute ? brute_force_group(problem) : greedy_group(problem);
      emit(c.out, [&](std::ostream& out) { out << format_grouping(problem, &p); });
      std::fprintf(stderr, "objective %.17g\n", objective(p, problem));

    } else if (s_cmd->parsed()) {
      const auto queries = read_vectors(c.queries);
      const auto devices = resolve_devices(c.devices);
      const auto& profile = devices.front();
      const SimulatedDevice device(profile);
      std::optional<GroundTruth> truth;
      if (!c.truth.empty()) truth = from_ivecs_rows(read_ivecs(c.truth), c.k);
      if (!truth && !c.dataset.empty()) {
        truth = ground_truth(read_vectors(c.dataset), queries, c.k, metric);
      }
      if (!truth && (search_L == 0 && top_c == 0)) {
        throw InvalidArgument("tuning needs --truth or --dataset");
      }

      SweepRow row;
      row.device = profile.name;
      row.recall_target = c.recall_target;
      row.n_queries = queries.count();
      std::vector<TopKResult> results;
      auto recall_of = [&](const std::vector<TopKResult>& r) {
        return truth ? mean_recall(r, *truth, c.k) : 0.0;
      };
      const auto magic = file_magic(index_path);

      if (magic == "GVX1") {
        const auto image = read_graph_file(index_path);
        auto run_at = [&](std::uint32_t L) {
          std::vector<TopKResult> r;
          for (std::size_t q = 0; q < queries.count(); ++q) {
            r.push_back(search(image, queries[q], {L, c.k}, device).result);
          }
          return r;
        };
        std::uint32_t L = search_L;
        if (L == 0) {
          L = c.k;
          while (recall_of(run_at(L)) < c.recall_target && L < 4096) {
            L = std::min<std::uint32_t>(4096, 2 * L);
          }
        }
        PipelineConfig pc{static_cast<std::uint32_t>(c.depth), c.workers,
                          compute_per_hop};
        const auto run = run_pipelined(image, queries, {L, c.k}, device, pc);
        for (const auto& t : run.traces) results.push_back(t.result);
        row.family = "graph";
        row.layout = to_string(image.layout);
        row.param_name = "R";
        row.param = image.max_degree;
        row.tuned_name = "L";
        row.tuned = L;
        row.io = run.io;
        row.avg_reads = row.per_query(run.total_hops);
        row.amplification = index_amplification(image.region.length(), image.count,
                                                image.vector_bytes());
        row.edge_amplification = edge_amplification(image);
        row.index_bytes = image.region.length();
        if (run.total_hops > 0) {
          row.modeled_qps = predict_graph_throughput(profile, row.avg_reads,
                                                     image.mean_record_length());
        }
        row.simulated_qps = run.throughput_qps;
      } else if (magic == "CVX1") {
        const auto image = read_cluster_file(index_path);
        const CentroidNavigator nav(
            std::make_shared<const VectorDataset>(image.centroids), image.metric);
        auto run_at = [&](std::uint32_t tc, IoStats* io) {
          std::vector<TopKResult> r;
          for (std::size_t q = 0; q < queries.count(); ++q) {
            auto t = search(image, nav, queries[q], {tc, c.k}, device);
            if (io) *io += t.io;
            r.push_back(std::move(t.result));
          }
          return r;
        };
        std::uint32_t tc = top_c;
        if (tc == 0) {
          tc = 1;
          while (recall_of(run_at(tc, nullptr)) < c.recall_target &&
                 tc < image.n_clusters()) {
            tc = std::min(image.n_clusters(), 2 * tc);
          }
        }
        results = run_at(tc, &row.io);
        row.family = "cluster";
        row.layout = to_string(image.layout);
        row.param_name = "replica_eps";
        row.param = image.replica_eps;
        row.tuned_name = "top_c";
        row.tuned = tc;
        row.avg_reads = tc;
        row.amplification = index_amplification(image.region.length(), image.count,
                                                image.vector_bytes());
        row.index_bytes = image.region.length();
        if (row.io.ops > 0) {
          row.modeled_qps =
              std::min(profile.bandwidth_bytes_per_s /
                           row.per_query(row.io.bytes_charged),
                       profile.iops_cap / row.per_query(row.io.ops));
          row.simulated_qps = static_cast<double>(queries.count()) /
                              simulate_time(row.io, profile, c.depth);
        }
      } else {
        throw FormatError("unrecognized index file magic", 0);
      }
      row.recall = recall_of(results);
      row.reached = truth && row.recall >= c.recall_target;
      emit(c.out, [&](std::ostream& out) { write_sweep_csv(out, {{row}}); });
      if (truth && !row.reached) {
        throw RecallNotReached("recall " + std::to_string(row.recall) +
                               " is below the target " +
                               std::to_string(c.recall_target));
      }

    } else if (m_cmd->parsed()) {
      const auto rows = microbench_device(resolve_devices(c.devices), payloads,
                                          fractions);
      emit(c.out, [&](std::ostream& out) { write_micro_csv(out, rows); });

    } else {
      const auto base = load_dataset(c.dataset);
      const auto queries = read_vectors(c.queries);
      const auto truth = load_truth(c, *base, queries);
      gsc.k = csc.k = c.k;
      gsc.recall_target = csc.recall_target = c.recall_target;
      gsc.depth = csc.depth = c.depth;
      gsc.metric = csc.build.metric = metric;
      csc.build.seed = c.seed;
      gsc.devices = csc.devices = resolve_devices(c.devices);
      csc.layouts.clear();
      for (const auto& l : layouts) csc.layouts.push_back(parse_cluster_layout(l));
      std::optional<VectorDataset> log;
      if (!freq_path.empty()) {
        log = read_vectors(freq_path);
        csc.frequency_log = &*log;
      }

      SweepResult result;
      if (sg_cmd->parsed()) {
        result = sweep_graph(base, queries, truth, gsc);
      } else if (sc_cmd->parsed()) {
        result = sweep_cluster(base, queries, truth, csc);
      } else {
        result = compare_indexes(sweep_graph(base, queries, truth, gsc),
                                 sweep_cluster(base, queries, truth, csc));
      }
      emit(c.out, [&](std::ostream& out) { write_sweep_csv(out, result); });
    }
  } catch (const FormatError& e) {
    std::fprintf(stderr, "format error at byte %llu: %s\n",
                 static_cast<unsigned long long>(e.byte_offset()), e.what());
    return kExitFormat;
  } catch (const RecallNotReached& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kExitRecall;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
