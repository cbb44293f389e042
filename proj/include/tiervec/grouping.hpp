#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tiervec/cluster_index.hpp"

namespace tiervec {

/// replicas[i] lists the clusters holding vector i (the replication matrix A,
/// one sparse row per vector); h[j] is how often cluster j is read.
struct GroupingProblem {
  std::uint32_t n_clusters = 0;
  std::vector<std::vector<std::uint32_t>> replicas;
  std::vector<double> h;

  std::size_t n_vectors() const { return replicas.size(); }

  /// Throws InvalidArgument unless every vector has at least one valid,
  /// distinct cluster and every h_j is finite and >= 0.
  void validate() const;
};

GroupingProblem make_grouping_problem(const ClusterIndex& index,
                                      std::vector<double> h);
/// Rebuilds A from a stored index directory; the primary cluster leads each
/// vector's list, the rest follow in ascending id.
GroupingProblem make_grouping_problem(const SerializedCluster& index,
                                      std::vector<double> h);

/// Throws InvalidArgument unless each vector is grouped into exactly one of
/// its own clusters.
void check_feasible(const GroupAssignment& p, const GroupingProblem& problem);

/// Reads issued per workload pass:
///   sum_j h_j * (1 + sum_i A_ij * (1 - P_ij))
/// one group segment read, plus one small read for every vector replicated
/// into j but grouped elsewhere.
double objective(const GroupAssignment& p, const GroupingProblem& problem);

/// sum_j h_j * (1 + sum_i P_ij), kept only to document the alternative form.
/// It is not used by any solver: under the one-group-per-vector constraint
/// its minimum favors the least-read clusters.
double printed_objective(const GroupAssignment& p,
                         const GroupingProblem& problem);

/// Each vector goes to its most frequently read cluster; ties go to the
/// smaller cluster id.
GroupAssignment greedy_group(const GroupingProblem& problem);

/// Exhaustive minimum over all feasible assignments. Among equal costs the
/// lexicographically smallest group_of (by cluster id) wins. Throws
/// CapacityError when the number of assignments exceeds max_assignments.
GroupAssignment brute_force_group(const GroupingProblem& problem,
                                  std::uint64_t max_assignments = 10'000'000);

/// h_j = number of times cluster j is selected over the query log.
std::vector<double> estimate_frequencies(const ClusterIndex& index,
                                         const VectorDataset& query_log,
                                         std::uint32_t top_c);
std::vector<double> estimate_frequencies(const CentroidNavigator& navigator,
                                         std::uint32_t n_clusters,
                                         const VectorDataset& query_log,
                                         std::uint32_t top_c);

/// Text form:
///   GRP1 <n_vectors> <n_clusters>
///   h <h_0> <h_1> ...
///   <id> <c,c,...> <group>        one line per vector
/// The group column is "-" when no assignment is given.
std::string format_grouping(const GroupingProblem& problem,
                            const GroupAssignment* p = nullptr);

struct ParsedGrouping {
  GroupingProblem problem;
  std::optional<GroupAssignment> assignment;
};
ParsedGrouping parse_grouping(std::string_view text);

}  // namespace tiervec
