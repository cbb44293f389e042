#include "tiervec/grouping.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace tiervec {

void GroupingProblem::validate() const {
  if (h.size() != n_clusters) {
    throw InvalidArgument("frequency vector size does not match n_clusters");
  }
  for (auto v : h) {
    if (!std::isfinite(v) || v < 0) {
      throw InvalidArgument("frequencies must be finite and >= 0");
    }
  }
  for (std::size_t i = 0; i < replicas.size(); ++i) {
    const auto& r = replicas[i];
    if (r.empty()) {
      throw InvalidArgument("vector " + std::to_string(i) + " has no cluster");
    }
    auto sorted = r;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.back() >= n_clusters ||
        std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw InvalidArgument("vector " + std::to_string(i) +
                            " has an invalid cluster list");
    }
  }
}

GroupingProblem make_grouping_problem(const ClusterIndex& index,
                                      std::vector<double> h) {
  GroupingProblem p;
  p.n_clusters = index.n_clusters();
  p.replicas = index.replicas();
  p.h = std::move(h);
  p.validate();
  return p;
}

GroupingProblem make_grouping_problem(const SerializedCluster& index,
                                      std::vector<double> h) {
  GroupingProblem p;
  p.n_clusters = index.n_clusters();
  p.replicas.resize(index.count);
  for (std::uint64_t i = 0; i < index.count; ++i) {
    p.replicas[i].push_back(index.primary[i]);
  }
  for (std::uint32_t c = 0; c < index.n_clusters(); ++c) {
    auto ids = index.directory[c].ids;
    std::sort(ids.begin(), ids.end());
    for (auto id : ids) {
      if (c != index.primary[id]) p.replicas[id].push_back(c);
    }
  }
  p.h = std::move(h);
  p.validate();
  return p;
}

void check_feasible(const GroupAssignment& p, const GroupingProblem& problem) {
  if (p.group_of.size() != problem.n_vectors()) {
    throw InvalidArgument("assignment size does not match the problem");
  }
  for (std::size_t i = 0; i < p.group_of.size(); ++i) {
    const auto& r = problem.replicas[i];
    if (std::find(r.begin(), r.end(), p.group_of[i]) == r.end()) {
      throw InvalidArgument("vector " + std::to_string(i) +
                            " is grouped outside its clusters");
    }
  }
}

double objective(const GroupAssignment& p, const GroupingProblem& problem) {
  check_feasible(p, problem);
  std::vector<std::uint64_t> scattered(problem.n_clusters, 0);
  for (std::size_t i = 0; i < p.group_of.size(); ++i) {
    for (auto c : problem.replicas[i]) {
      if (c != p.group_of[i]) ++scattered[c];
    }
  }
  double cost = 0;
  for (std::uint32_t j = 0; j < problem.n_clusters; ++j) {
    cost += problem.h[j] * (1.0 + static_cast<double>(scattered[j]));
  }
  return cost;
}

double printed_objective(const GroupAssignment& p,
                         const GroupingProblem& problem) {
  check_feasible(p, problem);
  std::vector<std::uint64_t> grouped(problem.n_clusters, 0);
  for (auto g : p.group_of) ++grouped[g];
  double cost = 0;
  for (std::uint32_t j = 0; j < problem.n_clusters; ++j) {
    cost += problem.h[j] * (1.0 + static_cast<double>(grouped[j]));
  }
  return cost;
}

GroupAssignment greedy_group(const GroupingProblem& problem) {
  problem.validate();
  GroupAssignment out;
  out.group_of.resize(problem.n_vectors());
  for (std::size_t i = 0; i < problem.n_vectors(); ++i) {
    std::uint32_t best = problem.replicas[i].front();
    for (auto c : problem.replicas[i]) {
      if (problem.h[c] > problem.h[best] ||
          (problem.h[c] == problem.h[best] && c < best)) {
        best = c;
      }
    }
    out.group_of[i] = best;
  }
  return out;
}

GroupAssignment brute_force_group(const GroupingProblem& problem,
                                  std::uint64_t max_assignments) {
  problem.validate();
  const std::size_t n = problem.n_vectors();
  std::uint64_t total = 1;
  for (const auto& r : problem.replicas) {
    if (total > max_assignments / r.size()) {
      throw CapacityError("grouping instance too large for exhaustive search");
    }
    total *= r.size();
  }

  // Odometer over per-vector choices (vector 0 most significant, options in
  // ascending cluster order), so the first optimum met is the
  // lexicographically smallest. The running cost is updated incrementally;
  // near-ties are settled with the exact objective.
  std::vector<std::vector<std::uint32_t>> options(n);
  for (std::size_t i = 0; i < n; ++i) {
    options[i] = problem.replicas[i];
    std::sort(options[i].begin(), options[i].end());
  }
  std::vector<std::size_t> digit(n, 0);
  GroupAssignment current;
  current.group_of.resize(n);
  for (std::size_t i = 0; i < n; ++i) current.group_of[i] = options[i][0];

  GroupAssignment best = current;
  double best_cost = objective(current, problem);
  double cost = best_cost;
  for (std::uint64_t step = 1; step < total; ++step) {
    std::size_t i = n;
    while (i-- > 0) {
      const auto old = current.group_of[i];
      if (++digit[i] < options[i].size()) {
        current.group_of[i] = options[i][digit[i]];
        cost += problem.h[old] - problem.h[current.group_of[i]];
        break;
      }
      digit[i] = 0;
      current.group_of[i] = options[i][0];
      cost += problem.h[old] - problem.h[current.group_of[i]];
    }
    const double tol = 1e-9 * std::max(1.0, std::abs(best_cost));
    if (cost < best_cost - tol) {
      best_cost = objective(current, problem);
      best = current;
      cost = best_cost;
    } else if (cost <= best_cost + tol) {
      const double exact = objective(current, problem);
      if (exact < best_cost) {
        best_cost = exact;
        best = current;
      }
      cost = exact;
    }
  }
  return best;
}

std::vector<double> estimate_frequencies(const CentroidNavigator& navigator,
                                         std::uint32_t n_clusters,
                                         const VectorDataset& query_log,
                                         std::uint32_t top_c) {
  std::vector<double> h(n_clusters, 0.0);
  for (std::size_t q = 0; q < query_log.count(); ++q) {
    for (auto c : navigator.select(query_log[q], top_c)) h[c] += 1.0;
  }
  return h;
}

std::vector<double> estimate_frequencies(const ClusterIndex& index,
                                         const VectorDataset& query_log,
                                         std::uint32_t top_c) {
  return estimate_frequencies(index.navigator(), index.n_clusters(), query_log,
                              top_c);
}

std::string format_grouping(const GroupingProblem& problem,
                            const GroupAssignment* p) {
  if (p != nullptr) check_feasible(*p, problem);
  std::ostringstream out;
  out << "GRP1 " << problem.n_vectors() << ' ' << problem.n_clusters << '\n';
  out << 'h';
  char buf[64];
  for (auto v : problem.h) {
    std::snprintf(buf, sizeof buf, " %.17g", v);
    out << buf;
  }
  out << '\n';
  for (std::size_t i = 0; i < problem.n_vectors(); ++i) {
    out << i << ' ';
    const auto& r = problem.replicas[i];
    for (std::size_t e = 0; e < r.size(); ++e) {
      if (e > 0) out << ',';
      out << r[e];
    }
    out << ' ';
    if (p != nullptr) {
      out << p->group_of[i];
    } else {
      out << '-';
    }
    out << '\n';
  }
  return out.str();
}

namespace {

template <class T>
T parse_field(std::string_view s, std::uint64_t at) {
  T v{};
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw FormatError("bad number '" + std::string(s) + "'", at);
  }
  return v;
}

double parse_double(std::string_view s, std::uint64_t at) {
  std::string copy(s);
  char* end = nullptr;
  const double v = std::strtod(copy.c_str(), &end);
  if (copy.empty() || end != copy.c_str() + copy.size()) {
    throw FormatError("bad number '" + copy + "'", at);
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t at = 0;
  while (at <= s.size()) {
    auto next = s.find(sep, at);
    if (next == std::string_view::npos) next = s.size();
    if (next > at) out.push_back(s.substr(at, next - at));
    at = next + 1;
  }
  return out;
}

}  // namespace

ParsedGrouping parse_grouping(std::string_view text) {
  std::vector<std::pair<std::string_view, std::uint64_t>> lines;
  std::size_t at = 0;
  while (at < text.size()) {
    auto nl = text.find('\n', at);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(at, nl - at);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back({line, at});
    at = nl + 1;
  }
  if (lines.size() < 2) throw FormatError("grouping text is truncated", 0);

  const auto header = split(lines[0].first, ' ');
  if (header.size() != 3 || header[0] != "GRP1") {
    throw FormatError("missing GRP1 header", 0);
  }
  const auto n_vectors = parse_field<std::uint64_t>(header[1], 0);
  ParsedGrouping out;
  out.problem.n_clusters = parse_field<std::uint32_t>(header[2], 0);

  const auto hline = split(lines[1].first, ' ');
  if (hline.empty() || hline[0] != "h" ||
      hline.size() != 1 + std::size_t{out.problem.n_clusters}) {
    throw FormatError("bad frequency line", lines[1].second);
  }
  for (std::size_t j = 1; j < hline.size(); ++j) {
    out.problem.h.push_back(parse_double(hline[j], lines[1].second));
  }
  if (lines.size() != 2 + n_vectors) {
    throw FormatError("vector line count does not match the header",
                      lines.back().second);
  }

  GroupAssignment assignment;
  bool any_group = false;
  bool any_missing = false;
  for (std::uint64_t i = 0; i < n_vectors; ++i) {
    const auto [line, offset] = lines[2 + i];
    const auto cols = split(line, ' ');
    if (cols.size() != 3 || parse_field<std::uint64_t>(cols[0], offset) != i) {
      throw FormatError("bad vector line", offset);
    }
    std::vector<std::uint32_t> clusters;
    for (auto c : split(cols[1], ',')) {
      clusters.push_back(parse_field<std::uint32_t>(c, offset));
    }
    out.problem.replicas.push_back(std::move(clusters));
    if (cols[2] == "-") {
      any_missing = true;
    } else {
      any_group = true;
      assignment.group_of.push_back(parse_field<std::uint32_t>(cols[2], offset));
    }
  }
  if (any_group && any_missing) {
    throw FormatError("group column is only partly filled", lines[2].second);
  }
  try {
    out.problem.validate();
    if (any_group) check_feasible(assignment, out.problem);
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what(), 0);
  }
  if (any_group) out.assignment = std::move(assignment);
  return out;
}

}  // namespace tiervec
