#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "catch_amalgamated.hpp"
#include "test_util.hpp"
#include "tiervec/grouping.hpp"
#include "tiervec/synthetic.hpp"

using namespace tiervec;
using Catch::Approx;

namespace {

// Cost written straight from the read-count definition: every access to
// cluster j reads its group once plus each member not grouped in j.
double direct_cost(const GroupingProblem& pr, const std::vector<std::uint32_t>& g) {
  double cost = 0;
  for (std::uint32_t j = 0; j < pr.n_clusters; ++j) {
    double reads = 1;
    for (std::size_t i = 0; i < pr.n_vectors(); ++i) {
      const auto& r = pr.replicas[i];
      if (std::find(r.begin(), r.end(), j) != r.end() && g[i] != j) reads += 1;
    }
    cost += pr.h[j] * reads;
  }
  return cost;
}

// Minimum over every feasible assignment by explicit enumeration.
double enumerate_min(const GroupingProblem& pr) {
  std::vector<std::size_t> digit(pr.n_vectors(), 0);
  double best = std::numeric_limits<double>::infinity();
  for (;;) {
    std::vector<std::uint32_t> g(pr.n_vectors());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = pr.replicas[i][digit[i]];
    best = std::min(best, direct_cost(pr, g));
    std::size_t i = 0;
    while (i < digit.size() && ++digit[i] == pr.replicas[i].size()) {
      digit[i] = 0;
      ++i;
    }
    if (i == digit.size()) break;
  }
  return best;
}

GroupingProblem random_problem(std::mt19937_64& rng, std::size_t nv,
                               std::uint32_t nc, bool integer_h) {
  GroupingProblem pr;
  pr.n_clusters = nc;
  pr.replicas.resize(nv);
  for (auto& r : pr.replicas) {
    std::vector<std::uint32_t> all(nc);
    std::iota(all.begin(), all.end(), 0u);
    std::shuffle(all.begin(), all.end(), rng);
    r.assign(all.begin(), all.begin() + 1 + rng() % nc);
  }
  std::uniform_real_distribution<double> u(0, 10);
  for (std::uint32_t j = 0; j < nc; ++j) {
    pr.h.push_back(integer_h ? static_cast<double>(rng() % 4) : u(rng));
  }
  return pr;
}

}  // namespace

TEST_CASE("two-cluster example costs") {
  GroupingProblem pr{2, {{0, 1}}, {5, 2}};
  CHECK(objective(GroupAssignment{{0}}, pr) == 9);
  CHECK(objective(GroupAssignment{{1}}, pr) == 12);
  CHECK(greedy_group(pr).group_of == std::vector<std::uint32_t>{0});
  CHECK(brute_force_group(pr).group_of == std::vector<std::uint32_t>{0});
}

TEST_CASE("without replication the cost is the frequency sum") {
  GroupingProblem pr{3, {{0}, {2}, {1}, {2}}, {1.5, 2, 4}};
  CHECK(objective(greedy_group(pr), pr) == 7.5);
  pr.h = {0, 0, 0};
  CHECK(objective(greedy_group(pr), pr) == 0);
}

TEST_CASE("equal frequencies group into the lowest replicated id") {
  GroupingProblem pr{4, {{3, 1}, {2, 0, 3}, {1}}, {1, 1, 1, 1}};
  CHECK(greedy_group(pr).group_of == std::vector<std::uint32_t>{1, 0, 1});
}

TEST_CASE("objective matches the direct read count") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 200; ++t) {
    const auto pr = random_problem(rng, 1 + rng() % 20, 1 + rng() % 6, false);
    GroupAssignment p;
    for (const auto& r : pr.replicas) p.group_of.push_back(r[rng() % r.size()]);
    CHECK(objective(p, pr) == Approx(direct_cost(pr, p.group_of)));
  }
}

TEST_CASE("printed objective is the alternative form") {
  GroupingProblem pr{2, {{0, 1}}, {5, 2}};
  CHECK(printed_objective(GroupAssignment{{0}}, pr) == 5 * 2 + 2 * 1);
  CHECK(printed_objective(GroupAssignment{{1}}, pr) == 5 * 1 + 2 * 2);
}

TEST_CASE("infeasible assignments are rejected") {
  GroupingProblem pr{3, {{0, 1}, {2}}, {1, 1, 1}};
  CHECK_THROWS_AS(objective(GroupAssignment{{2, 2}}, pr), InvalidArgument);
  CHECK_THROWS_AS(objective(GroupAssignment{{0}}, pr), InvalidArgument);
  CHECK_NOTHROW(check_feasible(GroupAssignment{{1, 2}}, pr));
  GroupingProblem bad{2, {{}}, {1, 1}};
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  GroupingProblem neg{1, {{0}}, {-1}};
  CHECK_THROWS_AS(neg.validate(), InvalidArgument);
  GroupingProblem dup{2, {{1, 1}}, {1, 1}};
  CHECK_THROWS_AS(dup.validate(), InvalidArgument);
}

TEST_CASE("greedy equals the exhaustive minimum on small instances") {
  std::mt19937_64 rng(2024);
  int violations = 0;
  for (int t = 0; t < 300; ++t) {
    const auto pr = random_problem(rng, 1 + rng() % 12, 1 + rng() % 4, t % 2);
    const auto g = greedy_group(pr);
    CHECK_NOTHROW(check_feasible(g, pr));
    const double best = enumerate_min(pr);
    if (objective(g, pr) != Approx(best)) ++violations;
    CHECK(objective(brute_force_group(pr), pr) == Approx(best));
  }
  CHECK(violations == 0);
}

TEST_CASE("single vector goes to the busier cluster in the oracle") {
  GroupingProblem pr{2, {{1, 0}}, {1, 7}};
  CHECK(brute_force_group(pr).group_of == std::vector<std::uint32_t>{1});
}

TEST_CASE("oracle breaks ties lexicographically") {
  GroupingProblem pr{3, {{2, 0}, {1, 2}}, {3, 3, 3}};
  CHECK(brute_force_group(pr).group_of == std::vector<std::uint32_t>{0, 1});
}

TEST_CASE("oracle equals the per-vector argmax") {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 100; ++t) {
    const auto pr = random_problem(rng, 1 + rng() % 10, 2 + rng() % 3, false);
    const auto o = brute_force_group(pr);
    for (std::size_t i = 0; i < pr.n_vectors(); ++i) {
      double best = -1;
      for (auto c : pr.replicas[i]) best = std::max(best, pr.h[c]);
      CHECK(pr.h[o.group_of[i]] == best);
    }
  }
}

TEST_CASE("oracle refuses instances that are too large") {
  GroupingProblem pr;
  pr.n_clusters = 8;
  pr.h.assign(8, 1);
  pr.replicas.assign(30, {0, 1, 2, 3, 4, 5, 6, 7});
  CHECK_THROWS_AS(brute_force_group(pr), CapacityError);
  CHECK_THROWS_AS(brute_force_group(pr, 100), CapacityError);
}

TEST_CASE("raising one frequency never pulls vectors away from it") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    auto pr = random_problem(rng, 30, 5, false);
    const auto before = greedy_group(pr);
    const std::uint32_t j = rng() % 5;
    pr.h[j] += 1 + static_cast<double>(rng() % 10);
    const auto after = greedy_group(pr);
    for (std::size_t i = 0; i < pr.n_vectors(); ++i) {
      if (before.group_of[i] == j) CHECK(after.group_of[i] == j);
    }
  }
}

TEST_CASE("scaling frequencies leaves greedy unchanged") {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 50; ++t) {
    auto pr = random_problem(rng, 40, 6, false);
    const auto a = greedy_group(pr);
    for (auto& h : pr.h) h *= 3.7;
    CHECK(greedy_group(pr).group_of == a.group_of);
  }
}

TEST_CASE("greedy handles a million vectors quickly") {
  GroupingProblem pr;
  pr.n_clusters = 4096;
  std::mt19937_64 rng(8);
  pr.h.resize(pr.n_clusters);
  for (auto& h : pr.h) h = static_cast<double>(rng() % 1000);
  pr.replicas.resize(1'000'000);
  for (auto& r : pr.replicas) {
    const std::uint32_t base = rng() % (pr.n_clusters - 8);
    for (std::uint32_t c = 0; c < 8; ++c) r.push_back(base + c);
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto g = greedy_group(pr);
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
  CHECK(g.group_of.size() == 1'000'000);
  CHECK(secs < 10.0);
}

TEST_CASE("frequency estimation counts selections") {
  SyntheticParams sp;
  sp.count = 2000;
  sp.dim = 8;
  sp.n_queries = 500;
  const auto syn = make_synthetic(sp);
  ClusterBuildParams p;
  p.n_clusters = 20;
  const auto idx = ClusterIndex::build(
      std::make_shared<const VectorDataset>(syn.base), p);
  const VectorDataset empty(ElemType::Float32, 8, 0);
  const auto zero = estimate_frequencies(idx, empty, 3);
  CHECK(std::all_of(zero.begin(), zero.end(), [](double h) { return h == 0; }));
  const auto one = estimate_frequencies(idx, syn.queries.slice(0, 1), 3);
  CHECK(std::count(one.begin(), one.end(), 1.0) == 3);
  CHECK(std::count(one.begin(), one.end(), 0.0) == 17);
  const auto h = estimate_frequencies(idx, syn.queries, 4);
  CHECK(std::accumulate(h.begin(), h.end(), 0.0) == 4.0 * 500);
  CHECK(h == estimate_frequencies(idx.navigator(), 20, syn.queries, 4));
}

TEST_CASE("skewed logs concentrate on a few clusters") {
  SyntheticParams sp;
  sp.count = 10000;
  sp.dim = 16;
  sp.components = 64;
  sp.n_queries = 2000;
  sp.query_skew = 1.5;
  sp.spectrum_decay = 0.5;
  const auto syn = make_synthetic(sp);
  ClusterBuildParams p;
  p.n_clusters = 100;
  const auto idx = ClusterIndex::build(
      std::make_shared<const VectorDataset>(syn.base), p);
  auto h = estimate_frequencies(idx, syn.queries, 2);
  std::sort(h.rbegin(), h.rend());
  const double total = std::accumulate(h.begin(), h.end(), 0.0);
  const double top = std::accumulate(h.begin(), h.begin() + 10, 0.0);
  CHECK(top / total >= 0.5);
}

TEST_CASE("problems built from an index and from its image agree") {
  SyntheticParams sp;
  sp.count = 1500;
  sp.dim = 8;
  sp.n_queries = 100;
  const auto syn = make_synthetic(sp);
  ClusterBuildParams p;
  p.n_clusters = 15;
  p.replica_eps = 0.3;
  const auto idx = ClusterIndex::build(
      std::make_shared<const VectorDataset>(syn.base), p);
  const auto h = estimate_frequencies(idx, syn.queries, 3);
  const auto a = make_grouping_problem(idx, h);
  const auto img = serialize(idx, ClusterLayout::Decoupled);
  const auto b = make_grouping_problem(img, h);
  REQUIRE(a.n_vectors() == b.n_vectors());
  for (std::size_t i = 0; i < a.n_vectors(); ++i) {
    auto x = a.replicas[i], y = b.replicas[i];
    CHECK(x.front() == y.front());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    CHECK(x == y);
  }
  CHECK(objective(greedy_group(a), a) == objective(greedy_group(b), b));
}

TEST_CASE("grouping text round trips") {
  GroupingProblem pr{3, {{0, 2}, {1}}, {1.5, 0, 2.25}};
  const auto g = greedy_group(pr);
  const auto text = format_grouping(pr, &g);
  CHECK(text == "GRP1 2 3\nh 1.5 0 2.25\n0 0,2 2\n1 1 1\n");
  const auto back = parse_grouping(text);
  CHECK(back.problem.replicas == pr.replicas);
  CHECK(back.problem.h == pr.h);
  REQUIRE(back.assignment.has_value());
  CHECK(back.assignment->group_of == g.group_of);
  const auto plain = parse_grouping(format_grouping(pr));
  CHECK(!plain.assignment.has_value());
  CHECK_THROWS_AS(parse_grouping("GRP2 1 1\nh 1\n0 0 0\n"), FormatError);
  CHECK_THROWS_AS(parse_grouping("GRP1 2 1\nh 1\n0 0 0\n"), FormatError);
  CHECK_THROWS_AS(parse_grouping("GRP1 1 1\nh 1\n0 5 0\n"), FormatError);
  CHECK_THROWS_AS(parse_grouping("GRP1 1 2\nh 1 1\n0 0 1\n"), FormatError);
}
