#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "tiervec/cluster_index.hpp"

namespace tiervec {

void ClusterBuildParams::validate() const {
  if (n_clusters < 1) throw InvalidArgument("n_clusters must be >= 1");
  if (max_replicas < 1) throw InvalidArgument("max_replicas must be >= 1");
  if (!(balance_slack >= 0)) throw InvalidArgument("balance_slack must be >= 0");
  if (!(replica_eps >= 0)) throw InvalidArgument("replica_eps must be >= 0");
}

std::uint64_t cluster_capacity(std::uint64_t count, std::uint32_t n_clusters,
                               double balance_slack) {
  const std::uint64_t even = (count + n_clusters - 1) / n_clusters;
  if (!std::isfinite(balance_slack)) return std::max<std::uint64_t>(count, 1);
  const double slack = std::floor((1.0 + balance_slack) *
                                  static_cast<double>(count) / n_clusters);
  if (slack >= static_cast<double>(count)) return std::max<std::uint64_t>(count, 1);
  return std::max(even, static_cast<std::uint64_t>(slack));
}

namespace {

// Distances from vector i to every centroid.
template <class T>
void centroid_row(const VectorDataset& ds, std::size_t i,
                  const VectorDataset& centroids, Metric metric,
                  std::vector<double>& out) {
  const T* v = ds.row<T>(i).data();
  const std::size_t dim = ds.dim();
  out.resize(centroids.count());
  for (std::size_t c = 0; c < centroids.count(); ++c) {
    out[c] = distance_typed(v, centroids.row<float>(c).data(), dim, metric);
  }
}

void row_distances(const VectorDataset& ds, std::size_t i,
                   const VectorDataset& centroids, Metric metric,
                   std::vector<double>& out) {
  visit_elem(ds.elem_type(), [&](auto tag) {
    using T = std::remove_cv_t<std::remove_pointer_t<decltype(tag)>>;
    centroid_row<T>(ds, i, centroids, metric, out);
  });
}

std::vector<std::uint32_t> assign_with_capacity(
    const VectorDataset& ds, const VectorDataset& centroids,
    std::uint64_t capacity) {
  const std::size_t n = ds.count();
  const std::size_t nc = centroids.count();
  std::vector<std::uint32_t> nearest(n);
  std::vector<double> margin(n);
  std::vector<double> row;
  for (std::size_t i = 0; i < n; ++i) {
    row_distances(ds, i, centroids, Metric::L2Squared, row);
    Neighbor best{std::numeric_limits<double>::infinity(), 0};
    Neighbor second = best;
    for (std::uint32_t c = 0; c < nc; ++c) {
      const Neighbor cand{row[c], c};
      if (cand < best) {
        second = best;
        best = cand;
      } else if (cand < second) {
        second = cand;
      }
    }
    nearest[i] = best.id;
    margin[i] = nc > 1 ? second.distance - best.distance : 0.0;
  }

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (margin[a] != margin[b]) return margin[a] > margin[b];
    return a < b;
  });

  std::vector<std::uint64_t> size(nc, 0);
  std::vector<std::uint32_t> out(n);
  std::vector<Neighbor> ranked;
  for (auto i : order) {
    std::uint32_t target = nearest[i];
    if (size[target] >= capacity) {
      row_distances(ds, i, centroids, Metric::L2Squared, row);
      ranked.clear();
      for (std::uint32_t c = 0; c < nc; ++c) ranked.push_back({row[c], c});
      std::sort(ranked.begin(), ranked.end());
      for (const auto& r : ranked) {
        if (size[r.id] < capacity) {
          target = r.id;
          break;
        }
      }
    }
    out[i] = target;
    ++size[target];
  }
  return out;
}

void update_centroids(const VectorDataset& ds,
                      const std::vector<std::uint32_t>& assignment,
                      VectorDataset& centroids) {
  const std::size_t dim = ds.dim();
  std::vector<double> sums(centroids.count() * dim, 0.0);
  std::vector<std::uint64_t> counts(centroids.count(), 0);
  for (std::size_t i = 0; i < ds.count(); ++i) {
    const auto v = ds[i].to_floats();
    double* s = sums.data() + assignment[i] * dim;
    for (std::size_t d = 0; d < dim; ++d) s[d] += v[d];
    ++counts[assignment[i]];
  }
  for (std::size_t c = 0; c < centroids.count(); ++c) {
    if (counts[c] == 0) continue;
    auto row = centroids.mutable_row<float>(c);
    for (std::size_t d = 0; d < dim; ++d) {
      row[d] = static_cast<float>(sums[c * dim + d] /
                                  static_cast<double>(counts[c]));
    }
  }
}

}  // namespace

KMeansResult balanced_kmeans(const VectorDataset& ds,
                             const ClusterBuildParams& params) {
  params.validate();
  if (params.n_clusters > ds.count()) {
    throw InvalidArgument("n_clusters exceeds the number of vectors");
  }
  KMeansResult out;
  out.centroids = VectorDataset(ElemType::Float32, ds.dim(), params.n_clusters);

  // Partial Fisher-Yates over ids gives distinct seeds.
  std::mt19937_64 rng(params.seed);
  std::vector<std::uint32_t> ids(ds.count());
  std::iota(ids.begin(), ids.end(), 0u);
  for (std::uint32_t c = 0; c < params.n_clusters; ++c) {
    std::uniform_int_distribution<std::size_t> pick(c, ids.size() - 1);
    std::swap(ids[c], ids[pick(rng)]);
    const auto v = ds[ids[c]].to_floats();
    std::copy(v.begin(), v.end(), out.centroids.mutable_row<float>(c).begin());
  }

  const auto capacity =
      cluster_capacity(ds.count(), params.n_clusters, params.balance_slack);
  for (std::uint32_t it = 0; it < params.kmeans_iters; ++it) {
    out.assignment = assign_with_capacity(ds, out.centroids, capacity);
    update_centroids(ds, out.assignment, out.centroids);
  }
  out.assignment = assign_with_capacity(ds, out.centroids, capacity);
  return out;
}

ReplicaLists replicate_boundary(const VectorDataset& ds,
                                const VectorDataset& centroids,
                                const std::vector<std::uint32_t>& primary,
                                double eps, std::uint32_t max_replicas,
                                Metric metric) {
  if (primary.size() != ds.count()) {
    throw InvalidArgument("primary assignment size does not match dataset");
  }
  if (max_replicas < 1) throw InvalidArgument("max_replicas must be >= 1");
  if (!(eps >= 0)) throw InvalidArgument("replica eps must be >= 0");
  ReplicaLists out(ds.count());
  std::vector<double> row;
  std::vector<Neighbor> close;
  for (std::size_t i = 0; i < ds.count(); ++i) {
    if (primary[i] >= centroids.count()) {
      throw InvalidArgument("primary cluster out of range");
    }
    auto& list = out[i];
    list.push_back(primary[i]);
    if (max_replicas == 1) continue;
    row_distances(ds, i, centroids, metric, row);
    const double d0 = *std::min_element(row.begin(), row.end());
    const double limit = d0 + eps * std::abs(d0);
    close.clear();
    for (std::uint32_t c = 0; c < row.size(); ++c) {
      if (row[c] <= limit && c != primary[i]) close.push_back({row[c], c});
    }
    std::sort(close.begin(), close.end());
    for (const auto& c : close) {
      if (list.size() >= max_replicas) break;
      list.push_back(c.id);
    }
  }
  return out;
}

std::vector<std::vector<std::uint32_t>> postings_from_replicas(
    const ReplicaLists& replicas, std::uint32_t n_clusters) {
  std::vector<std::vector<std::uint32_t>> out(n_clusters);
  for (std::uint32_t i = 0; i < replicas.size(); ++i) {
    for (auto c : replicas[i]) {
      if (c >= n_clusters) throw InvalidArgument("replica cluster out of range");
      out[c].push_back(i);
    }
  }
  return out;
}

}  // namespace tiervec
