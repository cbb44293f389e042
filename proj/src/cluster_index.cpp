#include "tiervec/cluster_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "tiervec/bytes.hpp"

namespace tiervec {

// ---------------------------------------------------------------------------
// Navigation

namespace {

std::optional<GraphIndex> make_navigator_graph(
    const std::shared_ptr<const VectorDataset>& centroids, Metric metric,
    NavigatorMode mode) {
  const bool graph = mode == NavigatorMode::Graph ||
                     (mode == NavigatorMode::Auto &&
                      centroids->count() > CentroidNavigator::kExactScanLimit);
  if (!graph || centroids->count() < 2) return std::nullopt;
  GraphBuildParams p;
  p.knn_k = std::min<std::uint32_t>(
      64, static_cast<std::uint32_t>(centroids->count() - 1));
  p.max_degree = std::min<std::uint32_t>(32, p.knn_k);
  p.metric = metric;
  return GraphIndex::build(centroids, p);
}

}  // namespace

CentroidNavigator::CentroidNavigator(
    std::shared_ptr<const VectorDataset> centroids, Metric metric,
    NavigatorMode mode)
    : centroids_(std::move(centroids)),
      metric_(metric),
      graph_(make_navigator_graph(centroids_, metric_, mode)) {}

std::vector<std::uint32_t> CentroidNavigator::select(
    VectorView query, std::uint32_t top_c) const {
  const auto n = static_cast<std::uint32_t>(centroids_->count());
  if (top_c < 1 || top_c > n) {
    throw InvalidArgument("top_c must lie in [1, n_clusters]");
  }
  if (query.dim() != centroids_->dim()) {
    throw InvalidArgument("query dimension does not match the centroids");
  }
  const auto q = query.to_floats();
  std::vector<std::uint32_t> out;
  if (graph_) {
    SearchParams sp;
    sp.k = top_c;
    sp.L = std::max<std::uint32_t>(2 * top_c, 16);
    const auto r = search_in_memory(*graph_, VectorView::of<float>(q), sp);
    out = r.ids;
  } else {
    TopKCollector top(top_c);
    for (std::uint32_t c = 0; c < n; ++c) {
      top.push({distance_typed(q.data(), centroids_->row<float>(c).data(),
                               q.size(), metric_),
                c});
    }
    for (const auto& nb : top.sorted()) out.push_back(nb.id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Index

ClusterIndex::ClusterIndex(std::shared_ptr<const VectorDataset> data,
                           VectorDataset centroids,
                           std::vector<std::uint32_t> primary,
                           ReplicaLists replicas, ClusterBuildParams params,
                           NavigatorMode mode)
    : data_(std::move(data)),
      centroids_(std::make_shared<const VectorDataset>(std::move(centroids))),
      primary_(std::move(primary)),
      replicas_(std::move(replicas)),
      params_(params),
      mode_(mode),
      navigator_(centroids_, params.metric, mode) {
  if (!data_) throw InvalidArgument("cluster index without a dataset");
  if (centroids_->elem_type() != ElemType::Float32 ||
      centroids_->dim() != data_->dim()) {
    throw InvalidArgument("centroids must be float32 with the data dimension");
  }
  params_.n_clusters = static_cast<std::uint32_t>(centroids_->count());
  postings_ = postings_from_replicas(replicas_, params_.n_clusters);
}

ClusterIndex ClusterIndex::build(std::shared_ptr<const VectorDataset> data,
                                 const ClusterBuildParams& params,
                                 NavigatorMode mode) {
  auto km = balanced_kmeans(*data, params);
  auto replicas = replicate_boundary(*data, km.centroids, km.assignment,
                                     params.replica_eps, params.max_replicas,
                                     params.metric);
  return ClusterIndex(std::move(data), std::move(km.centroids),
                      std::move(km.assignment), std::move(replicas), params,
                      mode);
}

ClusterIndex ClusterIndex::with_replica_eps(double eps) const {
  auto p = params_;
  p.replica_eps = eps;
  auto replicas = replicate_boundary(*data_, *centroids_, primary_, eps,
                                     p.max_replicas, p.metric);
  return ClusterIndex(data_, *centroids_, primary_, std::move(replicas), p,
                      mode_);
}

double ClusterIndex::replication_factor() const {
  if (replicas_.empty()) return 0.0;
  std::uint64_t total = 0;
  for (const auto& r : replicas_) total += r.size();
  return static_cast<double>(total) / static_cast<double>(replicas_.size());
}

std::vector<std::uint32_t> ClusterIndex::select_clusters(
    VectorView query, std::uint32_t top_c) const {
  return navigator_.select(query, top_c);
}

void ClusterIndex::validate() const {
  const auto n = data_->count();
  if (primary_.size() != n || replicas_.size() != n) {
    throw InvalidArgument("assignment sizes do not match the dataset");
  }
  std::vector<std::uint64_t> sizes(n_clusters(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = replicas_[i];
    if (r.empty() || r.front() != primary_[i]) {
      throw InvalidArgument("vector " + std::to_string(i) +
                            " is missing from its primary cluster");
    }
    if (r.size() > params_.max_replicas) {
      throw InvalidArgument("vector " + std::to_string(i) +
                            " exceeds max_replicas");
    }
    auto sorted = r;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw InvalidArgument("vector " + std::to_string(i) +
                            " is replicated twice into one cluster");
    }
    ++sizes[primary_[i]];
  }
  const auto cap = cluster_capacity(n, n_clusters(), params_.balance_slack);
  for (auto s : sizes) {
    if (s > cap) throw InvalidArgument("cluster exceeds the balance cap");
  }
}

// ---------------------------------------------------------------------------
// Layouts

std::string to_string(ClusterLayout layout) {
  switch (layout) {
    case ClusterLayout::Coupled:
      return "coupled";
    case ClusterLayout::Decoupled:
      return "decoupled";
    case ClusterLayout::Grouped:
      return "grouped";
  }
  return "unknown";
}

ClusterLayout parse_cluster_layout(std::string_view name) {
  if (name == "coupled") return ClusterLayout::Coupled;
  if (name == "decoupled") return ClusterLayout::Decoupled;
  if (name == "grouped") return ClusterLayout::Grouped;
  throw InvalidArgument("unknown cluster layout '" + std::string(name) + "'");
}

double SerializedCluster::mean_record_length() const {
  if (directory.empty()) return 0.0;
  double total = 0;
  for (const auto& e : directory) total += static_cast<double>(e.length);
  return total / static_cast<double>(directory.size());
}

SerializedCluster serialize(const ClusterIndex& index, ClusterLayout layout,
                            const GroupAssignment* groups) {
  const auto& ds = index.data();
  SerializedCluster out;
  out.layout = layout;
  out.elem_type = ds.elem_type();
  out.metric = index.metric();
  out.dim = static_cast<std::uint32_t>(ds.dim());
  out.count = ds.count();
  out.replica_eps = index.params().replica_eps;
  out.max_replicas = index.params().max_replicas;
  out.balance_slack = index.params().balance_slack;
  out.centroids = index.centroids();
  out.primary = index.primary();
  out.directory.resize(index.n_clusters());

  const std::uint64_t vb = ds.vector_bytes();
  std::vector<std::byte> region;
  auto put_vector = [&](std::uint32_t id) {
    const auto b = ds[id].bytes();
    region.insert(region.end(), b.begin(), b.end());
  };

  switch (layout) {
    case ClusterLayout::Coupled:
      for (std::uint32_t c = 0; c < index.n_clusters(); ++c) {
        auto& e = out.directory[c];
        const auto& members = index.postings(c);
        e.offset = region.size();
        bytes::put<std::uint32_t>(region,
                                  static_cast<std::uint32_t>(members.size()));
        for (auto id : members) put_vector(id);
        e.length = region.size() - e.offset;
        e.n_inline = static_cast<std::uint32_t>(members.size());
        e.ids = members;
      }
      break;

    case ClusterLayout::Decoupled:
      region.reserve(ds.count() * vb);
      for (std::uint32_t i = 0; i < ds.count(); ++i) put_vector(i);
      for (std::uint32_t c = 0; c < index.n_clusters(); ++c) {
        auto& e = out.directory[c];
        const auto& members = index.postings(c);
        e.offset = region.size();
        bytes::put<std::uint32_t>(region,
                                  static_cast<std::uint32_t>(members.size()));
        bytes::put<std::uint32_t>(region, 0);
        for (auto id : members) bytes::put<std::uint64_t>(region, id * vb);
        e.length = region.size() - e.offset;
        e.n_addr = static_cast<std::uint32_t>(members.size());
        e.ids = members;
      }
      break;

    case ClusterLayout::Grouped: {
      if (groups == nullptr) {
        throw InvalidArgument("grouped layout needs a group assignment");
      }
      const auto& g = groups->group_of;
      if (g.size() != ds.count()) {
        throw InvalidArgument("group assignment size does not match dataset");
      }
      for (std::uint32_t i = 0; i < ds.count(); ++i) {
        const auto& r = index.replicas()[i];
        if (std::find(r.begin(), r.end(), g[i]) == r.end()) {
          throw InvalidArgument("vector " + std::to_string(i) +
                                " is grouped into a cluster it is not in");
        }
      }
      // First pass places group segments so overflow addresses are known.
      std::vector<std::uint64_t> address(ds.count());
      std::vector<std::vector<std::uint32_t>> inline_ids(index.n_clusters());
      std::vector<std::vector<std::uint32_t>> overflow(index.n_clusters());
      for (std::uint32_t c = 0; c < index.n_clusters(); ++c) {
        for (auto id : index.postings(c)) {
          (g[id] == c ? inline_ids[c] : overflow[c]).push_back(id);
        }
      }
      std::uint64_t at = 0;
      for (std::uint32_t c = 0; c < index.n_clusters(); ++c) {
        at += 8;
        for (auto id : inline_ids[c]) {
          address[id] = at;
          at += vb;
        }
        at += 8 * overflow[c].size();
      }
      region.reserve(at);
      for (std::uint32_t c = 0; c < index.n_clusters(); ++c) {
        auto& e = out.directory[c];
        e.offset = region.size();
        bytes::put<std::uint32_t>(
            region, static_cast<std::uint32_t>(inline_ids[c].size()));
        bytes::put<std::uint32_t>(
            region, static_cast<std::uint32_t>(overflow[c].size()));
        for (auto id : inline_ids[c]) put_vector(id);
        for (auto id : overflow[c]) bytes::put<std::uint64_t>(region, address[id]);
        e.length = region.size() - e.offset;
        e.n_inline = static_cast<std::uint32_t>(inline_ids[c].size());
        e.n_addr = static_cast<std::uint32_t>(overflow[c].size());
        e.ids = inline_ids[c];
        e.ids.insert(e.ids.end(), overflow[c].begin(), overflow[c].end());
      }
      break;
    }
  }
  out.region = StorageRegion(std::move(region));
  return out;
}

// File layout (little-endian):
//   0  char[4] "CVX1"        4  u8 layout (0 coupled, 1 decoupled, 2 grouped)
//   5  u8 elem_type          6  u8 metric          7  u8 reserved
//   8  u32 n_clusters       12  u32 dim            16  u64 count
//  24  f64 replica_eps      32  u32 max_replicas   36  u32 reserved
//  40  f64 balance_slack    48  u64 region_length
//  56  centroids: n_clusters * dim f32
//      primary: count u32
//      directory, per cluster: u64 offset | u64 length | u32 n_inline |
//                              u32 n_addr | (n_inline + n_addr) u32 ids
//      region bytes
namespace {
constexpr char kClusterMagic[4] = {'C', 'V', 'X', '1'};
}  // namespace

void write_cluster_file(const std::string& path, const SerializedCluster& c) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("cannot open for writing: " + path);
  out.write(kClusterMagic, 4);
  bytes::write<std::uint8_t>(out, static_cast<std::uint8_t>(c.layout));
  bytes::write<std::uint8_t>(out, static_cast<std::uint8_t>(c.elem_type));
  bytes::write<std::uint8_t>(out, static_cast<std::uint8_t>(c.metric));
  bytes::write<std::uint8_t>(out, 0);
  bytes::write<std::uint32_t>(out, c.n_clusters());
  bytes::write<std::uint32_t>(out, c.dim);
  bytes::write<std::uint64_t>(out, c.count);
  bytes::write<double>(out, c.replica_eps);
  bytes::write<std::uint32_t>(out, c.max_replicas);
  bytes::write<std::uint32_t>(out, 0);
  bytes::write<double>(out, c.balance_slack);
  bytes::write<std::uint64_t>(out, c.region.length());
  bytes::write_bytes(out, c.centroids.bytes());
  for (auto p : c.primary) bytes::write<std::uint32_t>(out, p);
  for (const auto& e : c.directory) {
    bytes::write<std::uint64_t>(out, e.offset);
    bytes::write<std::uint64_t>(out, e.length);
    bytes::write<std::uint32_t>(out, e.n_inline);
    bytes::write<std::uint32_t>(out, e.n_addr);
    for (auto id : e.ids) bytes::write<std::uint32_t>(out, id);
  }
  bytes::write_bytes(out, c.region.bytes());
  if (!out) throw InvalidArgument("write failed: " + path);
}

SerializedCluster read_cluster_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open cluster file: " + path);
  in.seekg(0, std::ios::end);
  const auto file_len = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0);
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kClusterMagic)) {
    throw FormatError("not a CVX1 cluster file", 0);
  }
  SerializedCluster c;
  const auto layout = bytes::read<std::uint8_t>(in);
  if (layout > 2) throw FormatError("unknown cluster layout tag", 4);
  c.layout = static_cast<ClusterLayout>(layout);
  const auto et = bytes::read<std::uint8_t>(in);
  if (et > 2) throw FormatError("unknown element type", 5);
  c.elem_type = static_cast<ElemType>(et);
  const auto metric = bytes::read<std::uint8_t>(in);
  if (metric > 1) throw FormatError("unknown metric", 6);
  c.metric = static_cast<Metric>(metric);
  bytes::read<std::uint8_t>(in);
  const auto n_clusters = bytes::read<std::uint32_t>(in);
  c.dim = bytes::read<std::uint32_t>(in);
  if (c.dim == 0) throw FormatError("zero dimension", 12);
  c.count = bytes::read<std::uint64_t>(in);
  c.replica_eps = bytes::read<double>(in);
  c.max_replicas = bytes::read<std::uint32_t>(in);
  bytes::read<std::uint32_t>(in);
  c.balance_slack = bytes::read<double>(in);
  const auto region_len = bytes::read<std::uint64_t>(in);

  const std::uint64_t centroid_bytes = 4ull * n_clusters * c.dim;
  if (centroid_bytes + 4 * c.count + region_len > file_len) {
    throw FormatError("file is shorter than its header claims", 16);
  }
  c.centroids = VectorDataset(ElemType::Float32, c.dim, n_clusters);
  bytes::read_bytes(in, c.centroids.mutable_bytes());
  c.primary.resize(c.count);
  for (auto& p : c.primary) {
    const auto at = static_cast<std::uint64_t>(in.tellg());
    p = bytes::read<std::uint32_t>(in);
    if (p >= n_clusters) throw FormatError("primary cluster out of range", at);
  }
  c.directory.resize(n_clusters);
  for (auto& e : c.directory) {
    const auto at = static_cast<std::uint64_t>(in.tellg());
    e.offset = bytes::read<std::uint64_t>(in);
    e.length = bytes::read<std::uint64_t>(in);
    e.n_inline = bytes::read<std::uint32_t>(in);
    e.n_addr = bytes::read<std::uint32_t>(in);
    if (e.offset > region_len || e.length > region_len - e.offset ||
        e.length == 0) {
      throw FormatError("cluster record outside the region", at);
    }
    const std::uint64_t n_ids = std::uint64_t{e.n_inline} + e.n_addr;
    if (n_ids * 4 > file_len) throw FormatError("directory entry too large", at);
    e.ids.resize(n_ids);
    for (auto& id : e.ids) {
      const auto id_at = static_cast<std::uint64_t>(in.tellg());
      id = bytes::read<std::uint32_t>(in);
      if (id >= c.count) throw FormatError("member id out of range", id_at);
    }
  }
  const auto region_at = static_cast<std::uint64_t>(in.tellg());
  if (region_at + region_len != file_len) {
    throw FormatError("region length does not match the file", region_at);
  }
  std::vector<std::byte> region(region_len);
  bytes::read_bytes(in, region);
  c.region = StorageRegion(std::move(region));
  return c;
}

// ---------------------------------------------------------------------------
// Search

ClusterSearchTrace search(const SerializedCluster& index,
                          const CentroidNavigator& navigator, VectorView query,
                          ClusterSearchParams params,
                          const SimulatedDevice& device) {
  if (params.k < 1) throw InvalidArgument("k must be >= 1");
  if (query.dim() != index.dim || query.elem_type() != index.elem_type) {
    throw InvalidArgument("query does not match the index vectors");
  }
  ClusterSearchTrace trace;
  trace.clusters = navigator.select(query, params.top_c);
  const std::uint64_t vb = index.vector_bytes();
  const auto region = index.region.bytes();
  std::vector<Neighbor> found;

  for (auto c : trace.clusters) {
    const auto& e = index.directory[c];
    const auto rec = device.read(index.region, e.offset, e.length, trace.io);
    auto score = [&](const std::byte* v, std::uint32_t id) {
      found.push_back(
          {distance(query, VectorView(index.elem_type, index.dim, v),
                    index.metric),
           id});
    };
    auto fetch = [&](std::uint64_t field_at, std::uint32_t id) {
      const auto addr = bytes::get<std::uint64_t>(rec, field_at);
      if (addr > region.size() || vb > region.size() - addr) {
        throw FormatError("vector address outside the region",
                          e.offset + field_at);
      }
      score(device.read(index.region, addr, vb, trace.io).data(), id);
    };
    const std::uint64_t n_ids = std::uint64_t{e.n_inline} + e.n_addr;

    switch (index.layout) {
      case ClusterLayout::Coupled: {
        const auto n = bytes::get<std::uint32_t>(rec, 0);
        if (n != n_ids || rec.size() != 4 + n * vb) {
          throw FormatError("coupled record does not match the directory",
                            e.offset);
        }
        for (std::uint32_t i = 0; i < n; ++i) {
          score(rec.data() + 4 + i * vb, e.ids[i]);
        }
        break;
      }
      case ClusterLayout::Decoupled: {
        const auto n = bytes::get<std::uint32_t>(rec, 0);
        if (n != n_ids || rec.size() != 8 + 8ull * n) {
          throw FormatError("decoupled record does not match the directory",
                            e.offset);
        }
        for (std::uint32_t i = 0; i < n; ++i) fetch(8 + 8ull * i, e.ids[i]);
        break;
      }
      case ClusterLayout::Grouped: {
        const auto ng = bytes::get<std::uint32_t>(rec, 0);
        const auto no = bytes::get<std::uint32_t>(rec, 4);
        if (ng != e.n_inline || no != e.n_addr ||
            rec.size() != 8 + ng * vb + 8ull * no) {
          throw FormatError("grouped record does not match the directory",
                            e.offset);
        }
        for (std::uint32_t i = 0; i < ng; ++i) {
          score(rec.data() + 8 + i * vb, e.ids[i]);
        }
        const std::uint64_t table = 8 + ng * vb;
        for (std::uint32_t i = 0; i < no; ++i) {
          fetch(table + 8ull * i, e.ids[ng + i]);
        }
        break;
      }
    }
  }
  trace.result = make_topk(std::move(found), params.k);
  return trace;
}

TopKResult search_in_memory(const ClusterIndex& index, VectorView query,
                            ClusterSearchParams params) {
  if (params.k < 1) throw InvalidArgument("k must be >= 1");
  std::vector<Neighbor> found;
  for (auto c : index.select_clusters(query, params.top_c)) {
    for (auto id : index.postings(c)) {
      found.push_back(
          {distance(query, index.data()[id], index.metric()), id});
    }
  }
  return make_topk(std::move(found), params.k);
}

double predict_cluster_throughput(const DeviceProfile& profile, double top_c,
                                  double avg_cluster_bytes) {
  if (!(top_c > 0) || !(avg_cluster_bytes > 0)) {
    throw InvalidArgument("predict_cluster_throughput: positive arguments only");
  }
  const auto charged = static_cast<double>(
      charged_bytes(static_cast<std::uint64_t>(std::ceil(avg_cluster_bytes)),
                    profile.block_bytes));
  return std::min(profile.bandwidth_bytes_per_s / (top_c * charged),
                  profile.iops_cap / top_c);
}

}  // namespace tiervec
