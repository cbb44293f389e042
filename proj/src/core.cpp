#include "tiervec/core.hpp"

#include <unordered_set>

namespace tiervec {

std::size_t elem_size(ElemType type) {
  switch (type) {
    case ElemType::Int8:
    case ElemType::UInt8:
      return 1;
    case ElemType::Float32:
      return 4;
  }
  throw InvalidArgument("unknown element type");
}

std::string_view to_string(ElemType type) {
  switch (type) {
    case ElemType::Int8:
      return "int8";
    case ElemType::UInt8:
      return "uint8";
    case ElemType::Float32:
      return "float32";
  }
  return "unknown";
}

ElemType parse_elem_type(std::string_view name) {
  if (name == "int8") return ElemType::Int8;
  if (name == "uint8") return ElemType::UInt8;
  if (name == "float32" || name == "float") return ElemType::Float32;
  throw InvalidArgument("unknown element type: " + std::string(name));
}

std::string_view to_string(Metric metric) {
  return metric == Metric::L2Squared ? "l2" : "ip";
}

Metric parse_metric(std::string_view name) {
  if (name == "l2" || name == "l2sq" || name == "L2Squared") {
    return Metric::L2Squared;
  }
  if (name == "ip" || name == "InnerProduct") return Metric::InnerProduct;
  throw InvalidArgument("unknown metric: " + std::string(name));
}

std::vector<float> VectorView::to_floats() const {
  std::vector<float> out(dim_);
  visit_elem(type_, [&](auto tag) {
    using T = std::remove_cv_t<std::remove_pointer_t<decltype(tag)>>;
    const T* p = as<T>();
    for (std::size_t i = 0; i < dim_; ++i) out[i] = static_cast<float>(p[i]);
  });
  return out;
}

VectorDataset::VectorDataset(ElemType type, std::size_t dim, std::size_t count)
    : type_(type), dim_(dim), count_(count) {
  if (dim == 0) throw InvalidArgument("dataset dim must be positive");
  bytes_.resize(count * vector_bytes());
}

void VectorDataset::push_back(VectorView v) {
  if (v.dim() != dim_ || v.elem_type() != type_) {
    throw InvalidArgument("push_back: vector shape does not match dataset");
  }
  bytes_.insert(bytes_.end(), v.data(), v.data() + v.size_bytes());
  ++count_;
}

VectorDataset VectorDataset::slice(std::size_t first, std::size_t n) const {
  if (first + n > count_) throw InvalidArgument("slice out of range");
  VectorDataset out(type_, dim_, n);
  std::memcpy(out.bytes_.data(), bytes_.data() + first * vector_bytes(),
              n * vector_bytes());
  return out;
}

double distance(VectorView a, VectorView b, Metric metric) {
  if (a.dim() != b.dim()) {
    throw InvalidArgument("distance: dimension mismatch (" +
                          std::to_string(a.dim()) + " vs " +
                          std::to_string(b.dim()) + ")");
  }
  if (a.elem_type() != b.elem_type()) {
    throw InvalidArgument("distance: element type mismatch");
  }
  return visit_elem(a.elem_type(), [&](auto tag) {
    using T = std::remove_cv_t<std::remove_pointer_t<decltype(tag)>>;
    return distance_typed(a.as<T>(), b.as<T>(), a.dim(), metric);
  });
}

double distance_to_floats(VectorView a, std::span<const float> b,
                          Metric metric) {
  if (a.dim() != b.size()) {
    throw InvalidArgument("distance: dimension mismatch");
  }
  return visit_elem(a.elem_type(), [&](auto tag) {
    using T = std::remove_cv_t<std::remove_pointer_t<decltype(tag)>>;
    return distance_typed(a.as<T>(), b.data(), a.dim(), metric);
  });
}

TopKResult make_topk(std::vector<Neighbor> candidates, std::size_t k) {
  std::sort(candidates.begin(), candidates.end());
  TopKResult out;
  out.k = k;
  std::unordered_set<std::uint32_t> seen;
  for (const auto& n : candidates) {
    if (out.ids.size() >= k) break;
    if (!seen.insert(n.id).second) continue;
    out.ids.push_back(n.id);
    out.distances.push_back(n.distance);
  }
  return out;
}

TopKResult brute_force_topk(const VectorDataset& ds, VectorView query,
                            std::size_t k, Metric metric) {
  if (k == 0) throw InvalidArgument("brute_force_topk: k must be >= 1");
  TopKResult out;
  out.k = k;
  if (ds.empty()) return out;
  if (query.dim() != ds.dim() || query.elem_type() != ds.elem_type()) {
    throw InvalidArgument("brute_force_topk: query shape mismatch");
  }
  TopKCollector top(k);
  visit_elem(ds.elem_type(), [&](auto tag) {
    using T = std::remove_cv_t<std::remove_pointer_t<decltype(tag)>>;
    const T* q = query.as<T>();
    for (std::size_t i = 0; i < ds.count(); ++i) {
      const Neighbor n{distance_typed(q, ds.row<T>(i).data(), ds.dim(), metric),
                       static_cast<std::uint32_t>(i)};
      top.push(n);
    }
  });
  for (const auto& n : top.sorted()) {
    out.ids.push_back(n.id);
    out.distances.push_back(n.distance);
  }
  return out;
}

double recall(std::span<const std::uint32_t> result,
              std::span<const std::uint32_t> truth, std::size_t k) {
  if (k == 0 || truth.size() != k) {
    throw InvalidArgument("recall: truth must hold exactly k ids");
  }
  std::unordered_set<std::uint32_t> wanted(truth.begin(), truth.end());
  std::unordered_set<std::uint32_t> counted;
  std::size_t hits = 0;
  for (auto id : result) {
    if (wanted.count(id) && counted.insert(id).second) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(k);
}

}  // namespace tiervec
