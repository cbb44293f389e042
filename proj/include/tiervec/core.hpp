#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "tiervec/errors.hpp"

namespace tiervec {

enum class ElemType : std::uint8_t { Int8 = 0, UInt8 = 1, Float32 = 2 };

std::size_t elem_size(ElemType type);
std::string_view to_string(ElemType type);
ElemType parse_elem_type(std::string_view name);

template <class T>
constexpr ElemType elem_type_of() {
  if constexpr (std::is_same_v<T, std::int8_t>) {
    return ElemType::Int8;
  } else if constexpr (std::is_same_v<T, std::uint8_t>) {
    return ElemType::UInt8;
  } else {
    static_assert(std::is_same_v<T, float>, "unsupported element type");
    return ElemType::Float32;
  }
}

/// Lower is closer for both kinds. InnerProduct reports -<a,b>.
enum class Metric : std::uint8_t { L2Squared = 0, InnerProduct = 1 };

std::string_view to_string(Metric metric);
Metric parse_metric(std::string_view name);

/// Non-owning view of one vector's raw bytes.
class VectorView {
 public:
  VectorView() = default;
  VectorView(ElemType type, std::size_t dim, const std::byte* data)
      : type_(type), dim_(dim), data_(data) {}

  template <class T>
  static VectorView of(std::span<const T> values) {
    return {elem_type_of<T>(), values.size(),
            reinterpret_cast<const std::byte*>(values.data())};
  }

  ElemType elem_type() const { return type_; }
  std::size_t dim() const { return dim_; }
  std::size_t size_bytes() const { return dim_ * elem_size(type_); }
  const std::byte* data() const { return data_; }
  std::span<const std::byte> bytes() const { return {data_, size_bytes()}; }

  template <class T>
  const T* as() const {
    return reinterpret_cast<const T*>(data_);
  }

  /// Widened copy of the vector, used where the element type must not leak.
  std::vector<float> to_floats() const;

 private:
  ElemType type_ = ElemType::Float32;
  std::size_t dim_ = 0;
  const std::byte* data_ = nullptr;
};

/// Fixed-dimension, single-element-type vector collection in row-major order.
/// Vector ids are the implicit row indices.
class VectorDataset {
 public:
  VectorDataset() = default;
  VectorDataset(ElemType type, std::size_t dim, std::size_t count = 0);

  template <class T>
  static VectorDataset from_values(std::size_t dim, std::span<const T> values) {
    if (dim == 0) throw InvalidArgument("dataset dim must be positive");
    if (values.size() % dim != 0) {
      throw InvalidArgument("value count is not a multiple of dim");
    }
    VectorDataset ds(elem_type_of<T>(), dim, values.size() / dim);
    std::memcpy(ds.bytes_.data(), values.data(), values.size_bytes());
    return ds;
  }

  template <class T>
  static VectorDataset from_values(std::size_t dim,
                                   const std::vector<T>& values) {
    return from_values<T>(dim, std::span<const T>(values));
  }

  ElemType elem_type() const { return type_; }
  std::size_t dim() const { return dim_; }
  std::size_t count() const { return count_; }
  bool empty() const { return count_ == 0; }
  std::size_t vector_bytes() const { return dim_ * elem_size(type_); }
  std::size_t size_bytes() const { return bytes_.size(); }

  std::span<const std::byte> bytes() const { return bytes_; }
  std::span<std::byte> mutable_bytes() { return bytes_; }

  VectorView operator[](std::size_t i) const {
    return {type_, dim_, bytes_.data() + i * vector_bytes()};
  }

  template <class T>
  std::span<const T> row(std::size_t i) const {
    return {reinterpret_cast<const T*>(bytes_.data() + i * vector_bytes()),
            dim_};
  }

  template <class T>
  std::span<T> mutable_row(std::size_t i) {
    return {reinterpret_cast<T*>(bytes_.data() + i * vector_bytes()), dim_};
  }

  void push_back(VectorView v);

  /// Rows [first, first+n) copied into a new dataset.
  VectorDataset slice(std::size_t first, std::size_t n) const;

 private:
  ElemType type_ = ElemType::Float32;
  std::size_t dim_ = 1;
  std::size_t count_ = 0;
  std::vector<std::byte> bytes_;
};

// ---------------------------------------------------------------------------
// Distance kernels. Integer elements accumulate in int64 and are exact;
// float32 accumulates in double with a fixed summation order.

namespace detail {

template <class T>
using accumulator_t =
    std::conditional_t<std::is_integral_v<T>, std::int64_t, double>;

template <class A, class B>
using mixed_accumulator_t =
    std::conditional_t<std::is_integral_v<A> && std::is_integral_v<B>,
                       std::int64_t, double>;

}  // namespace detail

template <class A, class B>
double l2_squared(const A* a, const B* b, std::size_t dim) {
  using Acc = detail::mixed_accumulator_t<A, B>;
  constexpr std::size_t kLanes = 8;
  Acc lanes[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= dim; i += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) {
      const Acc d = static_cast<Acc>(a[i + l]) - static_cast<Acc>(b[i + l]);
      lanes[l] += d * d;
    }
  }
  Acc acc = 0;
  for (; i < dim; ++i) {
    const Acc d = static_cast<Acc>(a[i]) - static_cast<Acc>(b[i]);
    acc += d * d;
  }
  for (std::size_t l = 0; l < kLanes; ++l) acc += lanes[l];
  return static_cast<double>(acc);
}

template <class A, class B>
double inner_product_distance(const A* a, const B* b, std::size_t dim) {
  using Acc = detail::mixed_accumulator_t<A, B>;
  constexpr std::size_t kLanes = 8;
  Acc lanes[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= dim; i += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) {
      lanes[l] += static_cast<Acc>(a[i + l]) * static_cast<Acc>(b[i + l]);
    }
  }
  Acc acc = 0;
  for (; i < dim; ++i) acc += static_cast<Acc>(a[i]) * static_cast<Acc>(b[i]);
  for (std::size_t l = 0; l < kLanes; ++l) acc += lanes[l];
  return -static_cast<double>(acc);
}

template <class A, class B>
double distance_typed(const A* a, const B* b, std::size_t dim, Metric metric) {
  return metric == Metric::L2Squared ? l2_squared(a, b, dim)
                                     : inner_product_distance(a, b, dim);
}

/// Exact metric value. Throws InvalidArgument on dim or type mismatch.
double distance(VectorView a, VectorView b, Metric metric);

/// Distance between a stored vector of any element type and a float vector
/// (centroids are always float32).
double distance_to_floats(VectorView a, std::span<const float> b,
                          Metric metric);

/// Calls fn with a typed pointer for the element type of v.
template <class Fn>
decltype(auto) visit_elem(ElemType type, Fn&& fn) {
  switch (type) {
    case ElemType::Int8:
      return fn(static_cast<const std::int8_t*>(nullptr));
    case ElemType::UInt8:
      return fn(static_cast<const std::uint8_t*>(nullptr));
    case ElemType::Float32:
      break;
  }
  return fn(static_cast<const float*>(nullptr));
}

// ---------------------------------------------------------------------------

struct Neighbor {
  double distance = 0.0;
  std::uint32_t id = 0;

  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
  }
  friend bool operator==(const Neighbor& a, const Neighbor& b) = default;
};

struct TopKResult {
  std::size_t k = 0;
  std::vector<std::uint32_t> ids;
  std::vector<double> distances;

  std::size_t size() const { return ids.size(); }
};

/// Sorts, drops repeated ids (keeping the closest), and keeps the best k.
TopKResult make_topk(std::vector<Neighbor> candidates, std::size_t k);

/// Bounded max-heap keeping the k best (distance, id) pairs seen so far.
class TopKCollector {
 public:
  explicit TopKCollector(std::size_t k) : k_(k) { heap_.reserve(k + 1); }

  bool full() const { return heap_.size() >= k_; }

  /// Worst retained entry; only meaningful when full().
  const Neighbor& worst() const { return heap_.front(); }

  bool accepts(const Neighbor& n) const { return !full() || n < worst(); }

  void push(const Neighbor& n) {
    if (k_ == 0) return;
    if (!full()) {
      heap_.push_back(n);
      std::push_heap(heap_.begin(), heap_.end());
    } else if (n < heap_.front()) {
      std::pop_heap(heap_.begin(), heap_.end());
      heap_.back() = n;
      std::push_heap(heap_.begin(), heap_.end());
    }
  }

  /// Ascending by (distance, id).
  std::vector<Neighbor> sorted() const {
    auto out = heap_;
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::size_t k_;
  std::vector<Neighbor> heap_;
};

/// Exact k nearest neighbors by a linear scan; ties go to the smaller id.
TopKResult brute_force_topk(const VectorDataset& ds, VectorView query,
                            std::size_t k, Metric metric);

/// |result ∩ truth| / k. Requires |truth| == k.
double recall(std::span<const std::uint32_t> result,
              std::span<const std::uint32_t> truth, std::size_t k);

}  // namespace tiervec
