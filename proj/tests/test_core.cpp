#include <algorithm>
#include <numeric>

#include "catch_amalgamated.hpp"
#include "test_util.hpp"
#include "tiervec/core.hpp"

using namespace tiervec;
using Catch::Approx;

namespace {

// Plain loop references kept deliberately naive.
double scalar_l2(VectorView a, VectorView b) {
  const auto x = a.to_floats();
  const auto y = b.to_floats();
  long double acc = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double d = static_cast<long double>(x[i]) - y[i];
    acc += d * d;
  }
  return static_cast<double>(acc);
}

double scalar_ip(VectorView a, VectorView b) {
  const auto x = a.to_floats();
  const auto y = b.to_floats();
  long double acc = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    acc += static_cast<long double>(x[i]) * y[i];
  }
  return -static_cast<double>(acc);
}

std::vector<std::uint32_t> naive_topk(const VectorDataset& ds, VectorView q,
                                      std::size_t k) {
  std::vector<std::pair<double, std::uint32_t>> all;
  for (std::uint32_t i = 0; i < ds.count(); ++i) {
    all.push_back({scalar_l2(ds[i], q), i});
  }
  std::sort(all.begin(), all.end());
  std::vector<std::uint32_t> ids;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) {
    ids.push_back(all[i].second);
  }
  return ids;
}

}  // namespace

TEST_CASE("l2 of a 3-4-5 triangle is 25") {
  const std::vector<float> a{0, 0}, b{3, 4};
  CHECK(distance(VectorView::of<float>(a), VectorView::of<float>(b),
                 Metric::L2Squared) == 25.0);
}

TEST_CASE("l2 of a vector with itself is zero") {
  const auto ds = testing::random_floats(20, 17, 3);
  for (std::size_t i = 0; i < ds.count(); ++i) {
    CHECK(distance(ds[i], ds[i], Metric::L2Squared) == 0.0);
  }
}

TEST_CASE("int8 extremes are widened before subtraction") {
  const std::vector<std::int8_t> a{-128, -128}, b{127, 127};
  const double expected = 2.0 * 255 * 255;
  CHECK(distance(VectorView::of<std::int8_t>(a), VectorView::of<std::int8_t>(b),
                 Metric::L2Squared) == expected);
  CHECK(expected == 130050.0);
}

TEST_CASE("inner product distance is the negated dot product") {
  const std::vector<float> a{1, 2, 3}, b{4, -5, 6};
  CHECK(distance(VectorView::of<float>(a), VectorView::of<float>(b),
                 Metric::InnerProduct) == -(4.0 - 10.0 + 18.0));
}

TEST_CASE("distance rejects mismatched shapes") {
  const std::vector<float> a{1, 2}, b{1, 2, 3};
  CHECK_THROWS_AS(distance(VectorView::of<float>(a), VectorView::of<float>(b),
                           Metric::L2Squared),
                  InvalidArgument);
  const std::vector<std::uint8_t> c{1, 2};
  CHECK_THROWS_AS(distance(VectorView::of<float>(a),
                           VectorView::of<std::uint8_t>(c), Metric::L2Squared),
                  InvalidArgument);
}

TEST_CASE("integer kernels match the scalar reference exactly") {
  for (std::size_t dim : {1u, 7u, 8u, 9u, 64u, 100u, 129u}) {
    const auto s8 = testing::random_ints<std::int8_t>(30, dim, dim);
    const auto u8 = testing::random_ints<std::uint8_t>(30, dim, dim + 1);
    for (std::size_t i = 0; i + 1 < 30; ++i) {
      CHECK(distance(s8[i], s8[i + 1], Metric::L2Squared) ==
            scalar_l2(s8[i], s8[i + 1]));
      CHECK(distance(u8[i], u8[i + 1], Metric::L2Squared) ==
            scalar_l2(u8[i], u8[i + 1]));
      CHECK(distance(s8[i], s8[i + 1], Metric::InnerProduct) ==
            scalar_ip(s8[i], s8[i + 1]));
      CHECK(distance(u8[i], u8[i + 1], Metric::InnerProduct) ==
            scalar_ip(u8[i], u8[i + 1]));
    }
  }
}

TEST_CASE("float kernels match the scalar reference within 1e-5 relative") {
  for (std::size_t dim : {1u, 5u, 16u, 64u, 300u}) {
    const auto ds = testing::random_floats(40, dim, 100 + dim, -10, 10);
    for (std::size_t i = 0; i + 1 < ds.count(); ++i) {
      const double l2 = distance(ds[i], ds[i + 1], Metric::L2Squared);
      CHECK(l2 == Approx(scalar_l2(ds[i], ds[i + 1])).epsilon(1e-5));
      const double ip = distance(ds[i], ds[i + 1], Metric::InnerProduct);
      CHECK(ip == Approx(scalar_ip(ds[i], ds[i + 1])).epsilon(1e-5).margin(1e-9));
    }
  }
}

TEST_CASE("l2 is symmetric and non-negative") {
  const auto ds = testing::random_floats(50, 13, 9);
  for (std::size_t i = 0; i < ds.count(); ++i) {
    for (std::size_t j = 0; j < ds.count(); ++j) {
      const double d = distance(ds[i], ds[j], Metric::L2Squared);
      CHECK(d >= 0);
      CHECK(d == distance(ds[j], ds[i], Metric::L2Squared));
    }
  }
}

TEST_CASE("brute force on a 1-dim line") {
  const auto ds = testing::line_1d({0, 5, 9});
  const std::vector<float> q{4};
  const auto r = brute_force_topk(ds, VectorView::of<float>(q), 2,
                                  Metric::L2Squared);
  CHECK(r.ids == std::vector<std::uint32_t>{1, 0});
  CHECK(r.distances == std::vector<double>{1, 16});
}

TEST_CASE("brute force returns everything when k exceeds count") {
  const auto ds = testing::line_1d({0, 5, 9});
  const std::vector<float> q{4};
  CHECK(brute_force_topk(ds, VectorView::of<float>(q), 10, Metric::L2Squared)
            .size() == 3);
}

TEST_CASE("brute force breaks ties toward the smaller id") {
  const auto ds = testing::line_1d({2, 6, 2, 6});
  const std::vector<float> q{4};
  const auto r = brute_force_topk(ds, VectorView::of<float>(q), 4,
                                  Metric::L2Squared);
  CHECK(r.ids == std::vector<std::uint32_t>{0, 1, 2, 3});
}

TEST_CASE("brute force on an empty dataset is empty and k = 0 is rejected") {
  const VectorDataset empty(ElemType::Float32, 2, 0);
  const std::vector<float> q{1, 2};
  CHECK(brute_force_topk(empty, VectorView::of<float>(q), 3, Metric::L2Squared)
            .size() == 0);
  const auto ds = testing::line_1d({1});
  const std::vector<float> q1{1};
  CHECK_THROWS_AS(
      brute_force_topk(ds, VectorView::of<float>(q1), 0, Metric::L2Squared),
      InvalidArgument);
}

TEST_CASE("brute force equals an independent double loop") {
  const auto ds = testing::random_floats(200, 8, 42);
  const auto qs = testing::random_floats(25, 8, 43);
  for (std::size_t q = 0; q < qs.count(); ++q) {
    const auto r = brute_force_topk(ds, qs[q], 10, Metric::L2Squared);
    CHECK(r.ids == naive_topk(ds, qs[q], 10));
  }
}

TEST_CASE("k = count yields a distance-sorted permutation of all ids") {
  const auto ds = testing::random_ints<std::uint8_t>(64, 5, 77);
  const auto qs = testing::random_ints<std::uint8_t>(5, 5, 78);
  for (std::size_t q = 0; q < qs.count(); ++q) {
    const auto r = brute_force_topk(ds, qs[q], ds.count(), Metric::L2Squared);
    auto ids = r.ids;
    std::sort(ids.begin(), ids.end());
    std::vector<std::uint32_t> all(ds.count());
    std::iota(all.begin(), all.end(), 0u);
    CHECK(ids == all);
    CHECK(std::is_sorted(r.distances.begin(), r.distances.end()));
  }
}

TEST_CASE("recall counts the overlap with the truth") {
  const std::vector<std::uint32_t> result{1, 2, 3}, truth{1, 2, 4};
  CHECK(recall(result, truth, 3) == Approx(2.0 / 3.0));
  CHECK(recall(truth, truth, 3) == 1.0);
  const std::vector<std::uint32_t> other{7, 8, 9};
  CHECK(recall(other, truth, 3) == 0.0);
  CHECK_THROWS_AS(recall(result, truth, 2), InvalidArgument);
}

TEST_CASE("recall of the oracle against itself is one") {
  const auto ds = testing::random_floats(100, 4, 5);
  const auto qs = testing::random_floats(10, 4, 6);
  for (std::size_t q = 0; q < qs.count(); ++q) {
    const auto t = brute_force_topk(ds, qs[q], 10, Metric::L2Squared);
    const auto r = brute_force_topk(ds, qs[q], 10, Metric::L2Squared);
    CHECK(recall(r.ids, t.ids, 10) == 1.0);
  }
}

TEST_CASE("make_topk sorts, deduplicates and truncates") {
  const auto r = make_topk({{3, 7}, {1, 2}, {1, 1}, {0.5, 7}, {2, 2}}, 3);
  CHECK(r.ids == std::vector<std::uint32_t>{7, 1, 2});
  CHECK(r.distances == std::vector<double>{0.5, 1, 1});
}

TEST_CASE("dataset storage is contiguous and row-major") {
  const std::vector<std::uint8_t> v{1, 2, 3, 4, 5, 6};
  const auto ds = VectorDataset::from_values<std::uint8_t>(3, v);
  CHECK(ds.count() == 2);
  CHECK(ds.size_bytes() == ds.count() * ds.dim());
  CHECK(ds.row<std::uint8_t>(1)[0] == 4);
  CHECK_THROWS_AS(VectorDataset::from_values<std::uint8_t>(4, v),
                  InvalidArgument);
  CHECK_THROWS_AS(VectorDataset(ElemType::Int8, 0, 1), InvalidArgument);
  auto sl = ds.slice(1, 1);
  CHECK(sl.row<std::uint8_t>(0)[2] == 6);
}
