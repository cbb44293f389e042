#include "tiervec/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace tiervec {

namespace {

void store(VectorDataset& ds, std::size_t row, const std::vector<double>& v) {
  visit_elem(ds.elem_type(), [&](auto tag) {
    using T = std::remove_cv_t<std::remove_pointer_t<decltype(tag)>>;
    auto out = ds.mutable_row<T>(row);
    for (std::size_t d = 0; d < v.size(); ++d) {
      if constexpr (std::is_integral_v<T>) {
        const double lo = std::numeric_limits<T>::min();
        const double hi = std::numeric_limits<T>::max();
        out[d] = static_cast<T>(std::clamp(std::round(v[d]), lo, hi));
      } else {
        out[d] = static_cast<T>(v[d]);
      }
    }
  });
}

}  // namespace

SyntheticData make_synthetic(const SyntheticParams& p) {
  if (p.dim == 0 || p.components == 0) {
    throw InvalidArgument("synthetic data needs dim and components >= 1");
  }
  if (!(p.spread >= 0) || !(p.query_spread >= 0) || !(p.query_skew >= 0)) {
    throw InvalidArgument("synthetic spreads and skew must be >= 0");
  }
  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> center(-p.center_range, p.center_range);
  std::normal_distribution<double> gauss(0.0, 1.0);

  if (!(p.spectrum_decay >= 0)) {
    throw InvalidArgument("spectrum_decay must be >= 0");
  }
  std::vector<double> scale(p.dim);
  for (std::size_t d = 0; d < p.dim; ++d) {
    scale[d] = std::pow(static_cast<double>(d + 1), -p.spectrum_decay);
  }
  std::vector<double> centers(p.components * p.dim);
  for (std::size_t i = 0; i < centers.size(); ++i) {
    centers[i] = center(rng) * scale[i % p.dim];
  }

  SyntheticData out{VectorDataset(p.elem_type, p.dim, p.count),
                    VectorDataset(p.elem_type, p.dim, p.n_queries)};
  std::vector<double> v(p.dim);
  std::uniform_int_distribution<std::size_t> pick(0, p.components - 1);
  for (std::size_t i = 0; i < p.count; ++i) {
    const double* c = centers.data() + pick(rng) * p.dim;
    for (std::size_t d = 0; d < p.dim; ++d) v[d] = c[d] + p.spread * scale[d] * gauss(rng);
    store(out.base, i, v);
  }

  std::vector<double> weights(p.components);
  for (std::size_t r = 0; r < p.components; ++r) {
    weights[r] = 1.0 / std::pow(static_cast<double>(r + 1), p.query_skew);
  }
  std::discrete_distribution<std::size_t> zipf(weights.begin(), weights.end());
  for (std::size_t q = 0; q < p.n_queries; ++q) {
    const double* c = centers.data() + zipf(rng) * p.dim;
    for (std::size_t d = 0; d < p.dim; ++d) {
      v[d] = c[d] + p.query_spread * scale[d] * gauss(rng);
    }
    store(out.queries, q, v);
  }
  return out;
}

}  // namespace tiervec
