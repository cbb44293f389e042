#pragma once

#include <cstdint>

#include "tiervec/core.hpp"

namespace tiervec {

/// Gaussian mixture: component centers uniform in [-center_range,
/// center_range]^dim, points center + N(0, spread^2) per coordinate. Data
/// vectors pick components uniformly. Queries pick components with Zipf
/// weights 1/(rank+1)^query_skew (0 = uniform) and sit query_spread from the
/// center. With spectrum_decay > 0, coordinate d of both centers and noise is
/// scaled by (d + 1)^-spectrum_decay, which lowers the intrinsic dimension
/// the way real embedding spectra do. Integer element types round and clamp.
struct SyntheticParams {
  std::size_t count = 10000;
  std::size_t dim = 64;
  std::size_t components = 64;
  double spread = 0.5;
  double center_range = 1.0;
  std::size_t n_queries = 1000;
  double query_spread = 0.5;
  double query_skew = 0.0;
  double spectrum_decay = 0.0;
  ElemType elem_type = ElemType::Float32;
  std::uint64_t seed = 7;
};

struct SyntheticData {
  VectorDataset base;
  VectorDataset queries;
};

SyntheticData make_synthetic(const SyntheticParams& params);

}  // namespace tiervec
