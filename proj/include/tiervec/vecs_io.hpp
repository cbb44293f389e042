#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tiervec/core.hpp"

namespace tiervec {

/// Records are [int32 d][d values]; fvecs holds float32, bvecs uint8, ivecs
/// int32. Every record in a file must share d. Malformed input raises
/// FormatError with the byte offset of the offending record.
VectorDataset read_fvecs(const std::string& path);
VectorDataset read_bvecs(const std::string& path);
std::vector<std::vector<std::int32_t>> read_ivecs(const std::string& path);

/// Picks fvecs or bvecs from the file extension.
VectorDataset read_vectors(const std::string& path);

void write_fvecs(const std::string& path, const VectorDataset& ds);
void write_bvecs(const std::string& path, const VectorDataset& ds);
void write_ivecs(const std::string& path,
                 const std::vector<std::vector<std::int32_t>>& rows);

/// Picks the format from the element type: float32 -> fvecs, uint8 -> bvecs.
/// int8 data is written as a bvecs-shaped file with signed bytes, which
/// read_vectors recognizes by the ".i8vecs" extension.
void write_vectors(const std::string& path, const VectorDataset& ds);
VectorDataset read_i8vecs(const std::string& path);

}  // namespace tiervec
