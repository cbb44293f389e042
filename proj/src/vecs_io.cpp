#include "tiervec/vecs_io.hpp"

#include <fstream>
#include <iterator>

#include "tiervec/bytes.hpp"

namespace tiervec {

namespace {

std::vector<std::byte> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path);
  std::vector<char> raw((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  std::vector<std::byte> out(raw.size());
  std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

// Walks the records and returns (d, count); values must be elem bytes wide.
template <class Fn>
void for_each_record(std::span<const std::byte> file, std::size_t elem,
                     Fn&& fn) {
  std::size_t at = 0;
  std::int32_t first_d = -1;
  while (at < file.size()) {
    if (file.size() - at < 4) throw FormatError("truncated record header", at);
    const auto d = bytes::get<std::int32_t>(file, at);
    if (d <= 0) throw FormatError("record dimension must be positive", at);
    if (first_d < 0) first_d = d;
    if (d != first_d) throw FormatError("inconsistent record dimension", at);
    const std::size_t body = static_cast<std::size_t>(d) * elem;
    if (file.size() - at - 4 < body) throw FormatError("truncated record", at);
    fn(static_cast<std::size_t>(d), file.subspan(at + 4, body));
    at += 4 + body;
  }
}

VectorDataset read_dataset(const std::string& path, ElemType type) {
  const auto file = slurp(path);
  const std::size_t elem = elem_size(type);
  std::size_t dim = 0;
  std::size_t count = 0;
  for_each_record(file, elem, [&](std::size_t d, auto) {
    dim = d;
    ++count;
  });
  if (count == 0) return VectorDataset(type, 1, 0);
  VectorDataset ds(type, dim, count);
  std::size_t row = 0;
  auto out = ds.mutable_bytes();
  for_each_record(file, elem, [&](std::size_t, std::span<const std::byte> b) {
    std::memcpy(out.data() + row * b.size(), b.data(), b.size());
    ++row;
  });
  return ds;
}

void write_dataset(const std::string& path, const VectorDataset& ds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("cannot open for writing: " + path);
  for (std::size_t i = 0; i < ds.count(); ++i) {
    bytes::write<std::int32_t>(out, static_cast<std::int32_t>(ds.dim()));
    bytes::write_bytes(out, ds[i].bytes());
  }
  if (!out) throw InvalidArgument("write failed: " + path);
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

VectorDataset read_fvecs(const std::string& path) {
  return read_dataset(path, ElemType::Float32);
}

VectorDataset read_bvecs(const std::string& path) {
  return read_dataset(path, ElemType::UInt8);
}

VectorDataset read_i8vecs(const std::string& path) {
  return read_dataset(path, ElemType::Int8);
}

std::vector<std::vector<std::int32_t>> read_ivecs(const std::string& path) {
  const auto file = slurp(path);
  std::vector<std::vector<std::int32_t>> rows;
  for_each_record(file, 4, [&](std::size_t d, std::span<const std::byte> b) {
    std::vector<std::int32_t> row(d);
    std::memcpy(row.data(), b.data(), b.size());
    rows.push_back(std::move(row));
  });
  return rows;
}

VectorDataset read_vectors(const std::string& path) {
  if (ends_with(path, ".bvecs")) return read_bvecs(path);
  if (ends_with(path, ".i8vecs")) return read_i8vecs(path);
  return read_fvecs(path);
}

void write_fvecs(const std::string& path, const VectorDataset& ds) {
  if (ds.elem_type() != ElemType::Float32) {
    throw InvalidArgument("fvecs needs float32 data");
  }
  write_dataset(path, ds);
}

void write_bvecs(const std::string& path, const VectorDataset& ds) {
  if (ds.elem_type() != ElemType::UInt8) {
    throw InvalidArgument("bvecs needs uint8 data");
  }
  write_dataset(path, ds);
}

void write_vectors(const std::string& path, const VectorDataset& ds) {
  write_dataset(path, ds);
}

void write_ivecs(const std::string& path,
                 const std::vector<std::vector<std::int32_t>>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("cannot open for writing: " + path);
  for (const auto& row : rows) {
    if (row.empty()) throw InvalidArgument("ivecs rows must be non-empty");
    bytes::write<std::int32_t>(out, static_cast<std::int32_t>(row.size()));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * 4));
  }
  if (!out) throw InvalidArgument("write failed: " + path);
}

}  // namespace tiervec
