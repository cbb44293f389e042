#include "tiervec/device.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "tiervec/errors.hpp"

namespace tiervec {

void DeviceProfile::validate() const {
  if (block_bytes == 0 || !(bandwidth_bytes_per_s > 0) || !(iops_cap > 0) ||
      !(latency_s > 0) || !(per_op_overhead_s > 0)) {
    throw InvalidArgument("device profile '" + name +
                          "': all numeric fields must be positive");
  }
}

DeviceProfile ssd_profile() {
  return {"ssd", 4096, 5.3e9, 1.3e6, 70e-6, 1e-9};
}

DeviceProfile rdma_profile() {
  return {"rdma", 64, 12.5e9, 3.2e6, 3e-6, 0.5e-6};
}

DeviceProfile cxl_profile() {
  return {"cxl", 64, 16e9, 150e6, 300e-9, 10e-9};
}

DeviceProfile nvm_profile() {
  return {"nvm", 256, 6e9, 25e6, 1e-6, 10e-9};
}

std::vector<DeviceProfile> builtin_profiles() {
  return {ssd_profile(), rdma_profile(), cxl_profile(), nvm_profile()};
}

std::optional<DeviceProfile> builtin_profile(std::string_view name) {
  for (auto& p : builtin_profiles()) {
    if (p.name == name) return p;
  }
  return std::nullopt;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

double parse_number(std::string_view key, std::string_view value,
                    std::uint64_t line) {
  // strtod handles exponents such as 5.3e9 uniformly across libstdc++ versions.
  std::string copy(value);
  char* end = nullptr;
  const double v = std::strtod(copy.c_str(), &end);
  if (copy.empty() || end != copy.c_str() + copy.size() || !std::isfinite(v)) {
    throw FormatError("profile key '" + std::string(key) +
                          "' has a non-numeric value '" + copy + "'",
                      line);
  }
  return v;
}

}  // namespace

DeviceProfile parse_profile(std::string_view text) {
  std::map<std::string, std::pair<std::string, std::uint64_t>, std::less<>>
      kv;
  std::uint64_t offset = 0;
  while (offset < text.size()) {
    auto nl = text.find('\n', offset);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(offset, nl - offset);
    const std::uint64_t line_start = offset;
    offset = nl + 1;
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw FormatError("profile line without '='", line_start);
    }
    auto key = std::string(trim(line.substr(0, eq)));
    auto value = std::string(trim(line.substr(eq + 1)));
    kv[key] = {value, line_start};
  }

  static constexpr std::string_view kKeys[] = {
      "name",     "block_bytes", "bandwidth_bytes_per_s",
      "iops_cap", "latency_s",   "per_op_overhead_s"};
  for (auto key : kKeys) {
    if (kv.find(key) == kv.end()) {
      throw FormatError("profile is missing key '" + std::string(key) + "'",
                        text.size());
    }
  }
  for (const auto& [key, value] : kv) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      throw FormatError("profile has unknown key '" + key + "'", value.second);
    }
  }

  auto num = [&](std::string_view key) {
    const auto& [value, line] = kv.find(key)->second;
    return parse_number(key, value, line);
  };
  DeviceProfile p;
  p.name = kv.find("name")->second.first;
  const double block = num("block_bytes");
  if (block < 1 || block != std::floor(block)) {
    throw FormatError("block_bytes must be a positive integer",
                      kv.find("block_bytes")->second.second);
  }
  p.block_bytes = static_cast<std::uint64_t>(block);
  p.bandwidth_bytes_per_s = num("bandwidth_bytes_per_s");
  p.iops_cap = num("iops_cap");
  p.latency_s = num("latency_s");
  p.per_op_overhead_s = num("per_op_overhead_s");
  p.validate();
  return p;
}

std::string format_profile(const DeviceProfile& p) {
  std::ostringstream out;
  out.precision(17);
  out << "name=" << p.name << '\n'
      << "block_bytes=" << p.block_bytes << '\n'
      << "bandwidth_bytes_per_s=" << p.bandwidth_bytes_per_s << '\n'
      << "iops_cap=" << p.iops_cap << '\n'
      << "latency_s=" << p.latency_s << '\n'
      << "per_op_overhead_s=" << p.per_op_overhead_s << '\n';
  return out.str();
}

DeviceProfile load_profile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open profile file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_profile(buf.str());
}

DeviceProfile resolve_profile(const std::string& name_or_path) {
  if (auto p = builtin_profile(name_or_path)) return *p;
  return load_profile(name_or_path);
}

SimulatedDevice::SimulatedDevice(DeviceProfile profile)
    : profile_(std::move(profile)) {
  profile_.validate();
}

std::span<const std::byte> SimulatedDevice::read(const StorageRegion& region,
                                                 std::uint64_t offset,
                                                 std::uint64_t len,
                                                 IoStats& stats) const {
  if (len == 0) throw BoundsError("device read of zero bytes");
  if (offset > region.length() || len > region.length() - offset) {
    throw BoundsError("device read [" + std::to_string(offset) + ", +" +
                      std::to_string(len) + ") exceeds region of " +
                      std::to_string(region.length()) + " bytes");
  }
  stats.ops += 1;
  stats.bytes_requested += len;
  stats.bytes_charged += charged_bytes(len, profile_.block_bytes);
  if (len < kSmallReadBytes) stats.small_ops += 1;
  return region.bytes().subspan(offset, len);
}

double simulate_time(const IoStats& stats, const DeviceProfile& profile,
                     std::uint64_t inflight_depth) {
  if (inflight_depth == 0) throw InvalidArgument("inflight_depth must be >= 1");
  const double ops = static_cast<double>(stats.ops);
  const double transfer =
      static_cast<double>(stats.bytes_charged) / profile.bandwidth_bytes_per_s;
  const double issue = ops / profile.iops_cap;
  const double wait = ops * (profile.latency_s + profile.per_op_overhead_s) /
                      static_cast<double>(inflight_depth);
  return std::max({transfer, issue, wait});
}

double effective_bandwidth(const DeviceProfile& profile, std::uint64_t payload,
                           bool random) {
  if (payload == 0) throw InvalidArgument("payload must be positive");
  if (!random) return profile.bandwidth_bytes_per_s;
  const double p = static_cast<double>(payload);
  const double by_blocks =
      profile.bandwidth_bytes_per_s * p /
      static_cast<double>(charged_bytes(payload, profile.block_bytes));
  return std::min(by_blocks, profile.iops_cap * p);
}

double mixed_read_throughput(const DeviceProfile& profile,
                             double small_fraction,
                             std::uint64_t large_payload,
                             std::uint64_t small_payload, std::uint64_t depth) {
  if (small_fraction < 0 || small_fraction > 1) {
    throw InvalidArgument("small_fraction must lie in [0, 1]");
  }
  // Per-operation averages keep the result independent of a stream length.
  constexpr double kOps = 1'000'000.0;
  const double small_ops = kOps * small_fraction;
  const double large_ops = kOps - small_ops;
  IoStats stats;
  stats.ops = static_cast<std::uint64_t>(kOps);
  const double payload = large_ops * static_cast<double>(large_payload) +
                         small_ops * static_cast<double>(small_payload);
  stats.bytes_requested = static_cast<std::uint64_t>(payload);
  stats.bytes_charged = static_cast<std::uint64_t>(
      large_ops *
          static_cast<double>(charged_bytes(large_payload, profile.block_bytes)) +
      small_ops *
          static_cast<double>(charged_bytes(small_payload, profile.block_bytes)));
  return payload / simulate_time(stats, profile, depth);
}

}  // namespace tiervec
