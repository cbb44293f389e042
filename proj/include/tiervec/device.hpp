#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tiervec {

/// Simulated storage tier. Every read is charged in whole blocks.
///
/// The four built-in profiles are calibration anchors, not measurements:
///   ssd   block 4096 B, 5.3 GB/s, 70 us, 1.3 M IOPS (die collisions folded
///         into the IOPS cap, so 512 B random reads stay at 12.5% of peak)
///   rdma  block 64 B, 12.5 GB/s, 3 us, 0.5 us request overhead, 3.2 M IOPS
///         (small random reads are IOPS bound; 4 KB reads reach peak)
///   cxl   block 64 B, 16 GB/s, 300 ns, 150 M IOPS
///   nvm   block 256 B, 6 GB/s, 1 us, 25 M IOPS
/// Bandwidths of rdma/cxl/nvm are estimates; override them with a profile file.
struct DeviceProfile {
  std::string name;
  std::uint64_t block_bytes = 4096;
  double bandwidth_bytes_per_s = 1e9;
  double iops_cap = 1e6;
  double latency_s = 1e-6;
  double per_op_overhead_s = 1e-9;

  /// Throws InvalidArgument unless every numeric field is positive.
  void validate() const;
};

DeviceProfile ssd_profile();
DeviceProfile rdma_profile();
DeviceProfile cxl_profile();
DeviceProfile nvm_profile();
std::vector<DeviceProfile> builtin_profiles();
std::optional<DeviceProfile> builtin_profile(std::string_view name);

/// Parses `key=value` lines; `#` starts a comment. All six keys are required:
/// name, block_bytes, bandwidth_bytes_per_s, iops_cap, latency_s,
/// per_op_overhead_s.
DeviceProfile parse_profile(std::string_view text);
std::string format_profile(const DeviceProfile& profile);
DeviceProfile load_profile(const std::string& path);

/// A built-in name ("ssd", "rdma", "cxl", "nvm") or a profile file path.
DeviceProfile resolve_profile(const std::string& name_or_path);

/// Payloads under this size count as small random reads.
inline constexpr std::uint64_t kSmallReadBytes = 512;

struct IoStats {
  std::uint64_t ops = 0;
  std::uint64_t bytes_requested = 0;
  std::uint64_t bytes_charged = 0;
  std::uint64_t small_ops = 0;

  IoStats& operator+=(const IoStats& other) {
    ops += other.ops;
    bytes_requested += other.bytes_requested;
    bytes_charged += other.bytes_charged;
    small_ops += other.small_ops;
    return *this;
  }
  friend bool operator==(const IoStats&, const IoStats&) = default;
};

inline std::uint64_t charged_bytes(std::uint64_t len, std::uint64_t block) {
  return (len + block - 1) / block * block;
}

/// Read-only, byte-addressable image of a serialized index.
class StorageRegion {
 public:
  StorageRegion() = default;
  explicit StorageRegion(std::vector<std::byte> bytes)
      : bytes_(std::move(bytes)) {}

  std::uint64_t length() const { return bytes_.size(); }
  std::span<const std::byte> bytes() const { return bytes_; }

 private:
  std::vector<std::byte> bytes_;
};

class SimulatedDevice {
 public:
  explicit SimulatedDevice(DeviceProfile profile);

  const DeviceProfile& profile() const { return profile_; }

  /// Returns region bytes [offset, offset+len) and charges one operation.
  /// Throws BoundsError when the range leaves the region or len is zero.
  std::span<const std::byte> read(const StorageRegion& region,
                                  std::uint64_t offset, std::uint64_t len,
                                  IoStats& stats) const;

 private:
  DeviceProfile profile_;
};

/// Modeled wall time of the accounted reads with `inflight_depth` outstanding
/// requests: max(bytes_charged / bandwidth, ops / iops_cap,
/// ops * (latency + per_op_overhead) / inflight_depth).
double simulate_time(const IoStats& stats, const DeviceProfile& profile,
                     std::uint64_t inflight_depth);

/// Peak achievable payload bandwidth for reads of `payload` bytes.
/// Random reads: min(bandwidth * payload / charged(payload), iops_cap *
/// payload). Sequential streams coalesce into whole blocks and run at the
/// bandwidth limit.
double effective_bandwidth(const DeviceProfile& profile, std::uint64_t payload,
                           bool random = true);

/// Payload throughput (bytes/s) of a random-read stream where a fraction
/// `small_fraction` of the operations carry `small_payload` bytes and the rest
/// carry `large_payload` bytes, with `depth` requests outstanding.
double mixed_read_throughput(const DeviceProfile& profile,
                             double small_fraction,
                             std::uint64_t large_payload = 4096,
                             std::uint64_t small_payload = 128,
                             std::uint64_t depth = 1024);

}  // namespace tiervec
