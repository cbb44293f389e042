#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tiervec {

/// Caller passed arguments that violate an operation's preconditions.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A file or serialized region does not match its documented layout.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what, std::uint64_t byte_offset = 0)
      : std::runtime_error(what + " (at byte " + std::to_string(byte_offset) +
                           ")"),
        byte_offset_(byte_offset) {}

  std::uint64_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::uint64_t byte_offset_;
};

/// A device read falls outside the storage region.
class BoundsError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// An exhaustive routine was asked to enumerate more than it is allowed to.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

}  // namespace tiervec
