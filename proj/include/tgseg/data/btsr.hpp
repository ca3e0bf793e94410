#pragma once

// BTSR tensor container: magic "BTSR", version byte 1, u32 little-endian
// rank, rank u32 little-endian extents, then raw float32 little-endian
// payload in row-major order. Round-trips are bit-exact.

#include <filesystem>
#include <stdexcept>
#include <string>

#include "tgseg/ad/tensor.hpp"

namespace tgseg::data {

enum class IoErrorKind {
  open_failed,
  bad_magic,
  bad_version,
  extent_overflow,
  truncated,
  trailing_data,
};

class IoError : public std::runtime_error {
 public:
  IoError(IoErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  IoErrorKind kind() const { return kind_; }

 private:
  IoErrorKind kind_;
};

void write_tensor_file(const ad::TensorF& t, const std::filesystem::path& path);
ad::TensorF read_tensor_file(const std::filesystem::path& path);

}  // namespace tgseg::data
