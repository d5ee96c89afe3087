#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "pdenetpp/tensor.hpp"

namespace pdenetpp::pdnx {

/// Malformed or unreadable PDNX data.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kVersion = 1;

/// Binary layout: "PDNX1\0", u32 version, u32 ndims, u64 dims[ndims],
/// little-endian f64 payload in row-major order, u64 payload byte length.
std::vector<unsigned char> encode(const Tensor& tensor);
Tensor decode(const std::vector<unsigned char>& bytes);

/// Writes through a temporary file in the same directory and renames it.
void write(const std::filesystem::path& path, const Tensor& tensor);
Tensor read(const std::filesystem::path& path);

/// Atomic write of arbitrary bytes or text (temp file + rename).
void write_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace pdenetpp::pdnx
