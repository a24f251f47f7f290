#pragma once

// Parameter checkpoint container.
//
// Layout (all header lines end in '\n'):
//
//   dnl-checkpoint 1
//   tensors <count>
//   <name> <rank> <dim_0> ... <dim_{rank-1}> <byte_offset>     (count lines)
//   payload <byte_count>
//   <raw payload>
//
// Names contain no whitespace. Offsets are relative to the first payload
// byte. The payload holds each tensor as little-endian IEEE-754 binary64,
// row-major, in manifest order with no gaps. Tensors are listed in name
// order, so saving the same set twice produces identical bytes.

#include <filesystem>
#include <map>
#include <string>

#include "dnl/tensor.hpp"

namespace dnl {

using TensorMap = std::map<std::string, Tensor>;

void save_checkpoint(const std::filesystem::path& path, const TensorMap& tensors);
TensorMap load_checkpoint(const std::filesystem::path& path);

/// Little-endian float64 codec shared with other binary writers.
void append_f64_le(std::string& out, double v);
double read_f64_le(const unsigned char* bytes);

}  // namespace dnl
