#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fusevid/tensor.hpp"

namespace fusevid {

// Binary tensor file layout (all integers little-endian):
//
//   bytes 0..3   magic "MTF1"
//   byte  4      dtype code: 0 = f32, 1 = f64
//   byte  5      rank r
//   bytes 6..7   reserved, must be zero
//   next r*8     extents, u64 each
//   rest         row-major payload, 4 or 8 bytes per element
//
// No trailing bytes are allowed. Reads and writes round-trip bit-exactly.

std::vector<std::uint8_t> tensor_to_bytes(const Tensor& t);
Tensor tensor_from_bytes(std::span<const std::uint8_t> bytes);

void write_tensor(const std::string& path, const Tensor& t);
Tensor read_tensor(const std::string& path);

}  // namespace fusevid
