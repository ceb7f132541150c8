#pragma once

#include <string>
#include <utility>
#include <vector>

#include "neon/tensor.hpp"

namespace neon {

// Flat binary checkpoint of named tensors, little-endian throughout:
//
//   magic   "NEONCKP1" (8 bytes)
//   version u32 (currently 1)
//   count   u32
//   per tensor:
//     name_len u32, name bytes (no terminator)
//     rank     u32, extents i64 * rank
//     payload  f64 * product(extents)
//
// Round-trips are bit-exact: payload bytes are the in-memory doubles.
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void save_checkpoint(const std::string& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::string& path);

}  // namespace neon
