#pragma once

#include <string>
#include <vector>

#include "lmec/blocks.hpp"
#include "lmec/matrix.hpp"

namespace lmec {

// Flat binary parameter format: magic "LMEC", version u32, tensor count u32,
// shape table (u64 rows, u64 cols per tensor), then raw 64-bit little-endian
// floats per tensor in declaration order.
inline constexpr std::uint32_t kTensorFormatVersion = 1;

void save_tensors(const std::string& path, const std::vector<const Matrix*>& tensors);
std::vector<Matrix> load_tensors(const std::string& path);

void save_block(const std::string& path, const BlockParams& params);
// Shapes must match the target's current tensors exactly.
void load_block_into(const std::string& path, BlockParams& params);

}  // namespace lmec
