#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>

#include "dhgat/tensor.hpp"

namespace dhgat::ad {

// Binary layout, little-endian:
//   "DHCK" | u32 version=1 | u64 config_hash | u64 seed | u32 count
//   count x ( u32 name_len | name bytes | u32 rows | u32 cols | rows*cols f64 row-major )
struct Checkpoint {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::map<std::string, Matrix> tensors;
};

void save_checkpoint(const std::filesystem::path& path, std::span<const Parameter* const> params,
                     std::uint64_t config_hash, std::uint64_t seed);

Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copy tensors into matching parameters by name. Missing names or shape mismatches throw.
void restore_parameters(const Checkpoint& checkpoint, std::span<Parameter* const> params);

}  // namespace dhgat::ad
