#pragma once

#include <cstdint>
#include <string>

#include "agn/param_store.hpp"

namespace agn {

// Binary layout: "AGN1", u64 config hash, then one record per entry in byte-wise
// name order: u32 path length, path bytes (UTF-8), u32 rank, u64 dims[rank],
// f64 values. All integers and values little-endian. Optimizer state, when
// included, is stored as extra entries under the "@adam." prefix.
struct Checkpoint {
  std::uint64_t config_hash = 0;
  ParamStore store;
};

void save_checkpoint(const std::string& path, const ParamStore& store, std::uint64_t config_hash,
                     bool with_optimizer);
Checkpoint load_checkpoint(const std::string& path);
// Loads into an existing store after checking the header hash; every stored
// model parameter must already be registered with the same shape.
void load_into(const std::string& path, ParamStore& store, std::uint64_t expected_hash);

}  // namespace agn
