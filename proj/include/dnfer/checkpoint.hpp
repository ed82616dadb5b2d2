#pragma once

#include <optional>
#include <string>

#include "dnfer/adam.hpp"
#include "dnfer/mlp.hpp"

namespace dnfer {

// Versioned flat binary checkpoint. Layout (all integers and IEEE-754 doubles
// little-endian, no padding):
//
//   bytes 0..7   magic "DNFERCKP"
//   u32          format version (currently 1)
//   u32          flags, bit 0 = optimizer state present
//   u32          number of layer dims D
//   u32 * D      layer dims
//   per layer l: weight matrix row-major (dims[l+1]*dims[l] f64), bias (dims[l+1] f64)
//   if flag bit 0, appended optimizer state:
//     u64        step_count
//     f64 * 3    beta1, beta2, epsilon
//     per layer: m_weight, m_bias, v_weight, v_bias (same shapes as above)
struct Checkpoint {
  MlpModel model;
  std::optional<AdamState> opt_state;
};

void save_checkpoint(const std::string& path, const MlpModel& model,
                     const AdamState* opt_state = nullptr);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace dnfer
