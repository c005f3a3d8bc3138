#pragma once

#include <string>

#include "mign/model.hpp"
#include "mign/snapshot.hpp"

namespace mign {

// Trained model container: hyperparameters, normalization statistics and
// every parameter tensor. Binary layout (little-endian) documented in
// docs/checkpoint-format.md; save/load round-trips are byte-exact.
struct Checkpoint {
  MignModel model;
  std::string variable;
  NormStats stats;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mign
