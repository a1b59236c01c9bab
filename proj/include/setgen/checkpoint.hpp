#pragma once

#include <string>

#include "setgen/core.hpp"
#include "setgen/models.hpp"

namespace setgen {

// A parametric model plus the training-size statistics generation needs for
// the size-bias trick. Tabular models are not serializable.
struct Checkpoint {
  SetModel model;
  SizeDistribution train_sizes;  // empty when the checkpoint records none
  long long train_count = 0;
};

void save_checkpoint(const std::string& path, const SetModel& m,
                     const SizeDistribution* train_sizes = nullptr,
                     long long train_count = 0);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace setgen
