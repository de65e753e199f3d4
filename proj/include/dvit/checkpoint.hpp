#pragma once

#include <string>

#include "dvit/cascade.hpp"
#include "dvit/optim.hpp"

namespace dvit {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainState {
  CascadeParams model;
  Adam adam;
  int64_t step = 0;
  int64_t epoch = 0;

  static TrainState fresh(const CascadeConfig& cfg) {
    TrainState s;
    s.model = CascadeParams::create(cfg);
    return s;
  }
};

// Binary checkpoint: magic, version, config hash + embedded config text,
// counters, then a tensor table (name, dtype, shape, offset) and raw f64
// payloads. Round-trips parameters and Adam moments bitwise.
void checkpoint_save(TrainState& state, const std::string& path);
TrainState checkpoint_load(const std::string& path);

}  // namespace dvit
