#pragma once

#include <string>
#include <vector>

#include "net.hpp"

// Model checkpoints: magic, a JSON config block, then named little-endian
// 32-bit float blobs with shape headers (parameters and batch-norm running
// buffers). Round-trips are bit-exact. Training state (Adam moments, rng
// stream, epoch counters) lives in a sidecar so interrupted runs resume on
// the exact trajectory.

namespace pgs {

void save_model(const std::string& path, Pgnet& net);
Pgnet load_model(const std::string& path);

// Config (de)serialization shared with the pipeline layer.
std::string pgnet_config_json(const PgnetConfig& cfg);
PgnetConfig pgnet_config_from_json(const std::string& text);

struct TrainState {
    int next_epoch = 0;       // first epoch index the resumed run should execute
    double best_psnr = -1.0;  // best validation PSNR seen so far
    std::string rng_state;
    std::int64_t adam_steps = 0;
    std::vector<std::vector<double>> m, v;  // in parameters() order
};

void save_train_state(const std::string& path, const TrainState& st,
                      const std::vector<std::string>& param_names);
TrainState load_train_state(const std::string& path, const std::vector<std::string>& param_names);

}  // namespace pgs
