#pragma once

#include <functional>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "degrade.hpp"
#include "metrics.hpp"
#include "net.hpp"

// Epoch loop: seeded shuffling, batched Adam updates on the combined loss,
// per-epoch validation on the tail 10% of the training patches, checkpoints
// at the best validation PSNR and at the end. Fully deterministic per seed;
// a saved train state resumes the exact trajectory.

namespace pgs {

struct TrainConfig {
    int epochs = 500;
    int batch_size = 15;
    double lr0 = 0.002;
    double lr_decay_factor = 0.05;  // the literal reading; 0.95 selects the gentler one
    int lr_decay_every = 100;
    double alpha = 0.01;  // SAM loss weight
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::uint64_t seed = 0;
};

double lr_at(int epoch, const TrainConfig& cfg);

struct TrainLogRow {
    int epoch = 0;
    double loss = 0.0;
    double lr = 0.0;
    double val_psnr = 0.0;  // NaN-free; 0 when there is no validation split
};

struct TrainResult {
    std::vector<TrainLogRow> rows;
    int best_epoch = -1;
    double best_psnr = -1.0;
    std::string best_path, final_path, state_path;
};

// Trains in place. Checkpoints land under out_dir as best.ckpt, final.ckpt
// and final.ckpt.state; pass resume to continue a previous run.
TrainResult train(Pgnet& net, const std::vector<PatchTriple>& patches, const TrainConfig& cfg,
                  const std::string& out_dir, const TrainState* resume = nullptr);

// Any full-resolution fusion routine; baselines and the network evaluate
// through the same path.
using Fuser = std::function<HyperCube(const HyperCube& lr, const PanImage& pan)>;

Fuser model_fuser(Pgnet& net);

// Fuses every patch, computes the five metrics against its truth, averages.
MetricsReport evaluate_fuser(const Fuser& fuse, const std::vector<PatchTriple>& patches, int ratio,
                             std::vector<MetricsReport>* per_patch = nullptr);

// Single-cube fusion through the network in eval mode.
HyperCube fuse_cube(Pgnet& net, const HyperCube& lr, const PanImage& pan);

}  // namespace pgs
