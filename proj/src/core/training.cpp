#include "training.hpp"

#include <cmath>
#include <filesystem>
#include <numeric>

#include "losses.hpp"
#include "optim.hpp"
#include "rng.hpp"

namespace pgs {

namespace {

Tensor pan_tensor(const PanImage& pan) {
    Tensor t = Tensor::zeros(Shape{1, 1, pan.height, pan.width});
    std::copy(pan.data.begin(), pan.data.end(), t.data->begin());
    return t;
}

Tensor stack_cubes(const std::vector<PatchTriple>& patches, const std::vector<int>& idx,
                   bool take_hr) {
    const HyperCube& first = take_hr ? patches[idx[0]].hr : patches[idx[0]].lr;
    const int n = static_cast<int>(idx.size());
    Tensor t = Tensor::zeros(Shape{n, first.bands, first.height, first.width});
    const std::size_t stride = first.data.size();
    for (int i = 0; i < n; ++i) {
        const HyperCube& c = take_hr ? patches[idx[i]].hr : patches[idx[i]].lr;
        std::copy(c.data.begin(), c.data.end(), t.data->begin() + i * stride);
    }
    return t;
}

Tensor stack_pans(const std::vector<PatchTriple>& patches, const std::vector<int>& idx) {
    const PanImage& first = patches[idx[0]].pan;
    const int n = static_cast<int>(idx.size());
    Tensor t = Tensor::zeros(Shape{n, 1, first.height, first.width});
    const std::size_t stride = first.data.size();
    for (int i = 0; i < n; ++i) {
        const PanImage& p = patches[idx[i]].pan;
        std::copy(p.data.begin(), p.data.end(), t.data->begin() + i * stride);
    }
    return t;
}

}  // namespace

double lr_at(int epoch, const TrainConfig& cfg) {
    require(epoch >= 0, "lr_at: epoch must be >= 0");
    return cfg.lr0 * std::pow(cfg.lr_decay_factor, static_cast<double>(epoch / cfg.lr_decay_every));
}

HyperCube fuse_cube(Pgnet& net, const HyperCube& lr, const PanImage& pan) {
    NoGradGuardT<float> off;
    Tensor out = net.forward(lr.to_tensor(), pan_tensor(pan), false);
    HyperCube cube = HyperCube::from_tensor(out);
    cube.wavelengths = lr.wavelengths;
    return cube;
}

Fuser model_fuser(Pgnet& net) {
    return [&net](const HyperCube& lr, const PanImage& pan) { return fuse_cube(net, lr, pan); };
}

MetricsReport evaluate_fuser(const Fuser& fuse, const std::vector<PatchTriple>& patches, int ratio,
                             std::vector<MetricsReport>* per_patch) {
    require(!patches.empty(), "evaluate: need at least one patch");
    MetricsReport mean;
    for (const PatchTriple& p : patches) {
        const HyperCube pred = fuse(p.lr, p.pan);
        const MetricsReport m = compute_metrics(pred, p.hr, ratio);
        if (per_patch) per_patch->push_back(m);
        mean.psnr += m.psnr;
        mean.ssim += m.ssim;
        mean.sam += m.sam;
        mean.ergas += m.ergas;
        mean.scc += m.scc;
    }
    const double n = static_cast<double>(patches.size());
    mean.psnr /= n;
    mean.ssim /= n;
    mean.sam /= n;
    mean.ergas /= n;
    mean.scc /= n;
    return mean;
}

TrainResult train(Pgnet& net, const std::vector<PatchTriple>& patches, const TrainConfig& cfg,
                  const std::string& out_dir, const TrainState* resume) {
    require(cfg.epochs >= 1, "train: epochs must be >= 1");
    require(cfg.batch_size >= 1, "train: batch size must be >= 1");
    require(cfg.lr0 > 0.0, "train: learning rate must be positive");
    require(cfg.alpha >= 0.0, "train: alpha must be >= 0");
    require(cfg.lr_decay_every >= 1, "train: decay interval must be >= 1");
    require(!patches.empty(), "train: need at least one training patch");

    std::filesystem::create_directories(out_dir);

    // Fixed-order tail split: the last 10% of patches validate checkpoint
    // selection and never receive gradient updates.
    const int val_count = static_cast<int>(patches.size()) / 10;
    const int train_count = static_cast<int>(patches.size()) - val_count;
    std::vector<PatchTriple> val_patches(patches.end() - val_count, patches.end());

    auto params = net.parameters();
    AdamT<float> adam;
    adam.beta1 = cfg.beta1;
    adam.beta2 = cfg.beta2;
    adam.eps = cfg.eps;

    Rng rng(cfg.seed);
    int start_epoch = 0;
    TrainResult result;
    result.best_path = out_dir + "/best.ckpt";
    result.final_path = out_dir + "/final.ckpt";
    result.state_path = out_dir + "/final.ckpt.state";

    if (resume) {
        start_epoch = resume->next_epoch;
        result.best_psnr = resume->best_psnr;
        rng.restore(resume->rng_state);
        adam.restore(resume->adam_steps, resume->m, resume->v);
        require(start_epoch <= cfg.epochs, "train: resume epoch " + std::to_string(start_epoch) +
                                               " is past the configured " +
                                               std::to_string(cfg.epochs));
    }

    std::vector<int> order(train_count);

    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at(epoch, cfg);
        // Re-seat the identity before shuffling so the epoch's permutation
        // depends only on the generator position, keeping resumed runs on
        // the uninterrupted trajectory.
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);

        double loss_sum = 0.0;
        int sample_count = 0;
        for (int begin = 0; begin < train_count; begin += cfg.batch_size) {
            const int end = std::min(begin + cfg.batch_size, train_count);
            std::vector<int> idx(order.begin() + begin, order.begin() + end);

            for (auto* p : params) p->zero_grad();
            Tensor pred = net.forward(stack_cubes(patches, idx, false), stack_pans(patches, idx),
                                      true);
            Tensor loss = ops::combined_loss(pred, stack_cubes(patches, idx, true),
                                             static_cast<float>(cfg.alpha));
            const double lv = loss.item();
            if (!std::isfinite(lv))
                throw NumericError("loss became non-finite at epoch " + std::to_string(epoch) +
                                   ", batch starting at sample " + std::to_string(begin));
            backward(loss);
            adam.step(params, lr);
            loss_sum += lv * static_cast<double>(idx.size());
            sample_count += static_cast<int>(idx.size());
        }

        TrainLogRow row;
        row.epoch = epoch;
        row.loss = loss_sum / std::max(sample_count, 1);
        row.lr = lr;

        if (val_count > 0) {
            double acc = 0.0;
            for (const PatchTriple& p : val_patches) acc += psnr(fuse_cube(net, p.lr, p.pan), p.hr);
            row.val_psnr = acc / val_count;
            if (row.val_psnr > result.best_psnr) {
                result.best_psnr = row.val_psnr;
                result.best_epoch = epoch;
                save_model(result.best_path, net);
            }
        }
        result.rows.push_back(row);
    }

    if (val_count == 0) {
        result.best_epoch = cfg.epochs - 1;
        save_model(result.best_path, net);
    }
    save_model(result.final_path, net);

    TrainState st;
    st.next_epoch = cfg.epochs;
    st.best_psnr = result.best_psnr;
    st.rng_state = rng.state();
    st.adam_steps = adam.steps();
    st.m = adam.moment1();
    st.v = adam.moment2();
    std::vector<std::string> names;
    for (auto* p : params) names.push_back(p->name());
    save_train_state(result.state_path, st, names);
    return result;
}

}  // namespace pgs
