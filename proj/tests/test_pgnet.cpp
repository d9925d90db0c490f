#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <string>

#include "core/losses.hpp"
#include "core/net.hpp"
#include "fd_check.hpp"

using namespace pgs;
using fd::DParam;
using fd::DTensor;

namespace {

PgnetConfig tiny_config(int ratio, std::uint64_t seed = 5) {
    PgnetConfig cfg;
    cfg.bands = 5;
    cfg.endmembers = 3;
    cfg.sab_count = 2;
    cfg.pan_mid_channels = 4;
    cfg.decoder_mid_channels = 4;
    cfg.ratio = ratio;
    cfg.seed = seed;
    return cfg;
}

Tensor random_f(Shape s, Rng& rng, double lo = 0.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(s);
    for (auto& v : *t.data) v = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

// Mean over the band axis: [n,b,h,w] -> [n,1,h,w].
Tensor band_mean(const Tensor& x) {
    const int n = x.shape[0], b = x.shape[1], hw = x.shape[2] * x.shape[3];
    Tensor out = Tensor::zeros(Shape{n, 1, x.shape[2], x.shape[3]});
    for (int i = 0; i < n; ++i)
        for (int p = 0; p < hw; ++p) {
            double acc = 0.0;
            for (int c = 0; c < b; ++c) acc += x.data->at((i * b + c) * hw + p);
            out.data->at(i * hw + p) = static_cast<float>(acc / b);
        }
    return out;
}

void set_param(Pgnet& net, const std::string& name, float v) {
    for (auto* p : net.parameters())
        if (p->name() == name) {
            std::fill(p->value.data->begin(), p->value.data->end(), v);
            return;
        }
    FAIL("no parameter named " << name);
}

}  // namespace

TEST_CASE("forward produces the fused shape for every supported ratio") {
    for (int ratio : {4, 8, 12, 16}) {
        Pgnet net(tiny_config(ratio));
        Rng rng(ratio);
        Tensor lr = random_f(Shape{1, 5, 2, 2}, rng);
        Tensor pan = random_f(Shape{1, 1, 2 * ratio, 2 * ratio}, rng);
        NoGradGuardT<float> off;
        Tensor out = net.forward(lr, pan, false);
        CHECK(out.shape == Shape{1, 5, 2 * ratio, 2 * ratio});
        check_finite(out, "pgnet forward");
    }
}

TEST_CASE("stage factorizations follow the ratio") {
    CHECK(default_stage_factors(4) == std::vector<int>{4});
    CHECK(default_stage_factors(8) == std::vector<int>{4, 2});
    CHECK(default_stage_factors(12) == std::vector<int>{4, 3});
    CHECK(default_stage_factors(16) == std::vector<int>{4, 4});
    CHECK(default_stage_factors(32) == std::vector<int>{4, 4, 2});
    CHECK_THROWS_AS(default_stage_factors(10), ConfigError);

    PgnetConfig bad = tiny_config(8);
    bad.stage_factors = {4, 4};  // product 16 != ratio 8
    CHECK_THROWS_AS(Pgnet{bad}, ConfigError);
    bad.stage_factors = {8};
    CHECK_THROWS_AS(Pgnet{bad}, ConfigError);

    PgnetConfig cfg = tiny_config(8);
    cfg.stage_factors = {2, 2, 2};
    Pgnet net(cfg);
    CHECK(net.stage_factors() == std::vector<int>{2, 2, 2});
}

TEST_CASE("default configuration stays under the parameter budget") {
    Pgnet net{PgnetConfig{}};
    // 128 bands, 20 endmembers, 4 SABs, 32 PAN channels, 64 decoder
    // channels, ratio 16: counted by hand layer by layer.
    CHECK(net.param_count() == 52474);
    CHECK(net.param_count() <= 100000);

    std::int64_t encoder = 0;
    for (auto* p : net.parameters())
        if (p->name().rfind("encoder.", 0) == 0) encoder += p->numel();
    CHECK(encoder == 2620);
}

TEST_CASE("parameter count grows with endmember count") {
    PgnetConfig base;
    PgnetConfig wide;
    wide.endmembers = 40;
    Pgnet a{base}, b{wide};
    CHECK(b.param_count() > a.param_count());
}

TEST_CASE("parameters and buffers are registered exactly once") {
    Pgnet net{PgnetConfig{}};
    auto params = net.parameters();
    std::set<std::string> names;
    std::set<const void*> ptrs;
    for (auto* p : params) {
        names.insert(p->name());
        ptrs.insert(p);
    }
    CHECK(names.size() == params.size());
    CHECK(ptrs.size() == params.size());

    auto bufs = net.buffers();
    std::set<std::string> bnames;
    for (auto& b : bufs) bnames.insert(b.name);
    CHECK(bnames.size() == bufs.size());
    // encoder + 2 stages x {up, pan0, pan1} + 4 SABs x {mul, out} + agg +
    // 2 decoder nets = 18 single-nets, two running buffers each.
    CHECK(bufs.size() == 36);
}

TEST_CASE("zeroing the aggregation gate reduces the network to its bicubic residual") {
    Pgnet net(tiny_config(4));
    set_param(net, "agg.bn.gamma", 0.0f);
    Rng rng(2);
    Tensor lr = random_f(Shape{1, 5, 3, 3}, rng);
    Tensor pan = random_f(Shape{1, 1, 12, 12}, rng);

    NoGradGuardT<float> off;
    Tensor out = net.forward(lr, pan, false);
    Tensor expected = net.decode(ops::bicubic_resize(net.encode(lr, false), 4.0), false);
    CHECK(*out.data == *expected.data);
}

TEST_CASE("zeroing every attention output yields the same residual path") {
    Pgnet net(tiny_config(4));
    set_param(net, "sab0.out.bn.gamma", 0.0f);
    set_param(net, "sab1.out.bn.gamma", 0.0f);
    Rng rng(2);
    Tensor lr = random_f(Shape{1, 5, 3, 3}, rng);
    Tensor pan = random_f(Shape{1, 1, 12, 12}, rng);

    // With zero attention outputs the aggregation conv sees zeros, its
    // freshly initialized batch norm maps zero to zero in eval mode, and
    // only the bicubic residual reaches the decoder.
    NoGradGuardT<float> off;
    Tensor out = net.forward(lr, pan, false);
    Tensor expected = net.decode(ops::bicubic_resize(net.encode(lr, false), 4.0), false);
    CHECK(*out.data == *expected.data);
}

TEST_CASE("intermediate taps expose the abundance pipeline") {
    PgnetConfig cfg = tiny_config(8);
    Pgnet net(cfg);
    Rng rng(9);
    Tensor lr = random_f(Shape{1, 5, 2, 2}, rng);
    Tensor pan = random_f(Shape{1, 1, 16, 16}, rng);

    NoGradGuardT<float> off;
    PgnetTaps<float> taps;
    Tensor out = net.forward(lr, pan, false, &taps);
    CHECK(taps.pre_pdin.shape == Shape{1, 3, 16, 16});
    CHECK(taps.post_stages.shape == Shape{1, 3, 16, 16});
    CHECK(taps.post_aggregation.shape == Shape{1, 3, 16, 16});
    // The decoder input tap reproduces the network output when re-decoded.
    Tensor redecoded = net.decode(taps.post_aggregation, false);
    CHECK(*redecoded.data == *out.data);
}

TEST_CASE("training reduces the combined loss") {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        PgnetConfig cfg;
        cfg.bands = 8;
        cfg.endmembers = 4;
        cfg.sab_count = 2;
        cfg.pan_mid_channels = 8;
        cfg.decoder_mid_channels = 8;
        cfg.ratio = 4;
        cfg.seed = seed;
        Pgnet net(cfg);

        Rng rng(seed * 100 + 7);
        Tensor seed_lr = random_f(Shape{2, 8, 4, 4}, rng);
        Tensor truth, lr, pan;
        {
            NoGradGuardT<float> off;
            truth = ops::bicubic_resize(seed_lr, 4.0);  // smooth target
            lr = ops::bicubic_resize(truth, 0.25);
            pan = band_mean(truth);
        }

        auto params = net.parameters();
        const float step = 1e-4f;
        float first = 0.0f, last = 0.0f;
        for (int it = 0; it < 6; ++it) {
            for (auto* p : params) p->zero_grad();
            Tensor pred = net.forward(lr, pan, true);
            Tensor loss = ops::combined_loss(pred, truth, 0.1f);
            if (it == 0) first = loss.item();
            last = loss.item();
            backward(loss);
            for (auto* p : params)
                for (std::size_t i = 0; i < p->value.data->size(); ++i)
                    p->value.data->at(i) -= step * p->grad()[i];
        }
        CAPTURE(seed);
        CHECK(last < first);
    }
}

TEST_CASE("gradients reach every parameter") {
    PgnetConfig cfg = tiny_config(4, 11);
    Pgnet net(cfg);
    // Force both hinge branches of every moving weight to be active so the
    // separating-line parameters receive gradient.
    for (auto* p : net.parameters()) {
        const std::string& n = p->name();
        if (n.size() > 3 && n.compare(n.size() - 3, 3, ".b1") == 0)
            std::fill(p->value.data->begin(), p->value.data->end(), -5.0f);
        if (n.size() > 3 && n.compare(n.size() - 3, 3, ".b2") == 0)
            std::fill(p->value.data->begin(), p->value.data->end(), 5.0f);
    }

    Rng rng(31);
    Tensor lr = random_f(Shape{2, 5, 3, 3}, rng);
    Tensor pan = random_f(Shape{2, 1, 12, 12}, rng);
    Tensor target = random_f(Shape{2, 5, 12, 12}, rng);

    for (auto* p : net.parameters()) p->zero_grad();
    Tensor loss = ops::mse_loss(net.forward(lr, pan, true), target);
    backward(loss);

    for (auto* p : net.parameters()) {
        const std::string& n = p->name();
        // A conv bias directly followed by batch norm is cancelled by the
        // mean subtraction, so its true gradient is zero; skip those.
        if (n.find(".conv.bias") != std::string::npos) continue;
        float mx = 0.0f;
        for (float g : p->grad()) mx = std::max(mx, std::fabs(g));
        CAPTURE(n);
        CHECK(mx > 0.0f);
    }
}

TEST_CASE("whole network gradients agree with finite differences") {
    PgnetConfig cfg;
    cfg.bands = 4;
    cfg.endmembers = 2;
    cfg.sab_count = 1;
    cfg.pan_mid_channels = 2;
    cfg.decoder_mid_channels = 3;
    cfg.ratio = 2;
    cfg.seed = 17;
    PgnetT<double> net(cfg);

    Rng rng(51);
    // The zero-initialized wp2 convs sit exactly on the LeakyReLU kink where
    // central differences straddle both slopes; probe away from it.
    for (auto* p : net.parameters())
        if (p->name().find(".wp2.") != std::string::npos)
            for (auto& v : *p->value.data) v = rng.uniform(0.05, 0.5);

    DTensor lr = fd::random_tensor(Shape{1, 4, 3, 3}, rng, 0.0, 1.0);
    DTensor pan = fd::random_tensor(Shape{1, 1, 6, 6}, rng, 0.0, 1.0);
    DTensor mask = fd::random_tensor(Shape{1, 4, 6, 6}, rng, 0.5, 1.5);

    fd::check_grads(net.parameters(), [&] {
        return ops::sum(ops::mul(net.forward(lr, pan, true), mask));
    });
}

TEST_CASE("evaluation mode is deterministic") {
    Pgnet net(tiny_config(4));
    Rng rng(13);
    Tensor lr = random_f(Shape{1, 5, 3, 3}, rng);
    Tensor pan = random_f(Shape{1, 1, 12, 12}, rng);

    NoGradGuardT<float> off;
    Tensor a = net.forward(lr, pan, false);
    Tensor b = net.forward(lr, pan, false);
    CHECK(*a.data == *b.data);
}

TEST_CASE("ablated network still runs end to end") {
    PgnetConfig cfg = tiny_config(4);
    cfg.ablation.use_q = false;
    cfg.ablation.use_pan_weights = false;
    cfg.ablation.use_bias = false;
    cfg.ablation.use_residual = false;
    Pgnet net(cfg);
    Rng rng(3);
    Tensor lr = random_f(Shape{1, 5, 2, 2}, rng);
    Tensor pan = random_f(Shape{1, 1, 8, 8}, rng);
    NoGradGuardT<float> off;
    Tensor out = net.forward(lr, pan, false);
    CHECK(out.shape == Shape{1, 5, 8, 8});
    check_finite(out, "ablated forward");
}

TEST_CASE("rejects invalid configurations and inputs") {
    PgnetConfig cfg = tiny_config(4);
    cfg.endmembers = 5;  // must stay below bands
    CHECK_THROWS_AS(Pgnet{cfg}, ConfigError);

    cfg = tiny_config(4);
    cfg.sab_count = 0;
    CHECK_THROWS_AS(Pgnet{cfg}, ConfigError);

    Pgnet net(tiny_config(4));
    Rng rng(1);
    Tensor lr = random_f(Shape{1, 5, 2, 2}, rng);
    CHECK_THROWS_AS(net.forward(lr, random_f(Shape{1, 1, 8, 9}, rng), false), DimensionError);
    CHECK_THROWS_AS(net.forward(lr, random_f(Shape{2, 1, 8, 8}, rng), false), DimensionError);
    CHECK_THROWS_AS(net.forward(random_f(Shape{1, 4, 2, 2}, rng), random_f(Shape{1, 1, 8, 8}, rng), false),
                    DimensionError);
}
