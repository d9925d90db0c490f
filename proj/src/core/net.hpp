#pragma once

#include <optional>
#include <string>
#include <vector>

#include "losses.hpp"
#include "ops.hpp"
#include "rng.hpp"
#include "tensor.hpp"

// Pgnet: abundance-space pansharpening. An encoder projects the LR cube to
// endmember space; stages upsample it with PAN-guided detail injection
// (PDIN); SAB attention blocks refine at full resolution; a decoder restores
// the cube. "single-net" = conv + batch-norm + LeakyReLU; "double-net" = two
// of them (the f_sig unit — not a sigmoid).

namespace pgs {

template <typename T>
struct NamedBuffer {
    std::string name;
    std::vector<T>* data;
};

// conv + batch-norm + LeakyReLU
template <typename T>
struct SingleNetT {
    ParameterT<T> w, b, gamma, beta;
    ops::BatchNormStats<T> stats;
    int stride = 1, padding = 0;
    std::string name;

    SingleNetT() = default;
    SingleNetT(std::string nm, int cin, int cout, int kernel, int stride_, int padding_,
               T leaky_slope, Rng& rng)
        : stride(stride_), padding(padding_), name(std::move(nm)) {
        TensorT<T> wt = TensorT<T>::zeros(Shape{cout, cin, kernel, kernel});
        const double gain = std::sqrt(2.0 / (1.0 + static_cast<double>(leaky_slope) * leaky_slope));
        const double bound = gain * std::sqrt(3.0 / (static_cast<double>(cin) * kernel * kernel));
        for (auto& v : *wt.data) v = static_cast<T>(rng.uniform(-bound, bound));
        w = ParameterT<T>(name + ".conv.weight", wt);
        b = ParameterT<T>(name + ".conv.bias", TensorT<T>::zeros(Shape{cout}));
        gamma = ParameterT<T>(name + ".bn.gamma", TensorT<T>::full(Shape{cout}, T(1)));
        beta = ParameterT<T>(name + ".bn.beta", TensorT<T>::zeros(Shape{cout}));
        stats.running_mean.assign(cout, T(0));
        stats.running_var.assign(cout, T(1));
    }

    TensorT<T> forward(const TensorT<T>& x, bool training, T slope) {
        TensorT<T> y = ops::conv2d(x, w.value, b.value, stride, padding);
        y = ops::batch_norm(y, gamma.value, beta.value, &stats, training);
        return ops::leaky_relu(y, slope);
    }

    void params(std::vector<ParameterT<T>*>& out) {
        out.push_back(&w);
        out.push_back(&b);
        out.push_back(&gamma);
        out.push_back(&beta);
    }
    void buffers(std::vector<NamedBuffer<T>>& out) {
        out.push_back({name + ".bn.running_mean", &stats.running_mean});
        out.push_back({name + ".bn.running_var", &stats.running_var});
    }
};

enum class PdinInit { Constant, Normal, Uniform };

struct PdinAblation {
    bool use_q = true;
    bool use_pan_weights = true;
    bool use_bias = true;
    bool use_residual = true;
};

// Trainable separating lines plus the PAN-derived maps: w_y collapses the
// k-channel PAN feature to the scalar intensity y (1x1 conv initialized to
// the channel average); w_p1/w_p2 are 3x3 conv + LeakyReLU producing the
// multiplicative map P1 (init output 1) and additive map P2 (init output 0).
template <typename T>
struct PdinParamsT {
    ParameterT<T> k1, b1, k2, b2;
    ParameterT<T> wy_w, wy_b;
    ParameterT<T> wp1_w, wp1_b;
    ParameterT<T> wp2_w, wp2_b;

    PdinParamsT() = default;
    PdinParamsT(std::string name, int pan_channels, PdinInit init, Rng& rng) {
        auto line = [&](T constant) {
            switch (init) {
                case PdinInit::Constant: return constant;
                case PdinInit::Normal: return static_cast<T>(rng.normal());
                case PdinInit::Uniform: return static_cast<T>(rng.uniform(-1.0, 1.0));
            }
            return constant;
        };
        k1 = ParameterT<T>(name + ".k1", TensorT<T>::scalar(line(T(1))));
        b1 = ParameterT<T>(name + ".b1", TensorT<T>::scalar(line(T(0.3))));
        k2 = ParameterT<T>(name + ".k2", TensorT<T>::scalar(line(T(-1))));
        b2 = ParameterT<T>(name + ".b2", TensorT<T>::scalar(line(T(0.3))));
        wy_w = ParameterT<T>(name + ".wy.weight",
                             TensorT<T>::full(Shape{1, pan_channels, 1, 1}, T(1) / pan_channels));
        wy_b = ParameterT<T>(name + ".wy.bias", TensorT<T>::zeros(Shape{1}));
        wp1_w = ParameterT<T>(name + ".wp1.weight", TensorT<T>::zeros(Shape{1, pan_channels, 3, 3}));
        wp1_b = ParameterT<T>(name + ".wp1.bias", TensorT<T>::full(Shape{1}, T(1)));
        wp2_w = ParameterT<T>(name + ".wp2.weight", TensorT<T>::zeros(Shape{1, pan_channels, 3, 3}));
        wp2_b = ParameterT<T>(name + ".wp2.bias", TensorT<T>::zeros(Shape{1}));
    }

    void params(std::vector<ParameterT<T>*>& out) {
        for (auto* p : {&k1, &b1, &k2, &b2, &wy_w, &wy_b, &wp1_w, &wp1_b, &wp2_w, &wp2_b})
            out.push_back(p);
    }
};

// q = sigmoid(ReLU(y - (k1*astd + b1))) + sigmoid(ReLU((k2*astd + b2) - y)).
// Both hinge margins <= 0 (between the lines) gives q = 1 exactly; crossing
// either line pushes q above 1.
template <typename T>
TensorT<T> moving_weight(const TensorT<T>& y, const TensorT<T>& astd, PdinParamsT<T>& p) {
    require_dims(y.shape == astd.shape, "moving weight: y and astd shapes differ");
    TensorT<T> upper = ops::add(ops::mul(astd, p.k1.value), p.b1.value);
    TensorT<T> lower = ops::add(ops::mul(astd, p.k2.value), p.b2.value);
    TensorT<T> above = ops::sigmoid(ops::relu(ops::sub(y, upper)));
    TensorT<T> below = ops::sigmoid(ops::relu(ops::sub(lower, y)));
    return ops::add(above, below);
}

// X_e = q*P1*abun + q*P2 (+ abun with the residual flag). P1 and P2 are
// single-channel and broadcast across the abundance channels, so the
// additive term shifts a pixel's spectrum uniformly and leaves its channel
// STD unchanged.
template <typename T>
TensorT<T> pdin_forward(const TensorT<T>& abun, const TensorT<T>& pan_feat, PdinParamsT<T>& p,
                        const PdinAblation& abl, T slope) {
    require_dims(abun.shape[0] == pan_feat.shape[0] && abun.shape[2] == pan_feat.shape[2] &&
                     abun.shape[3] == pan_feat.shape[3],
                 "pdin: abundance " + abun.shape.str() + " and pan feature " +
                     pan_feat.shape.str() + " extents differ");

    TensorT<T> q;
    if (abl.use_q) {
        TensorT<T> y = ops::conv2d(pan_feat, p.wy_w.value, p.wy_b.value, 1, 0);
        TensorT<T> astd = ops::channel_std(abun);
        q = moving_weight(y, astd, p);
    } else {
        q = TensorT<T>::full(Shape{abun.shape[0], 1, abun.shape[2], abun.shape[3]}, T(1));
    }

    TensorT<T> out;
    if (abl.use_pan_weights) {
        TensorT<T> p1 = ops::leaky_relu(ops::conv2d(pan_feat, p.wp1_w.value, p.wp1_b.value, 1, 1), slope);
        out = ops::mul(ops::mul(q, p1), abun);
        if (abl.use_bias) {
            TensorT<T> p2 =
                ops::leaky_relu(ops::conv2d(pan_feat, p.wp2_w.value, p.wp2_b.value, 1, 1), slope);
            out = ops::add(out, ops::mul(q, p2));
        }
    } else {
        out = ops::mul(q, abun);
    }
    if (abl.use_residual) out = ops::add(out, abun);
    return out;
}

struct PgnetConfig {
    int bands = 128;
    int endmembers = 20;
    int sab_count = 4;
    int pan_mid_channels = 32;
    int decoder_mid_channels = 64;
    int ratio = 16;
    std::vector<int> stage_factors;  // derived from ratio when empty
    float leaky_slope = 0.2f;
    std::uint64_t seed = 0;
    PdinInit pdin_init = PdinInit::Constant;
    PdinAblation ablation;
};

inline std::vector<int> default_stage_factors(int ratio) {
    switch (ratio) {
        case 4: return {4};
        case 8: return {4, 2};
        case 12: return {4, 3};
        case 16: return {4, 4};
        default: break;
    }
    std::vector<int> f;
    int rest = ratio;
    for (int d : {4, 3, 2})
        while (rest % d == 0 && rest > 1) {
            f.push_back(d);
            rest /= d;
        }
    if (rest != 1) throw ConfigError("ratio " + std::to_string(ratio) +
                                     " cannot be factored into stage factors of 2, 3, or 4");
    return f;
}

inline void validate_stage_factors(const PgnetConfig& cfg, const std::vector<int>& f) {
    require(!f.empty() && f.size() <= 4,
            "stage factors: need between 1 and 4 stages, got " + std::to_string(f.size()));
    int prod = 1;
    for (int v : f) {
        require(v >= 2 && v <= 4, "stage factors: each factor must be 2, 3, or 4");
        prod *= v;
    }
    require(prod == cfg.ratio, "stage factors: product " + std::to_string(prod) +
                                   " does not equal ratio " + std::to_string(cfg.ratio));
}

// Abundances at the three analysis points: after the last stage's upsample
// module (before PDIN), after the last stage's PDIN + encoder residual, and
// after SAB aggregation + residual (the decoder input).
template <typename T>
struct PgnetTaps {
    TensorT<T> pre_pdin;
    TensorT<T> post_stages;
    TensorT<T> post_aggregation;
};

template <typename T>
class PgnetT {
public:
    explicit PgnetT(PgnetConfig cfg) : cfg_(std::move(cfg)) {
        require(cfg_.bands >= 2, "pgnet: need at least 2 bands");
        require(cfg_.endmembers >= 2 && cfg_.endmembers < cfg_.bands,
                "pgnet: endmembers must satisfy 2 <= c < bands");
        require(cfg_.sab_count >= 1, "pgnet: need at least one SAB");
        require(cfg_.ratio >= 2, "pgnet: ratio must be >= 2");
        factors_ = cfg_.stage_factors.empty() ? default_stage_factors(cfg_.ratio)
                                              : cfg_.stage_factors;
        validate_stage_factors(cfg_, factors_);

        Rng rng(cfg_.seed);
        const T slope = static_cast<T>(cfg_.leaky_slope);
        const int c = cfg_.endmembers, k = cfg_.pan_mid_channels;

        encoder_ = SingleNetT<T>("encoder", cfg_.bands, c, 1, 1, 0, slope, rng);

        int cum = 1;
        for (std::size_t i = 0; i < factors_.size(); ++i) {
            cum *= factors_[i];
            const int down = cfg_.ratio / cum;  // PAN downsample factor at this stage
            Stage st;
            const std::string nm = "stage" + std::to_string(i);
            st.up = SingleNetT<T>(nm + ".up", c, c, 1, 1, 0, slope, rng);
            if (down > 1)
                st.pan0 = SingleNetT<T>(nm + ".pan0", 1, k, down, down, 0, slope, rng);
            else
                st.pan0 = SingleNetT<T>(nm + ".pan0", 1, k, 3, 1, 1, slope, rng);
            st.pan1 = SingleNetT<T>(nm + ".pan1", k, k, 3, 1, 1, slope, rng);
            st.pdin = PdinParamsT<T>(nm + ".pdin", k, cfg_.pdin_init, rng);
            st.factor = factors_[i];
            st.pan_down = down;
            stages_.push_back(std::move(st));
        }

        for (int i = 0; i < cfg_.sab_count; ++i) {
            Sab sab;
            const std::string nm = "sab" + std::to_string(i);
            sab.pdin = PdinParamsT<T>(nm + ".pdin", k, cfg_.pdin_init, rng);
            sab.mul = SingleNetT<T>(nm + ".mul", c, c, 1, 1, 0, slope, rng);
            sab.out = SingleNetT<T>(nm + ".out", c, c, 1, 1, 0, slope, rng);
            sabs_.push_back(std::move(sab));
        }

        agg_ = SingleNetT<T>("agg", cfg_.sab_count * c, c, 1, 1, 0, slope, rng);
        dec0_ = SingleNetT<T>("decoder0", c, cfg_.decoder_mid_channels, 3, 1, 1, slope, rng);
        dec1_ = SingleNetT<T>("decoder1", cfg_.decoder_mid_channels, cfg_.bands, 1, 1, 0, slope, rng);
    }

    const PgnetConfig& config() const { return cfg_; }
    const std::vector<int>& stage_factors() const { return factors_; }

    TensorT<T> encode(const TensorT<T>& lr, bool training) {
        require_dims(lr.shape.nd == 4 && lr.shape[1] == cfg_.bands,
                     "pgnet: input bands " + std::to_string(lr.shape[1]) + " do not match config " +
                         std::to_string(cfg_.bands));
        return encoder_.forward(lr, training, slope());
    }

    // Decoder alone: abundance [n,c,H,W] -> cube [n,bands,H,W].
    TensorT<T> decode(const TensorT<T>& abun, bool training) {
        TensorT<T> y = dec0_.forward(abun, training, slope());
        return dec1_.forward(y, training, slope());
    }

    TensorT<T> forward(const TensorT<T>& lr, const TensorT<T>& pan, bool training,
                       PgnetTaps<T>* taps = nullptr) {
        require_dims(pan.shape.nd == 4 && pan.shape[1] == 1, "pgnet: pan must be [n,1,H,W]");
        require_dims(pan.shape[2] == lr.shape[2] * cfg_.ratio &&
                         pan.shape[3] == lr.shape[3] * cfg_.ratio,
                     "pgnet: pan extents " + pan.shape.str() + " must be ratio x lr extents " +
                         lr.shape.str());
        require_dims(pan.shape[0] == lr.shape[0], "pgnet: batch sizes differ");

        TensorT<T> abun0 = encode(lr, training);

        TensorT<T> x = abun0;
        TensorT<T> pan_feat;
        for (std::size_t i = 0; i < stages_.size(); ++i) {
            Stage& st = stages_[i];
            x = ops::bicubic_resize(x, static_cast<double>(st.factor));
            x = st.up.forward(x, training, slope());
            if (taps && i + 1 == stages_.size()) taps->pre_pdin = x;
            pan_feat = st.pan1.forward(st.pan0.forward(pan, training, slope()), training, slope());
            x = pdin_forward(x, pan_feat, st.pdin, cfg_.ablation, slope());
        }
        x = ops::add(x, ops::bicubic_resize(abun0, static_cast<double>(cfg_.ratio)));
        if (taps) taps->post_stages = x;

        // SABs reuse the last stage's full-resolution PAN feature.
        std::vector<TensorT<T>> collected;
        for (Sab& sab : sabs_) {
            TensorT<T> y_fea = pdin_forward(x, pan_feat, sab.pdin, cfg_.ablation, slope());
            TensorT<T> y_mid = ops::mul(y_fea, sab.mul.forward(y_fea, training, slope()));
            x = sab.out.forward(ops::add(x, y_mid), training, slope());
            collected.push_back(x);
        }

        TensorT<T> fused = agg_.forward(ops::concat_channels(collected), training, slope());
        fused = ops::add(fused, ops::bicubic_resize(abun0, static_cast<double>(cfg_.ratio)));
        if (taps) taps->post_aggregation = fused;

        return decode(fused, training);
    }

    std::vector<ParameterT<T>*> parameters() {
        std::vector<ParameterT<T>*> out;
        encoder_.params(out);
        for (Stage& st : stages_) {
            st.up.params(out);
            st.pan0.params(out);
            st.pan1.params(out);
            st.pdin.params(out);
        }
        for (Sab& sab : sabs_) {
            sab.pdin.params(out);
            sab.mul.params(out);
            sab.out.params(out);
        }
        agg_.params(out);
        dec0_.params(out);
        dec1_.params(out);
        return out;
    }

    std::vector<NamedBuffer<T>> buffers() {
        std::vector<NamedBuffer<T>> out;
        encoder_.buffers(out);
        for (Stage& st : stages_) {
            st.up.buffers(out);
            st.pan0.buffers(out);
            st.pan1.buffers(out);
        }
        for (Sab& sab : sabs_) {
            sab.mul.buffers(out);
            sab.out.buffers(out);
        }
        agg_.buffers(out);
        dec0_.buffers(out);
        dec1_.buffers(out);
        return out;
    }

    std::int64_t param_count() {
        std::int64_t n = 0;
        for (auto* p : parameters()) n += p->numel();
        return n;
    }

private:
    struct Stage {
        SingleNetT<T> up, pan0, pan1;
        PdinParamsT<T> pdin;
        int factor = 4;
        int pan_down = 1;
    };
    struct Sab {
        PdinParamsT<T> pdin;
        SingleNetT<T> mul, out;
    };

    T slope() const { return static_cast<T>(cfg_.leaky_slope); }

    PgnetConfig cfg_;
    std::vector<int> factors_;
    SingleNetT<T> encoder_;
    std::vector<Stage> stages_;
    std::vector<Sab> sabs_;
    SingleNetT<T> agg_, dec0_, dec1_;
};

using Pgnet = PgnetT<float>;
using PdinParams = PdinParamsT<float>;

}  // namespace pgs
