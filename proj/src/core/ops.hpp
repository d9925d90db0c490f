#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "tensor.hpp"

// Differentiable kernels. Every op is functional: it allocates its output,
// validates shapes, checks the result for non-finite values and, when any
// argument requires gradients and the tape is enabled, records a closure
// that scatters the output gradient back onto its inputs.

namespace pgs::ops {

namespace detail {

// Row-major strides over the 4-padded shape, with broadcast dims pinned to 0
// so the same index arithmetic walks both operands.
inline std::array<std::int64_t, 4> broadcast_strides(const Shape& s, const std::array<int, 4>& out) {
    auto p = s.padded();
    std::array<std::int64_t, 4> st{};
    std::int64_t acc = 1;
    for (int i = 3; i >= 0; --i) {
        st[i] = (p[i] == 1) ? 0 : acc;
        acc *= p[i];
    }
    for (int i = 0; i < 4; ++i)
        if (p[i] != out[i] && p[i] != 1)
            throw DimensionError("broadcast: incompatible shapes " + s.str());
    return st;
}

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
    auto pa = a.padded(), pb = b.padded();
    Shape out;
    out.nd = std::max(a.nd, b.nd);
    std::array<int, 4> po{};
    for (int i = 0; i < 4; ++i) {
        if (pa[i] != pb[i] && pa[i] != 1 && pb[i] != 1)
            throw DimensionError("broadcast: incompatible shapes " + a.str() + " vs " + b.str());
        po[i] = std::max(pa[i], pb[i]);
    }
    for (int i = 0; i < out.nd; ++i) out.d[i] = po[4 - out.nd + i];
    return out;
}

enum class Bin { Add, Sub, Mul };

template <typename T>
TensorT<T> binary(const TensorT<T>& a, const TensorT<T>& b, Bin kind, const char* name) {
    Shape os = broadcast_shape(a.shape, b.shape);
    auto po = os.padded();
    auto sa = broadcast_strides(a.shape, po);
    auto sb = broadcast_strides(b.shape, po);
    TensorT<T> out = TensorT<T>::zeros(os);

    const T* pa = a.ptr();
    const T* pb = b.ptr();
    T* pr = out.ptr();
    std::int64_t o = 0;
    for (int i0 = 0; i0 < po[0]; ++i0)
        for (int i1 = 0; i1 < po[1]; ++i1)
            for (int i2 = 0; i2 < po[2]; ++i2) {
                std::int64_t oa = i0 * sa[0] + i1 * sa[1] + i2 * sa[2];
                std::int64_t ob = i0 * sb[0] + i1 * sb[1] + i2 * sb[2];
                for (int i3 = 0; i3 < po[3]; ++i3, ++o) {
                    T va = pa[oa + i3 * sa[3]];
                    T vb = pb[ob + i3 * sb[3]];
                    pr[o] = kind == Bin::Add ? va + vb : kind == Bin::Sub ? va - vb : va * vb;
                }
            }
    check_finite(out, name);

    auto& tape = TapeT<T>::instance();
    if (tape.tracking(a.requires_grad || b.requires_grad)) {
        out.requires_grad = true;
        tape.note_leaf(a);
        tape.note_leaf(b);
        tape.record([a, b, out, kind, po, sa, sb]() {
            auto& tp = TapeT<T>::instance();
            const std::vector<T>* go = tp.find_grad(out);
            if (!go) return;
            std::vector<T>* ga = a.requires_grad ? &tp.grad(a) : nullptr;
            std::vector<T>* gb = b.requires_grad ? &tp.grad(b) : nullptr;
            const T* pa = a.ptr();
            const T* pb = b.ptr();
            std::int64_t o = 0;
            for (int i0 = 0; i0 < po[0]; ++i0)
                for (int i1 = 0; i1 < po[1]; ++i1)
                    for (int i2 = 0; i2 < po[2]; ++i2) {
                        std::int64_t oa = i0 * sa[0] + i1 * sa[1] + i2 * sa[2];
                        std::int64_t ob = i0 * sb[0] + i1 * sb[1] + i2 * sb[2];
                        for (int i3 = 0; i3 < po[3]; ++i3, ++o) {
                            T g = (*go)[o];
                            std::int64_t ia = oa + i3 * sa[3];
                            std::int64_t ib = ob + i3 * sb[3];
                            switch (kind) {
                                case Bin::Add:
                                    if (ga) (*ga)[ia] += g;
                                    if (gb) (*gb)[ib] += g;
                                    break;
                                case Bin::Sub:
                                    if (ga) (*ga)[ia] += g;
                                    if (gb) (*gb)[ib] -= g;
                                    break;
                                case Bin::Mul:
                                    if (ga) (*ga)[ia] += g * pb[ib];
                                    if (gb) (*gb)[ib] += g * pa[ia];
                                    break;
                            }
                        }
                    }
        });
    }
    return out;
}

template <typename T, typename Fwd, typename Bwd>
TensorT<T> unary(const TensorT<T>& x, Fwd fwd, Bwd bwd, const char* name) {
    TensorT<T> out = TensorT<T>::zeros(x.shape);
    const T* px = x.ptr();
    T* po = out.ptr();
    std::int64_t n = x.numel();
    for (std::int64_t i = 0; i < n; ++i) po[i] = fwd(px[i]);
    check_finite(out, name);

    auto& tape = TapeT<T>::instance();
    if (tape.tracking(x.requires_grad)) {
        out.requires_grad = true;
        tape.note_leaf(x);
        tape.record([x, out, bwd]() {
            auto& tp = TapeT<T>::instance();
            const std::vector<T>* go = tp.find_grad(out);
            if (!go) return;
            auto& gx = tp.grad(x);
            const T* px = x.ptr();
            const T* py = out.ptr();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += (*go)[i] * bwd(px[i], py[i]);
        });
    }
    return out;
}

}  // namespace detail

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
    return detail::binary(a, b, detail::Bin::Add, "add");
}
template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
    return detail::binary(a, b, detail::Bin::Sub, "sub");
}
template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
    return detail::binary(a, b, detail::Bin::Mul, "mul");
}
template <typename T>
TensorT<T> mul(const TensorT<T>& a, T s) {
    return detail::binary(a, TensorT<T>::scalar(s), detail::Bin::Mul, "mul");
}
template <typename T>
TensorT<T> add(const TensorT<T>& a, T s) {
    return detail::binary(a, TensorT<T>::scalar(s), detail::Bin::Add, "add");
}

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
    // Kink at exactly 0 takes gradient 0.
    return detail::unary(
        x, [](T v) { return v > T(0) ? v : T(0); },
        [](T v, T) { return v > T(0) ? T(1) : T(0); }, "relu");
}

template <typename T>
TensorT<T> leaky_relu(const TensorT<T>& x, T slope) {
    if (!(slope > T(0) && slope < T(1))) throw ConfigError("leaky_relu: slope must be in (0,1)");
    return detail::unary(
        x, [slope](T v) { return v > T(0) ? v : slope * v; },
        [slope](T v, T) { return v > T(0) ? T(1) : slope; }, "leaky_relu");
}

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& x) {
    return detail::unary(
        x,
        [](T v) {
            if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
            T e = std::exp(v);
            return e / (T(1) + e);
        },
        [](T, T y) { return y * (T(1) - y); }, "sigmoid");
}

template <typename T>
TensorT<T> sum(const TensorT<T>& x) {
    double acc = 0.0;
    for (const T& v : *x.data) acc += static_cast<double>(v);
    TensorT<T> out = TensorT<T>::scalar(static_cast<T>(acc));
    check_finite(out, "sum");
    auto& tape = TapeT<T>::instance();
    if (tape.tracking(x.requires_grad)) {
        out.requires_grad = true;
        tape.note_leaf(x);
        tape.record([x, out]() {
            auto& tp = TapeT<T>::instance();
            const std::vector<T>* go = tp.find_grad(out);
            if (!go) return;
            auto& gx = tp.grad(x);
            for (auto& g : gx) g += (*go)[0];
        });
    }
    return out;
}

// Per-pixel population standard deviation across the channel dimension:
// [n,c,h,w] -> [n,1,h,w]. Matches the abundance-STD statistic (divide by c).
template <typename T>
TensorT<T> channel_std(const TensorT<T>& x) {
    if (x.shape.nd != 4) throw DimensionError("channel_std: expected 4-D input, got " + x.shape.str());
    const int n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    TensorT<T> out = TensorT<T>::zeros(Shape{n, 1, h, w});
    const T* px = x.ptr();
    T* po = out.ptr();
    for (int b = 0; b < n; ++b) {
        const T* base = px + b * c * plane;
        T* orow = po + b * plane;
        for (std::int64_t p = 0; p < plane; ++p) {
            double mean = 0.0;
            for (int k = 0; k < c; ++k) mean += static_cast<double>(base[k * plane + p]);
            mean /= c;
            double var = 0.0;
            for (int k = 0; k < c; ++k) {
                double d = static_cast<double>(base[k * plane + p]) - mean;
                var += d * d;
            }
            orow[p] = static_cast<T>(std::sqrt(var / c));
        }
    }
    check_finite(out, "channel_std");

    auto& tape = TapeT<T>::instance();
    if (tape.tracking(x.requires_grad)) {
        out.requires_grad = true;
        tape.note_leaf(x);
        tape.record([x, out, n, c, plane]() {
            auto& tp = TapeT<T>::instance();
            const std::vector<T>* go = tp.find_grad(out);
            if (!go) return;
            auto& gx = tp.grad(x);
            const T* px = x.ptr();
            const T* ps = out.ptr();
            for (int b = 0; b < n; ++b) {
                const T* base = px + b * c * plane;
                for (std::int64_t p = 0; p < plane; ++p) {
                    double s = static_cast<double>(ps[b * plane + p]);
                    if (s < 1e-12) continue;  // subgradient 0 at the sqrt kink
                    double g = static_cast<double>((*go)[b * plane + p]);
                    double mean = 0.0;
                    for (int k = 0; k < c; ++k) mean += static_cast<double>(base[k * plane + p]);
                    mean /= c;
                    for (int k = 0; k < c; ++k) {
                        double d = static_cast<double>(base[k * plane + p]) - mean;
                        gx[b * c * plane + k * plane + p] += static_cast<T>(g * d / (c * s));
                    }
                }
            }
        });
    }
    return out;
}

// Channel concatenation of same-resolution 4-D tensors.
template <typename T>
TensorT<T> concat_channels(const std::vector<TensorT<T>>& parts) {
    if (parts.empty()) throw ConfigError("concat_channels: no inputs");
    const int n = parts[0].shape[0], h = parts[0].shape[2], w = parts[0].shape[3];
    int ctot = 0;
    for (const auto& p : parts) {
        if (p.shape.nd != 4 || p.shape[0] != n || p.shape[2] != h || p.shape[3] != w)
            throw DimensionError("concat_channels: mismatched shapes");
        ctot += p.shape[1];
    }
    TensorT<T> out = TensorT<T>::zeros(Shape{n, ctot, h, w});
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    T* po = out.ptr();
    bool any_grad = false;
    for (int b = 0; b < n; ++b) {
        std::int64_t coff = 0;
        for (const auto& p : parts) {
            const int pc = p.shape[1];
            std::memcpy(po + (b * ctot + coff) * plane, p.ptr() + b * pc * plane,
                        sizeof(T) * pc * plane);
            coff += pc;
        }
    }
    for (const auto& p : parts) any_grad = any_grad || p.requires_grad;

    auto& tape = TapeT<T>::instance();
    if (tape.tracking(any_grad)) {
        out.requires_grad = true;
        for (const auto& p : parts) tape.note_leaf(p);
        auto saved = parts;
        tape.record([saved, out, n, ctot, plane]() {
            auto& tp = TapeT<T>::instance();
            const std::vector<T>* go = tp.find_grad(out);
            if (!go) return;
            for (int b = 0; b < n; ++b) {
                std::int64_t coff = 0;
                for (const auto& p : saved) {
                    const int pc = p.shape[1];
                    if (p.requires_grad) {
                        auto& gp = tp.grad(p);
                        for (std::int64_t i = 0; i < pc * plane; ++i)
                            gp[b * pc * plane + i] += (*go)[(b * ctot + coff) * plane + i];
                    }
                    coff += pc;
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// conv2d: cross-correlation, square kernel, symmetric stride/padding.

template <typename T>
struct ConvSpec {
    int stride = 1;
    int padding = 0;
};

namespace detail {

inline int conv_out_extent(int in, int k, int stride, int padding, const char* axis) {
    int span = in + 2 * padding - k;
    if (span < 0 || span % stride != 0)
        throw ConfigError(std::string("conv2d: non-integral output extent along ") + axis);
    return span / stride + 1;
}

}  // namespace detail

template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& weight, const TensorT<T>& bias,
                  int stride, int padding) {
    if (input.shape.nd != 4 || weight.shape.nd != 4)
        throw DimensionError("conv2d: input and weight must be 4-D");
    const int n = input.shape[0], ci = input.shape[1], h = input.shape[2], w = input.shape[3];
    const int co = weight.shape[0], kh = weight.shape[2], kw = weight.shape[3];
    if (weight.shape[1] != ci)
        throw DimensionError("conv2d: weight expects " + std::to_string(weight.shape[1]) +
                             " input channels, got " + std::to_string(ci));
    if (bias.numel() != co) throw DimensionError("conv2d: bias length must equal output channels");
    if (kh < 1 || stride < 1 || padding < 0) throw ConfigError("conv2d: bad kernel/stride/padding");
    const int oh = detail::conv_out_extent(h, kh, stride, padding, "height");
    const int ow = detail::conv_out_extent(w, kw, stride, padding, "width");

    TensorT<T> out = TensorT<T>::zeros(Shape{n, co, oh, ow});
    const T* in = input.ptr();
    const T* wt = weight.ptr();
    const T* bs = bias.ptr();
    T* op = out.ptr();
    const std::int64_t in_plane = static_cast<std::int64_t>(h) * w;
    const std::int64_t out_plane = static_cast<std::int64_t>(oh) * ow;

    for (int b = 0; b < n; ++b)
        for (int f = 0; f < co; ++f) {
            T* oplane = op + (b * co + f) * out_plane;
            std::fill(oplane, oplane + out_plane, bs[f]);
            for (int c = 0; c < ci; ++c) {
                const T* iplane = in + (b * ci + c) * in_plane;
                const T* wk = wt + (f * ci + c) * kh * kw;
                for (int ky = 0; ky < kh; ++ky)
                    for (int kx = 0; kx < kw; ++kx) {
                        const T wv = wk[ky * kw + kx];
                        // valid output column range for this kernel column
                        const int span = w - 1 + padding - kx;
                        if (span < 0) continue;  // truncating division would round the wrong way
                        int xlo = std::max(0, (padding - kx + stride - 1) / stride);
                        int xhi = std::min(ow - 1, span / stride);
                        for (int oy = 0; oy < oh; ++oy) {
                            const int iy = oy * stride + ky - padding;
                            if (iy < 0 || iy >= h) continue;
                            const T* irow = iplane + static_cast<std::int64_t>(iy) * w - padding + kx;
                            T* orow = oplane + static_cast<std::int64_t>(oy) * ow;
                            for (int ox = xlo; ox <= xhi; ++ox) orow[ox] += wv * irow[ox * stride];
                        }
                    }
            }
        }
    check_finite(out, "conv2d");

    auto& tape = TapeT<T>::instance();
    if (tape.tracking(input.requires_grad || weight.requires_grad || bias.requires_grad)) {
        out.requires_grad = true;
        tape.note_leaf(input);
        tape.note_leaf(weight);
        tape.note_leaf(bias);
        tape.record([input, weight, bias, out, stride, padding]() {
            auto& tp = TapeT<T>::instance();
            const std::vector<T>* go = tp.find_grad(out);
            if (!go) return;
            const int n = input.shape[0], ci = input.shape[1], h = input.shape[2], w = input.shape[3];
            const int co = weight.shape[0], kh = weight.shape[2], kw = weight.shape[3];
            const int oh = out.shape[2], ow = out.shape[3];
            const std::int64_t in_plane = static_cast<std::int64_t>(h) * w;
            const std::int64_t out_plane = static_cast<std::int64_t>(oh) * ow;
            std::vector<T>* gin = input.requires_grad ? &tp.grad(input) : nullptr;
            std::vector<T>* gwt = weight.requires_grad ? &tp.grad(weight) : nullptr;
            std::vector<T>* gbs = bias.requires_grad ? &tp.grad(bias) : nullptr;
            const T* in = input.ptr();
            const T* wt = weight.ptr();

            if (gbs)
                for (int b = 0; b < n; ++b)
                    for (int f = 0; f < co; ++f) {
                        const T* grow = go->data() + (b * co + f) * out_plane;
                        T acc = 0;
                        for (std::int64_t i = 0; i < out_plane; ++i) acc += grow[i];
                        (*gbs)[f] += acc;
                    }

            if (gin || gwt)
                for (int b = 0; b < n; ++b)
                    for (int f = 0; f < co; ++f) {
                        const T* gplane = go->data() + (b * co + f) * out_plane;
                        for (int c = 0; c < ci; ++c) {
                            const T* iplane = in + (b * ci + c) * in_plane;
                            T* ginplane = gin ? gin->data() + (b * ci + c) * in_plane : nullptr;
                            const T* wk = wt + (f * ci + c) * kh * kw;
                            T* gwk = gwt ? gwt->data() + (f * ci + c) * kh * kw : nullptr;
                            for (int ky = 0; ky < kh; ++ky)
                                for (int kx = 0; kx < kw; ++kx) {
                                    const T wv = wk[ky * kw + kx];
                                    T wacc = 0;
                                    const int span = w - 1 + padding - kx;
                                    if (span < 0) continue;
                                    int xlo = std::max(0, (padding - kx + stride - 1) / stride);
                                    int xhi = std::min(ow - 1, span / stride);
                                    for (int oy = 0; oy < oh; ++oy) {
                                        const int iy = oy * stride + ky - padding;
                                        if (iy < 0 || iy >= h) continue;
                                        const std::int64_t ioff =
                                            static_cast<std::int64_t>(iy) * w - padding + kx;
                                        const T* grow = gplane + static_cast<std::int64_t>(oy) * ow;
                                        for (int ox = xlo; ox <= xhi; ++ox) {
                                            const T g = grow[ox];
                                            if (gwt) wacc += g * iplane[ioff + ox * stride];
                                            if (gin) ginplane[ioff + ox * stride] += g * wv;
                                        }
                                    }
                                    if (gwk) gwk[ky * kw + kx] += wacc;
                                }
                        }
                    }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// batch_norm

template <typename T>
struct BatchNormStats {
    std::vector<T> running_mean;
    std::vector<T> running_var;
};

template <typename T>
TensorT<T> batch_norm(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& beta,
                      BatchNormStats<T>* stats, bool training, T momentum = T(0.1),
                      T eps = T(1e-5)) {
    if (x.shape.nd != 4) throw DimensionError("batch_norm: expected 4-D input");
    const int n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
    if (gamma.numel() != c || beta.numel() != c)
        throw DimensionError("batch_norm: gamma/beta length must equal channels");
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    const std::int64_t cnt = static_cast<std::int64_t>(n) * plane;

    std::vector<double> mean(c, 0.0), invstd(c, 0.0);
    if (training) {
        if (cnt < 2)
            throw ConfigError("batch_norm: degenerate statistics, train mode needs >= 2 values per channel");
        for (int k = 0; k < c; ++k) {
            double m = 0.0;
            for (int b = 0; b < n; ++b) {
                const T* p = x.ptr() + (b * c + k) * plane;
                for (std::int64_t i = 0; i < plane; ++i) m += static_cast<double>(p[i]);
            }
            m /= static_cast<double>(cnt);
            double v = 0.0;
            for (int b = 0; b < n; ++b) {
                const T* p = x.ptr() + (b * c + k) * plane;
                for (std::int64_t i = 0; i < plane; ++i) {
                    double d = static_cast<double>(p[i]) - m;
                    v += d * d;
                }
            }
            v /= static_cast<double>(cnt);
            mean[k] = m;
            invstd[k] = 1.0 / std::sqrt(v + static_cast<double>(eps));
            if (stats) {
                double unbiased = v * static_cast<double>(cnt) / static_cast<double>(cnt - 1);
                stats->running_mean[k] = static_cast<T>((1.0 - momentum) * stats->running_mean[k] +
                                                        momentum * m);
                stats->running_var[k] = static_cast<T>((1.0 - momentum) * stats->running_var[k] +
                                                       momentum * unbiased);
            }
        }
    } else {
        if (!stats) throw ConfigError("batch_norm: eval mode requires running statistics");
        for (int k = 0; k < c; ++k) {
            mean[k] = static_cast<double>(stats->running_mean[k]);
            invstd[k] = 1.0 / std::sqrt(static_cast<double>(stats->running_var[k]) +
                                        static_cast<double>(eps));
        }
    }

    TensorT<T> out = TensorT<T>::zeros(x.shape);
    for (int b = 0; b < n; ++b)
        for (int k = 0; k < c; ++k) {
            const T* p = x.ptr() + (b * c + k) * plane;
            T* q = out.ptr() + (b * c + k) * plane;
            const double g = static_cast<double>(gamma.ptr()[k]);
            const double bt = static_cast<double>(beta.ptr()[k]);
            for (std::int64_t i = 0; i < plane; ++i)
                q[i] = static_cast<T>((static_cast<double>(p[i]) - mean[k]) * invstd[k] * g + bt);
        }
    check_finite(out, "batch_norm");

    auto& tape = TapeT<T>::instance();
    if (tape.tracking(x.requires_grad || gamma.requires_grad || beta.requires_grad)) {
        out.requires_grad = true;
        tape.note_leaf(x);
        tape.note_leaf(gamma);
        tape.note_leaf(beta);
        tape.record([x, gamma, beta, out, mean, invstd, training, n, c, plane, cnt]() {
            auto& tp = TapeT<T>::instance();
            const std::vector<T>* go = tp.find_grad(out);
            if (!go) return;
            std::vector<T>* gx = x.requires_grad ? &tp.grad(x) : nullptr;
            std::vector<T>* gg = gamma.requires_grad ? &tp.grad(gamma) : nullptr;
            std::vector<T>* gb = beta.requires_grad ? &tp.grad(beta) : nullptr;
            for (int k = 0; k < c; ++k) {
                double s1 = 0.0, s2 = 0.0;  // sum(go), sum(go * xhat)
                for (int b = 0; b < n; ++b) {
                    const T* p = x.ptr() + (b * c + k) * plane;
                    const T* g = go->data() + (b * c + k) * plane;
                    for (std::int64_t i = 0; i < plane; ++i) {
                        double xh = (static_cast<double>(p[i]) - mean[k]) * invstd[k];
                        s1 += static_cast<double>(g[i]);
                        s2 += static_cast<double>(g[i]) * xh;
                    }
                }
                if (gg) (*gg)[k] += static_cast<T>(s2);
                if (gb) (*gb)[k] += static_cast<T>(s1);
                if (gx) {
                    const double gm = static_cast<double>(gamma.ptr()[k]);
                    for (int b = 0; b < n; ++b) {
                        const T* p = x.ptr() + (b * c + k) * plane;
                        const T* g = go->data() + (b * c + k) * plane;
                        T* q = gx->data() + (b * c + k) * plane;
                        for (std::int64_t i = 0; i < plane; ++i) {
                            double xh = (static_cast<double>(p[i]) - mean[k]) * invstd[k];
                            double d = static_cast<double>(g[i]);
                            if (training)
                                d -= s1 / static_cast<double>(cnt) + xh * s2 / static_cast<double>(cnt);
                            q[i] += static_cast<T>(gm * invstd[k] * d);
                        }
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// bicubic_resize: cubic convolution kernel a=-0.5, half-pixel centers,
// edge-clamped sampling. Tap weights are renormalized in double so constant
// inputs are preserved bit-exactly after the final rounding.

namespace detail {

inline double cubic_weight(double u) {
    constexpr double a = -0.5;
    u = std::fabs(u);
    if (u <= 1.0) return ((a + 2.0) * u - (a + 3.0)) * u * u + 1.0;
    if (u < 2.0) return a * (((u - 5.0) * u + 8.0) * u - 4.0);
    return 0.0;
}

struct CubicAxis {
    std::vector<std::array<int, 4>> idx;
    std::vector<std::array<double, 4>> wgt;
};

inline CubicAxis cubic_axis(int in, int out, double scale) {
    CubicAxis ax;
    ax.idx.resize(out);
    ax.wgt.resize(out);
    for (int o = 0; o < out; ++o) {
        double s = (o + 0.5) / scale - 0.5;
        double fl = std::floor(s);
        double t = s - fl;
        int base = static_cast<int>(fl) - 1;
        std::array<double, 4> w{cubic_weight(t + 1.0), cubic_weight(t), cubic_weight(1.0 - t),
                                cubic_weight(2.0 - t)};
        double sum = w[0] + w[1] + w[2] + w[3];
        for (auto& v : w) v /= sum;
        for (int k = 0; k < 4; ++k) ax.idx[o][k] = std::clamp(base + k, 0, in - 1);
        ax.wgt[o] = w;
    }
    return ax;
}

}  // namespace detail

template <typename T>
TensorT<T> bicubic_resize(const TensorT<T>& x, double scale) {
    if (x.shape.nd != 4) throw DimensionError("bicubic_resize: expected 4-D input");
    if (!(scale > 0.0)) throw ConfigError("bicubic_resize: scale must be positive");
    const int n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
    if (h < 2 || w < 2) throw ConfigError("bicubic_resize: input extents must be >= 2");
    const double ohf = h * scale, owf = w * scale;
    const int oh = static_cast<int>(std::lround(ohf));
    const int ow = static_cast<int>(std::lround(owf));
    if (std::fabs(ohf - oh) > 1e-9 || std::fabs(owf - ow) > 1e-9 || oh < 1 || ow < 1)
        throw ConfigError("bicubic_resize: scale does not produce integral output extents");

    auto ay = detail::cubic_axis(h, oh, scale);
    auto axx = detail::cubic_axis(w, ow, scale);

    TensorT<T> out = TensorT<T>::zeros(Shape{n, c, oh, ow});
    const std::int64_t in_plane = static_cast<std::int64_t>(h) * w;
    const std::int64_t out_plane = static_cast<std::int64_t>(oh) * ow;
    for (int b = 0; b < n; ++b)
        for (int k = 0; k < c; ++k) {
            const T* ip = x.ptr() + (b * c + k) * in_plane;
            T* op = out.ptr() + (b * c + k) * out_plane;
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = 0.0;
                    for (int i = 0; i < 4; ++i) {
                        const T* row = ip + static_cast<std::int64_t>(ay.idx[oy][i]) * w;
                        double racc = 0.0;
                        for (int j = 0; j < 4; ++j)
                            racc += axx.wgt[ox][j] * static_cast<double>(row[axx.idx[ox][j]]);
                        acc += ay.wgt[oy][i] * racc;
                    }
                    op[oy * ow + ox] = static_cast<T>(acc);
                }
        }
    check_finite(out, "bicubic_resize");

    auto& tape = TapeT<T>::instance();
    if (tape.tracking(x.requires_grad)) {
        out.requires_grad = true;
        tape.note_leaf(x);
        tape.record([x, out, ay, axx, n, c, in_plane, out_plane, w]() {
            auto& tp = TapeT<T>::instance();
            const std::vector<T>* go = tp.find_grad(out);
            if (!go) return;
            auto& gx = tp.grad(x);
            const int oh = out.shape[2], ow = out.shape[3];
            for (int b = 0; b < n; ++b)
                for (int k = 0; k < c; ++k) {
                    T* gp = gx.data() + (b * c + k) * in_plane;
                    const T* gout = go->data() + (b * c + k) * out_plane;
                    for (int oy = 0; oy < oh; ++oy)
                        for (int ox = 0; ox < ow; ++ox) {
                            const double g = static_cast<double>(gout[oy * ow + ox]);
                            for (int i = 0; i < 4; ++i)
                                for (int j = 0; j < 4; ++j)
                                    gp[static_cast<std::int64_t>(ay.idx[oy][i]) * w + axx.idx[ox][j]] +=
                                        static_cast<T>(g * ay.wgt[oy][i] * axx.wgt[ox][j]);
                        }
                }
        });
    }
    return out;
}

}  // namespace pgs::ops
