#pragma once

#include <cmath>

#include "ops.hpp"
#include "tensor.hpp"

// Reconstruction losses over [n,c,h,w] cubes. Both reduce to a scalar.

namespace pgs::ops {

// Mean squared error normalized by pixel count (not element count): the
// squared residual is summed over every element and divided by n*h*w, so
// each pixel contributes its full spectral residual.
template <typename T>
TensorT<T> mse_loss(const TensorT<T>& pred, const TensorT<T>& ref) {
    if (pred.shape != ref.shape)
        throw DimensionError("mse_loss: shape mismatch " + pred.shape.str() + " vs " + ref.shape.str());
    if (pred.shape.nd != 4) throw DimensionError("mse_loss: expected 4-D cubes");
    const std::int64_t numel = pred.numel();
    const std::int64_t npix = numel / pred.shape[1];
    const T* pp = pred.ptr();
    const T* pr = ref.ptr();
    double acc = 0.0;
    for (std::int64_t i = 0; i < numel; ++i) {
        double d = static_cast<double>(pp[i]) - static_cast<double>(pr[i]);
        acc += d * d;
    }
    TensorT<T> out = TensorT<T>::scalar(static_cast<T>(acc / static_cast<double>(npix)));
    check_finite(out, "mse_loss");

    auto& tape = TapeT<T>::instance();
    if (tape.tracking(pred.requires_grad || ref.requires_grad)) {
        out.requires_grad = true;
        tape.note_leaf(pred);
        tape.note_leaf(ref);
        tape.record([pred, ref, out, numel, npix]() {
            auto& tp = TapeT<T>::instance();
            const std::vector<T>* go = tp.find_grad(out);
            if (!go) return;
            const T g = (*go)[0];
            const T* pp = pred.ptr();
            const T* pr = ref.ptr();
            const T scale = static_cast<T>(2.0 / static_cast<double>(npix));
            if (pred.requires_grad) {
                auto& gp = tp.grad(pred);
                for (std::int64_t i = 0; i < numel; ++i) gp[i] += g * scale * (pp[i] - pr[i]);
            }
            if (ref.requires_grad) {
                auto& gr = tp.grad(ref);
                for (std::int64_t i = 0; i < numel; ++i) gr[i] -= g * scale * (pp[i] - pr[i]);
            }
        });
    }
    return out;
}

// Mean spectral angle in radians. Each pixel's spectrum pair contributes
// arccos(<p,r> / (|p||r|)); norms are floored at eps and the cosine is
// clamped to [-1,1]. Pixels whose cosine sits inside the clamp band get a
// zero gradient (arccos is not differentiable at +-1).
template <typename T>
TensorT<T> sam_loss(const TensorT<T>& pred, const TensorT<T>& ref, double eps = 1e-8) {
    if (pred.shape != ref.shape)
        throw DimensionError("sam_loss: shape mismatch " + pred.shape.str() + " vs " + ref.shape.str());
    if (pred.shape.nd != 4) throw DimensionError("sam_loss: expected 4-D cubes");
    const int n = pred.shape[0], c = pred.shape[1], h = pred.shape[2], w = pred.shape[3];
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    const std::int64_t npix = static_cast<std::int64_t>(n) * plane;

    double acc = 0.0;
    const T* pp = pred.ptr();
    const T* pr = ref.ptr();
    for (int b = 0; b < n; ++b) {
        const T* pb = pp + static_cast<std::int64_t>(b) * c * plane;
        const T* rb = pr + static_cast<std::int64_t>(b) * c * plane;
        for (std::int64_t i = 0; i < plane; ++i) {
            double dot = 0.0, np = 0.0, nr = 0.0;
            for (int k = 0; k < c; ++k) {
                double a = static_cast<double>(pb[k * plane + i]);
                double r = static_cast<double>(rb[k * plane + i]);
                dot += a * r;
                np += a * a;
                nr += r * r;
            }
            double denom = std::max(std::sqrt(np), eps) * std::max(std::sqrt(nr), eps);
            double s = std::clamp(dot / denom, -1.0, 1.0);
            acc += std::acos(s);
        }
    }
    TensorT<T> out = TensorT<T>::scalar(static_cast<T>(acc / static_cast<double>(npix)));
    check_finite(out, "sam_loss");

    auto& tape = TapeT<T>::instance();
    if (tape.tracking(pred.requires_grad || ref.requires_grad)) {
        out.requires_grad = true;
        tape.note_leaf(pred);
        tape.note_leaf(ref);
        tape.record([pred, ref, out, eps, n, c, plane, npix]() {
            auto& tp = TapeT<T>::instance();
            const std::vector<T>* go = tp.find_grad(out);
            if (!go) return;
            const double g = static_cast<double>((*go)[0]) / static_cast<double>(npix);
            std::vector<T>* gp = pred.requires_grad ? &tp.grad(pred) : nullptr;
            std::vector<T>* gr = ref.requires_grad ? &tp.grad(ref) : nullptr;
            const T* pp = pred.ptr();
            const T* pr = ref.ptr();
            for (int b = 0; b < n; ++b) {
                const std::int64_t boff = static_cast<std::int64_t>(b) * c * plane;
                for (std::int64_t i = 0; i < plane; ++i) {
                    double dot = 0.0, np2 = 0.0, nr2 = 0.0;
                    for (int k = 0; k < c; ++k) {
                        double a = static_cast<double>(pp[boff + k * plane + i]);
                        double r = static_cast<double>(pr[boff + k * plane + i]);
                        dot += a * r;
                        np2 += a * a;
                        nr2 += r * r;
                    }
                    double npv = std::max(std::sqrt(np2), eps);
                    double nrv = std::max(std::sqrt(nr2), eps);
                    double denom = npv * nrv;
                    double s = dot / denom;
                    if (std::fabs(s) > 1.0 - 1e-7) continue;  // clamp band: subgradient 0
                    double dacos = -1.0 / std::sqrt(1.0 - s * s);
                    for (int k = 0; k < c; ++k) {
                        double a = static_cast<double>(pp[boff + k * plane + i]);
                        double r = static_cast<double>(pr[boff + k * plane + i]);
                        if (gp) {
                            double ds = r / denom - (np2 > eps * eps ? s * a / np2 : 0.0);
                            (*gp)[boff + k * plane + i] += static_cast<T>(g * dacos * ds);
                        }
                        if (gr) {
                            double ds = a / denom - (nr2 > eps * eps ? s * r / nr2 : 0.0);
                            (*gr)[boff + k * plane + i] += static_cast<T>(g * dacos * ds);
                        }
                    }
                }
            }
        });
    }
    return out;
}

// Training objective: MSE plus a spectral-angle term weighted by alpha.
template <typename T>
TensorT<T> combined_loss(const TensorT<T>& pred, const TensorT<T>& ref, T alpha) {
    TensorT<T> m = mse_loss(pred, ref);
    TensorT<T> s = sam_loss(pred, ref);
    return add(m, mul(s, alpha));
}

}  // namespace pgs::ops
