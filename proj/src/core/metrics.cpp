#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "degrade.hpp"

namespace pgs {

namespace {

constexpr double kPsnrCap = 100.0;

void require_same_shape(const HyperCube& a, const HyperCube& b, const char* what) {
    require_dims(a.bands == b.bands && a.height == b.height && a.width == b.width,
                 std::string(what) + ": cube shapes differ, " + std::to_string(a.bands) + "x" +
                     std::to_string(a.height) + "x" + std::to_string(a.width) + " vs " +
                     std::to_string(b.bands) + "x" + std::to_string(b.height) + "x" +
                     std::to_string(b.width));
}

double band_mse(const HyperCube& pred, const HyperCube& ref, int b) {
    const std::size_t plane = static_cast<std::size_t>(ref.height) * ref.width;
    const float* p = pred.data.data() + static_cast<std::size_t>(b) * plane;
    const float* r = ref.data.data() + static_cast<std::size_t>(b) * plane;
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
        const double d = static_cast<double>(p[i]) - r[i];
        acc += d * d;
    }
    return acc / static_cast<double>(plane);
}

// 11x11 Gaussian window, sigma 1.5, normalized to sum 1.
const std::vector<double>& ssim_window() {
    static const std::vector<double> w = [] {
        const int n = 11, c = 5;
        std::vector<double> v(n * n);
        double sum = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const double dy = i - c, dx = j - c;
                v[i * n + j] = std::exp(-(dy * dy + dx * dx) / (2.0 * 1.5 * 1.5));
                sum += v[i * n + j];
            }
        for (double& x : v) x /= sum;
        return v;
    }();
    return w;
}

}  // namespace

double psnr(const HyperCube& pred, const HyperCube& ref) {
    require_same_shape(pred, ref, "psnr");
    double acc = 0.0;
    for (int b = 0; b < ref.bands; ++b) {
        const double mse = band_mse(pred, ref, b);
        const double v = mse <= 0.0 ? kPsnrCap : std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
        acc += v;
    }
    return acc / ref.bands;
}

double ssim(const HyperCube& pred, const HyperCube& ref) {
    require_same_shape(pred, ref, "ssim");
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;  // (K*peak)^2 with peak 1
    const auto& win = ssim_window();
    const int n = 11, c = 5;
    const int h = ref.height, w = ref.width;

    double total = 0.0;
    for (int b = 0; b < ref.bands; ++b) {
        double band_acc = 0.0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double mp = 0, mr = 0, pp = 0, rr = 0, pr = 0;
                for (int i = 0; i < n; ++i) {
                    const int sy = reflect_index(y + i - c, h);
                    for (int j = 0; j < n; ++j) {
                        const int sx = reflect_index(x + j - c, w);
                        const double wv = win[i * n + j];
                        const double vp = pred.at(b, sy, sx);
                        const double vr = ref.at(b, sy, sx);
                        mp += wv * vp;
                        mr += wv * vr;
                        pp += wv * vp * vp;
                        rr += wv * vr * vr;
                        pr += wv * vp * vr;
                    }
                }
                const double var_p = pp - mp * mp;
                const double var_r = rr - mr * mr;
                const double cov = pr - mp * mr;
                const double num = (2.0 * mp * mr + c1) * (2.0 * cov + c2);
                const double den = (mp * mp + mr * mr + c1) * (var_p + var_r + c2);
                band_acc += num / den;
            }
        total += band_acc / (static_cast<double>(h) * w);
    }
    return total / ref.bands;
}

double sam_metric(const HyperCube& pred, const HyperCube& ref) {
    require_same_shape(pred, ref, "sam");
    const double eps = 1e-8;
    const std::size_t plane = static_cast<std::size_t>(ref.height) * ref.width;
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
        double dot = 0, np = 0, nr = 0;
        for (int b = 0; b < ref.bands; ++b) {
            const double vp = pred.data[static_cast<std::size_t>(b) * plane + i];
            const double vr = ref.data[static_cast<std::size_t>(b) * plane + i];
            dot += vp * vr;
            np += vp * vp;
            nr += vr * vr;
        }
        // A single sqrt over the product keeps identical spectra at exactly
        // cos = 1 (sqrt(fl(s*s)) == s for correctly rounded arithmetic).
        const double denom = std::sqrt(std::max(np, eps * eps) * std::max(nr, eps * eps));
        acc += std::acos(std::clamp(dot / denom, -1.0, 1.0));
    }
    return acc / static_cast<double>(plane);
}

double ergas(const HyperCube& pred, const HyperCube& ref, int ratio) {
    require_same_shape(pred, ref, "ergas");
    require(ratio > 0, "ergas: ratio must be positive");
    const std::size_t plane = static_cast<std::size_t>(ref.height) * ref.width;
    double acc = 0.0;
    for (int b = 0; b < ref.bands; ++b) {
        const float* r = ref.data.data() + static_cast<std::size_t>(b) * plane;
        double mean = 0.0;
        for (std::size_t i = 0; i < plane; ++i) mean += r[i];
        mean /= static_cast<double>(plane);
        const double mse = band_mse(pred, ref, b);
        acc += mse / std::max(mean * mean, 1e-12);
    }
    return 100.0 / ratio * std::sqrt(acc / ref.bands);
}

double scc(const HyperCube& pred, const HyperCube& ref) {
    require_same_shape(pred, ref, "scc");
    const int h = ref.height, w = ref.width;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<double> fp(plane), fr(plane);

    auto laplacian = [&](const float* src, std::vector<double>& dst) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double center = src[static_cast<std::size_t>(y) * w + x];
                const double up = src[static_cast<std::size_t>(reflect_index(y - 1, h)) * w + x];
                const double down = src[static_cast<std::size_t>(reflect_index(y + 1, h)) * w + x];
                const double left = src[static_cast<std::size_t>(y) * w + reflect_index(x - 1, w)];
                const double right = src[static_cast<std::size_t>(y) * w + reflect_index(x + 1, w)];
                dst[static_cast<std::size_t>(y) * w + x] = 4.0 * center - up - down - left - right;
            }
    };

    double total = 0.0;
    for (int b = 0; b < ref.bands; ++b) {
        laplacian(pred.data.data() + static_cast<std::size_t>(b) * plane, fp);
        laplacian(ref.data.data() + static_cast<std::size_t>(b) * plane, fr);
        double mp = 0, mr = 0;
        for (std::size_t i = 0; i < plane; ++i) {
            mp += fp[i];
            mr += fr[i];
        }
        mp /= static_cast<double>(plane);
        mr /= static_cast<double>(plane);
        double cov = 0, vp = 0, vr = 0;
        for (std::size_t i = 0; i < plane; ++i) {
            const double dp = fp[i] - mp, dr = fr[i] - mr;
            cov += dp * dr;
            vp += dp * dp;
            vr += dr * dr;
        }
        const double eps = 1e-12;
        double corr;
        if (vp < eps && vr < eps)
            corr = 1.0;  // both high-pass bands flat: identical structure
        else if (vp < eps || vr < eps)
            corr = 0.0;
        else
            corr = cov / std::sqrt(vp * vr);
        total += corr;
    }
    return total / ref.bands;
}

MetricsReport compute_metrics(const HyperCube& pred, const HyperCube& ref, int ratio) {
    MetricsReport m;
    m.psnr = psnr(pred, ref);
    m.ssim = ssim(pred, ref);
    m.sam = sam_metric(pred, ref);
    m.ergas = ergas(pred, ref, ratio);
    m.scc = scc(pred, ref);
    return m;
}

std::string metrics_csv_row(const std::string& scene, const MetricsReport& m) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%.9g,%.9g,%.9g", scene.c_str(), m.psnr, m.ssim,
                  m.sam, m.ergas, m.scc);
    return buf;
}

}  // namespace pgs
