#include "unmix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rng.hpp"

namespace pgs {

SpectraMatrix lmm_mix(const EndmemberMatrix& e, const AbundanceMap& a) {
    require_dims(e.count == a.count, "lmm: endmember count " + std::to_string(e.count) +
                                         " does not match abundance rows " +
                                         std::to_string(a.count));
    SpectraMatrix x;
    x.bands = e.bands;
    x.pixels = a.pixels;
    x.m.assign(static_cast<std::size_t>(x.bands) * x.pixels, 0.0);
    for (int b = 0; b < e.bands; ++b)
        for (int j = 0; j < e.count; ++j) {
            const double w = e.at(b, j);
            if (w == 0.0) continue;
            const double* row = a.a.data() + static_cast<std::size_t>(j) * a.pixels;
            double* out = x.m.data() + static_cast<std::size_t>(b) * x.pixels;
            for (int i = 0; i < a.pixels; ++i) out[i] += w * row[i];
        }
    return x;
}

std::vector<double> effective_srf(const SrfVector& s, const EndmemberMatrix& e) {
    require_dims(static_cast<int>(s.weights.size()) == e.bands,
                 "effective srf: srf length does not match endmember bands");
    std::vector<double> sp(static_cast<std::size_t>(e.count), 0.0);
    for (int b = 0; b < e.bands; ++b)
        for (int j = 0; j < e.count; ++j) sp[j] += s.weights[b] * e.at(b, j);
    return sp;
}

AbundanceMap sample_abundance(int n, int c, std::uint64_t seed) {
    require(n >= 1, "abundance: pixel count must be >= 1");
    require(c >= 2, "abundance: component count must be >= 2");
    Rng rng(seed);
    AbundanceMap a;
    a.count = c;
    a.pixels = n;
    a.a.resize(static_cast<std::size_t>(c) * n);
    for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int j = 0; j < c; ++j) {
            double v = rng.uniform();
            a.at(j, i) = v;
            sum += v;
        }
        if (sum <= 0.0) {  // all-zero draw is essentially impossible; keep it valid
            for (int j = 0; j < c; ++j) a.at(j, i) = 1.0 / c;
            continue;
        }
        for (int j = 0; j < c; ++j) a.at(j, i) /= sum;
    }
    return a;
}

std::vector<double> abundance_std(const AbundanceMap& a) {
    require(a.count >= 2, "abundance std: needs >= 2 components");
    std::vector<double> out(static_cast<std::size_t>(a.pixels));
    for (int i = 0; i < a.pixels; ++i) {
        double mean = 0.0;
        for (int j = 0; j < a.count; ++j) mean += a.at(j, i);
        mean /= a.count;
        double var = 0.0;
        for (int j = 0; j < a.count; ++j) {
            double d = a.at(j, i) - mean;
            var += d * d;
        }
        out[i] = std::sqrt(var / a.count);
    }
    return out;
}

FishScatter fish_scatter(const EndmemberMatrix& e, const SrfVector& s, int n, std::uint64_t seed) {
    AbundanceMap a = sample_abundance(n, e.count, seed);
    std::vector<double> sp = effective_srf(s, e);
    FishScatter f;
    f.astd = abundance_std(a);
    f.intensity.resize(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < e.count; ++j) acc += sp[j] * a.at(j, i);
        f.intensity[i] = acc;
    }
    return f;
}

DecileSummary decile_summary(const FishScatter& fs) {
    const int n = static_cast<int>(fs.astd.size());
    require(static_cast<int>(fs.intensity.size()) == n, "decile summary: column lengths differ");
    require(n >= 10, "decile summary: need at least 10 points");

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&fs](int a, int b) {
        if (fs.astd[a] != fs.astd[b]) return fs.astd[a] < fs.astd[b];
        return a < b;
    });

    DecileSummary out;
    out.spread.resize(10, 0.0);
    for (int d = 0; d < 10; ++d) {
        const int lo = static_cast<int>(static_cast<std::int64_t>(d) * n / 10);
        const int hi = static_cast<int>(static_cast<std::int64_t>(d + 1) * n / 10);
        double mean = 0.0;
        for (int i = lo; i < hi; ++i) mean += fs.intensity[order[i]];
        mean /= hi - lo;
        double var = 0.0;
        for (int i = lo; i < hi; ++i) {
            const double dv = fs.intensity[order[i]] - mean;
            var += dv * dv;
        }
        out.spread[d] = std::sqrt(var / (hi - lo));
        if (d == 0) out.head_mean = mean;
        if (d > 0 && out.spread[d] < out.spread[d - 1]) ++out.inversions;
    }
    if (out.spread[9] > 0.0)
        out.head_tail_ratio = out.spread[0] / out.spread[9];
    else
        out.head_tail_ratio = out.spread[0] > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return out;
}

std::vector<double> wavelength_grid(int bands) {
    require(bands >= 1, "wavelength grid: bands must be positive");
    std::vector<double> wl(static_cast<std::size_t>(bands));
    if (bands == 1) {
        wl[0] = 0.55;
        return wl;
    }
    for (int b = 0; b < bands; ++b) wl[b] = 0.4 + (2.5 - 0.4) * b / (bands - 1.0);
    return wl;
}

EndmemberMatrix synthetic_endmembers(int bands, int count, std::uint64_t seed) {
    require(bands >= 2, "endmembers: need >= 2 bands");
    require(count >= 1 && count < bands, "endmembers: count must satisfy 1 <= c < bands");
    Rng rng(seed);
    const std::vector<double> wl = wavelength_grid(bands);
    EndmemberMatrix e;
    e.bands = bands;
    e.count = count;
    e.m.resize(static_cast<std::size_t>(bands) * count);
    for (int j = 0; j < count; ++j) {
        const int lobes = rng.uniform_int(3, 6);
        std::vector<double> mu(lobes), sg(lobes), amp(lobes);
        for (int g = 0; g < lobes; ++g) {
            mu[g] = rng.uniform(0.4, 2.5);
            sg[g] = rng.uniform(0.08, 0.5);
            amp[g] = rng.uniform(0.15, 0.9);
        }
        for (int b = 0; b < bands; ++b) {
            double v = 0.0;
            for (int g = 0; g < lobes; ++g) {
                double d = (wl[b] - mu[g]) / sg[g];
                v += amp[g] * std::exp(-0.5 * d * d);
            }
            e.at(b, j) = std::clamp(v, 0.0, 1.0);
        }
    }
    return e;
}

HyperCube synthetic_scene(int bands, int count, int height, int width, std::uint64_t seed) {
    require(height >= 2 && width >= 2, "scene: extents must be >= 2");
    Rng rng(seed);
    EndmemberMatrix e = synthetic_endmembers(bands, count, seed * 2654435761ULL + 1);

    // per-endmember blob field g_j >= 0
    std::vector<double> fields(static_cast<std::size_t>(count) * height * width, 0.0);
    const double max_sigma = std::max(3.0, height / 4.0);
    for (int j = 0; j < count; ++j) {
        double* f = fields.data() + static_cast<std::size_t>(j) * height * width;
        const int blobs = rng.uniform_int(6, 12);
        for (int q = 0; q < blobs; ++q) {
            const double cy = rng.uniform(0.0, height);
            const double cx = rng.uniform(0.0, width);
            const double sigma = rng.uniform(1.5, max_sigma);
            const double amp = rng.uniform(0.3, 1.0);
            const double inv = 1.0 / (2.0 * sigma * sigma);
            for (int y = 0; y < height; ++y)
                for (int x = 0; x < width; ++x) {
                    double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
                    f[static_cast<std::size_t>(y) * width + x] += amp * std::exp(-d2 * inv);
                }
        }
    }

    // softened sum-to-one normalization keeps every component present
    HyperCube scene(bands, height, width);
    scene.wavelengths = wavelength_grid(bands);
    const std::size_t plane = scene.plane();
    for (std::size_t p = 0; p < plane; ++p) {
        double denom = 0.0;
        for (int j = 0; j < count; ++j) denom += fields[j * plane + p] + 0.05;
        for (int b = 0; b < bands; ++b) {
            double acc = 0.0;
            for (int j = 0; j < count; ++j)
                acc += e.at(b, j) * (fields[j * plane + p] + 0.05) / denom;
            scene.data[b * plane + p] = static_cast<float>(acc);
        }
    }
    return scene;
}

}  // namespace pgs
