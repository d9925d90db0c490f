#include "degrade.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "rng.hpp"

namespace pgs {

HyperCube PanImage::to_cube() const {
    HyperCube c(1, height, width);
    c.data = data;
    return c;
}

PanImage PanImage::from_cube(const HyperCube& c) {
    require_dims(c.bands == 1, "pan: expected single-band cube, got " + std::to_string(c.bands));
    PanImage p(c.height, c.width);
    p.data = c.data;
    return p;
}

SrfVector make_srf(std::vector<double> weights) {
    require(!weights.empty(), "srf: empty weight vector");
    double sum = 0.0;
    for (double w : weights) {
        require(w >= 0.0 && std::isfinite(w), "srf: weights must be finite and nonnegative");
        sum += w;
    }
    require(sum > 0.0, "srf: weights sum to zero");
    for (double& w : weights) w /= sum;
    return SrfVector{std::move(weights)};
}

SrfVector uniform_srf(int bands, const std::vector<double>& wavelengths) {
    require(bands >= 1, "srf: bands must be positive");
    std::vector<double> w(static_cast<std::size_t>(bands), 0.0);
    if (static_cast<int>(wavelengths.size()) == bands) {
        for (int b = 0; b < bands; ++b)
            if (wavelengths[b] >= 0.4 && wavelengths[b] <= 0.7) w[b] = 1.0;
    }
    bool any = false;
    for (double v : w) any = any || v > 0.0;
    if (!any) std::fill(w.begin(), w.end(), 1.0);
    return make_srf(std::move(w));
}

SrfVector load_srf_csv(const std::string& path, int bands) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open srf csv " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("srf csv " + path + " is empty");
    std::vector<double> w;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string wl, wt;
        if (!std::getline(row, wl, ',') || !std::getline(row, wt, ','))
            throw IoError("srf csv " + path + ": malformed row \"" + line + "\"");
        try {
            w.push_back(std::stod(wt));
        } catch (const std::exception&) {
            throw IoError("srf csv " + path + ": non-numeric weight \"" + wt + "\"");
        }
    }
    if (static_cast<int>(w.size()) != bands)
        throw IoError("srf csv " + path + ": " + std::to_string(w.size()) + " rows for " +
                      std::to_string(bands) + " bands");
    return make_srf(std::move(w));
}

BlurKernel gaussian_kernel(int size, double sigma) {
    require(size >= 1, "blur kernel: size must be >= 1");
    require(sigma > 0.0, "blur kernel: sigma must be positive");
    BlurKernel k;
    k.size = size;
    k.sigma = sigma;
    k.taps.resize(static_cast<std::size_t>(size) * size);
    const double c = (size - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
            double d2 = (i - c) * (i - c) + (j - c) * (j - c);
            double v = std::exp(-d2 / (2.0 * sigma * sigma));
            k.taps[static_cast<std::size_t>(i) * size + j] = v;
            sum += v;
        }
    for (double& v : k.taps) v /= sum;
    return k;
}

int reflect_index(int i, int n) {
    // symmetric reflection including the edge pixel: -1 -> 0, n -> n-1
    while (i < 0 || i >= n) {
        if (i < 0) i = -1 - i;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

HyperCube degrade_spatial(const HyperCube& x, const DegradationConfig& cfg) {
    require(cfg.ratio >= 2, "degrade: ratio must be >= 2");
    require(x.height % cfg.ratio == 0 && x.width % cfg.ratio == 0,
            "degrade: extents " + std::to_string(x.height) + "x" + std::to_string(x.width) +
                " not divisible by ratio " + std::to_string(cfg.ratio));
    const BlurKernel k = gaussian_kernel(cfg.kernel_size, cfg.kernel_sigma);
    const int anchor = (k.size - 1) / 2;
    const int off = cfg.ratio / 2;
    const int lh = x.height / cfg.ratio, lw = x.width / cfg.ratio;

    HyperCube out(x.bands, lh, lw);
    out.wavelengths = x.wavelengths;
    for (int b = 0; b < x.bands; ++b)
        for (int oy = 0; oy < lh; ++oy)
            for (int ox = 0; ox < lw; ++ox) {
                const int cy = off + oy * cfg.ratio;
                const int cx = off + ox * cfg.ratio;
                double acc = 0.0;
                for (int i = 0; i < k.size; ++i) {
                    const int sy = reflect_index(cy + i - anchor, x.height);
                    for (int j = 0; j < k.size; ++j) {
                        const int sx = reflect_index(cx + j - anchor, x.width);
                        acc += k.at(i, j) * x.at(b, sy, sx);
                    }
                }
                out.at(b, oy, ox) = static_cast<float>(acc);
            }
    return out;
}

std::vector<float> blur_plane(const float* src, int height, int width, const BlurKernel& k) {
    const int anchor = (k.size - 1) / 2;
    std::vector<float> out(static_cast<std::size_t>(height) * width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int i = 0; i < k.size; ++i) {
                const int sy = reflect_index(y + i - anchor, height);
                for (int j = 0; j < k.size; ++j) {
                    const int sx = reflect_index(x + j - anchor, width);
                    acc += k.at(i, j) * src[static_cast<std::size_t>(sy) * width + sx];
                }
            }
            out[static_cast<std::size_t>(y) * width + x] = static_cast<float>(acc);
        }
    return out;
}

PanImage synthesize_pan(const HyperCube& x, const SrfVector& s) {
    require_dims(static_cast<int>(s.weights.size()) == x.bands,
                 "pan synthesis: srf length " + std::to_string(s.weights.size()) +
                     " does not match " + std::to_string(x.bands) + " bands");
    PanImage p(x.height, x.width);
    const std::size_t plane = x.plane();
    for (int b = 0; b < x.bands; ++b) {
        const double w = s.weights[b];
        const float* src = x.data.data() + static_cast<std::size_t>(b) * plane;
        for (std::size_t i = 0; i < plane; ++i)
            p.data[i] = static_cast<float>(p.data[i] + w * src[i]);
    }
    return p;
}

Tensor add_noise(const Tensor& img, double std, std::uint64_t seed) {
    require(std >= 0.0, "noise: std must be nonnegative");
    Tensor out = img.clone();
    if (std == 0.0) return out;
    Rng rng(seed);
    for (auto& v : *out.data) v = static_cast<float>(v + std * rng.normal());
    return out;
}

HyperCube add_noise(const HyperCube& img, double std, std::uint64_t seed) {
    require(std >= 0.0, "noise: std must be nonnegative");
    HyperCube out = img;
    if (std == 0.0) return out;
    Rng rng(seed);
    for (auto& v : out.data) v = static_cast<float>(v + std * rng.normal());
    return out;
}

PanImage add_noise(const PanImage& img, double std, std::uint64_t seed) {
    require(std >= 0.0, "noise: std must be nonnegative");
    PanImage out = img;
    if (std == 0.0) return out;
    Rng rng(seed);
    for (auto& v : out.data) v = static_cast<float>(v + std * rng.normal());
    return out;
}

std::vector<PatchTriple> patchify(const HyperCube& hr, const PanImage& pan, const HyperCube& lr,
                                  int hr_patch, int ratio) {
    require(hr_patch >= 1 && ratio >= 1, "patchify: patch size and ratio must be positive");
    require(hr_patch % ratio == 0, "patchify: patch size " + std::to_string(hr_patch) +
                                       " not divisible by ratio " + std::to_string(ratio));
    require(hr.height % hr_patch == 0 && hr.width % hr_patch == 0,
            "patchify: extents " + std::to_string(hr.height) + "x" + std::to_string(hr.width) +
                " not divisible by patch size " + std::to_string(hr_patch) +
                " (partial patches are not cut)");
    require_dims(pan.height == hr.height && pan.width == hr.width,
                 "patchify: pan extents do not match hr");
    require_dims(lr.height * ratio == hr.height && lr.width * ratio == hr.width,
                 "patchify: lr extents do not match hr/ratio");
    require_dims(lr.bands == hr.bands, "patchify: band counts differ");

    const int lp = hr_patch / ratio;
    const int rows = hr.height / hr_patch, cols = hr.width / hr_patch;
    std::vector<PatchTriple> out;
    out.reserve(static_cast<std::size_t>(rows) * cols);
    for (int py = 0; py < rows; ++py)
        for (int px = 0; px < cols; ++px) {
            PatchTriple t;
            t.hr = HyperCube(hr.bands, hr_patch, hr_patch);
            t.hr.wavelengths = hr.wavelengths;
            t.pan = PanImage(hr_patch, hr_patch);
            t.lr = HyperCube(lr.bands, lp, lp);
            t.lr.wavelengths = lr.wavelengths;
            for (int b = 0; b < hr.bands; ++b)
                for (int y = 0; y < hr_patch; ++y)
                    for (int x = 0; x < hr_patch; ++x)
                        t.hr.at(b, y, x) = hr.at(b, py * hr_patch + y, px * hr_patch + x);
            for (int y = 0; y < hr_patch; ++y)
                for (int x = 0; x < hr_patch; ++x)
                    t.pan.at(y, x) = pan.at(py * hr_patch + y, px * hr_patch + x);
            for (int b = 0; b < lr.bands; ++b)
                for (int y = 0; y < lp; ++y)
                    for (int x = 0; x < lp; ++x)
                        t.lr.at(b, y, x) = lr.at(b, py * lp + y, px * lp + x);
            out.push_back(std::move(t));
        }
    return out;
}

}  // namespace pgs
