#pragma once

#include <string>
#include <vector>

#include "cube.hpp"

namespace pgs {

// Panchromatic image: single-channel raster sharing the HR grid.
struct PanImage {
    int height = 0;
    int width = 0;
    std::vector<float> data;

    PanImage() = default;
    PanImage(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w, 0.0f) {}

    float& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    float at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }

    HyperCube to_cube() const;
    static PanImage from_cube(const HyperCube& c);
};

// Spectral response: per-band nonnegative weights, normalized to sum 1.
struct SrfVector {
    std::vector<double> weights;
};

SrfVector make_srf(std::vector<double> weights);
// Uniform over visible-range bands (0.4–0.7 µm) when a wavelength table is
// available, otherwise uniform over all bands.
SrfVector uniform_srf(int bands, const std::vector<double>& wavelengths);
// CSV with header `wavelength_um,weight`, one row per band.
SrfVector load_srf_csv(const std::string& path, int bands);

struct BlurKernel {
    int size = 1;
    double sigma = 1.0;
    std::vector<double> taps;  // size*size, sum 1

    double at(int i, int j) const { return taps[static_cast<std::size_t>(i) * size + j]; }
};

struct DegradationConfig {
    int ratio = 16;
    int kernel_size = 16;
    double kernel_sigma = 0.8493;
    double noise_std = 0.01;
    std::uint64_t seed = 0;
};

// Isotropic Gaussian sampled on a size x size grid centered at (size-1)/2,
// normalized to sum 1.
BlurKernel gaussian_kernel(int size, double sigma);

// Blur with reflect padding, then keep every ratio-th pixel starting at
// offset floor(ratio/2). Noise-free.
HyperCube degrade_spatial(const HyperCube& x, const DegradationConfig& cfg);

// Reflect-padded correlation of one plane with the kernel, full resolution.
std::vector<float> blur_plane(const float* src, int height, int width, const BlurKernel& k);

// Pixel-wise inner product of the spectrum with the SRF. Noise-free.
PanImage synthesize_pan(const HyperCube& x, const SrfVector& s);

// i.i.d. zero-mean Gaussian perturbation, deterministic per seed.
Tensor add_noise(const Tensor& img, double std, std::uint64_t seed);
HyperCube add_noise(const HyperCube& img, double std, std::uint64_t seed);
PanImage add_noise(const PanImage& img, double std, std::uint64_t seed);

// Aligned training patches cut on a non-overlapping row-major grid.
struct PatchTriple {
    HyperCube hr;
    PanImage pan;
    HyperCube lr;
};

std::vector<PatchTriple> patchify(const HyperCube& hr, const PanImage& pan, const HyperCube& lr,
                                  int hr_patch, int ratio);

// Reflect (symmetric, edge-inclusive) index mapping used by the blur.
int reflect_index(int i, int n);

}  // namespace pgs
