#pragma once

#include <vector>

#include "degrade.hpp"

namespace pgs {

// Linear mixing model machinery, double precision throughout.

// b x c matrix, column j = endmember j's spectrum. Row-major: m[band*count+j].
struct EndmemberMatrix {
    int bands = 0;
    int count = 0;
    std::vector<double> m;

    double& at(int b, int j) { return m[static_cast<std::size_t>(b) * count + j]; }
    double at(int b, int j) const { return m[static_cast<std::size_t>(b) * count + j]; }
};

// c x n matrix of per-pixel fractions. Row-major: a[comp*pixels+i].
struct AbundanceMap {
    int count = 0;
    int pixels = 0;
    std::vector<double> a;

    double& at(int j, int i) { return a[static_cast<std::size_t>(j) * pixels + i]; }
    double at(int j, int i) const { return a[static_cast<std::size_t>(j) * pixels + i]; }
};

// b x n mixed-pixel matrix (no spatial layout).
struct SpectraMatrix {
    int bands = 0;
    int pixels = 0;
    std::vector<double> m;

    double& at(int b, int i) { return m[static_cast<std::size_t>(b) * pixels + i]; }
    double at(int b, int i) const { return m[static_cast<std::size_t>(b) * pixels + i]; }
};

// Per-pixel (abundance standard deviation, PAN intensity) pairs, input order.
struct FishScatter {
    std::vector<double> astd;
    std::vector<double> intensity;
};

SpectraMatrix lmm_mix(const EndmemberMatrix& e, const AbundanceMap& a);

// S' = S.E : the SRF carried into abundance space.
std::vector<double> effective_srf(const SrfVector& s, const EndmemberMatrix& e);

// i.i.d. uniform[0,1] entries, each pixel column renormalized to sum 1.
AbundanceMap sample_abundance(int n, int c, std::uint64_t seed);

// Per-pixel population standard deviation across the c components.
std::vector<double> abundance_std(const AbundanceMap& a);

FishScatter fish_scatter(const EndmemberMatrix& e, const SrfVector& s, int n, std::uint64_t seed);

// Scatter points bucketed into ten equal deciles by ascending astd; spread is
// the population standard deviation of intensity within each decile.
struct DecileSummary {
    std::vector<double> spread;   // size 10, lowest-astd decile first
    double head_tail_ratio = 0;   // spread[0] / spread[9]
    int inversions = 0;           // adjacent strict decreases in spread
    double head_mean = 0;         // mean intensity of the lowest-astd decile
};

DecileSummary decile_summary(const FishScatter& fs);

// Smooth random spectra (sums of 3-6 wavelength Gaussians, clipped to [0,1])
// on a 0.4-2.5 um grid; stands in for a spectral library.
EndmemberMatrix synthetic_endmembers(int bands, int count, std::uint64_t seed);
std::vector<double> wavelength_grid(int bands);

// Smooth sum-to-one abundance fields built from random Gaussian blobs,
// mixed through synthetic endmembers into a full scene. Blob radii reach
// below the decimation scale so the PAN carries real detail.
HyperCube synthetic_scene(int bands, int count, int height, int width, std::uint64_t seed);

}  // namespace pgs
