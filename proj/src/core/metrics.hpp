#pragma once

#include <string>

#include "cube.hpp"

// Full-reference quality metrics between a fused cube and its ground truth.
// All accumulation is double precision; inputs are reflectance-normalized so
// the peak value is fixed at 1.0.

namespace pgs {

struct MetricsReport {
    double psnr = 0.0;   // dB, capped at 100 for identical bands
    double ssim = 0.0;   // [-1, 1]
    double sam = 0.0;    // radians, [0, pi]
    double ergas = 0.0;  // >= 0
    double scc = 0.0;    // [-1, 1]
};

// Per-band 10*log10(1 / MSE_band), averaged over bands; an exact band caps
// at 100 dB.
double psnr(const HyperCube& pred, const HyperCube& ref);

// Mean structural similarity with an 11x11 Gaussian window (sigma 1.5),
// K1=0.01 / K2=0.03 against peak 1.0, symmetric-reflect padding, per band
// then band-averaged.
double ssim(const HyperCube& pred, const HyperCube& ref);

// Mean spectral angle in radians over pixels; zero-norm spectra are guarded
// by epsilon 1e-8 and the arccos argument is clamped to [-1, 1].
double sam_metric(const HyperCube& pred, const HyperCube& ref);

// 100/ratio * sqrt(mean over bands of RMSE_band^2 / mean_band^2) with the
// band mean taken from the reference.
double ergas(const HyperCube& pred, const HyperCube& ref, int ratio);

// Pearson correlation of 3x3 Laplacian-filtered bands (reflect padding),
// band-averaged. Two flat filtered bands correlate as 1; only one flat
// counts as 0.
double scc(const HyperCube& pred, const HyperCube& ref);

MetricsReport compute_metrics(const HyperCube& pred, const HyperCube& ref, int ratio);

// `scene,psnr,ssim,sam,ergas,scc` payload row (no newline).
std::string metrics_csv_row(const std::string& scene, const MetricsReport& m);

}  // namespace pgs
