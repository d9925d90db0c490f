#pragma once

#include <array>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace pgs {

// Hyperspectral cube: band-sequential 32-bit float raster, values nominally
// in [0,1]. A panchromatic image is the bands==1 case. Wavelengths (µm) are
// optional metadata carried through simulation for SRF synthesis.
struct HyperCube {
    int bands = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;           // size bands*height*width
    std::vector<double> wavelengths;   // empty or size bands

    HyperCube() = default;
    HyperCube(int b, int h, int w)
        : bands(b), height(h), width(w),
          data(static_cast<std::size_t>(b) * h * w, 0.0f) {}

    float& at(int b, int y, int x) {
        return data[(static_cast<std::size_t>(b) * height + y) * width + x];
    }
    float at(int b, int y, int x) const {
        return data[(static_cast<std::size_t>(b) * height + y) * width + x];
    }
    std::size_t plane() const { return static_cast<std::size_t>(height) * width; }

    // [1, bands, height, width] view copy for the network.
    Tensor to_tensor() const;
    static HyperCube from_tensor(const Tensor& t, const std::vector<double>& wavelengths = {});
};

// On-disk form: <path>.json sidecar + <path>.f32 little-endian payload.
// A path that already carries one of those extensions is taken as the pair's
// basename.
HyperCube read_cube(const std::string& path);
void write_cube(const HyperCube& cube, const std::string& path);

// Binary PPM (P6) of three bands, each stretched between its 1st and 99th
// percentile. A flat band renders mid-gray.
void write_quicklook(const HyperCube& cube, std::array<int, 3> band_indices,
                     const std::string& path);

// Binary PGM (P5) of the band-mean absolute difference, displayed over the
// fixed range [0, 0.05].
void write_error_map(const HyperCube& pred, const HyperCube& ref, const std::string& path);

// CSV with LF newlines, '.' decimal separator, %.9g numbers.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

std::string cube_basename(const std::string& path);

}  // namespace pgs
