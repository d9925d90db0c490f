#include "cube.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace pgs {

static_assert(std::endian::native == std::endian::little,
              "raster payloads are little-endian; add byte swapping for this platform");

Tensor HyperCube::to_tensor() const {
    Tensor t = Tensor::zeros(Shape{1, bands, height, width});
    std::copy(data.begin(), data.end(), t.data->begin());
    return t;
}

HyperCube HyperCube::from_tensor(const Tensor& t, const std::vector<double>& wavelengths) {
    require_dims(t.shape.nd == 4 && t.shape[0] == 1,
                 "cube: expected [1,b,h,w] tensor, got " + t.shape.str());
    HyperCube c(t.shape[1], t.shape[2], t.shape[3]);
    std::copy(t.data->begin(), t.data->end(), c.data.begin());
    c.wavelengths = wavelengths;
    return c;
}

std::string cube_basename(const std::string& path) {
    for (const char* ext : {".json", ".f32"}) {
        std::size_t n = std::string(ext).size();
        if (path.size() > n && path.compare(path.size() - n, n, ext) == 0)
            return path.substr(0, path.size() - n);
    }
    return path;
}

HyperCube read_cube(const std::string& path) {
    const std::string base = cube_basename(path);
    std::ifstream side(base + ".json");
    if (!side) throw IoError("cannot open sidecar " + base + ".json");
    nlohmann::json j;
    try {
        side >> j;
    } catch (const std::exception& e) {
        throw IoError("malformed sidecar " + base + ".json: " + e.what());
    }
    HyperCube c;
    try {
        c.bands = j.at("bands").get<int>();
        c.height = j.at("height").get<int>();
        c.width = j.at("width").get<int>();
        std::string dtype = j.at("dtype").get<std::string>();
        if (dtype != "f32le") throw IoError("unsupported dtype \"" + dtype + "\" in " + base + ".json");
        if (j.contains("wavelengths")) c.wavelengths = j["wavelengths"].get<std::vector<double>>();
    } catch (const IoError&) {
        throw;
    } catch (const std::exception& e) {
        throw IoError("malformed sidecar " + base + ".json: " + e.what());
    }
    if (c.bands < 1 || c.height < 1 || c.width < 1)
        throw IoError("sidecar " + base + ".json declares non-positive extents");
    if (!c.wavelengths.empty() && static_cast<int>(c.wavelengths.size()) != c.bands)
        throw IoError("sidecar " + base + ".json wavelength count does not match bands");

    std::ifstream payload(base + ".f32", std::ios::binary);
    if (!payload) throw IoError("cannot open payload " + base + ".f32");
    payload.seekg(0, std::ios::end);
    const std::int64_t actual = payload.tellg();
    const std::int64_t expected =
        4LL * c.bands * c.height * c.width;
    if (actual != expected)
        throw IoError("payload " + base + ".f32 length mismatch: expected " +
                      std::to_string(expected) + " bytes, got " + std::to_string(actual));
    payload.seekg(0);
    c.data.resize(static_cast<std::size_t>(c.bands) * c.height * c.width);
    payload.read(reinterpret_cast<char*>(c.data.data()), expected);
    if (!payload) throw IoError("short read on payload " + base + ".f32");
    return c;
}

void write_cube(const HyperCube& cube, const std::string& path) {
    require(cube.bands >= 1 && cube.height >= 1 && cube.width >= 1,
            "cube: non-positive extents");
    require(cube.data.size() == static_cast<std::size_t>(cube.bands) * cube.plane(),
            "cube: data size does not match extents");
    const std::string base = cube_basename(path);
    nlohmann::json j{{"bands", cube.bands},
                     {"height", cube.height},
                     {"width", cube.width},
                     {"dtype", "f32le"}};
    if (!cube.wavelengths.empty()) {
        if (static_cast<int>(cube.wavelengths.size()) != cube.bands)
            throw ConfigError("cube: wavelength count does not match bands");
        j["wavelengths"] = cube.wavelengths;
    }
    std::ofstream side(base + ".json");
    if (!side) throw IoError("cannot write sidecar " + base + ".json");
    side << j.dump(2) << '\n';
    if (!side.flush()) throw IoError("write failed for " + base + ".json");

    std::ofstream payload(base + ".f32", std::ios::binary);
    if (!payload) throw IoError("cannot write payload " + base + ".f32");
    payload.write(reinterpret_cast<const char*>(cube.data.data()),
                  static_cast<std::streamsize>(cube.data.size() * 4));
    if (!payload.flush()) throw IoError("write failed for " + base + ".f32");
}

namespace {

// value of the q-th percentile by nearest-rank over a sorted copy
float percentile(std::vector<float> v, double q) {
    std::sort(v.begin(), v.end());
    const auto idx = static_cast<std::size_t>(
        std::llround(q / 100.0 * static_cast<double>(v.size() - 1)));
    return v[std::min(idx, v.size() - 1)];
}

unsigned char stretch(float v, float lo, float hi) {
    if (hi - lo < 1e-12f) return 128;  // flat band
    float t = (v - lo) / (hi - lo);
    t = std::clamp(t, 0.0f, 1.0f);
    return static_cast<unsigned char>(std::lround(t * 255.0f));
}

}  // namespace

void write_quicklook(const HyperCube& cube, std::array<int, 3> band_indices,
                     const std::string& path) {
    for (int b : band_indices)
        require(b >= 0 && b < cube.bands,
                "quicklook: band index " + std::to_string(b) + " out of range [0," +
                    std::to_string(cube.bands - 1) + "]");
    std::array<float, 3> lo{}, hi{};
    for (int k = 0; k < 3; ++k) {
        const float* p = cube.data.data() + static_cast<std::size_t>(band_indices[k]) * cube.plane();
        std::vector<float> band(p, p + cube.plane());
        lo[k] = percentile(band, 1.0);
        hi[k] = percentile(std::move(band), 99.0);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write quicklook " + path);
    out << "P6\n" << cube.width << ' ' << cube.height << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(cube.width) * 3);
    for (int y = 0; y < cube.height; ++y) {
        for (int x = 0; x < cube.width; ++x)
            for (int k = 0; k < 3; ++k)
                row[x * 3 + k] = stretch(cube.at(band_indices[k], y, x), lo[k], hi[k]);
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out.flush()) throw IoError("write failed for " + path);
}

void write_error_map(const HyperCube& pred, const HyperCube& ref, const std::string& path) {
    require_dims(pred.bands == ref.bands && pred.height == ref.height && pred.width == ref.width,
                 "error map: cube shapes differ");
    constexpr double kRange = 0.05;  // fixed display range
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write error map " + path);
    out << "P5\n" << pred.width << ' ' << pred.height << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(pred.width));
    for (int y = 0; y < pred.height; ++y) {
        for (int x = 0; x < pred.width; ++x) {
            double acc = 0.0;
            for (int b = 0; b < pred.bands; ++b)
                acc += std::fabs(static_cast<double>(pred.at(b, y, x)) - ref.at(b, y, x));
            double t = std::clamp(acc / pred.bands / kRange, 0.0, 1.0);
            row[x] = static_cast<unsigned char>(std::lround(t * 255.0));
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out.flush()) throw IoError("write failed for " + path);
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path, std::ios::binary);  // binary: keep LF on every platform
    if (!out) throw IoError("cannot write csv " + path);
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    char buf[32];
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.9g", r[i]);
            out << (i ? "," : "") << buf;
        }
        out << '\n';
    }
    if (!out.flush()) throw IoError("write failed for " + path);
}

}  // namespace pgs
