#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace pgs {

// Error taxonomy. The C API and CLI map these onto stable status codes:
// config/dimension -> 2, I/O -> 3, numerical abort -> 4.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimensionError : ConfigError {
    using ConfigError::ConfigError;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Extents of an N-D array, N <= 4, row-major storage.
struct Shape {
    int nd = 0;
    std::array<int, 4> d{1, 1, 1, 1};

    Shape() = default;
    Shape(std::initializer_list<int> dims) {
        if (dims.size() > 4) throw DimensionError("shape: more than 4 dims");
        nd = static_cast<int>(dims.size());
        int i = 0;
        for (int v : dims) d[i++] = v;
        for (; i < 4; ++i) d[i] = 1;
    }

    int operator[](int i) const { return d[i]; }
    int& operator[](int i) { return d[i]; }

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (int i = 0; i < nd; ++i) n *= d[i];
        return nd == 0 ? 0 : n;
    }

    bool operator==(const Shape& o) const {
        if (nd != o.nd) return false;
        for (int i = 0; i < nd; ++i)
            if (d[i] != o.d[i]) return false;
        return true;
    }
    bool operator!=(const Shape& o) const { return !(*this == o); }

    // Padded to 4 dims with leading ones, the canonical broadcast layout.
    std::array<int, 4> padded() const {
        std::array<int, 4> p{1, 1, 1, 1};
        for (int i = 0; i < nd; ++i) p[4 - nd + i] = d[i];
        return p;
    }

    std::string str() const {
        std::string s = "[";
        for (int i = 0; i < nd; ++i) s += (i ? "," : "") + std::to_string(d[i]);
        return s + "]";
    }
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ConfigError(msg);
}

inline void require_dims(bool cond, const std::string& msg) {
    if (!cond) throw DimensionError(msg);
}

}  // namespace pgs
