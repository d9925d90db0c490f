#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace pgs {

// Seeded generator used everywhere randomness appears. Gaussian draws go
// through an explicit Box-Muller pair so the value stream depends only on
// the mt19937 sequence, not on the standard library's distribution
// implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : eng_(static_cast<std::mt19937::result_type>(seed)) {}

    // uniform in [0,1)
    double uniform() {
        return static_cast<double>(eng_()) * (1.0 / 4294967296.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(uniform() * (hi - lo + 1.0));
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0, u2 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 1e-300);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Fisher-Yates over [0, n)
    template <typename Vec>
    void shuffle(Vec& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform() * static_cast<double>(i));
            if (j >= i) j = i - 1;
            std::swap(v[i - 1], v[j]);
        }
    }

    std::string state() const {
        std::ostringstream os;
        os << eng_ << ' ' << (have_spare_ ? 1 : 0) << ' ' << std::hexfloat << spare_;
        return os.str();
    }

    void restore(const std::string& s) {
        std::istringstream is(s);
        int hs = 0;
        std::string sp;
        is >> eng_ >> hs >> sp;
        have_spare_ = hs != 0;
        spare_ = std::strtod(sp.c_str(), nullptr);
    }

private:
    std::mt19937 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace pgs
