#include "pgsharp.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "core/metrics.hpp"
#include "core/pipeline.hpp"

namespace {

thread_local std::string g_last_error;

struct NullArg : pgs::ConfigError {
    using ConfigError::ConfigError;
};

template <typename Fn>
pgsharp_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return PGSHARP_OK;
    } catch (const pgs::IoError& e) {
        g_last_error = e.what();
        return PGSHARP_ERR_IO;
    } catch (const pgs::NumericError& e) {
        g_last_error = e.what();
        return PGSHARP_ERR_NUMERIC;
    } catch (const pgs::ConfigError& e) {  // includes DimensionError
        g_last_error = e.what();
        return PGSHARP_ERR_CONFIG;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return PGSHARP_ERR_CONFIG;
    }
}

void check_arg(bool ok, const char* what) {
    if (!ok) throw NullArg(std::string("null argument: ") + what);
}

}  // namespace

struct pgsharp_cube {
    pgs::HyperCube cube;
};

extern "C" {

const char* pgsharp_last_error(void) { return g_last_error.c_str(); }

const char* pgsharp_version(void) { return "1.0.0"; }

pgsharp_status pgsharp_cube_create(int bands, int height, int width, const float* data,
                                   pgsharp_cube** out) {
    return guarded([&] {
        check_arg(out != nullptr, "out");
        pgs::require(bands >= 1 && height >= 1 && width >= 1,
                     "cube dimensions must be positive");
        auto* handle = new pgsharp_cube{pgs::HyperCube(bands, height, width)};
        if (data)
            std::memcpy(handle->cube.data.data(), data,
                        handle->cube.data.size() * sizeof(float));
        *out = handle;
    });
}

pgsharp_status pgsharp_cube_read(const char* path, pgsharp_cube** out) {
    return guarded([&] {
        check_arg(path != nullptr, "path");
        check_arg(out != nullptr, "out");
        *out = new pgsharp_cube{pgs::read_cube(path)};
    });
}

pgsharp_status pgsharp_cube_write(const pgsharp_cube* cube, const char* path) {
    return guarded([&] {
        check_arg(cube != nullptr, "cube");
        check_arg(path != nullptr, "path");
        pgs::write_cube(cube->cube, path);
    });
}

void pgsharp_cube_free(pgsharp_cube* cube) { delete cube; }

int pgsharp_cube_bands(const pgsharp_cube* cube) { return cube ? cube->cube.bands : 0; }
int pgsharp_cube_height(const pgsharp_cube* cube) { return cube ? cube->cube.height : 0; }
int pgsharp_cube_width(const pgsharp_cube* cube) { return cube ? cube->cube.width : 0; }
const float* pgsharp_cube_data(const pgsharp_cube* cube) {
    return cube ? cube->cube.data.data() : nullptr;
}

pgsharp_status pgsharp_compare(const pgsharp_cube* pred, const pgsharp_cube* ref, int ratio,
                               pgsharp_metrics* out) {
    return guarded([&] {
        check_arg(pred != nullptr, "pred");
        check_arg(ref != nullptr, "ref");
        check_arg(out != nullptr, "out");
        const pgs::MetricsReport m = pgs::compute_metrics(pred->cube, ref->cube, ratio);
        out->psnr = m.psnr;
        out->ssim = m.ssim;
        out->sam = m.sam;
        out->ergas = m.ergas;
        out->scc = m.scc;
    });
}

pgsharp_status pgsharp_run(const char* command, const char* options_json, char** result_json) {
    return guarded([&] {
        check_arg(command != nullptr, "command");
        pgs::Json opt = pgs::Json::object();
        if (options_json && options_json[0] != '\0') {
            try {
                opt = pgs::Json::parse(options_json);
            } catch (const pgs::Json::parse_error& e) {
                throw pgs::ConfigError(std::string("options: ") + e.what());
            }
        }
        const pgs::Json result = pgs::run_command(command, opt);
        if (result_json) {
            const std::string text = result.dump();
            char* buf = static_cast<char*>(std::malloc(text.size() + 1));
            if (!buf) throw pgs::IoError("out of memory");
            std::memcpy(buf, text.c_str(), text.size() + 1);
            *result_json = buf;
        }
    });
}

void pgsharp_free(char* p) { std::free(p); }

}  // extern "C"
