#include "baselines.hpp"

#include <algorithm>

#include "ops.hpp"

namespace pgs {

HyperCube bicubic_baseline(const HyperCube& lr, int ratio) {
    require(ratio >= 1, "bicubic baseline: ratio must be >= 1");
    if (ratio == 1) return lr;
    NoGradGuardT<float> off;
    Tensor up = ops::bicubic_resize(lr.to_tensor(), static_cast<double>(ratio));
    HyperCube out = HyperCube::from_tensor(up);
    out.wavelengths = lr.wavelengths;
    return out;
}

HyperCube sfim(const HyperCube& lr_up, const PanImage& pan, const BlurKernel& kernel) {
    require_dims(lr_up.height == pan.height && lr_up.width == pan.width,
                 "sfim: cube extents " + std::to_string(lr_up.height) + "x" +
                     std::to_string(lr_up.width) + " differ from pan " +
                     std::to_string(pan.height) + "x" + std::to_string(pan.width));

    const std::vector<float> smooth = blur_plane(pan.data.data(), pan.height, pan.width, kernel);
    const std::size_t plane = static_cast<std::size_t>(lr_up.height) * lr_up.width;
    HyperCube out(lr_up.bands, lr_up.height, lr_up.width);
    out.wavelengths = lr_up.wavelengths;
    for (int b = 0; b < lr_up.bands; ++b) {
        const float* src = lr_up.data.data() + static_cast<std::size_t>(b) * plane;
        float* dst = out.data.data() + static_cast<std::size_t>(b) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
            const double denom = std::max(static_cast<double>(smooth[i]), 1e-6);
            dst[i] = static_cast<float>(src[i] * (pan.data[i] / denom));
        }
    }
    return out;
}

}  // namespace pgs
