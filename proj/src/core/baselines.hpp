#pragma once

#include "cube.hpp"
#include "degrade.hpp"

// Reference fusion methods: plain bicubic upsampling (the comparison floor)
// and smoothing-filter-based intensity modulation.

namespace pgs {

// Per-band bicubic upsampling by the integer ratio; ratio 1 is the identity.
HyperCube bicubic_baseline(const HyperCube& lr, int ratio);

// Per band: out = lr_up * pan / smooth(pan), the smoothing being the
// degradation blur kernel with reflect padding. The denominator is guarded
// at 1e-6, and scaling the PAN by any positive factor cancels out.
HyperCube sfim(const HyperCube& lr_up, const PanImage& pan, const BlurKernel& kernel);

}  // namespace pgs
