#include "loopcoord/kernels/coverage.hpp"

#include <arm_neon.h>

namespace loopcoord::kernels::neon {

namespace {

inline float64x2_t sinr2(const CellBlock& b, std::size_t p) {
    float64x2_t acc = vdupq_n_f64(b.noise_mw);
    for (std::size_t j = 0; j < b.n_bs; ++j) {
        if (j == b.serving) {
            continue;
        }
        const float64x2_t g = vld1q_f64(b.gains + j * b.stride + p);
        acc = vaddq_f64(acc, vmulq_f64(g, vdupq_n_f64(b.power_mw[j])));
    }
    const float64x2_t gs = vld1q_f64(b.gains + b.serving * b.stride + p);
    return vdivq_f64(vmulq_f64(gs, vdupq_n_f64(b.power_mw[b.serving])), acc);
}

}  // namespace

void sinr(const CellBlock& block, double* out) {
    std::size_t p = block.begin;
    for (; p + 2 <= block.end; p += 2) {
        vst1q_f64(out + (p - block.begin), sinr2(block, p));
    }
    if (p < block.end) {
        CellBlock tail = block;
        tail.begin = p;
        scalar::sinr(tail, out + (p - block.begin));
    }
}

std::size_t count_covered(const CellBlock& block, double threshold) {
    const float64x2_t thr = vdupq_n_f64(threshold);
    std::size_t n = 0;
    std::size_t p = block.begin;
    for (; p + 2 <= block.end; p += 2) {
        const uint64x2_t ok = vcgeq_f64(sinr2(block, p), thr);
        n += (vgetq_lane_u64(ok, 0) & 1) + (vgetq_lane_u64(ok, 1) & 1);
    }
    if (p < block.end) {
        CellBlock tail = block;
        tail.begin = p;
        n += scalar::count_covered(tail, threshold);
    }
    return n;
}

}  // namespace loopcoord::kernels::neon
