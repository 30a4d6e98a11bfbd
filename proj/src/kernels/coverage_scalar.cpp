#include "loopcoord/kernels/coverage.hpp"

namespace loopcoord::kernels::scalar {

namespace {

inline double point_sinr(const CellBlock& b, std::size_t p) {
    double acc = b.noise_mw;
    for (std::size_t j = 0; j < b.n_bs; ++j) {
        if (j == b.serving) {
            continue;
        }
        const double rx = b.gains[j * b.stride + p] * b.power_mw[j];
        acc = acc + rx;
    }
    const double signal = b.gains[b.serving * b.stride + p] * b.power_mw[b.serving];
    return signal / acc;
}

}  // namespace

void sinr(const CellBlock& block, double* out) {
    for (std::size_t p = block.begin; p < block.end; ++p) {
        out[p - block.begin] = point_sinr(block, p);
    }
}

std::size_t count_covered(const CellBlock& block, double threshold) {
    std::size_t n = 0;
    for (std::size_t p = block.begin; p < block.end; ++p) {
        n += point_sinr(block, p) >= threshold ? 1 : 0;
    }
    return n;
}

}  // namespace loopcoord::kernels::scalar
