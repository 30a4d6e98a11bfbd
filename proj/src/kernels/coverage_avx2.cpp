#include "loopcoord/kernels/coverage.hpp"

#include <immintrin.h>

namespace loopcoord::kernels::avx2 {

namespace {

// SINR of the four points starting at p, same operation order as the
// scalar reference.
inline __m256d sinr4(const CellBlock& b, std::size_t p) {
    __m256d acc = _mm256_set1_pd(b.noise_mw);
    for (std::size_t j = 0; j < b.n_bs; ++j) {
        if (j == b.serving) {
            continue;
        }
        const __m256d g = _mm256_loadu_pd(b.gains + j * b.stride + p);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(g, _mm256_set1_pd(b.power_mw[j])));
    }
    const __m256d gs = _mm256_loadu_pd(b.gains + b.serving * b.stride + p);
    const __m256d signal = _mm256_mul_pd(gs, _mm256_set1_pd(b.power_mw[b.serving]));
    return _mm256_div_pd(signal, acc);
}

}  // namespace

void sinr(const CellBlock& block, double* out) {
    std::size_t p = block.begin;
    for (; p + 4 <= block.end; p += 4) {
        _mm256_storeu_pd(out + (p - block.begin), sinr4(block, p));
    }
    if (p < block.end) {
        CellBlock tail = block;
        tail.begin = p;
        scalar::sinr(tail, out + (p - block.begin));
    }
}

std::size_t count_covered(const CellBlock& block, double threshold) {
    const __m256d thr = _mm256_set1_pd(threshold);
    std::size_t n = 0;
    std::size_t p = block.begin;
    for (; p + 4 <= block.end; p += 4) {
        const __m256d ok = _mm256_cmp_pd(sinr4(block, p), thr, _CMP_GE_OQ);
        n += static_cast<std::size_t>(__builtin_popcount(static_cast<unsigned>(_mm256_movemask_pd(ok))));
    }
    if (p < block.end) {
        CellBlock tail = block;
        tail.begin = p;
        n += scalar::count_covered(tail, threshold);
    }
    return n;
}

}  // namespace loopcoord::kernels::avx2
