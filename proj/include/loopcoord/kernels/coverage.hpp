#pragma once

// Inner loop of the Monte Carlo coverage estimate: SINR of every sample
// point of one cell against every base station.
//
// All variants accumulate interference in the same order (noise first, then
// base stations by increasing index, skipping the serving one) with separate
// multiply and add, so every variant is bit-identical to the scalar
// reference.

#include <cstddef>
#include <string>

namespace loopcoord::kernels {

struct CellBlock {
    const double* gains = nullptr;    // n_bs x stride, base-station major, linear
    std::size_t stride = 0;           // total number of sample points
    std::size_t begin = 0;            // first sample point of the cell
    std::size_t end = 0;              // one past the last
    std::size_t serving = 0;
    std::size_t n_bs = 0;
    const double* power_mw = nullptr; // n_bs transmit powers, linear mW
    double noise_mw = 0.0;
};

enum class Isa { Scalar, Avx2, Neon };

/// out[k] = SINR of sample point begin + k.
using SinrFn = void (*)(const CellBlock&, double* out);

/// Number of sample points with SINR >= threshold.
using CountFn = std::size_t (*)(const CellBlock&, double threshold);

struct KernelTable {
    Isa isa;
    SinrFn sinr;
    CountFn count_covered;
};

namespace scalar {
void sinr(const CellBlock& block, double* out);
std::size_t count_covered(const CellBlock& block, double threshold);
}  // namespace scalar

#if defined(LOOPCOORD_BUILD_AVX2)
namespace avx2 {
void sinr(const CellBlock& block, double* out);
std::size_t count_covered(const CellBlock& block, double threshold);
}  // namespace avx2
#endif

#if defined(LOOPCOORD_BUILD_NEON)
namespace neon {
void sinr(const CellBlock& block, double* out);
std::size_t count_covered(const CellBlock& block, double threshold);
}  // namespace neon
#endif

/// Table for a specific ISA, or nullptr if it was not compiled in or the
/// CPU lacks it.
const KernelTable* table_for(Isa isa);

/// Best available table, chosen once at first use. The LOOPCOORD_KERNEL
/// environment variable (scalar|avx2|neon) overrides the choice.
const KernelTable& active();

const char* to_string(Isa isa);

}  // namespace loopcoord::kernels
