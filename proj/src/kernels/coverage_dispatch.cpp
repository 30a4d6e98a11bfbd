#include "loopcoord/kernels/coverage.hpp"

#include <cstdlib>
#include <cstring>

namespace loopcoord::kernels {

namespace {

constexpr KernelTable kScalar{Isa::Scalar, &scalar::sinr, &scalar::count_covered};
#if defined(LOOPCOORD_BUILD_AVX2)
constexpr KernelTable kAvx2{Isa::Avx2, &avx2::sinr, &avx2::count_covered};
#endif
#if defined(LOOPCOORD_BUILD_NEON)
constexpr KernelTable kNeon{Isa::Neon, &neon::sinr, &neon::count_covered};
#endif

const KernelTable& select() {
    if (const char* forced = std::getenv("LOOPCOORD_KERNEL")) {
        if (std::strcmp(forced, "scalar") == 0) {
            return kScalar;
        }
        if (std::strcmp(forced, "avx2") == 0 && table_for(Isa::Avx2)) {
            return *table_for(Isa::Avx2);
        }
        if (std::strcmp(forced, "neon") == 0 && table_for(Isa::Neon)) {
            return *table_for(Isa::Neon);
        }
    }
    if (const KernelTable* t = table_for(Isa::Avx2)) {
        return *t;
    }
    if (const KernelTable* t = table_for(Isa::Neon)) {
        return *t;
    }
    return kScalar;
}

}  // namespace

const KernelTable* table_for(Isa isa) {
    switch (isa) {
        case Isa::Scalar:
            return &kScalar;
        case Isa::Avx2:
#if defined(LOOPCOORD_BUILD_AVX2)
            if (__builtin_cpu_supports("avx2")) {
                return &kAvx2;
            }
#endif
            return nullptr;
        case Isa::Neon:
#if defined(LOOPCOORD_BUILD_NEON)
            return &kNeon;
#else
            return nullptr;
#endif
    }
    return nullptr;
}

const KernelTable& active() {
    static const KernelTable& table = select();
    return table;
}

const char* to_string(Isa isa) {
    switch (isa) {
        case Isa::Scalar:
            return "scalar";
        case Isa::Avx2:
            return "avx2";
        case Isa::Neon:
            return "neon";
    }
    return "scalar";
}

}  // namespace loopcoord::kernels
