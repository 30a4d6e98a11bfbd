#include "loopcoord/kernels/coverage.hpp"

#include <catch_amalgamated.hpp>

#include <cstring>
#include <random>
#include <vector>

using namespace loopcoord::kernels;

namespace {
struct Fixture {
    std::vector<double> gains;
    std::vector<double> power;
    CellBlock block;

    Fixture(std::size_t n_bs, std::size_t n_points, std::size_t begin, std::size_t end, std::size_t serving,
            std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::lognormal_distribution<double> g(-25.0, 3.0);
        std::uniform_real_distribution<double> p(1.0, 1e5);
        gains.resize(n_bs * n_points);
        for (auto& v : gains) {
            v = g(rng);
        }
        power.resize(n_bs);
        for (auto& v : power) {
            v = p(rng);
        }
        block = CellBlock{gains.data(), n_points, begin, end, serving, n_bs, power.data(), 1.26e-10};
    }
};

std::vector<const KernelTable*> available() {
    std::vector<const KernelTable*> out;
    for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon}) {
        if (const auto* t = table_for(isa)) {
            out.push_back(t);
        }
    }
    return out;
}
}  // namespace

TEST_CASE("scalar reference matches the formula") {
    Fixture f(4, 10, 2, 9, 1, 1);
    std::vector<double> out(7);
    scalar::sinr(f.block, out.data());
    for (std::size_t k = 0; k < out.size(); ++k) {
        const std::size_t p = 2 + k;
        double interference = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
            if (j != 1) {
                interference += f.gains[j * 10 + p] * f.power[j];
            }
        }
        const double want = f.gains[10 + p] * f.power[1] / (f.block.noise_mw + interference);
        CHECK(out[k] == Catch::Approx(want).epsilon(1e-14));
    }
}

TEST_CASE("every compiled kernel is bit-identical to the scalar reference") {
    const auto tables = available();
    REQUIRE(!tables.empty());
    CHECK(tables.front()->isa == Isa::Scalar);
    std::mt19937_64 pick(99);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n_bs = 1 + pick() % 20;
        const std::size_t n_points = 1 + pick() % 70;
        const std::size_t begin = pick() % n_points;
        const std::size_t end = begin + pick() % (n_points - begin + 1);
        const std::size_t serving = pick() % n_bs;
        Fixture f(n_bs, n_points, begin, end, serving, static_cast<std::uint64_t>(trial));
        std::vector<double> ref(end - begin + 1, -1.0);
        scalar::sinr(f.block, ref.data());
        const std::size_t ref_count = scalar::count_covered(f.block, 1.0);
        for (const auto* t : tables) {
            std::vector<double> out(end - begin + 1, -1.0);
            t->sinr(f.block, out.data());
            CHECK(std::memcmp(out.data(), ref.data(), sizeof(double) * out.size()) == 0);
            CHECK(t->count_covered(f.block, 1.0) == ref_count);
            CHECK(t->count_covered(f.block, 0.0) == end - begin);
        }
    }
}

TEST_CASE("count matches thresholded SINR") {
    Fixture f(7, 33, 0, 33, 3, 5);
    std::vector<double> s(33);
    scalar::sinr(f.block, s.data());
    for (double thr : {1e-3, 0.1, 1.0, 10.0}) {
        std::size_t n = 0;
        for (double v : s) {
            n += v >= thr ? 1 : 0;
        }
        CHECK(active().count_covered(f.block, thr) == n);
    }
}

TEST_CASE("dispatch") {
    const auto& k = active();
    CHECK(table_for(k.isa) != nullptr);
    CHECK(std::string(to_string(Isa::Scalar)) == "scalar");
    CHECK(std::string(to_string(Isa::Avx2)) == "avx2");
    CHECK(table_for(Isa::Scalar)->sinr == &scalar::sinr);
}
