#include "loopcoord/core_model.hpp"

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace loopcoord;
using Catch::Matchers::WithinAbs;

namespace {
Matrix m2(double a, double b, double c, double d) {
    Matrix m(2, 2);
    m << a, b, c, d;
    return m;
}
Vector v2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}
const Matrix kWitness = m2(-1, 2, 2, -1);
}  // namespace

TEST_CASE("linear field evaluates A theta + b") {
    const auto f1 = make_linear_field(Matrix::Constant(1, 1, -1.0), Vector::Constant(1, 1.0));
    CHECK(f1(Vector::Zero(1))(0) == 1.0);

    const auto f2 = make_linear_field(kWitness, Vector::Zero(2));
    CHECK(f2(v2(1, 1)) == v2(1, 1));

    const auto f3 = make_linear_field(m2(-1, 0, 0, -2), v2(1, 2));
    CHECK(f3(v2(1, 1)) == v2(0, 0));
}

TEST_CASE("field rejects a mismatched dimension") {
    const auto f = make_linear_field(kWitness, Vector::Zero(2));
    CHECK_THROWS_AS(f(Vector::Zero(3)), InvalidInput);
    CHECK_THROWS_AS(make_linear_field(kWitness, Vector::Zero(3)), InvalidInput);
}

TEST_CASE("equilibrium") {
    CHECK(equilibrium(-Matrix::Identity(2, 2), v2(1, 2)) == v2(1, 2));

    const Vector expected = oracle::solve2(kWitness, -v2(-1, -1));
    const Vector got = equilibrium(kWitness, v2(-1, -1));
    CHECK_THAT(got(0), WithinAbs(expected(0), 1e-12));
    CHECK_THAT(got(1), WithinAbs(expected(1), 1e-12));
    CHECK_THAT(got(0), WithinAbs(1.0, 1e-12));

    CHECK_THROWS_AS(equilibrium(m2(0, 1, 0, 0), v2(1, 1)), NumericalFailure);
    CHECK_THROWS_AS(LinearSystem(m2(1, 1, 1, 1 + 1e-15), v2(1, 1)), NumericalFailure);
}

TEST_CASE("field vanishes at the equilibrium of random systems") {
    std::mt19937_64 rng(11);
    for (int k = 0; k < 50; ++k) {
        const Eigen::Index n = 2 + k % 6;
        const LinearSystem sys(oracle::random_matrix(rng, n), oracle::random_vector(rng, n));
        if (reciprocal_condition(sys.a()) < 1e-6) {
            continue;
        }
        CHECK(sys.field()(sys.theta_star()).norm() < 1e-9);
    }
}

TEST_CASE("zero-finding form matches the linear form") {
    std::mt19937_64 rng(5);
    const Matrix a = oracle::random_matrix(rng, 4);
    const Vector b = oracle::random_vector(rng, 4);
    const auto lin = make_linear_field(a, b);
    const auto zf = zero_finding_field({4, [a](const Vector& t) -> Vector { return a * t; }, -b});
    for (int k = 0; k < 20; ++k) {
        const Vector t = oracle::random_vector(rng, 4);
        CHECK((lin(t) - zf(t)).cwiseAbs().maxCoeff() <= 1e-14 * (1.0 + lin(t).norm()));
    }

    const auto ident = zero_finding_field({1, [](const Vector& t) { return t; }, Vector::Zero(1)});
    CHECK(ident(Vector::Constant(1, 3.5))(0) == 3.5);

    const auto flat = zero_finding_field({2, [](const Vector&) { return v2(0.3, 0.7); }, v2(0.3, 0.7)});
    CHECK(flat(v2(9, -9)) == v2(0, 0));
}

TEST_CASE("stand-alone field pins the other loops") {
    const auto f = make_linear_field(kWitness, Vector::Zero(2));
    const auto s0 = standalone_field(f, 0, v2(123, 0));
    CHECK(s0(v2(1, 0)) == v2(-1, 0));
    CHECK(s0(v2(1, 55))(1) == 0.0);
    // component 1 of the argument is ignored in favor of the frozen value
    CHECK(s0(v2(1, 55)) == v2(-1, 0));

    const auto s1 = standalone_field(f, 1, v2(0, 0));
    CHECK(s1(v2(0, 1)) == v2(0, -1));
    CHECK_THROWS_AS(standalone_field(f, 2, v2(0, 0)), InvalidInput);
}

TEST_CASE("interaction graph thresholds the Jacobian") {
    using Set = std::vector<std::size_t>;
    const auto diag = interaction_graph(m2(-1, 0, 0, -2), 0.0);
    CHECK(diag.neighbors[0] == Set{0});
    CHECK(diag.neighbors[1] == Set{1});

    const auto full = interaction_graph(kWitness, 0.0);
    CHECK(full.neighbors[0] == Set{0, 1});
    CHECK(full.neighbors[1] == Set{0, 1});

    const auto weak = interaction_graph(m2(-1, 0.01, 0.01, -1), 0.1);
    CHECK(weak.neighbors[0] == Set{0});
    CHECK(weak.neighbors[1] == Set{1});

    // neighbors of loop i are the KPIs its parameter moves: column i
    const auto lower = interaction_graph(m2(-1, 0, 3, -1), 0.0);
    CHECK(lower.neighbors[0] == Set{0, 1});
    CHECK(lower.neighbors[1] == Set{1});

    const auto dflt = interaction_graph(m2(-1, 1e-9, 1e-7, -1));
    CHECK(dflt.tolerance == 1e-8);
    CHECK(dflt.neighbors[0] == Set{0, 1});
    CHECK(dflt.neighbors[1] == Set{1});
}

TEST_CASE("reciprocal condition") {
    CHECK_THAT(reciprocal_condition(Matrix::Identity(3, 3)), WithinAbs(1.0, 1e-15));
    CHECK(reciprocal_condition(m2(0, 1, 0, 0)) == 0.0);
    CHECK_THAT(reciprocal_condition(kWitness), WithinAbs(1.0 / 3.0, 1e-14));
}
