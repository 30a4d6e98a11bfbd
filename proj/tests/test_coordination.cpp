#include "loopcoord/coordination.hpp"
#include "loopcoord/dynamics.hpp"
#include "loopcoord/stability.hpp"

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <random>
#include <sstream>

using namespace loopcoord;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

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

Matrix uniform_matrix(std::mt19937_64& rng, Eigen::Index n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix a(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            a(i, j) = u(rng);
        }
    }
    return a;
}
}  // namespace

TEST_CASE("gradient-flow synthesis") {
    const auto id = synthesize_gradient_coordinator(-Matrix::Identity(3, 3));
    CHECK(id.c() == Matrix::Identity(3, 3));
    CHECK(id.provenance() == CoordinatorProvenance::GradientFlow);

    const auto c = synthesize_gradient_coordinator(kWitness, v2(1, 1));
    CHECK(c.c() == m2(1, -2, -2, 1));
    CHECK(c.c() * kWitness == m2(-5, 4, 4, -5));
    const auto v = verify_coordinated(c, kWitness);
    CHECK(v.stable);
    CHECK_THAT(v.margin, WithinAbs(-1.0, 1e-12));
    const auto ev = oracle::eig2(c.c() * kWitness);
    CHECK_THAT(ev[0].real(), WithinAbs(-9.0, 1e-12));
    CHECK_THAT(ev[1].real(), WithinAbs(-1.0, 1e-12));

    CHECK(synthesize_gradient_coordinator(kWitness, v2(2, 1)).c() == m2(2, -2, -4, 1));

    CHECK_THROWS_AS(synthesize_gradient_coordinator(kWitness, v2(1, 0)), InvalidInput);
    CHECK_THROWS_AS(synthesize_gradient_coordinator(kWitness, v2(1, -1)), InvalidInput);
    CHECK_THROWS_AS(synthesize_gradient_coordinator(kWitness, Vector::Ones(3)), InvalidInput);
}

TEST_CASE("coordinated fields") {
    const LinearSystem sys(kWitness, v2(1, -2));
    const auto plain = coordinated_field(Coordinator::custom(Matrix::Identity(2, 2)), sys);
    const Vector t = v2(0.4, -1.3);
    CHECK(plain(t) == sys.field()(t));

    const auto inv = coordinated_field(inverse_coordinator(kWitness), sys);
    CHECK((inv(t) - (t - sys.theta_star())).norm() < 1e-14);

    const LinearSystem homog(kWitness, v2(0, 0));
    const auto grad = coordinated_field(synthesize_gradient_coordinator(kWitness), homog);
    CHECK(grad(v2(1, 0)) == v2(-5, 4));

    const auto generic = coordinated_field(synthesize_gradient_coordinator(kWitness), homog.field());
    CHECK(generic(v2(1, 0)) == v2(-5, 4));

    CHECK_FALSE(verify_coordinated(Coordinator::custom(Matrix::Identity(2, 2)), kWitness).stable);
}

TEST_CASE("coordinated KPI") {
    const Vector f = v2(1, 1);
    CHECK(coordinated_kpi(Coordinator::custom(Matrix::Identity(2, 2)), f) == f);
    CHECK(coordinated_kpi(Coordinator::custom(m2(1, -2, -2, 1)), f) == v2(-1, -1));
    CHECK(coordinated_kpi(Coordinator::custom(m2(0, 0, 3, 1)), v2(5, 7))(0) == 0.0);
}

TEST_CASE("distributed update direction") {
    using Map = std::map<std::size_t, double>;
    CHECK(distributed_update_direction(0, Map{{0, -1}}, Map{{0, 2}}, Map{{0, 1}}) == 4.0);
    CHECK(distributed_update_direction(0, Map{{0, -1}, {1, 2}}, Map{{0, 0}, {1, 0}}, Map{{0, 1}, {1, 1}}) == 0.0);
    CHECK(distributed_update_direction(0, Map{{0, -1}, {1, 2}}, Map{{0, 1}, {1, 1}}, Map{{0, 1}, {1, 1}}) == -2.0);
    CHECK_THROWS_AS(distributed_update_direction(0, Map{{0, -1}}, Map{{1, 2}}, Map{{0, 1}}), InvalidInput);
}

TEST_CASE("stabilization for random invertible matrices and weights") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> wd(0.1, 10.0);
    int tried = 0;
    while (tried < 100) {
        const Eigen::Index n = 3 + tried % 6;
        const Matrix a = uniform_matrix(rng, n);
        if (reciprocal_condition(a) < 1e-10) {
            continue;
        }
        Vector w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            w(i) = wd(rng);
        }
        ++tried;
        const auto c = synthesize_gradient_coordinator(a, w);
        const auto v = verify_coordinated(c, a);
        CHECK(v.stable);
        CHECK(v.margin < 0.0);
    }
}

TEST_CASE("distributed directions assemble -A^T W A (theta - theta*)") {
    std::mt19937_64 rng(7);
    for (int k = 0; k < 20; ++k) {
        const Eigen::Index n = 4;
        const Matrix a = uniform_matrix(rng, n);
        const Vector c0 = oracle::random_vector(rng, n);
        const Vector target = oracle::random_vector(rng, n);
        Vector w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            w(i) = 0.5 + static_cast<double>(i);
        }
        const Vector theta = oracle::random_vector(rng, n);
        const Vector resid = a * theta + c0 - target;
        Vector assembled(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            std::map<std::size_t, double> p, r, ww;
            for (Eigen::Index j = 0; j < n; ++j) {
                p[j] = a(j, i);
                r[j] = resid(j);
                ww[j] = w(j);
            }
            assembled(i) = distributed_update_direction(i, p, r, ww);
        }
        const Vector matrix_form = -2.0 * a.transpose() * w.asDiagonal() * resid;
        CHECK((assembled - matrix_form).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + matrix_form.norm()));

        // central differences of V reproduce the same direction
        const double h = 1e-6;
        for (Eigen::Index i = 0; i < n; ++i) {
            Vector tp = theta, tm = theta;
            tp(i) += h;
            tm(i) -= h;
            const double fd = -(oracle::quadratic_potential(a, c0, target, w, tp) -
                                oracle::quadratic_potential(a, c0, target, w, tm)) / (2 * h);
            CHECK_THAT(assembled(i), WithinAbs(fd, 1e-5 * std::max(1.0, std::abs(fd))));
        }
    }
}

TEST_CASE("local neighbor sets give the full-sum direction") {
    Matrix a(3, 3);
    a << -1, 0.5, 0, 0.3, -1, 0, 0, 0.2, -1;  // column 0 touches KPIs 0, 1 only
    const Vector resid = Vector::LinSpaced(3, 0.5, 1.5);
    std::map<std::size_t, double> pf, rf, wf, pl, rl, wl;
    for (std::size_t j = 0; j < 3; ++j) {
        pf[j] = a(j, 0);
        rf[j] = resid(j);
        wf[j] = 1.0;
        if (a(j, 0) != 0.0) {
            pl[j] = a(j, 0);
            rl[j] = resid(j);
            wl[j] = 1.0;
        }
    }
    CHECK(distributed_update_direction(0, pl, rl, wl) == distributed_update_direction(0, pf, rf, wf));
}

TEST_CASE("estimated coordinator stabilizes the true system") {
    std::mt19937_64 rng(31);
    for (int k = 0; k < 100; ++k) {
        Matrix e = oracle::random_matrix(rng, 2);
        e *= 0.05 * kWitness.norm() / e.norm();
        const auto c = synthesize_gradient_coordinator(kWitness + e);
        CHECK(verify_coordinated(c, kWitness).stable);
    }
}

TEST_CASE("coordinator CSV carries its provenance") {
    std::ostringstream out;
    write_coordinator_csv(out, synthesize_gradient_coordinator(kWitness, v2(2, 1)));
    const std::string text = out.str();
    CHECK(text.find("# provenance=gradient_flow\n") == 0);
    CHECK(text.find("# weights=2,1\n") != std::string::npos);
    CHECK(text.find("2,-2\n-4,1\n") != std::string::npos);
}
