#include "loopcoord/coordination.hpp"
#include "loopcoord/estimation.hpp"
#include "loopcoord/interference.hpp"
#include "loopcoord/rng.hpp"
#include "loopcoord/stability.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

using namespace loopcoord;
using namespace loopcoord::interference;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
std::shared_ptr<const CoverageModel> hex_model() {
    static const auto model = make_coverage_model(hexagonal_layout(), RadioParams{}, 2000, 1);
    return model;
}

// Single site in the middle of a 2 km square, no shadowing.
std::shared_ptr<const CoverageModel> lone_site(double p_lo = -200.0, double p_hi = 60.0) {
    NetworkLayout l;
    l.width = 2.0;
    l.height = 2.0;
    l.positions = {{1.0, 1.0}};
    l.neighbors = {{}};
    RadioParams r;
    r.shadow_sigma_db = 0.0;
    r.p_lo_dbm = p_lo;
    r.p_hi_dbm = p_hi;
    return make_coverage_model(l, r, 500, 3);
}
}  // namespace

TEST_CASE("radio parameters") {
    const RadioParams r;
    CHECK_THAT(r.noise_dbm(), WithinAbs(-100.99, 0.005));
    CHECK_THAT(r.sinr_threshold(), WithinAbs(1.0, 1e-15));
    CHECK(attenuation_db(r, 1.0, 0.0) == 128.0);
    CHECK_THAT(attenuation_db(r, 0.5, 0.0), WithinAbs(117.04, 0.005));
    CHECK(attenuation_db(r, 0.5, 6.0) - attenuation_db(r, 0.5, 0.0) == 6.0);
    CHECK_THROWS_AS(attenuation_db(r, 0.0, 0.0), InvalidInput);
    RadioParams bad;
    bad.bandwidth_hz = 0.0;
    CHECK_THROWS_AS(bad.validate(), InvalidInput);
}

TEST_CASE("SINR and rate") {
    CHECK(sinr_linear(2.0, 0.5, 0.5) == 2.0);
    CHECK(sinr_linear(3.0, 0.0, 1.5) == 2.0);
    CHECK(shannon_rate(2e7, 1.0) == 2e7);
    CHECK(shannon_rate(2e7, 0.0) == 0.0);
    CHECK(shannon_rate(2e7, 3.0) == 4e7);
}

TEST_CASE("hexagonal torus") {
    const auto l = hexagonal_layout();
    REQUIRE(l.size() == 12);
    CHECK(l.toroidal);
    double min_d = 1e9;
    for (std::size_t i = 0; i < 12; ++i) {
        CHECK(l.neighbors[i].size() == 6);
        for (std::size_t j : l.neighbors[i]) {
            CHECK(std::find(l.neighbors[j].begin(), l.neighbors[j].end(), i) != l.neighbors[j].end());
        }
        for (std::size_t j = i + 1; j < 12; ++j) {
            min_d = std::min(min_d, l.distance(l.positions[i], l.positions[j]));
        }
    }
    CHECK_THAT(min_d, WithinAbs(0.5, 1e-12));
    CHECK_THAT(l.area(), WithinAbs(12 * 0.5 * 0.5 * std::sqrt(3.0) / 2.0, 1e-12));
    CHECK(hexagonal_layout(24).size() == 24);
    CHECK_THROWS_AS(hexagonal_layout(10), InvalidInput);
    CHECK_THROWS_AS(hexagonal_layout(7), InvalidInput);
}

TEST_CASE("torus distance wraps") {
    const auto l = hexagonal_layout();
    CHECK_THAT(l.distance({0.01, 0.0}, {l.width - 0.01, 0.0}), WithinAbs(0.02, 1e-12));
    CHECK(l.nearest(l.positions[5]) == 5);
}

TEST_CASE("Poisson layouts") {
    const auto a = poisson_layout(3.0, 2.0, 17);
    const auto b = poisson_layout(3.0, 2.0, 17);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.positions[i].x == b.positions[i].x);
        CHECK(a.positions[i].y == b.positions[i].y);
    }
    CHECK_FALSE(a.toroidal);

    double total = 0.0;
    const int runs = 2000;
    for (int s = 0; s < runs; ++s) {
        const auto l = poisson_layout(3.0, 2.0, static_cast<std::uint64_t>(s));
        total += static_cast<double>(l.size());
        for (std::size_t i = 0; i < l.size(); ++i) {
            CHECK(l.neighbors[i].size() == std::min<std::size_t>(6, l.size() - 1));
            CHECK(l.positions[i].x >= 0.0);
            CHECK(l.positions[i].x <= 2.0);
        }
    }
    CHECK_THAT(total / runs, WithinAbs(12.0, 3.0 * std::sqrt(12.0 / runs)));

    const auto sparse = poisson_layout(0.05, 2.0, 5);
    CHECK(sparse.size() >= 2);
    CHECK(sparse.resamples > 0);
    CHECK_THROWS_AS(poisson_layout(0.0, 2.0, 1), InvalidInput);
}

TEST_CASE("frozen shadowing") {
    const ShadowField s(9, 6.0);
    CHECK(s.value(3, 100) == ShadowField(9, 6.0).value(3, 100));
    CHECK(s.value(3, 100) != s.value(4, 100));
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
        const double v = s.value(static_cast<std::size_t>(k % 7), static_cast<std::size_t>(k));
        sum += v;
        sq += v * v;
    }
    CHECK_THAT(sum / n, WithinAbs(0.0, 4.0 * 6.0 / std::sqrt(n)));
    CHECK_THAT(std::sqrt(sq / n), WithinRel(6.0, 0.01));
    CHECK(ShadowField(9, 0.0).value(1, 1) == 0.0);
}

TEST_CASE("neighbor average") {
    Vector k(3);
    k << 0.6, 1.0, 0.1;
    CHECK_THAT(neighbor_average({0, 1}, {1.0, 1.0, 5.0}, k), WithinAbs(0.8, 1e-15));
    CHECK_THAT(neighbor_average({0, 1}, {3.0, 1.0, 5.0}, k), WithinAbs(0.7, 1e-15));
    CHECK_THAT(neighbor_average({0, 1, 2}, {1.0, 2.0, 3.0}, Vector::Constant(3, 0.4)), WithinAbs(0.4, 1e-15));
    CHECK_THROWS_AS(neighbor_average({}, {1.0}, k), InvalidInput);
}

TEST_CASE("coverage of an isolated site") {
    const auto m = lone_site();
    CHECK(m->coverage(Vector::Constant(1, 60.0))(0) == 1.0);
    CHECK(m->coverage(Vector::Constant(1, -150.0))(0) == 0.0);
    // without interferers the SINR is h P / N0
    const auto sinr = m->cell_sinr(0, Vector::Constant(1, 10.0));
    const auto& g = m->geometry();
    for (std::size_t p = 0; p < 5; ++p) {
        const double d = std::hypot(g.points[p].x - 1.0, g.points[p].y - 1.0);
        const double h = std::pow(10.0, -attenuation_db(m->radio(), d, 0.0) / 10.0);
        CHECK_THAT(sinr[p], WithinRel(h * 10.0 / m->radio().noise_mw(), 1e-12));
    }
}

TEST_CASE("coverage on the hexagonal torus is uniform at equal powers") {
    const auto m = hex_model();
    CHECK(m->empty_cells() == 0);
    const Vector p = Vector::Constant(12, 46.0);
    const Vector k = m->coverage(p);
    const Vector g = m->neighbor_coverage(p);
    const double tol = 2.0 / std::sqrt(2000.0);
    for (Eigen::Index i = 0; i < 12; ++i) {
        CHECK(std::abs(k(i) - k.mean()) <= tol);
        CHECK(std::abs(g(i) - k.mean()) <= tol);
    }
}

TEST_CASE("lattice translation permutes coverage") {
    // Shift every sample point by one inter-site distance along x and remap
    // base stations accordingly; the shadowing follows the same map.
    const auto layout = hexagonal_layout();
    const RadioParams radio;
    const ShadowField shadow(5, radio.shadow_sigma_db);
    const auto geo = sample_cells(layout, radio, shadow, Association::Nearest, 400, 8);
    const std::size_t np = geo.points.size();
    const std::size_t cols = 3;
    auto perm = [&](std::size_t j) { return (j / cols) * cols + (j % cols + 1) % cols; };

    Matrix sh(12, static_cast<Eigen::Index>(np));
    for (std::size_t j = 0; j < 12; ++j) {
        for (std::size_t p = 0; p < np; ++p) {
            sh(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(p)) = shadow.value(j, geo.draw[p]);
        }
    }
    const CoverageModel base(layout, radio, geo, sh);

    SampleGeometry moved;
    moved.cell_area.assign(12, 0.0);
    std::vector<std::size_t> order;
    for (std::size_t target = 0; target < 12; ++target) {
        for (std::size_t p = 0; p < np; ++p) {
            if (perm(geo.serving[p]) == target) {
                order.push_back(p);
            }
        }
        moved.cell_area[target] = geo.cell_area[target];
    }
    Matrix sh2(12, static_cast<Eigen::Index>(np));
    for (std::size_t q = 0; q < np; ++q) {
        const std::size_t p = order[q];
        Point pt = geo.points[p];
        pt.x = std::fmod(pt.x + 0.5, layout.width);
        moved.points.push_back(pt);
        moved.serving.push_back(perm(geo.serving[p]));
        moved.draw.push_back(geo.draw[p]);
        for (std::size_t j = 0; j < 12; ++j) {
            sh2(static_cast<Eigen::Index>(perm(j)), static_cast<Eigen::Index>(q)) =
                sh(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(p));
        }
    }
    const CoverageModel shifted(layout, radio, moved, sh2);

    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(40.0, 52.0);
    for (int trial = 0; trial < 5; ++trial) {
        Vector p(12), q(12);
        for (std::size_t j = 0; j < 12; ++j) {
            p(static_cast<Eigen::Index>(j)) = u(rng);
        }
        for (std::size_t j = 0; j < 12; ++j) {
            q(static_cast<Eigen::Index>(perm(j))) = p(static_cast<Eigen::Index>(j));
        }
        const Vector k1 = base.coverage(p);
        const Vector k2 = shifted.coverage(q);
        for (std::size_t j = 0; j < 12; ++j) {
            // a point sitting exactly on the threshold could flip through round-off
            CHECK(std::abs(k2(static_cast<Eigen::Index>(perm(j))) - k1(static_cast<Eigen::Index>(j))) <= 1.0 / 400);
        }
    }
}

TEST_CASE("coverage monotonicity on frozen randomness") {
    const auto m = hex_model();
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(40.0, 52.0);
    for (int trial = 0; trial < 10; ++trial) {
        Vector p(12);
        for (Eigen::Index j = 0; j < 12; ++j) {
            p(j) = u(rng);
        }
        const Vector k0 = m->coverage(p);
        const Vector g0 = m->neighbor_coverage(p);
        for (Eigen::Index i = 0; i < 12; ++i) {
            Vector q = p;
            q(i) += 1.0;
            CHECK(m->coverage(q)(i) >= k0(i));
            CHECK(m->neighbor_coverage(q)(i) <= g0(i));
        }
    }
}

TEST_CASE("uniform power shifts leave coverage unchanged") {
    // Interference-limited regime: the directional derivative along (1..1)
    // vanishes, i.e. the row sums of the true Jacobian are zero.
    const auto m = hex_model();
    const Vector p = Vector::Constant(12, 46.0);
    const Vector g0 = m->neighbor_coverage(p);
    for (double c : {-3.0, -0.5, 0.5, 3.0}) {
        CHECK((m->neighbor_coverage(p.array() + c) - g0).cwiseAbs().maxCoeff() == 0.0);
    }
    // Summing separate finite differences is noisier: every entry counts
    // discrete threshold crossings. Empirical bound at 2000 points per cell.
    const FieldOracle g = [&m](const Vector& x) { return m->neighbor_coverage(x); };
    const Matrix j = jacobian_fd(g, p, Vector::Constant(12, 0.5));
    const double scale = j.cwiseAbs().maxCoeff();
    CHECK(std::abs(j.rowwise().sum().mean()) <= 0.5 * scale);
    CHECK(j.rowwise().sum().cwiseAbs().maxCoeff() <= 1.0 * scale);
}

TEST_CASE("interference field") {
    const auto m = hex_model();
    const Vector p = Vector::Constant(12, 46.0);
    const Vector targets = m->neighbor_coverage(p);
    auto clamps = std::make_shared<ClampCounter>();
    const auto f = interference_field(m, targets, clamps);
    CHECK(f(p) == Vector::Zero(12));
    Vector q = p;
    q(0) = 80.0;
    Vector q_clamped = p;
    q_clamped(0) = 60.0;
    CHECK(f(q) == f(q_clamped));
    CHECK(clamps->events.load() == 1);
    CHECK_THROWS_AS(interference_field(m, Vector::Constant(12, 1.2)), InvalidInput);
    CHECK_THROWS_AS(interference_field(m, Vector::Constant(3, 0.5)), InvalidInput);

    Vector flat(12);
    flat.setConstant(0.8);
    CHECK((interference_field(m, flat)(p) - (targets.array() - 0.8).matrix()).norm() == 0.0);
}

TEST_CASE("equal-coverage search") {
    const auto m = hex_model();
    const double level = m->coverage(Vector::Constant(12, 46.0)).mean();
    const auto r = find_equal_coverage(*m, level);
    CHECK(r.converged);
    CHECK(r.iterations <= 3);

    const auto lone = lone_site();
    const auto ok = find_equal_coverage(*lone, 0.5, EqualizeOptions{.start_dbm = -120.0});
    CHECK(ok.converged);
    CHECK(std::abs(ok.coverage(0) - 0.5) < 0.02);

    const auto weak = lone_site(-200.0, -150.0);
    const auto fail = find_equal_coverage(*weak, 0.5, EqualizeOptions{.start_dbm = -150.0});
    CHECK_FALSE(fail.converged);
    CHECK(fail.iterations == 200);
    CHECK_THROWS_AS(find_equal_coverage(*lone, 1.5), InvalidInput);
}

TEST_CASE("Poisson snapshot regression") {
    const SnapshotConfig cfg;
    const auto r = run_snapshot(3.0, cfg, 1, 0);
    CHECK(r.n_bs == 5);
    CHECK(r.converged);
    CHECK_THAT(r.coverage_level, WithinAbs(0.863, 1e-12));
    CHECK_THAT(r.max_re_eig, WithinAbs(-0.004958079036069484, 1e-12));
    CHECK_FALSE(r.unstable);

    const auto layout = poisson_layout(3.0, 2.0, derive_seed(1, 0));
    const auto model = make_coverage_model(layout, cfg.radio, 2000, derive_seed(derive_seed(1, 0), 1));
    const auto eq = find_equal_coverage(*model, 0.8, cfg.equalize);
    const double golden[] = {46.194, 46.004, 46.494, 45.934, 45.374};
    REQUIRE(eq.power_dbm.size() == 5);
    for (Eigen::Index i = 0; i < 5; ++i) {
        CHECK_THAT(eq.power_dbm(i), WithinAbs(golden[i], 1e-9));
    }
}

TEST_CASE("snapshot summaries do not depend on the job count") {
    SnapshotConfig cfg;
    cfg.n_per_cell = 300;
    const auto a = snapshot_instability(6.0, 6, cfg, 3, 1);
    const auto b = snapshot_instability(6.0, 6, cfg, 3, 3);
    std::ostringstream sa, sb;
    write_snapshots_csv(sa, a);
    write_snapshots_csv(sb, b);
    CHECK(sa.str() == sb.str());
    CHECK(sa.str().rfind("snapshot_id,N_bs,converged,max_Re_eig,unstable\n", 0) == 0);
    CHECK(a.p_unstable >= 0.0);
    CHECK(a.p_unstable <= 1.0);
    CHECK_THROWS_AS(snapshot_instability(6.0, 0, cfg, 3), InvalidInput);
}

TEST_CASE("hexagonal experiment without perturbation stays at the operating point") {
    for (bool coordinated : {false, true}) {
        HexConfig c;
        c.coordinated = coordinated;
        c.perturbation_db = 0.0;
        c.t_end = 1.0;
        c.n_per_cell = 500;
        const auto r = hexagonal_experiment(c);
        CHECK(r.max_deviation_db == 0.0);
        CHECK(r.stayed_in_ball);
        CHECK(r.coordinated_loop.stable);
        // -J^T J is negative definite for invertible J
        const Matrix m = -r.jacobian.transpose() * r.jacobian;
        CHECK(eigen_stability(m).stable);
        REQUIRE(r.coverage.size() == r.powers.size());
        CHECK((r.coverage.front() - r.g_star).norm() == 0.0);
    }
}
