#include "loopcoord/interference.hpp"

#include "loopcoord/coordination.hpp"
#include "loopcoord/csv.hpp"
#include "loopcoord/estimation.hpp"
#include "loopcoord/kernels/coverage.hpp"
#include "loopcoord/parallel.hpp"
#include "loopcoord/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>

namespace loopcoord::interference {

void RadioParams::validate() const {
    require(bandwidth_hz > 0.0, "RadioParams: bandwidth must be positive");
    require(shadow_sigma_db >= 0.0, "RadioParams: shadowing sigma must be >= 0");
    require(rate_min_bps > 0.0, "RadioParams: rate_min must be positive");
    require(p_lo_dbm < p_hi_dbm, "RadioParams: empty power range");
}

double RadioParams::noise_dbm() const { return noise_psd_dbm_hz + 10.0 * std::log10(bandwidth_hz); }

double RadioParams::noise_mw() const { return dbm_to_mw(noise_dbm()); }

double RadioParams::sinr_threshold() const { return std::exp2(rate_min_bps / bandwidth_hz) - 1.0; }

double NetworkLayout::distance(const Point& a, const Point& b) const {
    double dx = std::abs(a.x - b.x);
    double dy = std::abs(a.y - b.y);
    if (toroidal) {
        dx = std::fmod(dx, width);
        dy = std::fmod(dy, height);
        dx = std::min(dx, width - dx);
        dy = std::min(dy, height - dy);
    }
    return std::hypot(dx, dy);
}

std::size_t NetworkLayout::nearest(const Point& p) const {
    std::size_t best = 0;
    double best_d = distance(p, positions[0]);
    for (std::size_t i = 1; i < positions.size(); ++i) {
        const double d = distance(p, positions[i]);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

namespace {

std::vector<std::vector<std::size_t>> closest_sites(const NetworkLayout& layout, std::size_t k) {
    const std::size_t n = layout.size();
    std::vector<std::vector<std::size_t>> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> others;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                others.push_back(j);
            }
        }
        std::stable_sort(others.begin(), others.end(), [&](std::size_t a, std::size_t b) {
            return layout.distance(layout.positions[i], layout.positions[a]) <
                   layout.distance(layout.positions[i], layout.positions[b]);
        });
        others.resize(std::min(k, others.size()));
        std::sort(others.begin(), others.end());
        out[i] = std::move(others);
    }
    return out;
}

double uniform01(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

}  // namespace

NetworkLayout hexagonal_layout(std::size_t n, double isd_km) {
    require(isd_km > 0.0, "hexagonal_layout: inter-site distance must be positive");
    // Most square torus among cols x rows = n with cols >= 3, rows >= 4 even.
    std::size_t best_cols = 0;
    double best_aspect = 0.0;
    for (std::size_t rows = 4; rows <= n; rows += 2) {
        if (n % rows != 0 || n / rows < 3) {
            continue;
        }
        const std::size_t cols = n / rows;
        const double w = static_cast<double>(cols);
        const double h = static_cast<double>(rows) * std::numbers::sqrt3 / 2.0;
        const double aspect = std::max(w, h) / std::min(w, h);
        if (best_cols == 0 || aspect < best_aspect) {
            best_cols = cols;
            best_aspect = aspect;
        }
    }
    if (best_cols == 0) {
        throw InvalidInput("hexagonal_layout: " + std::to_string(n) +
                           " sites do not tile a torus (need cols >= 3 times even rows >= 4)");
    }
    const std::size_t cols = best_cols;
    const std::size_t rows = n / cols;
    const double row_h = isd_km * std::numbers::sqrt3 / 2.0;

    NetworkLayout layout;
    layout.toroidal = true;
    layout.congruent_cells = true;
    layout.width = static_cast<double>(cols) * isd_km;
    layout.height = static_cast<double>(rows) * row_h;
    for (std::size_t b = 0; b < rows; ++b) {
        for (std::size_t a = 0; a < cols; ++a) {
            const double shift = (b % 2 == 1) ? 0.5 : 0.0;
            layout.positions.push_back({(static_cast<double>(a) + shift) * isd_km, static_cast<double>(b) * row_h});
        }
    }
    layout.neighbors.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i &&
                std::abs(layout.distance(layout.positions[i], layout.positions[j]) - isd_km) <= 1e-9 * isd_km) {
                layout.neighbors[i].push_back(j);
            }
        }
        if (layout.neighbors[i].size() != 6) {
            throw NumericalFailure("hexagonal_layout: site without 6 first-ring neighbors");
        }
    }
    return layout;
}

NetworkLayout poisson_layout(double density_per_km2, double side_km, std::uint64_t seed) {
    require(density_per_km2 > 0.0, "poisson_layout: density must be positive");
    require(side_km > 0.0, "poisson_layout: side must be positive");
    Rng rng = make_rng(seed, 0);
    std::poisson_distribution<std::size_t> count(density_per_km2 * side_km * side_km);
    std::uniform_real_distribution<double> coord(0.0, side_km);

    NetworkLayout layout;
    layout.width = side_km;
    layout.height = side_km;
    std::size_t n = count(rng);
    while (n < 2) {
        ++layout.resamples;
        require(layout.resamples < 10000, "poisson_layout: density too low to obtain 2 sites");
        n = count(rng);
    }
    layout.positions.resize(n);
    for (auto& p : layout.positions) {
        p.x = coord(rng);
        p.y = coord(rng);
    }
    layout.neighbors = closest_sites(layout, 6);
    return layout;
}

double ShadowField::value(std::size_t bs, std::size_t point) const {
    if (sigma_ == 0.0) {
        return 0.0;
    }
    const std::uint64_t key = derive_seed(derive_seed(seed_, bs), point);
    const double u1 = 1.0 - uniform01(derive_seed(key, 0));  // (0, 1]
    const double u2 = uniform01(derive_seed(key, 1));
    return sigma_ * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double attenuation_db(const RadioParams& radio, double d_km, double shadow_db) {
    require(d_km > 0.0, "attenuation_db: distance must be positive");
    return radio.pl_const_db + radio.pl_slope_db * std::log10(d_km) + shadow_db;
}

double sinr_linear(double signal_mw, double interference_mw, double noise_mw) {
    return signal_mw / (noise_mw + interference_mw);
}

double shannon_rate(double bandwidth_hz, double sinr) { return bandwidth_hz * std::log2(1.0 + sinr); }

SampleGeometry sample_cells(const NetworkLayout& layout, const RadioParams& radio, const ShadowField& shadow,
                            Association association, std::size_t n_per_cell, std::uint64_t seed) {
    require(layout.size() >= 1, "sample_cells: empty layout");
    require(n_per_cell >= 1, "sample_cells: need at least one sample per cell");
    const std::size_t n_bs = layout.size();
    Rng rng = make_rng(seed, 1);
    std::uniform_real_distribution<double> ux(0.0, layout.width);
    std::uniform_real_distribution<double> uy(0.0, layout.height);

    struct Kept {
        Point p;
        std::uint64_t draw;
    };
    std::vector<std::vector<Kept>> per_cell(n_bs);
    std::vector<std::size_t> hits(n_bs, 0);
    std::size_t full = 0;
    std::uint64_t draws = 0;
    const std::size_t budget = n_per_cell * n_bs * 50;
    while (full < n_bs && draws < budget) {
        const Point p{ux(rng), uy(rng)};
        const std::uint64_t id = draws++;
        std::size_t cell = 0;
        double best = -std::numeric_limits<double>::infinity();
        bool colocated = false;
        for (std::size_t j = 0; j < n_bs; ++j) {
            const double d = layout.distance(p, layout.positions[j]);
            if (d <= 0.0) {
                colocated = true;
                break;
            }
            // Larger is better: negative distance or negative attenuation.
            const double score = association == Association::Nearest
                                     ? -d
                                     : -attenuation_db(radio, d, shadow.value(j, id));
            if (score > best) {
                best = score;
                cell = j;
            }
        }
        if (colocated) {
            continue;
        }
        ++hits[cell];
        if (per_cell[cell].size() < n_per_cell) {
            per_cell[cell].push_back({p, id});
            if (per_cell[cell].size() == n_per_cell) {
                ++full;
            }
        }
    }

    const bool exact_areas = layout.congruent_cells && association == Association::Nearest;
    SampleGeometry g;
    g.cell_area.resize(n_bs);
    for (std::size_t i = 0; i < n_bs; ++i) {
        g.cell_area[i] = exact_areas ? layout.area() / static_cast<double>(n_bs)
                                     : layout.area() * static_cast<double>(hits[i]) / static_cast<double>(draws);
        for (const auto& k : per_cell[i]) {
            g.points.push_back(k.p);
            g.serving.push_back(i);
            g.draw.push_back(k.draw);
        }
    }
    return g;
}

CoverageModel::CoverageModel(NetworkLayout layout, RadioParams radio, SampleGeometry geometry, const Matrix& shadow_db)
    : layout_(std::move(layout)), radio_(radio), geometry_(std::move(geometry)) {
    radio_.validate();
    const std::size_t n_bs = layout_.size();
    const std::size_t np = geometry_.points.size();
    require(n_bs >= 1, "CoverageModel: empty layout");
    require(geometry_.serving.size() == np, "CoverageModel: serving list size mismatch");
    require(geometry_.cell_area.size() == n_bs, "CoverageModel: cell area list size mismatch");
    require(static_cast<std::size_t>(shadow_db.rows()) == n_bs && static_cast<std::size_t>(shadow_db.cols()) == np,
            "CoverageModel: shadowing matrix must be n_bs x n_points");
    require(std::is_sorted(geometry_.serving.begin(), geometry_.serving.end()),
            "CoverageModel: sample points must be grouped by serving cell");

    offsets_.assign(n_bs + 1, 0);
    for (std::size_t s : geometry_.serving) {
        require(s < n_bs, "CoverageModel: serving index out of range");
        ++offsets_[s + 1];
    }
    std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());

    gains_.resize(n_bs * np);
    for (std::size_t j = 0; j < n_bs; ++j) {
        for (std::size_t p = 0; p < np; ++p) {
            const double d = layout_.distance(geometry_.points[p], layout_.positions[j]);
            const double att = attenuation_db(radio_, d, shadow_db(static_cast<Eigen::Index>(j),
                                                                   static_cast<Eigen::Index>(p)));
            gains_[j * np + p] = std::pow(10.0, -att / 10.0);
        }
    }
}

bool CoverageModel::clamp(Vector& power_dbm) const {
    require(static_cast<std::size_t>(power_dbm.size()) == n_bs(), "CoverageModel: power vector dimension mismatch");
    bool moved = false;
    for (Eigen::Index i = 0; i < power_dbm.size(); ++i) {
        const double c = std::clamp(power_dbm(i), radio_.p_lo_dbm, radio_.p_hi_dbm);
        moved = moved || c != power_dbm(i);
        power_dbm(i) = c;
    }
    return moved;
}

namespace {

std::vector<double> to_mw(const Vector& power_dbm) {
    std::vector<double> mw(static_cast<std::size_t>(power_dbm.size()));
    for (std::size_t i = 0; i < mw.size(); ++i) {
        mw[i] = dbm_to_mw(power_dbm(static_cast<Eigen::Index>(i)));
    }
    return mw;
}

}  // namespace

std::vector<double> CoverageModel::cell_sinr(std::size_t i, const Vector& power_dbm) const {
    require(i < n_bs(), "cell_sinr: cell index out of range");
    Vector p = power_dbm;
    clamp(p);
    const auto mw = to_mw(p);
    kernels::CellBlock block{gains_.data(), n_points(), offsets_[i], offsets_[i + 1], i, n_bs(), mw.data(),
                             radio_.noise_mw()};
    std::vector<double> out(cell_size(i));
    kernels::active().sinr(block, out.data());
    return out;
}

Vector CoverageModel::coverage(const Vector& power_dbm) const {
    Vector p = power_dbm;
    clamp(p);
    const auto mw = to_mw(p);
    const double noise = radio_.noise_mw();
    const double threshold = radio_.sinr_threshold();
    const auto& k = kernels::active();
    Vector cov(static_cast<Eigen::Index>(n_bs()));
    for (std::size_t i = 0; i < n_bs(); ++i) {
        const std::size_t n = cell_size(i);
        if (n == 0) {
            cov(static_cast<Eigen::Index>(i)) = 1.0;
            continue;
        }
        kernels::CellBlock block{gains_.data(), n_points(), offsets_[i], offsets_[i + 1], i, n_bs(), mw.data(), noise};
        cov(static_cast<Eigen::Index>(i)) = static_cast<double>(k.count_covered(block, threshold)) / static_cast<double>(n);
    }
    return cov;
}

Vector CoverageModel::neighbor_coverage_from(const Vector& coverage) const {
    Vector g(static_cast<Eigen::Index>(n_bs()));
    for (std::size_t i = 0; i < n_bs(); ++i) {
        g(static_cast<Eigen::Index>(i)) = neighbor_average(layout_.neighbors[i], geometry_.cell_area, coverage);
    }
    return g;
}

Vector CoverageModel::neighbor_coverage(const Vector& power_dbm) const {
    return neighbor_coverage_from(coverage(power_dbm));
}

std::size_t CoverageModel::empty_cells() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < n_bs(); ++i) {
        n += cell_size(i) == 0 ? 1 : 0;
    }
    return n;
}

std::shared_ptr<const CoverageModel> make_coverage_model(const NetworkLayout& layout, const RadioParams& radio,
                                                         std::size_t n_per_cell, std::uint64_t seed,
                                                         Association association) {
    const ShadowField shadow(derive_seed(seed, 12), radio.shadow_sigma_db);
    SampleGeometry geometry = sample_cells(layout, radio, shadow, association, n_per_cell, derive_seed(seed, 11));
    Matrix shadow_db(static_cast<Eigen::Index>(layout.size()), static_cast<Eigen::Index>(geometry.points.size()));
    for (Eigen::Index j = 0; j < shadow_db.rows(); ++j) {
        for (Eigen::Index p = 0; p < shadow_db.cols(); ++p) {
            shadow_db(j, p) = shadow.value(static_cast<std::size_t>(j), geometry.draw[static_cast<std::size_t>(p)]);
        }
    }
    return std::make_shared<const CoverageModel>(layout, radio, std::move(geometry), shadow_db);
}

double neighbor_average(const std::vector<std::size_t>& neighbors, const std::vector<double>& areas,
                        const Vector& values) {
    require(!neighbors.empty(), "neighbor_average: empty neighbor set");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t j : neighbors) {
        num += areas[j] * values(static_cast<Eigen::Index>(j));
        den += areas[j];
    }
    require(den > 0.0, "neighbor_average: neighbors have zero total area");
    return num / den;
}

VectorField interference_field(std::shared_ptr<const CoverageModel> model, const Vector& targets,
                               std::shared_ptr<ClampCounter> clamps) {
    require(model != nullptr, "interference_field: null model");
    require(static_cast<std::size_t>(targets.size()) == model->n_bs(), "interference_field: targets dimension mismatch");
    for (Eigen::Index i = 0; i < targets.size(); ++i) {
        require(targets(i) > 0.0 && targets(i) < 1.0, "interference_field: targets must lie in (0, 1)");
    }
    return VectorField(model->n_bs(), [model, targets, clamps](const Vector& power) -> Vector {
        Vector p = power;
        if (model->clamp(p) && clamps) {
            clamps->events.fetch_add(1, std::memory_order_relaxed);
        }
        return model->neighbor_coverage(p) - targets;
    });
}

EqualizeResult find_equal_coverage(const CoverageModel& model, double target, const EqualizeOptions& options) {
    require(options.track_mean || (target > 0.0 && target < 1.0), "find_equal_coverage: target must lie in (0, 1)");
    require(options.tol > 0.0 && options.gain_db > 0.0, "find_equal_coverage: tol and gain must be positive");
    EqualizeResult r;
    r.power_dbm = Vector::Constant(static_cast<Eigen::Index>(model.n_bs()), options.start_dbm);
    model.clamp(r.power_dbm);
    double gain = options.gain_db;
    double previous = std::numeric_limits<double>::infinity();
    for (std::size_t it = 0;; ++it) {
        r.coverage = model.coverage(r.power_dbm);
        r.iterations = it;
        r.target = options.track_mean ? r.coverage.mean() : target;
        const Vector err = Vector::Constant(r.coverage.size(), r.target) - r.coverage;
        const double worst = err.cwiseAbs().maxCoeff();
        r.final_gain_db = gain;
        if (worst < options.tol) {
            r.converged = true;
            return r;
        }
        if (it >= options.max_iter) {
            return r;
        }
        if (worst > previous) {
            gain = std::max(options.min_gain_db, 0.5 * gain);
        }
        previous = worst;
        r.power_dbm += gain * err;
        model.clamp(r.power_dbm);
    }
}

SnapshotResult run_snapshot(double density, const SnapshotConfig& config, std::uint64_t seed, std::size_t id) {
    const std::uint64_t snap_seed = derive_seed(seed, id);
    const NetworkLayout layout = poisson_layout(density, config.side_km, snap_seed);
    const auto model = make_coverage_model(layout, config.radio, config.n_per_cell, derive_seed(snap_seed, 1));

    SnapshotResult r;
    r.id = id;
    r.n_bs = layout.size();
    const auto eq = find_equal_coverage(*model, config.coverage_target, config.equalize);
    r.converged = eq.converged;
    r.coverage_level = eq.target;
    if (!eq.converged) {
        return r;
    }
    const FieldOracle g = [&model](const Vector& p) { return model->neighbor_coverage(p); };
    const Matrix j = jacobian_fd(g, eq.power_dbm, Vector::Constant(eq.power_dbm.size(), config.jacobian_step_db));
    const auto verdict = eigen_stability(j);
    r.max_re_eig = verdict.margin;
    r.unstable = !verdict.stable;
    return r;
}

SnapshotSummary snapshot_instability(double density, std::size_t n_snapshots, const SnapshotConfig& config,
                                     std::uint64_t seed, std::size_t jobs) {
    require(n_snapshots >= 1, "snapshot_instability: need at least one snapshot");
    SnapshotSummary s;
    s.density = density;
    s.snapshots.resize(n_snapshots);
    parallel_for(n_snapshots, jobs, [&](std::size_t k) { s.snapshots[k] = run_snapshot(density, config, seed, k); });
    for (const auto& r : s.snapshots) {
        s.n_converged += r.converged ? 1 : 0;
        s.n_unstable += (r.converged && r.unstable) ? 1 : 0;
    }
    if (s.n_converged == 0) {
        throw NumericalFailure("snapshot_instability: no snapshot reached equal coverage");
    }
    s.p_unstable = static_cast<double>(s.n_unstable) / static_cast<double>(s.n_converged);
    return s;
}

void write_snapshots_csv(std::ostream& out, const SnapshotSummary& summary) {
    out << "snapshot_id,N_bs,converged,max_Re_eig,unstable\n";
    for (const auto& r : summary.snapshots) {
        out << r.id << ',' << r.n_bs << ',' << (r.converged ? 1 : 0) << ','
            << (r.converged ? csv::format_double(r.max_re_eig) : std::string("nan")) << ','
            << (r.converged && r.unstable ? 1 : 0) << '\n';
    }
}

HexResult hexagonal_experiment(const HexConfig& config) {
    require(config.t_end >= config.step && config.step > 0.0, "hexagonal_experiment: invalid horizon");
    require(config.perturbation_db >= 0.0 && config.ball_db > 0.0, "hexagonal_experiment: invalid perturbation");
    const NetworkLayout layout = hexagonal_layout(config.n_bs, config.isd_km);
    const auto model = make_coverage_model(layout, config.radio, config.n_per_cell, config.seed);
    const auto n = static_cast<Eigen::Index>(layout.size());

    HexResult r;
    r.p_star = Vector::Constant(n, config.p_star_dbm);
    r.g_star = model->neighbor_coverage(r.p_star);

    const FieldOracle g = [&model](const Vector& p) { return model->neighbor_coverage(p); };
    r.jacobian = jacobian_fd(g, r.p_star, Vector::Constant(n, config.jacobian_step_db));
    r.open_loop = eigen_stability(r.jacobian);
    const Coordinator coord = synthesize_gradient_coordinator(r.jacobian);
    r.coordinated_loop = verify_coordinated(coord, r.jacobian);

    const VectorField open = interference_field(model, r.g_star);
    const VectorField field = config.coordinated ? coordinated_field(coord, open) : open;

    Rng rng = make_rng(config.seed, 7);
    std::uniform_real_distribution<double> perturb(-config.perturbation_db, config.perturbation_db);
    Vector p0 = r.p_star;
    if (config.perturbation_db > 0.0) {
        for (Eigen::Index i = 0; i < n; ++i) {
            p0(i) += perturb(rng);
        }
    }
    OdeOptions opts;
    opts.record_stride = config.record_stride;
    opts.project = [&model](Vector& p) { model->clamp(p); };
    r.powers = integrate_ode(field, p0, config.step, config.t_end, opts);
    r.powers.seed = config.seed;

    r.coverage.reserve(r.powers.size());
    for (const auto& p : r.powers.states) {
        r.coverage.push_back(model->neighbor_coverage(p));
        r.max_deviation_db = std::max(r.max_deviation_db, (p - r.p_star).cwiseAbs().maxCoeff());
    }
    r.stayed_in_ball = r.max_deviation_db <= config.ball_db && !r.powers.escaped;
    return r;
}

}  // namespace loopcoord::interference
