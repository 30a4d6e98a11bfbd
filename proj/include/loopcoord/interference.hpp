#pragma once

#include "loopcoord/core_model.hpp"
#include "loopcoord/dynamics.hpp"
#include "loopcoord/stability.hpp"
#include "loopcoord/types.hpp"

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

// Downlink power control in a multi-cell network. Each base station tunes
// its transmit power (dBm) so that the area-weighted coverage of its
// neighbors meets a target.
namespace loopcoord::interference {

struct RadioParams {
    double pl_const_db = 128.0;
    double pl_slope_db = 36.4;  // per decade of distance in km
    double shadow_sigma_db = 6.0;
    double noise_psd_dbm_hz = -174.0;
    double bandwidth_hz = 2e7;
    double rate_min_bps = 2e7;
    double p_lo_dbm = 0.0;
    double p_hi_dbm = 60.0;

    void validate() const;
    /// Thermal noise over the band, dBm.
    double noise_dbm() const;
    double noise_mw() const;
    /// SINR at which the Shannon rate equals rate_min.
    double sinr_threshold() const;
};

struct Point {
    double x = 0.0;  // km
    double y = 0.0;
};

struct NetworkLayout {
    std::vector<Point> positions;
    double width = 0.0;  // km
    double height = 0.0;
    bool toroidal = false;
    /// All Voronoi cells have the same area (regular lattice on a torus).
    bool congruent_cells = false;
    std::vector<std::vector<std::size_t>> neighbors;
    std::size_t resamples = 0;  // Poisson draws rejected for having < 2 sites

    std::size_t size() const { return positions.size(); }
    double area() const { return width * height; }
    /// Euclidean distance, wrapped on a torus.
    double distance(const Point& a, const Point& b) const;
    /// Index of the closest base station.
    std::size_t nearest(const Point& p) const;
};

/// Triangular lattice of n sites with inter-site distance isd (km) on a
/// torus; every site has exactly 6 neighbors at distance isd. n must factor
/// as cols x rows with cols >= 3 and rows >= 4 even (12 -> 3 x 4).
NetworkLayout hexagonal_layout(std::size_t n = 12, double isd_km = 0.5);

/// Poisson(density * side^2) sites uniform in a side x side square (no
/// wrap-around); neighbors are the min(6, N - 1) closest sites.
NetworkLayout poisson_layout(double density_per_km2, double side_km, std::uint64_t seed);

/// Frozen log-normal shadowing: value(bs, point) is a deterministic
/// N(0, sigma^2) draw keyed by (seed, bs, point).
class ShadowField {
public:
    ShadowField(std::uint64_t seed, double sigma_db) : seed_(seed), sigma_(sigma_db) {}
    double value(std::size_t bs, std::size_t point) const;
    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    double sigma_;
};

/// 128 + 36.4 log10(d) + shadow, in dB.
double attenuation_db(const RadioParams& radio, double d_km, double shadow_db);

inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

/// SINR = h_i P_i / (N0 + sum_{j != i} h_j P_j), everything linear (mW).
double sinr_linear(double signal_mw, double interference_mw, double noise_mw);

/// Shannon rate w log2(1 + S).
double shannon_rate(double bandwidth_hz, double sinr);

/// How a location is assigned to its cell. Both rules are independent of
/// the transmit powers, so cells stay fixed during power control.
enum class Association {
    Nearest,   // Voronoi cell of the site (torus-aware)
    BestGain,  // strongest path gain including shadowing
};

/// Sample points with their serving cell, grouped by cell.
struct SampleGeometry {
    std::vector<Point> points;
    std::vector<std::size_t> serving;  // non-decreasing
    std::vector<std::uint64_t> draw;   // index of the uniform draw, keys the shadowing
    std::vector<double> cell_area;     // km^2 per base station
};

/// Draws uniform points over the layout until every cell holds n_per_cell
/// points (or a draw budget runs out). Cell areas come from hit frequencies,
/// or are exact for Voronoi cells of a congruent lattice.
SampleGeometry sample_cells(const NetworkLayout& layout, const RadioParams& radio, const ShadowField& shadow,
                            Association association, std::size_t n_per_cell, std::uint64_t seed);

/// Frozen propagation environment for one experiment: sample points,
/// shadowing and linear path gains. Coverage evaluated on it is a
/// deterministic function of the power vector (common random numbers).
class CoverageModel {
public:
    /// `shadow_db` is n_bs x n_points.
    CoverageModel(NetworkLayout layout, RadioParams radio, SampleGeometry geometry, const Matrix& shadow_db);

    const NetworkLayout& layout() const { return layout_; }
    const RadioParams& radio() const { return radio_; }
    const SampleGeometry& geometry() const { return geometry_; }
    std::size_t n_bs() const { return layout_.size(); }
    std::size_t n_points() const { return geometry_.points.size(); }
    std::size_t cell_size(std::size_t i) const { return offsets_[i + 1] - offsets_[i]; }
    double gain(std::size_t bs, std::size_t point) const { return gains_[bs * n_points() + point]; }

    /// Powers are clamped into [p_lo, p_hi]; returns true if any entry moved.
    bool clamp(Vector& power_dbm) const;

    /// SINR of every sample point of cell i.
    std::vector<double> cell_sinr(std::size_t i, const Vector& power_dbm) const;

    /// K_i: fraction of cell i's sample points whose rate reaches rate_min.
    /// Cells without sample points report 1.
    Vector coverage(const Vector& power_dbm) const;

    /// G_i: area-weighted coverage of i's neighbors.
    Vector neighbor_coverage(const Vector& power_dbm) const;
    Vector neighbor_coverage_from(const Vector& coverage) const;

    std::size_t empty_cells() const;

private:
    NetworkLayout layout_;
    RadioParams radio_;
    SampleGeometry geometry_;
    std::vector<std::size_t> offsets_;
    std::vector<double> gains_;
};

std::shared_ptr<const CoverageModel> make_coverage_model(const NetworkLayout& layout, const RadioParams& radio,
                                                         std::size_t n_per_cell, std::uint64_t seed,
                                                         Association association = Association::BestGain);

/// Weighted mean of `values` over neighbors, weights = cell areas.
double neighbor_average(const std::vector<std::size_t>& neighbors, const std::vector<double>& areas,
                        const Vector& values);

struct ClampCounter {
    std::atomic<std::size_t> events{0};
};

/// F_i(P) = G_i(P) - target_i over powers in dBm.
VectorField interference_field(std::shared_ptr<const CoverageModel> model, const Vector& targets,
                               std::shared_ptr<ClampCounter> clamps = nullptr);

struct EqualizeOptions {
    /// Track the current mean coverage instead of a fixed target: finds a
    /// point where all cells share one coverage level, whatever it is.
    bool track_mean = false;
    double tol = 0.02;
    std::size_t max_iter = 200;
    double gain_db = 20.0;  // dB per unit of coverage error
    double min_gain_db = 0.5;
    double start_dbm = 46.0;
};

struct EqualizeResult {
    double target = 0.0;  // level reached (the mean when tracking)
    Vector power_dbm;
    Vector coverage;
    std::size_t iterations = 0;
    double final_gain_db = 0.0;
    bool converged = false;
};

/// Damped fixed point P_i <- clamp(P_i + gain (target - K_i(P))) until
/// max_i |K_i - target| < tol. The gain is halved (down to min_gain_db)
/// whenever the largest error grows. With track_mean the target is re-set to
/// mean_i K_i(P) at every iteration and `target` is ignored.
EqualizeResult find_equal_coverage(const CoverageModel& model, double target, const EqualizeOptions& options = {});

struct SnapshotConfig {
    double side_km = 2.0;
    std::size_t n_per_cell = 2000;
    double coverage_target = 0.8;
    double jacobian_step_db = 0.5;
    EqualizeOptions equalize{.track_mean = true};
    RadioParams radio;
};

struct SnapshotResult {
    std::size_t id = 0;
    std::size_t n_bs = 0;
    bool converged = false;
    double coverage_level = 0.0;
    double max_re_eig = 0.0;
    bool unstable = false;
};

struct SnapshotSummary {
    double density = 0.0;
    std::vector<SnapshotResult> snapshots;
    std::size_t n_converged = 0;
    std::size_t n_unstable = 0;
    double p_unstable = 0.0;
};

/// One Poisson network: layout, equal-coverage point, Jacobian of G there
/// and its eigenvalue verdict. Deterministic in (seed, id).
SnapshotResult run_snapshot(double density, const SnapshotConfig& config, std::uint64_t seed, std::size_t id);

/// Fraction of converged snapshots whose Jacobian is not stable. Throws
/// NumericalFailure if no snapshot converged.
SnapshotSummary snapshot_instability(double density, std::size_t n_snapshots, const SnapshotConfig& config,
                                     std::uint64_t seed, std::size_t jobs = 1);

/// Columns snapshot_id, N_bs, converged, max_Re_eig, unstable.
void write_snapshots_csv(std::ostream& out, const SnapshotSummary& summary);

struct HexConfig {
    bool coordinated = false;
    std::uint64_t seed = 1;
    double t_end = 100.0;
    double step = 0.01;
    std::size_t record_stride = 10;
    std::size_t n_bs = 12;
    double isd_km = 0.5;
    std::size_t n_per_cell = 2000;
    double p_star_dbm = 46.0;
    double perturbation_db = 1.0;
    double ball_db = 3.0;
    double jacobian_step_db = 0.5;
    RadioParams radio;
};

struct HexResult {
    Vector p_star;
    Vector g_star;       // G(P*), used as the targets
    Matrix jacobian;     // JG(P*)
    StabilityVerdict open_loop;
    StabilityVerdict coordinated_loop;  // -J^T J
    Trajectory powers;
    std::vector<Vector> coverage;       // G along the recorded states
    double max_deviation_db = 0.0;      // sup_t max_i |P_i(t) - P_i*|
    bool stayed_in_ball = true;
};

/// Runs the 12-site torus power-control loops from a seeded perturbation
/// of P*, with C = I or C = -(JG(P*))^T.
HexResult hexagonal_experiment(const HexConfig& config);

}  // namespace loopcoord::interference
