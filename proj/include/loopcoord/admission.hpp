#pragma once

#include "loopcoord/core_model.hpp"
#include "loopcoord/types.hpp"

#include <atomic>
#include <cstddef>
#include <iosfwd>
#include <memory>
#include <vector>

// Single base station serving elastic traffic under processor sharing, with
// two control loops: resource allocation x (tracks a smoothed outage target)
// and admission control through the blocking threshold (tracks a mean
// file-transfer-time target).
namespace loopcoord::admission {

struct QueueParams {
    double lambda = 0.5;     // arrivals, users/s
    double mean_size = 10.0; // E[sigma], Mbit
    double rate = 15.0;      // R, Mbit/s with all resources
    double rate_min = 2.0;   // R_min, Mbit/s
    double x_max = 1.0;

    void validate() const;
};

/// Queue operating point. `blocking` is the admission threshold, unrelated
/// to the offset vector of a LinearSystem.
struct OperatingPoint {
    double x = 1.0;
    double blocking = 0.0;
};

struct StationaryDist {
    std::vector<double> probs;  // pi(0..n_max)
    std::size_t n_max = 0;
    double tail_mass_bound = 0.0;  // bound on the truncated mass, relative
};

/// Admission probability 1 / (1 + e^n), overflow-safe.
double logistic_phi(double n);

/// Smooth step 1 / (1 + e^{-u/s}).
double logistic_psi(double u, double sharpness);

/// rho = lambda E[sigma] / (x R).
double load(const QueueParams& p, double x);

/// pi(n) proportional to rho^n prod_{k<n} phi(k - b). Starts at n_max and
/// doubles the truncation until the last term is below 1e-14 of the total.
StationaryDist stationary(const QueueParams& p, double x, double blocking, std::size_t n_max = 100);

/// Little's law: T = sum n pi(n) / lambda, in seconds.
double mean_transfer_time(const QueueParams& p, double x, double blocking);

/// Probability that n > x R / R_min.
double outage(const QueueParams& p, double x, double blocking);

double smoothed_outage(const QueueParams& p, double x, double blocking, double sharpness = 1.0);

struct Targets {
    double outage = 0.05;
    double transfer_time = 1.0;
};

struct Domain {
    double x_min = 0.05;
    double b_max = 50.0;
};

/// Counts evaluations whose argument fell outside the domain box.
struct ClampCounter {
    std::atomic<std::size_t> events{0};
};

/// theta = (x, b); F_1 = O~(x, b) - O_bar, F_2 = T_bar - T(x, b).
/// Arguments are clamped into [x_min, x_max] x [0, b_max].
VectorField admission_field(const QueueParams& p, const Targets& targets, double sharpness = 1.0,
                            const Domain& domain = {}, std::shared_ptr<ClampCounter> clamps = nullptr);

/// Central-difference Jacobian of (O~, -T) at (x, b).
Matrix admission_jacobian(const QueueParams& p, double x, double blocking, double sharpness = 1.0,
                          double dx = 1e-4, double db = 1e-3);

struct ScanPoint {
    double x = 0.0;
    double blocking = 0.0;
    Matrix jacobian;
    double det = 0.0;
    double trace = 0.0;
    double max_re_eig = 0.0;
    bool det_unstable = false;
    bool stable = false;
};

struct Grid {
    double start = 0.0;
    double stop = 0.0;
    double step = 1.0;

    /// Parses "start:stop:step".
    static Grid parse(const std::string& spec);
    std::vector<double> values() const;
};

/// Classifies every grid point by the determinant criterion and the full
/// eigenvalue test. Rows are ordered x-major regardless of `jobs`.
std::vector<ScanPoint> stability_region_scan(const QueueParams& p, const std::vector<double>& xs,
                                             const std::vector<double>& bs, double sharpness = 1.0,
                                             std::size_t jobs = 1);

/// Columns x, b, det, trace, max_re_eig, stable.
void write_scan_csv(std::ostream& out, const std::vector<ScanPoint>& scan);

}  // namespace loopcoord::admission
