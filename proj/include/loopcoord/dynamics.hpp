#pragma once

#include "loopcoord/core_model.hpp"
#include "loopcoord/types.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace loopcoord {

/// Runs abort once ||theta|| exceeds this.
inline constexpr double kEscapeNorm = 1e9;

struct Trajectory {
    std::vector<double> times;
    std::vector<Vector> states;
    std::string scheme;
    double step = 0.0;
    std::uint64_t seed = 0;
    bool escaped = false;

    std::size_t size() const { return states.size(); }
    const Vector& back() const { return states.back(); }
};

struct OdeOptions {
    std::size_t record_stride = 1;
    /// Applied to the state after every step, e.g. a box clamp.
    std::function<void(Vector&)> project;
};

/// Classical fixed-step RK4 for d theta / dt = F(theta) on [0, t_end].
Trajectory integrate_ode(const VectorField& field, const Vector& theta0, double h, double t_end,
                         const OdeOptions& options = {});

enum class ScheduleKind { Synchronous, RoundRobin, RandomCoordinate };

struct SASchedule {
    ScheduleKind kind = ScheduleKind::Synchronous;
    double epsilon = 0.01;
    double noise_sigma = 0.0;
    std::size_t steps = 1000;
    std::uint64_t seed = 0;
    std::size_t record_stride = 1;
};

/// theta[t+1] = theta[t] + eps (F(theta[t]) + M[t]) with i.i.d. Gaussian
/// M[t]. Round-robin updates coordinate t mod I; random-coordinate draws
/// it uniformly. Identical seeds give bit-identical trajectories.
Trajectory simulate_sa(const VectorField& field, const Vector& theta0, const SASchedule& sched);

struct ConvergenceStats {
    double final_dist = 0.0;
    double mean_tail_dist = 0.0;  // mean of ||theta - theta*|| over the last 10%
    double tail_mean_dist = 0.0;  // ||mean(theta) - theta*|| over the last 10%
    bool escaped = false;
};

ConvergenceStats convergence_stats(const Trajectory& traj, const Vector& theta_star);

ScheduleKind parse_schedule(const std::string& name);
const char* to_string(ScheduleKind kind);

/// Columns t, theta_1..theta_I; `header` lines are written first as comments.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const std::vector<std::string>& header,
                          const std::string& column_prefix = "theta_");

}  // namespace loopcoord
