#include "loopcoord/dynamics.hpp"

#include "loopcoord/csv.hpp"
#include "loopcoord/rng.hpp"

#include <cmath>
#include <ostream>

namespace loopcoord {
namespace {

bool escaped(const Vector& theta) { return !theta.allFinite() || theta.norm() > kEscapeNorm; }

}  // namespace

Trajectory integrate_ode(const VectorField& field, const Vector& theta0, double h, double t_end,
                         const OdeOptions& options) {
    require(h > 0.0, "integrate_ode: step must be positive");
    require(t_end >= h, "integrate_ode: t_end must be >= step");
    require(static_cast<std::size_t>(theta0.size()) == field.dim(), "integrate_ode: dimension mismatch");
    require(theta0.allFinite(), "integrate_ode: non-finite initial state");
    const std::size_t stride = std::max<std::size_t>(1, options.record_stride);
    const auto steps = static_cast<std::size_t>(std::llround(t_end / h));

    Trajectory traj;
    traj.scheme = "rk4";
    traj.step = h;
    traj.times.push_back(0.0);
    traj.states.push_back(theta0);

    Vector theta = theta0;
    for (std::size_t k = 1; k <= steps; ++k) {
        const Vector k1 = field(theta);
        const Vector k2 = field(theta + 0.5 * h * k1);
        const Vector k3 = field(theta + 0.5 * h * k2);
        const Vector k4 = field(theta + h * k3);
        theta += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (options.project) {
            options.project(theta);
        }
        const double t = static_cast<double>(k) * h;
        if (escaped(theta)) {
            traj.escaped = true;
            traj.times.push_back(t);
            traj.states.push_back(theta);
            break;
        }
        if (k % stride == 0 || k == steps) {
            traj.times.push_back(t);
            traj.states.push_back(theta);
        }
    }
    return traj;
}

Trajectory simulate_sa(const VectorField& field, const Vector& theta0, const SASchedule& sched) {
    require(sched.epsilon > 0.0, "simulate_sa: epsilon must be positive");
    require(sched.noise_sigma >= 0.0, "simulate_sa: noise_sigma must be >= 0");
    require(sched.steps >= 1, "simulate_sa: steps must be >= 1");
    require(static_cast<std::size_t>(theta0.size()) == field.dim(), "simulate_sa: dimension mismatch");
    const std::size_t stride = std::max<std::size_t>(1, sched.record_stride);
    const auto dim = static_cast<Eigen::Index>(field.dim());

    Rng rng(sched.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_int_distribution<Eigen::Index> pick(0, dim - 1);

    Trajectory traj;
    traj.scheme = std::string("sa_") + to_string(sched.kind);
    traj.step = sched.epsilon;
    traj.seed = sched.seed;
    traj.times.push_back(0.0);
    traj.states.push_back(theta0);

    Vector theta = theta0;
    for (std::size_t t = 0; t < sched.steps; ++t) {
        const Vector f = field(theta);
        switch (sched.kind) {
            case ScheduleKind::Synchronous:
                for (Eigen::Index i = 0; i < dim; ++i) {
                    theta(i) += sched.epsilon * (f(i) + sched.noise_sigma * noise(rng));
                }
                break;
            case ScheduleKind::RoundRobin: {
                const auto i = static_cast<Eigen::Index>(t % field.dim());
                theta(i) += sched.epsilon * (f(i) + sched.noise_sigma * noise(rng));
                break;
            }
            case ScheduleKind::RandomCoordinate: {
                const Eigen::Index i = pick(rng);
                theta(i) += sched.epsilon * (f(i) + sched.noise_sigma * noise(rng));
                break;
            }
        }
        const auto n = t + 1;
        if (escaped(theta)) {
            traj.escaped = true;
            traj.times.push_back(static_cast<double>(n));
            traj.states.push_back(theta);
            break;
        }
        if (n % stride == 0 || n == sched.steps) {
            traj.times.push_back(static_cast<double>(n));
            traj.states.push_back(theta);
        }
    }
    return traj;
}

ConvergenceStats convergence_stats(const Trajectory& traj, const Vector& theta_star) {
    require(!traj.states.empty(), "convergence_stats: empty trajectory");
    ConvergenceStats s;
    s.escaped = traj.escaped;
    s.final_dist = (traj.back() - theta_star).norm();
    const std::size_t n = traj.size();
    const std::size_t tail = std::max<std::size_t>(1, n / 10);
    Vector mean = Vector::Zero(theta_star.size());
    double dist_sum = 0.0;
    for (std::size_t k = n - tail; k < n; ++k) {
        dist_sum += (traj.states[k] - theta_star).norm();
        mean += traj.states[k];
    }
    mean /= static_cast<double>(tail);
    s.mean_tail_dist = dist_sum / static_cast<double>(tail);
    s.tail_mean_dist = (mean - theta_star).norm();
    return s;
}

ScheduleKind parse_schedule(const std::string& name) {
    if (name == "synchronous") {
        return ScheduleKind::Synchronous;
    }
    if (name == "round_robin") {
        return ScheduleKind::RoundRobin;
    }
    if (name == "random_coordinate") {
        return ScheduleKind::RandomCoordinate;
    }
    throw InvalidInput("unknown schedule '" + name + "'");
}

const char* to_string(ScheduleKind kind) {
    switch (kind) {
        case ScheduleKind::Synchronous:
            return "synchronous";
        case ScheduleKind::RoundRobin:
            return "round_robin";
        case ScheduleKind::RandomCoordinate:
            return "random_coordinate";
    }
    return "synchronous";
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const std::vector<std::string>& header,
                          const std::string& column_prefix) {
    csv::write_comment_lines(out, header);
    out << "# scheme=" << traj.scheme << "\n# step=" << csv::format_double(traj.step) << "\n# seed=" << traj.seed
        << "\n# escaped=" << (traj.escaped ? "true" : "false") << '\n';
    out << 't';
    const auto dim = traj.states.empty() ? 0 : traj.states.front().size();
    for (Eigen::Index i = 0; i < dim; ++i) {
        out << ',' << column_prefix << (i + 1);
    }
    out << '\n';
    std::vector<double> row(static_cast<std::size_t>(dim) + 1);
    for (std::size_t k = 0; k < traj.size(); ++k) {
        row[0] = traj.times[k];
        for (Eigen::Index i = 0; i < dim; ++i) {
            row[static_cast<std::size_t>(i) + 1] = traj.states[k](i);
        }
        csv::write_row(out, row);
    }
}

}  // namespace loopcoord
