#include "loopcoord/admission.hpp"

#include "loopcoord/csv.hpp"
#include "loopcoord/parallel.hpp"
#include "loopcoord/stability.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

namespace loopcoord::admission {

void QueueParams::validate() const {
    require(lambda > 0.0 && mean_size > 0.0 && rate > 0.0 && rate_min > 0.0 && x_max > 0.0,
            "QueueParams: all parameters must be strictly positive");
    require(rate_min <= rate, "QueueParams: rate_min must not exceed rate");
}

double logistic_phi(double n) {
    if (n > 0.0) {
        const double e = std::exp(-n);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(n));
}

double logistic_psi(double u, double sharpness) {
    require(sharpness > 0.0, "logistic_psi: sharpness must be positive");
    return logistic_phi(-u / sharpness);
}

double load(const QueueParams& p, double x) {
    require(x > 0.0, "load: x must be positive");
    return p.lambda * p.mean_size / (x * p.rate);
}

StationaryDist stationary(const QueueParams& p, double x, double blocking, std::size_t n_max) {
    p.validate();
    require(n_max >= 10, "stationary: truncation must be >= 10");
    require(std::isfinite(blocking), "stationary: non-finite blocking threshold");
    const double rho = load(p, x);

    // u[n+1] = u[n] * rho * phi(n - b); rescaled on the fly to stay finite.
    std::vector<double> u{1.0};
    double total = 1.0;
    std::size_t limit = n_max;
    constexpr double kRescale = 1e200;
    constexpr std::size_t kHardLimit = std::size_t{1} << 24;
    for (;;) {
        while (u.size() <= limit) {
            const double n = static_cast<double>(u.size() - 1);
            const double next = u.back() * rho * logistic_phi(n - blocking);
            u.push_back(next);
            total += next;
            if (total > kRescale) {
                for (auto& v : u) {
                    v /= kRescale;
                }
                total /= kRescale;
            }
        }
        const double last_ratio = rho * logistic_phi(static_cast<double>(limit) - blocking);
        if (u.back() < 1e-14 * total && last_ratio < 1.0) {
            break;
        }
        if (limit >= kHardLimit) {
            throw NumericalFailure("stationary: truncation did not converge");
        }
        limit *= 2;
    }

    StationaryDist d;
    d.n_max = limit;
    // Ratios rho phi(n - b) decrease in n, so the remainder is dominated by
    // a geometric series with the last ratio.
    const double r = rho * logistic_phi(static_cast<double>(limit) - blocking);
    d.tail_mass_bound = u.back() * r / (1.0 - r) / total;
    d.probs.resize(u.size());
    for (std::size_t n = 0; n < u.size(); ++n) {
        d.probs[n] = u[n] / total;
    }
    return d;
}

double mean_transfer_time(const QueueParams& p, double x, double blocking) {
    const auto d = stationary(p, x, blocking);
    double mean_n = 0.0;
    for (std::size_t n = 0; n < d.probs.size(); ++n) {
        mean_n += static_cast<double>(n) * d.probs[n];
    }
    return mean_n / p.lambda;
}

double outage(const QueueParams& p, double x, double blocking) {
    const auto d = stationary(p, x, blocking);
    const double threshold = x * p.rate / p.rate_min;
    double o = 0.0;
    for (std::size_t n = 0; n < d.probs.size(); ++n) {
        if (static_cast<double>(n) > threshold) {
            o += d.probs[n];
        }
    }
    return o;
}

double smoothed_outage(const QueueParams& p, double x, double blocking, double sharpness) {
    require(sharpness > 0.0, "smoothed_outage: sharpness must be positive");
    const auto d = stationary(p, x, blocking);
    const double threshold = x * p.rate / p.rate_min;
    double o = 0.0;
    for (std::size_t n = 0; n < d.probs.size(); ++n) {
        o += d.probs[n] * logistic_psi(static_cast<double>(n) - threshold, sharpness);
    }
    return o;
}

VectorField admission_field(const QueueParams& p, const Targets& targets, double sharpness, const Domain& domain,
                            std::shared_ptr<ClampCounter> clamps) {
    p.validate();
    require(sharpness > 0.0, "admission_field: sharpness must be positive");
    require(domain.x_min > 0.0 && domain.x_min < p.x_max, "admission_field: need 0 < x_min < x_max");
    require(domain.b_max > 0.0, "admission_field: b_max must be positive");
    require(targets.outage > 0.0 && targets.outage < 1.0 && targets.transfer_time > 0.0,
            "admission_field: invalid targets");
    return VectorField(2, [p, targets, sharpness, domain, clamps](const Vector& theta) -> Vector {
        const double x = std::clamp(theta(0), domain.x_min, p.x_max);
        const double b = std::clamp(theta(1), 0.0, domain.b_max);
        if (clamps && (x != theta(0) || b != theta(1))) {
            clamps->events.fetch_add(1, std::memory_order_relaxed);
        }
        Vector f(2);
        f(0) = smoothed_outage(p, x, b, sharpness) - targets.outage;
        f(1) = targets.transfer_time - mean_transfer_time(p, x, b);
        return f;
    });
}

Matrix admission_jacobian(const QueueParams& p, double x, double blocking, double sharpness, double dx, double db) {
    require(dx > 0.0 && db > 0.0, "admission_jacobian: steps must be positive");
    require(x - dx > 0.0, "admission_jacobian: x too close to 0 for the step");
    Matrix j(2, 2);
    j(0, 0) = (smoothed_outage(p, x + dx, blocking, sharpness) - smoothed_outage(p, x - dx, blocking, sharpness)) /
              (2.0 * dx);
    j(0, 1) = (smoothed_outage(p, x, blocking + db, sharpness) - smoothed_outage(p, x, blocking - db, sharpness)) /
              (2.0 * db);
    j(1, 0) = -(mean_transfer_time(p, x + dx, blocking) - mean_transfer_time(p, x - dx, blocking)) / (2.0 * dx);
    j(1, 1) = -(mean_transfer_time(p, x, blocking + db) - mean_transfer_time(p, x, blocking - db)) / (2.0 * db);
    return j;
}

Grid Grid::parse(const std::string& spec) {
    Grid g;
    char c1 = 0;
    char c2 = 0;
    std::istringstream ss(spec);
    if (!(ss >> g.start >> c1 >> g.stop >> c2 >> g.step) || c1 != ':' || c2 != ':' || !(ss >> std::ws).eof()) {
        throw InvalidInput("grid: expected start:stop:step, got '" + spec + "'");
    }
    require(g.step > 0.0 && g.stop >= g.start, "grid: need step > 0 and stop >= start");
    return g;
}

std::vector<double> Grid::values() const {
    const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) {
        v[k] = start + static_cast<double>(k) * step;
    }
    return v;
}

std::vector<ScanPoint> stability_region_scan(const QueueParams& p, const std::vector<double>& xs,
                                             const std::vector<double>& bs, double sharpness, std::size_t jobs) {
    p.validate();
    require(!xs.empty() && !bs.empty(), "stability_region_scan: empty grid");
    std::vector<ScanPoint> out(xs.size() * bs.size());
    parallel_for(out.size(), jobs, [&](std::size_t k) {
        ScanPoint& pt = out[k];
        pt.x = xs[k / bs.size()];
        pt.blocking = bs[k % bs.size()];
        pt.jacobian = admission_jacobian(p, pt.x, pt.blocking, sharpness);
        pt.det = pt.jacobian.determinant();
        pt.trace = pt.jacobian.trace();
        pt.det_unstable = instability_det_2x2(pt.jacobian);
        const auto verdict = eigen_stability(pt.jacobian);
        pt.max_re_eig = verdict.margin;
        pt.stable = verdict.stable;
    });
    return out;
}

void write_scan_csv(std::ostream& out, const std::vector<ScanPoint>& scan) {
    out << "x,b,det,trace,max_re_eig,stable\n";
    for (const auto& pt : scan) {
        csv::write_row(out, {pt.x, pt.blocking, pt.det, pt.trace, pt.max_re_eig, pt.stable ? 1.0 : 0.0});
    }
}

}  // namespace loopcoord::admission
