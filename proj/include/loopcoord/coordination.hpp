#pragma once

#include "loopcoord/core_model.hpp"
#include "loopcoord/stability.hpp"
#include "loopcoord/types.hpp"

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>

namespace loopcoord {

enum class CoordinatorProvenance { GradientFlow, Inverse, Custom };

/// Coordination matrix C: the loops follow C F(theta) instead of F(theta).
/// Each loop i then tracks c_i = sum_j C(i, j) f_j.
class Coordinator {
public:
    static Coordinator custom(Matrix c);

    const Matrix& c() const { return c_; }
    const Vector& weights() const { return weights_; }
    CoordinatorProvenance provenance() const { return provenance_; }
    std::size_t dim() const { return static_cast<std::size_t>(c_.rows()); }

private:
    friend Coordinator synthesize_gradient_coordinator(const Matrix& a, const Vector& w);
    friend Coordinator inverse_coordinator(const Matrix& a);

    Coordinator(Matrix c, Vector weights, CoordinatorProvenance provenance)
        : c_(std::move(c)), weights_(std::move(weights)), provenance_(provenance) {}

    Matrix c_;
    Vector weights_;
    CoordinatorProvenance provenance_;
};

/// C = -A^T W with W = diag(w): the coordinated loops descend
/// V(theta) = sum_i w_i (f_i - target_i)^2. Throws on non-positive weights.
Coordinator synthesize_gradient_coordinator(const Matrix& a, const Vector& w);

/// Unit weights.
Coordinator synthesize_gradient_coordinator(const Matrix& a);

/// C = A^{-1}. Stabilizing but not distributed; kept for comparisons.
Coordinator inverse_coordinator(const Matrix& a);

/// theta -> C (A theta + b).
VectorField coordinated_field(const Coordinator& coord, const LinearSystem& sys);

/// theta -> C F(theta) for any field, e.g. a linearized nonlinear one.
VectorField coordinated_field(const Coordinator& coord, const VectorField& field);

/// c = C f.
Vector coordinated_kpi(const Coordinator& coord, const Vector& kpi_values);

/// Update of loop i from neighbor-local data only:
///   -sum_{j in I_i} 2 w_j (d f_j / d theta_i) (f_j - target_j),
/// i.e. component i of -grad V. All three maps must share the key set I_i.
double distributed_update_direction(std::size_t i, const std::map<std::size_t, double>& partials,
                                    const std::map<std::size_t, double>& residuals,
                                    const std::map<std::size_t, double>& weights);

/// eigen_stability(C A).
StabilityVerdict verify_coordinated(const Coordinator& coord, const Matrix& a);

const char* to_string(CoordinatorProvenance p);

/// C as CSV preceded by a `# provenance=...` line.
void write_coordinator_csv(std::ostream& out, const Coordinator& coord);

}  // namespace loopcoord
