#pragma once

#include "loopcoord/types.hpp"

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

namespace loopcoord {

/// Update direction F(theta) of I parallel control loops.
///
/// A pure function of theta: randomized fields must carry their own frozen
/// randomness so that repeated evaluations (finite differences, RK4 stages)
/// see the same realization. Copies share the underlying callable.
class VectorField {
public:
    using Fn = std::function<Vector(const Vector&)>;

    VectorField(std::size_t dim, Fn fn);

    std::size_t dim() const { return dim_; }

    /// Evaluates F(theta); throws InvalidInput on dimension mismatch.
    Vector operator()(const Vector& theta) const;

private:
    std::size_t dim_;
    std::shared_ptr<const Fn> fn_;
};

/// Affine dynamics F(theta) = A theta + b with equilibrium theta* = -A^{-1} b.
class LinearSystem {
public:
    /// Computes theta* and rejects singular or ill-conditioned A
    /// (1/cond(A) < kMinReciprocalCondition) with NumericalFailure.
    LinearSystem(Matrix a, Vector b);

    const Matrix& a() const { return a_; }
    const Vector& b() const { return b_; }
    const Vector& theta_star() const { return theta_star_; }
    std::size_t dim() const { return static_cast<std::size_t>(b_.size()); }

    VectorField field() const;

private:
    Matrix a_;
    Vector b_;
    Vector theta_star_;
};

inline constexpr double kMinReciprocalCondition = 1e-12;

/// Zero-finding loops: each loop drives its KPI f_i towards target_i.
struct ZeroFindingSpec {
    std::size_t dim;
    std::function<Vector(const Vector&)> kpi;
    Vector targets;
};

/// Neighbor sets: j belongs to neighbors[i] iff |d f_j / d theta_i| > tol.
struct InteractionGraph {
    std::vector<std::vector<std::size_t>> neighbors;
    double tolerance = 0.0;
};

/// 1 / cond_2(A) from the singular values; 0 for singular matrices.
double reciprocal_condition(const Matrix& a);

VectorField make_linear_field(const Matrix& a, const Vector& b);

/// theta* = -A^{-1} b. Throws NumericalFailure carrying the condition
/// estimate when A is singular or ill-conditioned.
Vector equilibrium(const Matrix& a, const Vector& b);
inline Vector equilibrium(const LinearSystem& sys) { return sys.theta_star(); }

VectorField zero_finding_field(const ZeroFindingSpec& spec);

/// Loop i running alone: component i is F_i evaluated with every other
/// coordinate pinned to `frozen`; all other components are 0.
VectorField standalone_field(const VectorField& field, std::size_t i, const Vector& frozen);

/// Thresholds the Jacobian J (J(j, i) = d f_j / d theta_i).
InteractionGraph interaction_graph(const Matrix& jacobian, double tol);

/// Default scale-free tolerance 1e-8 * max|J|.
InteractionGraph interaction_graph(const Matrix& jacobian);

}  // namespace loopcoord
