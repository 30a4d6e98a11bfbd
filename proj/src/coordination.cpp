#include "loopcoord/coordination.hpp"

#include "loopcoord/csv.hpp"

#include <ostream>

namespace loopcoord {

Coordinator Coordinator::custom(Matrix c) {
    require(c.rows() == c.cols() && c.rows() >= 1, "Coordinator: C must be square");
    return Coordinator(std::move(c), Vector(), CoordinatorProvenance::Custom);
}

Coordinator synthesize_gradient_coordinator(const Matrix& a, const Vector& w) {
    require(a.rows() == a.cols() && a.rows() >= 1, "synthesize_gradient_coordinator: A must be square");
    require(w.size() == a.rows(), "synthesize_gradient_coordinator: weight dimension mismatch");
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        require(w(i) > 0.0 && std::isfinite(w(i)), "synthesize_gradient_coordinator: weights must be positive");
    }
    Matrix c = -(a.transpose() * w.asDiagonal());
    return Coordinator(std::move(c), w, CoordinatorProvenance::GradientFlow);
}

Coordinator synthesize_gradient_coordinator(const Matrix& a) {
    return synthesize_gradient_coordinator(a, Vector::Ones(a.rows()));
}

Coordinator inverse_coordinator(const Matrix& a) {
    require(a.rows() == a.cols() && a.rows() >= 1, "inverse_coordinator: A must be square");
    if (!(reciprocal_condition(a) >= kMinReciprocalCondition)) {
        throw NumericalFailure("inverse_coordinator: A is singular or ill-conditioned");
    }
    return Coordinator(a.inverse(), Vector(), CoordinatorProvenance::Inverse);
}

VectorField coordinated_field(const Coordinator& coord, const LinearSystem& sys) {
    require(coord.dim() == sys.dim(), "coordinated_field: dimension mismatch");
    return VectorField(sys.dim(), [c = coord.c(), a = sys.a(), b = sys.b()](const Vector& theta) -> Vector {
        return c * (a * theta + b);
    });
}

VectorField coordinated_field(const Coordinator& coord, const VectorField& field) {
    require(coord.dim() == field.dim(), "coordinated_field: dimension mismatch");
    return VectorField(field.dim(), [c = coord.c(), field](const Vector& theta) -> Vector { return c * field(theta); });
}

Vector coordinated_kpi(const Coordinator& coord, const Vector& kpi_values) {
    require(static_cast<std::size_t>(kpi_values.size()) == coord.dim(), "coordinated_kpi: length mismatch");
    return coord.c() * kpi_values;
}

double distributed_update_direction(std::size_t /*i*/, const std::map<std::size_t, double>& partials,
                                    const std::map<std::size_t, double>& residuals,
                                    const std::map<std::size_t, double>& weights) {
    require(partials.size() == residuals.size() && partials.size() == weights.size(),
            "distributed_update_direction: neighbor key sets differ");
    double sum = 0.0;
    auto r = residuals.begin();
    auto w = weights.begin();
    for (auto p = partials.begin(); p != partials.end(); ++p, ++r, ++w) {
        require(p->first == r->first && p->first == w->first, "distributed_update_direction: neighbor key sets differ");
        sum += 2.0 * w->second * p->second * r->second;
    }
    return -sum;
}

StabilityVerdict verify_coordinated(const Coordinator& coord, const Matrix& a) {
    require(a.rows() == a.cols() && static_cast<std::size_t>(a.rows()) == coord.dim(),
            "verify_coordinated: dimension mismatch");
    return eigen_stability(coord.c() * a);
}

const char* to_string(CoordinatorProvenance p) {
    switch (p) {
        case CoordinatorProvenance::GradientFlow:
            return "gradient_flow";
        case CoordinatorProvenance::Inverse:
            return "inverse";
        case CoordinatorProvenance::Custom:
            return "custom";
    }
    return "custom";
}

void write_coordinator_csv(std::ostream& out, const Coordinator& coord) {
    out << "# provenance=" << to_string(coord.provenance()) << '\n';
    if (coord.provenance() == CoordinatorProvenance::GradientFlow) {
        out << "# weights=";
        for (Eigen::Index i = 0; i < coord.weights().size(); ++i) {
            out << (i ? "," : "") << csv::format_double(coord.weights()(i));
        }
        out << '\n';
    }
    csv::write_matrix(out, coord.c());
}

}  // namespace loopcoord
