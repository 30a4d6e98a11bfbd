#include "loopcoord/core_model.hpp"

#include <sstream>

namespace loopcoord {

VectorField::VectorField(std::size_t dim, Fn fn)
    : dim_(dim), fn_(std::make_shared<const Fn>(std::move(fn))) {
    require(dim_ >= 1, "VectorField: dimension must be >= 1");
    require(static_cast<bool>(*fn_), "VectorField: empty callable");
}

Vector VectorField::operator()(const Vector& theta) const {
    require(static_cast<std::size_t>(theta.size()) == dim_, "VectorField: argument dimension mismatch");
    Vector out = (*fn_)(theta);
    require(static_cast<std::size_t>(out.size()) == dim_, "VectorField: callable changed dimension");
    return out;
}

double reciprocal_condition(const Matrix& a) {
    Eigen::JacobiSVD<Matrix> svd(a);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) {
        return 0.0;
    }
    return s(s.size() - 1) / s(0);
}

Vector equilibrium(const Matrix& a, const Vector& b) {
    require(a.rows() == a.cols(), "equilibrium: A must be square");
    require(a.rows() == b.size(), "equilibrium: b dimension mismatch");
    const double rcond = reciprocal_condition(a);
    if (!(rcond >= kMinReciprocalCondition)) {
        std::ostringstream msg;
        msg << "equilibrium: A is singular or ill-conditioned (1/cond = " << rcond << ")";
        throw NumericalFailure(msg.str());
    }
    return a.fullPivLu().solve(-b);
}

LinearSystem::LinearSystem(Matrix a, Vector b) : a_(std::move(a)), b_(std::move(b)) {
    theta_star_ = equilibrium(a_, b_);
}

VectorField LinearSystem::field() const { return make_linear_field(a_, b_); }

VectorField make_linear_field(const Matrix& a, const Vector& b) {
    require(a.rows() == a.cols(), "make_linear_field: A must be square");
    require(a.rows() == b.size(), "make_linear_field: b dimension mismatch");
    require(a.rows() >= 1, "make_linear_field: empty system");
    return VectorField(static_cast<std::size_t>(b.size()),
                       [a, b](const Vector& theta) -> Vector { return a * theta + b; });
}

VectorField zero_finding_field(const ZeroFindingSpec& spec) {
    require(static_cast<std::size_t>(spec.targets.size()) == spec.dim,
            "zero_finding_field: targets dimension mismatch");
    return VectorField(spec.dim, [kpi = spec.kpi, targets = spec.targets](const Vector& theta) -> Vector {
        Vector f = kpi(theta);
        require(f.size() == targets.size(), "zero_finding_field: KPI dimension mismatch");
        return f - targets;
    });
}

VectorField standalone_field(const VectorField& field, std::size_t i, const Vector& frozen) {
    require(i < field.dim(), "standalone_field: index out of range");
    require(static_cast<std::size_t>(frozen.size()) == field.dim(), "standalone_field: frozen dimension mismatch");
    const auto idx = static_cast<Eigen::Index>(i);
    return VectorField(field.dim(), [field, idx, frozen](const Vector& theta) -> Vector {
        Vector probe = frozen;
        probe(idx) = theta(idx);
        Vector out = Vector::Zero(theta.size());
        out(idx) = field(probe)(idx);
        return out;
    });
}

InteractionGraph interaction_graph(const Matrix& jacobian, double tol) {
    require(jacobian.rows() == jacobian.cols(), "interaction_graph: J must be square");
    require(tol >= 0.0, "interaction_graph: negative tolerance");
    InteractionGraph g;
    g.tolerance = tol;
    g.neighbors.resize(static_cast<std::size_t>(jacobian.rows()));
    for (Eigen::Index i = 0; i < jacobian.cols(); ++i) {
        for (Eigen::Index j = 0; j < jacobian.rows(); ++j) {
            if (std::abs(jacobian(j, i)) > tol) {
                g.neighbors[static_cast<std::size_t>(i)].push_back(static_cast<std::size_t>(j));
            }
        }
    }
    return g;
}

InteractionGraph interaction_graph(const Matrix& jacobian) {
    const double scale = jacobian.size() ? jacobian.cwiseAbs().maxCoeff() : 0.0;
    return interaction_graph(jacobian, 1e-8 * scale);
}

}  // namespace loopcoord
