#include "loopcoord/stability.hpp"

#include "loopcoord/csv.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace loopcoord {

StabilityVerdict eigen_stability(const Matrix& a) {
    require(a.rows() == a.cols() && a.rows() >= 1, "eigen_stability: A must be square and nonempty");
    require(a.allFinite(), "eigen_stability: non-finite entries");
    Eigen::EigenSolver<Matrix> solver(a, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) {
        throw NumericalFailure("eigen_stability: eigenvalue iteration did not converge");
    }
    StabilityVerdict v;
    v.eigenvalues = solver.eigenvalues();
    v.margin = v.eigenvalues.real().maxCoeff();
    v.marginal = std::abs(v.margin) <= kMarginalTolerance;
    v.stable = v.margin < -kMarginalTolerance;
    return v;
}

std::vector<bool> standalone_check(const Matrix& a) {
    require(a.rows() == a.cols(), "standalone_check: A must be square");
    std::vector<bool> out(static_cast<std::size_t>(a.rows()));
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        out[static_cast<std::size_t>(i)] = a(i, i) < 0.0;
    }
    return out;
}

LyapunovResult lyapunov_solve(const Matrix& a, const Matrix& q) {
    require(a.rows() == a.cols(), "lyapunov_solve: A must be square");
    require(q.rows() == a.rows() && q.cols() == a.cols(), "lyapunov_solve: Q dimension mismatch");
    require((q - q.transpose()).norm() <= 1e-12 * std::max(1.0, q.norm()), "lyapunov_solve: Q not symmetric");
    {
        Eigen::SelfAdjointEigenSolver<Matrix> qe(q);
        require(qe.eigenvalues().minCoeff() > 0.0, "lyapunov_solve: Q not positive definite");
    }
    const Eigen::Index n = a.rows();

    LyapunovResult result;
    result.certificate.q = q;

    // The operator X -> A^T X + X A has eigenvalues lambda_i + lambda_j.
    const ComplexVector lambda = eigen_stability(a).eigenvalues;
    const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (std::abs(lambda(i) + lambda(j)) <= kMarginalTolerance * scale) {
                result.status = LyapunovStatus::Marginal;
                return result;
            }
        }
    }

    // Column-major vec: vec(A^T X) = (I kron A^T) vec X, vec(X A) = (A^T kron I) vec X.
    const Matrix id = Matrix::Identity(n, n);
    const Matrix at = a.transpose();
    const Matrix op = Eigen::kroneckerProduct(id, at).eval() + Eigen::kroneckerProduct(at, id).eval();
    const Vector rhs = -Eigen::Map<const Vector>(q.data(), n * n);
    Eigen::FullPivLU<Matrix> lu(op);
    if (!lu.isInvertible()) {
        result.status = LyapunovStatus::Marginal;
        return result;
    }
    const Vector xv = lu.solve(rhs);
    Matrix x = Eigen::Map<const Matrix>(xv.data(), n, n);

    const bool symmetric = (x - x.transpose()).norm() <= 1e-10 * std::max(1.0, x.norm());
    x = 0.5 * (x + x.transpose());
    result.certificate.x = x;
    result.certificate.residual = (at * x + x * a + q).norm();

    if (!symmetric || !x.allFinite()) {
        result.status = LyapunovStatus::Unstable;
        return result;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> xe(x);
    const double trace = x.trace();
    const double threshold = 1e-10 * trace / static_cast<double>(n);
    const bool pd = trace > 0.0 && xe.eigenvalues().minCoeff() > threshold;
    result.status = pd ? LyapunovStatus::Valid : LyapunovStatus::Unstable;
    return result;
}

double lyapunov_value(const Matrix& x, const Vector& theta, const Vector& theta_star) {
    require(x.rows() == x.cols(), "lyapunov_value: X must be square");
    require(theta.size() == x.rows() && theta_star.size() == x.rows(), "lyapunov_value: dimension mismatch");
    const Vector d = theta - theta_star;
    return d.dot(x * d);
}

Matrix matrix_exponential(const Matrix& a) {
    require(a.rows() == a.cols(), "matrix_exponential: A must be square");
    require(a.allFinite(), "matrix_exponential: non-finite entries");
    const Eigen::Index n = a.rows();
    const Matrix id = Matrix::Identity(n, n);

    // Higham (2005) degree-13 Pade coefficients.
    static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                   1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                   670442572800.0,      33522128640.0,       1323241920.0,
                                   40840800.0,          960960.0,            16380.0,
                                   182.0,               1.0};
    constexpr double theta13 = 5.371920351148152;

    const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
    int s = 0;
    if (norm1 > theta13) {
        s = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
    }
    if (s > 1000) {
        throw NumericalFailure("matrix_exponential: norm too large");
    }
    const Matrix as = a / std::ldexp(1.0, s);

    const Matrix a2 = as * as;
    const Matrix a4 = a2 * a2;
    const Matrix a6 = a4 * a2;
    const Matrix u_inner = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id;
    const Matrix u = as * u_inner;
    const Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;

    Matrix r = (v - u).partialPivLu().solve(v + u);
    for (int k = 0; k < s; ++k) {
        r = r * r;
    }
    if (!r.allFinite()) {
        throw NumericalFailure("matrix_exponential: overflow");
    }
    return r;
}

Vector linear_solution(const LinearSystem& sys, const Vector& theta0, double t) {
    require(t >= 0.0, "linear_solution: t must be >= 0");
    require(static_cast<std::size_t>(theta0.size()) == sys.dim(), "linear_solution: dimension mismatch");
    if (t == 0.0) {
        return theta0;
    }
    const Vector out = sys.theta_star() + matrix_exponential(t * sys.a()) * (theta0 - sys.theta_star());
    if (!out.allFinite()) {
        throw NumericalFailure("linear_solution: overflow");
    }
    return out;
}

bool instability_det_2x2(const Matrix& j) {
    require(j.rows() == 2 && j.cols() == 2, "instability_det_2x2: expected a 2x2 matrix");
    return j(0, 0) * j(1, 1) - j(0, 1) * j(1, 0) < 0.0;
}

void write_verdict_csv(std::ostream& out, const StabilityVerdict& verdict) {
    out << "index,re,im,margin,stable\n";
    for (Eigen::Index i = 0; i < verdict.eigenvalues.size(); ++i) {
        out << i << ',' << csv::format_double(verdict.eigenvalues(i).real()) << ','
            << csv::format_double(verdict.eigenvalues(i).imag()) << ',' << csv::format_double(verdict.margin) << ','
            << (verdict.stable ? 1 : 0) << '\n';
    }
}

const char* to_string(LyapunovStatus status) {
    switch (status) {
        case LyapunovStatus::Valid:
            return "valid";
        case LyapunovStatus::Marginal:
            return "marginal";
        case LyapunovStatus::Unstable:
            return "unstable";
    }
    return "unknown";
}

}  // namespace loopcoord
