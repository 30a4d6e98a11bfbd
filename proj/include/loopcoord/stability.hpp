#pragma once

#include "loopcoord/core_model.hpp"
#include "loopcoord/types.hpp"

#include <iosfwd>
#include <vector>

namespace loopcoord {

/// Spectra with |max Re(lambda)| at or below this are reported as marginal.
inline constexpr double kMarginalTolerance = 1e-8;

struct StabilityVerdict {
    bool stable = false;
    bool marginal = false;
    ComplexVector eigenvalues;
    double margin = 0.0;  // max real part
};

/// Eigenvalue test on a general real matrix. `stable` requires
/// margin < -kMarginalTolerance. Throws NumericalFailure if the QR
/// iteration does not converge.
StabilityVerdict eigen_stability(const Matrix& a);

/// Entry i is true iff A(i, i) < 0, i.e. loop i is stable on its own.
std::vector<bool> standalone_check(const Matrix& a);

enum class LyapunovStatus { Valid, Marginal, Unstable };

struct LyapunovCertificate {
    Matrix x;
    Matrix q;
    double residual = 0.0;  // ||A^T X + X A + Q||_F
};

struct LyapunovResult {
    LyapunovStatus status = LyapunovStatus::Unstable;
    LyapunovCertificate certificate;

    bool valid() const { return status == LyapunovStatus::Valid; }
};

/// Solves A^T X + X A = -Q through the Kronecker-vectorized linear system.
/// Valid iff the operator is nonsingular, X comes out symmetric and
/// lambda_min(X) > 1e-10 * trace(X) / I.
LyapunovResult lyapunov_solve(const Matrix& a, const Matrix& q);

/// (theta - theta*)^T X (theta - theta*).
double lyapunov_value(const Matrix& x, const Vector& theta, const Vector& theta_star);

/// e^{A} by scaling and squaring with a degree-13 Pade approximant.
Matrix matrix_exponential(const Matrix& a);

/// theta(t) = theta* + e^{tA} (theta0 - theta*).
Vector linear_solution(const LinearSystem& sys, const Vector& theta0, double t);

/// det(J) < 0 on a 2x2 Jacobian: two real eigenvalues of opposite sign.
bool instability_det_2x2(const Matrix& j);

/// CSV rows: index, re, im, margin, stable.
void write_verdict_csv(std::ostream& out, const StabilityVerdict& verdict);

const char* to_string(LyapunovStatus status);

}  // namespace loopcoord
