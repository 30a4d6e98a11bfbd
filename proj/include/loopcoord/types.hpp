#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace loopcoord {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ComplexVector = Eigen::VectorXcd;

// Loop parameter vector theta. Units are fixed by the use site
// (resource fraction, blocking threshold, dBm, ...).
using ParamVector = Vector;

// Malformed input: wrong dimensions, out-of-range arguments, bad files.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// The numerics could not produce a trustworthy answer: singular or
// ill-conditioned systems, non-convergent iterations, overflow.
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotFound : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) {
        throw InvalidInput(what);
    }
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace loopcoord
