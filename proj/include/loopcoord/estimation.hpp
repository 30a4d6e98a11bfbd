#pragma once

#include "loopcoord/core_model.hpp"
#include "loopcoord/types.hpp"

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace loopcoord {

/// Black-box access to (possibly noisy) F(theta). Unlike VectorField it may
/// return a different value on every call.
using FieldOracle = std::function<Vector(const Vector&)>;

struct Sample {
    Vector theta;
    Vector y;
};

class SampleSet {
public:
    explicit SampleSet(std::size_t dim) : dim_(dim) {}

    void add(Vector theta, Vector y);
    std::size_t dim() const { return dim_; }
    std::size_t size() const { return rows_.size(); }
    const std::vector<Sample>& rows() const { return rows_; }

    /// Columns theta_1..theta_I, y_1..y_I.
    static SampleSet read_csv(const std::filesystem::path& path);

private:
    std::size_t dim_;
    std::vector<Sample> rows_;
};

/// Default central-difference step 1e-3 * max(1, |theta_i|).
Vector default_fd_step(const Vector& theta);

/// Central differences averaged over n_avg evaluations:
///   J(j, i) = (F_j(theta + delta_i e_i) - F_j(theta - delta_i e_i)) / (2 delta_i).
Matrix jacobian_fd(const FieldOracle& oracle, const Vector& theta, const Vector& delta, std::size_t n_avg = 1);

/// Averaged F(0).
Vector offset_estimate(const FieldOracle& oracle, std::size_t dim, std::size_t n_avg = 1);

struct LeastSquaresFit {
    Matrix a;
    Vector b;
    double rms_residual = 0.0;
};

/// Regresses every output y_j on (theta, 1). Rank-deficient designs throw
/// NumericalFailure listing the null directions.
LeastSquaresFit least_squares_fit(const SampleSet& samples);

struct Linearization {
    LinearSystem system;
    double residual_norm;  // ||F(theta*)|| as measured
    bool far_from_equilibrium;
};

/// A = jacobian_fd at theta*, b = -A theta*, so the model's equilibrium is
/// theta* exactly. Flags far_from_equilibrium when ||F(theta*)|| > warn_tol.
Linearization linearize(const FieldOracle& oracle, const Vector& theta_star, const Vector& delta,
                        std::size_t n_avg = 1, double warn_tol = 1e-6);

/// Per-operating-condition (A, b) store, persisted as one JSON document:
/// {label: {A: [[...]], b: [...], timestamp: ISO-8601, sample_count}}.
class ConditionDB {
public:
    struct Entry {
        Matrix a;
        Vector b;
        std::string timestamp;
        std::size_t sample_count = 0;
    };

    /// Overwrites an existing label. Timestamp defaults to now (UTC).
    void put(const std::string& label, const Matrix& a, const Vector& b, std::size_t sample_count = 0,
             std::optional<std::string> timestamp = std::nullopt);

    /// Throws NotFound.
    const Entry& get(const std::string& label) const;

    bool contains(const std::string& label) const { return entries_.count(label) != 0; }
    std::size_t size() const { return entries_.size(); }
    std::vector<std::string> labels() const;

    std::string to_json() const;
    static ConditionDB from_json(const std::string& text);

    void save(const std::filesystem::path& path) const;
    static ConditionDB load(const std::filesystem::path& path);

private:
    std::map<std::string, Entry> entries_;
};

std::string utc_timestamp_now();

}  // namespace loopcoord
