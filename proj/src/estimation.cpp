#include "loopcoord/estimation.hpp"

#include "loopcoord/csv.hpp"

#include <json.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

namespace loopcoord {

void SampleSet::add(Vector theta, Vector y) {
    require(static_cast<std::size_t>(theta.size()) == dim_ && static_cast<std::size_t>(y.size()) == dim_,
            "SampleSet: row dimension mismatch");
    rows_.push_back({std::move(theta), std::move(y)});
}

SampleSet SampleSet::read_csv(const std::filesystem::path& path) {
    const Matrix m = csv::read_matrix(path);
    require(m.cols() >= 2 && m.cols() % 2 == 0, "SampleSet: expected 2*I columns in " + path.string());
    const Eigen::Index dim = m.cols() / 2;
    SampleSet set(static_cast<std::size_t>(dim));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        set.add(m.row(r).head(dim).transpose(), m.row(r).tail(dim).transpose());
    }
    return set;
}

Vector default_fd_step(const Vector& theta) {
    return (1e-3 * theta.cwiseAbs().cwiseMax(1.0)).eval();
}

Matrix jacobian_fd(const FieldOracle& oracle, const Vector& theta, const Vector& delta, std::size_t n_avg) {
    require(delta.size() == theta.size(), "jacobian_fd: delta dimension mismatch");
    require(n_avg >= 1, "jacobian_fd: n_avg must be >= 1");
    for (Eigen::Index i = 0; i < delta.size(); ++i) {
        require(delta(i) > 0.0, "jacobian_fd: delta must be positive");
    }
    const Eigen::Index n = theta.size();
    Matrix j = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Vector plus = theta;
        Vector minus = theta;
        plus(i) += delta(i);
        minus(i) -= delta(i);
        Vector acc = Vector::Zero(n);
        for (std::size_t k = 0; k < n_avg; ++k) {
            const Vector fp = oracle(plus);
            const Vector fm = oracle(minus);
            require(fp.size() == n && fm.size() == n, "jacobian_fd: oracle changed dimension");
            acc += (fp - fm) / (2.0 * delta(i));
        }
        j.col(i) = acc / static_cast<double>(n_avg);
    }
    return j;
}

Vector offset_estimate(const FieldOracle& oracle, std::size_t dim, std::size_t n_avg) {
    require(n_avg >= 1, "offset_estimate: n_avg must be >= 1");
    const Vector zero = Vector::Zero(static_cast<Eigen::Index>(dim));
    Vector acc = Vector::Zero(static_cast<Eigen::Index>(dim));
    for (std::size_t k = 0; k < n_avg; ++k) {
        const Vector f = oracle(zero);
        require(f.size() == acc.size(), "offset_estimate: oracle changed dimension");
        acc += f;
    }
    return acc / static_cast<double>(n_avg);
}

LeastSquaresFit least_squares_fit(const SampleSet& samples) {
    const auto dim = static_cast<Eigen::Index>(samples.dim());
    const auto n = static_cast<Eigen::Index>(samples.size());
    if (n < dim + 1) {
        throw NumericalFailure("least_squares_fit: need at least I+1 samples, got " + std::to_string(n));
    }
    Matrix x(n, dim + 1);
    Matrix y(n, dim);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& s = samples.rows()[static_cast<std::size_t>(r)];
        x.row(r).head(dim) = s.theta.transpose();
        x(r, dim) = 1.0;
        y.row(r) = s.y.transpose();
    }

    Eigen::ColPivHouseholderQR<Matrix> qr(x);
    if (qr.rank() < dim + 1) {
        Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        const double tol = sv(0) * 1e-10 * static_cast<double>(std::max(n, dim + 1));
        std::ostringstream msg;
        msg << "least_squares_fit: design [theta | 1] is rank deficient (rank " << qr.rank() << " of " << dim + 1
            << "); null directions:";
        for (Eigen::Index k = 0; k < sv.size(); ++k) {
            if (sv(k) <= tol) {
                msg << " [";
                for (Eigen::Index c = 0; c < dim + 1; ++c) {
                    msg << (c ? ", " : "") << svd.matrixV()(c, k);
                }
                msg << "]";
            }
        }
        throw NumericalFailure(msg.str());
    }
    const Matrix beta = qr.solve(y);
    LeastSquaresFit fit;
    fit.a = beta.topRows(dim).transpose();
    fit.b = beta.row(dim).transpose();
    const Matrix resid = x * beta - y;
    fit.rms_residual = std::sqrt(resid.squaredNorm() / static_cast<double>(resid.size()));
    return fit;
}

Linearization linearize(const FieldOracle& oracle, const Vector& theta_star, const Vector& delta, std::size_t n_avg,
                        double warn_tol) {
    Vector f0 = Vector::Zero(theta_star.size());
    for (std::size_t k = 0; k < n_avg; ++k) {
        f0 += oracle(theta_star);
    }
    f0 /= static_cast<double>(n_avg);
    const Matrix a = jacobian_fd(oracle, theta_star, delta, n_avg);
    Vector b = -a * theta_star;
    const double r = f0.norm();
    return Linearization{LinearSystem(a, std::move(b)), r, r > warn_tol};
}

// ConditionDB

void ConditionDB::put(const std::string& label, const Matrix& a, const Vector& b, std::size_t sample_count,
                      std::optional<std::string> timestamp) {
    require(!label.empty(), "ConditionDB: empty label");
    require(a.rows() == a.cols() && a.rows() == b.size(), "ConditionDB: A must be square and match b");
    entries_[label] = Entry{a, b, timestamp ? *timestamp : utc_timestamp_now(), sample_count};
}

const ConditionDB::Entry& ConditionDB::get(const std::string& label) const {
    const auto it = entries_.find(label);
    if (it == entries_.end()) {
        throw NotFound("ConditionDB: no entry for label '" + label + "'");
    }
    return it->second;
}

std::vector<std::string> ConditionDB::labels() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : entries_) {
        out.push_back(k);
    }
    return out;
}

std::string ConditionDB::to_json() const {
    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    for (const auto& [label, e] : entries_) {
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (Eigen::Index r = 0; r < e.a.rows(); ++r) {
            nlohmann::ordered_json row = nlohmann::ordered_json::array();
            for (Eigen::Index c = 0; c < e.a.cols(); ++c) {
                row.push_back(e.a(r, c));
            }
            rows.push_back(std::move(row));
        }
        nlohmann::ordered_json bv = nlohmann::ordered_json::array();
        for (Eigen::Index i = 0; i < e.b.size(); ++i) {
            bv.push_back(e.b(i));
        }
        doc[label] = {{"A", rows}, {"b", bv}, {"timestamp", e.timestamp}, {"sample_count", e.sample_count}};
    }
    return doc.dump(2);
}

ConditionDB ConditionDB::from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidInput(std::string("ConditionDB: ") + e.what());
    }
    require(doc.is_object(), "ConditionDB: top level must be an object");
    ConditionDB db;
    for (const auto& [label, v] : doc.items()) {
        require(v.contains("A") && v.contains("b"), "ConditionDB: entry '" + label + "' lacks A or b");
        const auto& rows = v.at("A");
        const auto n = static_cast<Eigen::Index>(rows.size());
        Matrix a(n, n);
        for (Eigen::Index r = 0; r < n; ++r) {
            require(rows[static_cast<std::size_t>(r)].size() == static_cast<std::size_t>(n),
                    "ConditionDB: entry '" + label + "' has a non-square A");
            for (Eigen::Index c = 0; c < n; ++c) {
                a(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
            }
        }
        const auto& bj = v.at("b");
        Vector b(static_cast<Eigen::Index>(bj.size()));
        for (std::size_t i = 0; i < bj.size(); ++i) {
            b(static_cast<Eigen::Index>(i)) = bj[i].get<double>();
        }
        db.put(label, a, b, v.value("sample_count", std::size_t{0}), v.value("timestamp", std::string()));
    }
    return db;
}

void ConditionDB::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) {
        throw InvalidInput("ConditionDB: cannot write " + path.string());
    }
    out << to_json() << '\n';
}

ConditionDB ConditionDB::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidInput("ConditionDB: cannot read " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

std::string utc_timestamp_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace loopcoord
