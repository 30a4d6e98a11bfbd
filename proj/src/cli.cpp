#include "loopcoord/cli.hpp"

#include "loopcoord/admission.hpp"
#include "loopcoord/coordination.hpp"
#include "loopcoord/csv.hpp"
#include "loopcoord/dynamics.hpp"
#include "loopcoord/estimation.hpp"
#include "loopcoord/interference.hpp"
#include "loopcoord/stability.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

namespace loopcoord::cli {
namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Registry of the options of one leaf subcommand. Every option is reachable
// both as a --flag and as a key of the JSON config; explicit flags win.
class Settings {
public:
    Settings(CLI::App* app, std::string command) : app_(app), command_(std::move(command)) {
        app_->add_option("--config", config_path_, "JSON config; explicit flags override it");
    }

    template <class T>
    CLI::Option* add(const std::string& name, T& var, const std::string& desc, bool echo = true) {
        CLI::Option* opt = app_->add_option("--" + name, var, desc)->capture_default_str();
        entries_.push_back({name, opt, [&var](const json& j) { var = j.get<T>(); }, [&var] { return json(var); }, echo});
        return opt;
    }

    CLI::Option* flag(const std::string& name, bool& var, const std::string& desc) {
        CLI::Option* opt = app_->add_flag("--" + name, var, desc);
        entries_.push_back({name, opt, [&var](const json& j) { var = j.get<bool>(); }, [&var] { return json(var); }, true});
        return opt;
    }

    /// Required options may come from either the command line or the config.
    CLI::Option* required(CLI::Option* opt) {
        const auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.opt == opt; });
        it->required = true;
        opt->description(opt->get_description() + " (required)");
        return opt;
    }

    CLI::App* app() const { return app_; }
    const std::string& command() const { return command_; }

    /// Merges the --config file (if any) under the explicit flags.
    void merge_config() {
        if (!config_path_.empty()) {
            read_config();
        }
        for (const auto& e : entries_) {
            if (e.required && e.opt->count() == 0 && !e.from_config) {
                throw UsageError("--" + e.name + " is required");
            }
        }
    }

private:
    void read_config() {
        std::ifstream in(config_path_);
        if (!in) {
            throw UsageError("cannot read config " + config_path_);
        }
        json cfg;
        try {
            cfg = json::parse(in);
        } catch (const json::parse_error& e) {
            throw UsageError("config " + config_path_ + ": " + e.what());
        }
        if (!cfg.is_object()) {
            throw UsageError("config " + config_path_ + ": top level must be an object");
        }
        for (const auto& [key, value] : cfg.items()) {
            if (key == "command") {
                if (value != command_) {
                    throw UsageError("config " + config_path_ + " is for '" + value.dump() + "', not '" + command_ + "'");
                }
                continue;
            }
            const auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == key; });
            if (it == entries_.end()) {
                throw UsageError("config " + config_path_ + ": unknown key '" + key + "'");
            }
            if (it->opt->count() == 0) {
                try {
                    it->set(value);
                    it->from_config = true;
                } catch (const json::exception& e) {
                    throw UsageError("config " + config_path_ + ": key '" + key + "': " + e.what());
                }
            }
        }
    }

public:
    /// Effective configuration: everything needed to regenerate an output.
    json effective() const {
        json j;
        j["command"] = command_;
        for (const auto& e : entries_) {
            if (e.echo) {
                j[e.name] = e.get();
            }
        }
        return j;
    }

    std::vector<std::string> header() const {
        return {"loopcoord " + command_, "config=" + effective().dump()};
    }

private:
    struct Entry {
        std::string name;
        CLI::Option* opt;
        std::function<void(const json&)> set;
        std::function<json()> get;
        bool echo;
        bool required = false;
        bool from_config = false;
    };

    CLI::App* app_;
    std::string command_;
    std::string config_path_;
    std::vector<Entry> entries_;
};

void check_writable(const std::string& path) {
    if (path.empty()) {
        throw UsageError("missing output path");
    }
    const fs::path p(path);
    const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
    if (!fs::is_directory(dir)) {
        throw UsageError("output directory does not exist: " + dir.string());
    }
    if (::access(dir.c_str(), W_OK) != 0 || (fs::exists(p) && ::access(p.c_str(), W_OK) != 0)) {
        throw UsageError("output path not writable: " + path);
    }
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw UsageError("cannot write " + path);
    }
    f << content;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(cell, &used));
            if (used != cell.size()) {
                throw std::invalid_argument(cell);
            }
        } catch (const std::exception&) {
            throw UsageError("not a number list: '" + text + "'");
        }
    }
    return out;
}

Vector list_or_zeros(const std::string& text, Eigen::Index dim, const char* what) {
    if (text.empty()) {
        return Vector::Zero(dim);
    }
    const auto v = parse_list(text);
    if (static_cast<Eigen::Index>(v.size()) != dim) {
        throw UsageError(std::string(what) + " must have " + std::to_string(dim) + " entries");
    }
    return Eigen::Map<const Vector>(v.data(), dim);
}

std::string fmt_complex(std::complex<double> z) {
    std::ostringstream s;
    s << csv::format_double(z.real()) << (z.imag() < 0 ? " - " : " + ") << csv::format_double(std::abs(z.imag())) << "i";
    return s.str();
}

const char* verdict_word(const StabilityVerdict& v) {
    return v.stable ? "STABLE" : (v.marginal ? "MARGINAL" : "UNSTABLE");
}

// stability check

struct StabilityArgs {
    std::string matrix;
    std::string out;
    bool lyapunov = false;
};

int run_stability(const Settings& s, const StabilityArgs& a, std::ostream& out) {
    if (!a.out.empty()) {
        check_writable(a.out);
    }
    const Matrix m = csv::read_matrix(a.matrix);
    if (m.rows() != m.cols()) {
        throw InvalidInput("matrix must be square");
    }
    const auto verdict = eigen_stability(m);
    out << "eigenvalues:\n";
    for (Eigen::Index i = 0; i < verdict.eigenvalues.size(); ++i) {
        out << "  " << fmt_complex(verdict.eigenvalues(i)) << '\n';
    }
    out << "margin: " << csv::format_double(verdict.margin) << '\n';
    const auto alone = standalone_check(m);
    out << "standalone:";
    for (bool b : alone) {
        out << (b ? " stable" : " unstable");
    }
    out << '\n';
    if (a.lyapunov) {
        const auto lyap = lyapunov_solve(m, Matrix::Identity(m.rows(), m.cols()));
        out << "lyapunov: " << to_string(lyap.status) << '\n';
    }
    out << "verdict: " << verdict_word(verdict) << '\n';
    if (!a.out.empty()) {
        std::ostringstream csvout;
        csv::write_comment_lines(csvout, s.header());
        write_verdict_csv(csvout, verdict);
        write_file(a.out, csvout.str());
    }
    return kOk;
}

// coordinate synth

struct CoordinateArgs {
    std::string matrix;
    std::string weights;
    std::string out = "C.csv";
    bool verify = false;
};

int run_coordinate(const Settings& s, const CoordinateArgs& a, std::ostream& out, std::ostream& err) {
    check_writable(a.out);
    const Matrix m = csv::read_matrix(a.matrix);
    if (m.rows() != m.cols()) {
        throw InvalidInput("matrix must be square");
    }
    const Vector w = a.weights.empty() ? Vector::Ones(m.rows()) : list_or_zeros(a.weights, m.rows(), "--weights");
    const Coordinator coord = synthesize_gradient_coordinator(m, w);
    std::ostringstream csvout;
    csv::write_comment_lines(csvout, s.header());
    write_coordinator_csv(csvout, coord);
    write_file(a.out, csvout.str());
    out << "wrote " << a.out << '\n';
    if (a.verify) {
        const auto v = verify_coordinated(coord, m);
        out << "coordinated margin: " << csv::format_double(v.margin) << '\n';
        out << "verdict: " << verdict_word(v) << '\n';
        if (!v.stable) {
            err << "coordinated system is not stable (A singular or ill-conditioned?)\n";
            return kNumerical;
        }
    }
    return kOk;
}

// simulate sa / ode

struct SimulateArgs {
    std::string field = "linear";
    std::string matrix;
    std::string offset;
    std::string theta0;
    bool coordinate = false;
    double epsilon = 0.01;
    double noise = 0.0;
    std::size_t steps = 10000;
    std::string schedule = "synchronous";
    std::uint64_t seed = 0;
    double step = 1e-3;
    double t_end = 10.0;
    std::size_t stride = 1;
    std::string out;
};

LinearSystem load_linear(const SimulateArgs& a) {
    if (a.field != "linear") {
        throw UsageError("unsupported field '" + a.field + "' (only 'linear')");
    }
    const Matrix m = csv::read_matrix(a.matrix);
    const Vector b = a.offset.empty() ? Vector::Zero(m.rows()) : csv::read_vector(a.offset);
    return LinearSystem(m, b);
}

void report_convergence(std::ostream& out, const Trajectory& traj, const Vector& theta_star) {
    const auto st = convergence_stats(traj, theta_star);
    out << "theta*:";
    for (Eigen::Index i = 0; i < theta_star.size(); ++i) {
        out << ' ' << csv::format_double(theta_star(i) + 0.0);
    }
    out << "\nfinal_dist: " << csv::format_double(st.final_dist) << "\nmean_tail_dist: "
        << csv::format_double(st.mean_tail_dist) << "\nescaped: " << (st.escaped ? "true" : "false") << '\n';
}

int run_simulate(const Settings& s, const SimulateArgs& a, bool sa, std::ostream& out) {
    check_writable(a.out);
    const LinearSystem sys = load_linear(a);
    const VectorField field =
        a.coordinate ? coordinated_field(synthesize_gradient_coordinator(sys.a()), sys) : sys.field();
    const Vector theta0 = list_or_zeros(a.theta0, static_cast<Eigen::Index>(sys.dim()), "--theta0");
    Trajectory traj;
    if (sa) {
        SASchedule sched;
        sched.kind = parse_schedule(a.schedule);
        sched.epsilon = a.epsilon;
        sched.noise_sigma = a.noise;
        sched.steps = a.steps;
        sched.seed = a.seed;
        sched.record_stride = a.stride;
        traj = simulate_sa(field, theta0, sched);
    } else {
        OdeOptions opts;
        opts.record_stride = a.stride;
        traj = integrate_ode(field, theta0, a.step, a.t_end, opts);
    }
    std::ostringstream csvout;
    write_trajectory_csv(csvout, traj, s.header());
    write_file(a.out, csvout.str());
    report_convergence(out, traj, sys.theta_star());
    return kOk;
}

// estimate fit

struct EstimateArgs {
    std::string samples;
    std::string label = "default";
    std::string out = "model.json";
    bool merge = false;
};

int run_estimate(const EstimateArgs& a, std::ostream& out) {
    check_writable(a.out);
    const SampleSet set = SampleSet::read_csv(a.samples);
    const auto fit = least_squares_fit(set);
    ConditionDB db;
    if (a.merge && fs::exists(a.out)) {
        db = ConditionDB::load(a.out);
    }
    db.put(a.label, fit.a, fit.b, set.size());
    db.save(a.out);
    out << "A:\n";
    csv::write_matrix(out, fit.a);
    out << "b:\n";
    csv::write_matrix(out, fit.b.transpose());
    out << "rms_residual: " << csv::format_double(fit.rms_residual) << '\n';
    return kOk;
}

// admission region

struct AdmissionArgs {
    admission::QueueParams params;
    std::string x_grid = "0.3:1:0.01";
    std::string b_grid = "0:10:0.1";
    double sharpness = 1.0;
    std::size_t jobs = 1;
    std::string out = "region.csv";
};

int run_admission(const Settings& s, const AdmissionArgs& a, std::ostream& out) {
    check_writable(a.out);
    a.params.validate();
    const auto xs = admission::Grid::parse(a.x_grid).values();
    const auto bs = admission::Grid::parse(a.b_grid).values();
    const auto scan = admission::stability_region_scan(a.params, xs, bs, a.sharpness, a.jobs);
    std::ostringstream csvout;
    csv::write_comment_lines(csvout, s.header());
    admission::write_scan_csv(csvout, scan);
    write_file(a.out, csvout.str());
    std::size_t stable = 0;
    std::size_t det_unstable = 0;
    for (const auto& p : scan) {
        stable += p.stable ? 1 : 0;
        det_unstable += p.det_unstable ? 1 : 0;
    }
    out << "points: " << scan.size() << "\nstable: " << stable << "\nunstable: " << scan.size() - stable
        << "\ndet_negative: " << det_unstable << '\n';
    return kOk;
}

// interference hexa / poisson

struct HexArgs {
    interference::HexConfig config;
    std::string out = "hexa";
};

int run_hexa(const Settings& s, const HexArgs& a, std::ostream& out) {
    const std::string powers_path = a.out + "_powers.csv";
    const std::string coverage_path = a.out + "_coverage.csv";
    check_writable(powers_path);
    check_writable(coverage_path);
    const auto r = interference::hexagonal_experiment(a.config);

    std::ostringstream pw;
    write_trajectory_csv(pw, r.powers, s.header(), "P_");
    write_file(powers_path, pw.str());

    Trajectory cov = r.powers;
    cov.states = r.coverage;
    std::ostringstream cv;
    write_trajectory_csv(cv, cov, s.header(), "G_");
    write_file(coverage_path, cv.str());

    out << "open_loop_margin: " << csv::format_double(r.open_loop.margin) << " (" << verdict_word(r.open_loop)
        << ")\ncoordinated_margin: " << csv::format_double(r.coordinated_loop.margin) << " ("
        << verdict_word(r.coordinated_loop) << ")\nmean_G_at_P*: " << csv::format_double(r.g_star.mean())
        << "\nmax_deviation_db: " << csv::format_double(r.max_deviation_db)
        << "\nstayed_in_ball: " << (r.stayed_in_ball ? "true" : "false") << '\n';
    return kOk;
}

struct PoissonArgs {
    double density = 3.0;
    std::size_t snapshots = 100;
    std::uint64_t seed = 1;
    interference::SnapshotConfig config;
    std::size_t jobs = 1;
    std::string out = "snapshots.csv";
};

int run_poisson(const Settings& s, const PoissonArgs& a, std::ostream& out) {
    check_writable(a.out);
    const auto summary = interference::snapshot_instability(a.density, a.snapshots, a.config, a.seed, a.jobs);
    std::ostringstream csvout;
    csv::write_comment_lines(csvout, s.header());
    interference::write_snapshots_csv(csvout, summary);
    write_file(a.out, csvout.str());
    out << "density: " << csv::format_double(a.density) << "\nconverged: " << summary.n_converged << '/'
        << a.snapshots << "\nunstable: " << summary.n_unstable
        << "\np_unstable: " << csv::format_double(summary.p_unstable) << '\n';
    return kOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Coordination and stability analysis of parallel control loops", "loopcoord"};
    app.require_subcommand(1);

    auto* stability = app.add_subcommand("stability", "Stability verdicts for linear systems")->require_subcommand(1);
    auto* coordinate = app.add_subcommand("coordinate", "Coordination matrix synthesis")->require_subcommand(1);
    auto* simulate = app.add_subcommand("simulate", "Trajectories of linear loop systems")->require_subcommand(1);
    auto* estimate = app.add_subcommand("estimate", "Identification of (A, b) from samples")->require_subcommand(1);
    auto* admission_cmd = app.add_subcommand("admission", "Admission control / resource allocation case")->require_subcommand(1);
    auto* interference_cmd = app.add_subcommand("interference", "Multi-cell power control case")->require_subcommand(1);

    StabilityArgs st;
    Settings st_s(stability->add_subcommand("check", "Eigenvalue and stand-alone stability of a matrix"), "stability check");
    st_s.required(st_s.add("matrix", st.matrix, "CSV matrix A"));
    st_s.add("out", st.out, "CSV verdict output", false);
    st_s.flag("lyapunov", st.lyapunov, "Also solve A^T X + X A = -I");

    CoordinateArgs co;
    Settings co_s(coordinate->add_subcommand("synth", "Gradient-flow coordinator C = -A^T W"), "coordinate synth");
    co_s.required(co_s.add("matrix", co.matrix, "CSV matrix A"));
    co_s.add("weights", co.weights, "Comma-separated positive weights (default all 1)");
    co_s.add("out", co.out, "CSV output for C", false);
    co_s.flag("verify", co.verify, "Check that C A is stable");

    auto add_linear = [](Settings& s, SimulateArgs& a) {
        s.add("field", a.field, "Field kind (linear)");
        s.required(s.add("matrix", a.matrix, "CSV matrix A"));
        s.add("offset", a.offset, "CSV vector b (default 0)");
        s.add("theta0", a.theta0, "Comma-separated initial state (default 0)");
        s.flag("coordinate", a.coordinate, "Apply the gradient-flow coordinator C = -A^T");
        s.add("stride", a.stride, "Record every n-th step");
        s.required(s.add("out", a.out, "CSV trajectory output", false));
    };
    SimulateArgs sa;
    Settings sa_s(simulate->add_subcommand("sa", "Noisy discrete-time stochastic approximation"), "simulate sa");
    add_linear(sa_s, sa);
    sa_s.add("epsilon", sa.epsilon, "Step size");
    sa_s.add("noise", sa.noise, "Gaussian noise standard deviation");
    sa_s.add("steps", sa.steps, "Number of updates");
    sa_s.add("schedule", sa.schedule, "synchronous | round_robin | random_coordinate");
    sa_s.add("seed", sa.seed, "RNG seed");
    SimulateArgs ode;
    Settings ode_s(simulate->add_subcommand("ode", "RK4 integration of the ODE"), "simulate ode");
    add_linear(ode_s, ode);
    ode_s.add("step", ode.step, "RK4 step");
    ode_s.add("t-end", ode.t_end, "Horizon");

    EstimateArgs es;
    Settings es_s(estimate->add_subcommand("fit", "Least-squares fit of (A, b)"), "estimate fit");
    es_s.required(es_s.add("samples", es.samples, "CSV with theta_1..theta_I, y_1..y_I"));
    es_s.add("label", es.label, "Operating-condition label");
    es_s.add("out", es.out, "JSON condition database", false);
    es_s.flag("merge", es.merge, "Add to an existing database instead of replacing it");

    AdmissionArgs ad;
    Settings ad_s(admission_cmd->add_subcommand("region", "Stability region scan over (x, b)"), "admission region");
    ad_s.add("lambda", ad.params.lambda, "Arrival rate, users/s");
    ad_s.add("mean-size", ad.params.mean_size, "Mean file size, Mbit");
    ad_s.add("rate", ad.params.rate, "Peak rate R, Mbit/s");
    ad_s.add("rate-min", ad.params.rate_min, "Minimum rate R_min, Mbit/s");
    ad_s.add("xmax", ad.params.x_max, "Maximum resource fraction");
    ad_s.add("x-grid", ad.x_grid, "start:stop:step for x");
    ad_s.add("b-grid", ad.b_grid, "start:stop:step for b");
    ad_s.add("sharpness", ad.sharpness, "Scale of the smoothed outage step");
    ad_s.add("jobs", ad.jobs, "Worker threads", false);
    ad_s.add("out", ad.out, "CSV output", false);

    HexArgs hx;
    Settings hx_s(interference_cmd->add_subcommand("hexa", "12-site hexagonal torus trajectories"), "interference hexa");
    hx_s.add("coordinated", hx.config.coordinated, "Apply C = -(JG(P*))^T");
    hx_s.add("seed", hx.config.seed, "Seed for shadowing, sample points and start perturbation");
    hx_s.add("t-end", hx.config.t_end, "Horizon");
    hx_s.add("step", hx.config.step, "RK4 step");
    hx_s.add("stride", hx.config.record_stride, "Record every n-th step");
    hx_s.add("samples", hx.config.n_per_cell, "Sample points per cell");
    hx_s.add("p-star", hx.config.p_star_dbm, "Operating power, dBm");
    hx_s.add("perturbation", hx.config.perturbation_db, "Uniform start perturbation, +/- dB");
    hx_s.add("ball", hx.config.ball_db, "Radius of the stay-close check, dB");
    hx_s.add("out", hx.out, "Output prefix", false);

    PoissonArgs ps;
    Settings ps_s(interference_cmd->add_subcommand("poisson", "Instability probability over Poisson snapshots"),
                  "interference poisson");
    ps_s.add("density", ps.density, "Base stations per km^2");
    ps_s.add("snapshots", ps.snapshots, "Number of snapshots");
    ps_s.add("seed", ps.seed, "Master seed");
    ps_s.add("samples", ps.config.n_per_cell, "Sample points per cell");
    ps_s.add("side", ps.config.side_km, "Side of the square area, km");
    ps_s.add("jobs", ps.jobs, "Worker threads", false);
    ps_s.add("out", ps.out, "CSV output", false);

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        // Help of the deepest subcommand that was recognized.
        const CLI::App* deepest = &app;
        while (!deepest->get_subcommands().empty()) {
            deepest = deepest->get_subcommands().front();
        }
        err << deepest->help();
        return kUsage;
    }

    Settings* all[] = {&st_s, &co_s, &sa_s, &ode_s, &es_s, &ad_s, &hx_s, &ps_s};
    Settings* chosen = nullptr;
    for (Settings* s : all) {
        if (s->app()->parsed()) {
            chosen = s;
        }
    }
    if (chosen == nullptr) {
        err << app.help();
        return kUsage;
    }

    try {
        chosen->merge_config();
        if (chosen == &st_s) {
            return run_stability(st_s, st, out);
        }
        if (chosen == &co_s) {
            return run_coordinate(co_s, co, out, err);
        }
        if (chosen == &sa_s) {
            return run_simulate(sa_s, sa, true, out);
        }
        if (chosen == &ode_s) {
            return run_simulate(ode_s, ode, false, out);
        }
        if (chosen == &es_s) {
            return run_estimate(es, out);
        }
        if (chosen == &ad_s) {
            return run_admission(ad_s, ad, out);
        }
        if (chosen == &hx_s) {
            return run_hexa(hx_s, hx, out);
        }
        return run_poisson(ps_s, ps, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const InvalidInput& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const NotFound& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const NumericalFailure& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    }
}

int dispatch(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return dispatch(args, std::cout, std::cerr);
}

}  // namespace loopcoord::cli
