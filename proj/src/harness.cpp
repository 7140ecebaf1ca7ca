#include "projfpe/harness.hpp"

#include "projfpe/errors.hpp"
#include "projfpe/geometry.hpp"
#include "projfpe/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

namespace projfpe {

namespace {

using nlohmann::json;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::ofstream open_output(const std::string& dir, const std::string& name,
                          std::vector<std::string>& files) {
    std::filesystem::create_directories(dir);
    const std::string path = dir + "/" + name;
    std::ofstream out(path);
    if (!out) throw NumericalError("cannot open output file " + path);
    files.push_back(path);
    return out;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

ModelSpec parse_model(const json& j) {
    if (!j.contains("model")) throw ConfigError("config: missing 'model'");
    const json& m = j.at("model");
    ModelSpec spec;
    spec.name = get_or<std::string>(m, "name", "");
    if (spec.name == "linear") {
        spec.f_coeff = get_or<double>(m, "F", -1.0);
        spec.a_const = get_or<double>(m, "A", 2.0);
    } else if (spec.name == "unit-variance") {
        spec.k = get_or<double>(m, "k", 1.0);
        spec.a_base = get_or<double>(m, "a_base", 2.0);
        spec.a_amp = get_or<double>(m, "a_amp", 1.0);
        spec.a_freq = get_or<double>(m, "a_freq", 1.0);
    } else if (spec.name == "double-well") {
        spec.sigma0_sq = get_or<double>(m, "sigma0_sq", 0.5);
    } else {
        throw ConfigError("config: unknown model name '" + spec.name + "'");
    }
    if (m.contains("K")) spec.nonexplosion_k = m.at("K").get<double>();
    return spec;
}

} // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    ExperimentConfig c;
    c.model = parse_model(j);
    if (j.contains("family")) {
        const json& f = j.at("family");
        c.family.basis = get_or<std::string>(f, "basis", "poly");
        c.family.max_degree = get_or<int>(f, "max_degree", 2);
    }
    if (j.contains("init")) {
        const json& i = j.at("init");
        if (i.contains("theta0"))
            c.init.theta0 = i.at("theta0").get<std::vector<double>>();
        if (i.contains("moments"))
            c.init.moments = i.at("moments").get<std::vector<double>>();
    }
    c.t_end = get_or<double>(j, "T", 1.0);
    c.h = get_or<double>(j, "h", 1e-3);
    if (j.contains("grid")) {
        const json& g = j.at("grid");
        c.grid.panels = get_or<int>(g, "panels", c.grid.panels);
        c.grid.nodes_per_panel = get_or<int>(g, "nodes_per_panel", c.grid.nodes_per_panel);
        c.grid.sigma_mult = get_or<double>(g, "sigma_mult", c.grid.sigma_mult);
        c.grid.rebuild_fraction = get_or<double>(g, "rebuild_fraction", c.grid.rebuild_fraction);
        c.grid.exponent_drop = get_or<double>(g, "exponent_drop", c.grid.exponent_drop);
    }
    if (j.contains("mc")) {
        const json& m = j.at("mc");
        c.mc.paths = get_or<std::size_t>(m, "paths", c.mc.paths);
        c.mc.dt = get_or<double>(m, "dt", c.mc.dt);
        c.mc.seed = get_or<std::uint64_t>(m, "seed", c.mc.seed);
        c.mc.bins = get_or<int>(m, "bins", c.mc.bins);
    }
    c.ustar_stride = get_or<int>(j, "ustar_stride", 1);
    if (j.contains("m_list")) c.m_list = j.at("m_list").get<std::vector<int>>();
    if (j.contains("p0")) {
        GaussianState g;
        g.mean = get_or<double>(j.at("p0"), "mean", 0.0);
        g.var = get_or<double>(j.at("p0"), "var", 1.0);
        c.p0 = g;
    }
    c.reference = get_or<std::string>(j, "reference", "auto");
    if (j.contains("fd")) {
        c.fd.nodes = get_or<int>(j.at("fd"), "nodes", 0);
        c.fd.dt = get_or<double>(j.at("fd"), "dt", 1e-3);
    }
    if (j.contains("drift_window")) {
        const auto w = j.at("drift_window").get<std::vector<double>>();
        if (w.size() != 2 || !(w[0] < w[1]))
            throw ConfigError("config: drift_window must be [lo, hi] with lo < hi");
        c.drift_window = std::make_pair(w[0], w[1]);
    }
    c.out_dir = get_or<std::string>(j, "out", "out");
    return c;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

DiffusionModel build_model(const ModelSpec& spec) {
    DiffusionModel m;
    if (spec.name == "linear")
        m = linear_model(spec.f_coeff, spec.a_const);
    else if (spec.name == "unit-variance")
        m = unit_variance_model(spec.k, spec.a_base, spec.a_amp, spec.a_freq);
    else if (spec.name == "double-well")
        m = double_well_model(spec.sigma0_sq);
    else
        throw ConfigError("unknown model '" + spec.name + "'");
    m.nonexplosion_k = spec.nonexplosion_k;
    return m;
}

ExponentialFamily build_family(const FamilySpec& spec) {
    if (spec.basis == "poly") return ExponentialFamily::polynomial(spec.max_degree);
    if (spec.basis == "mean-shift-gaussian") return ExponentialFamily::mean_shift_gaussian();
    throw ConfigError("unknown family basis '" + spec.basis + "'");
}

std::vector<double> gaussian_raw_moments(double mean, double var, int count) {
    if (!(var > 0.0)) throw UsageError("gaussian_raw_moments: variance must be positive");
    std::vector<double> m(static_cast<std::size_t>(count) + 2, 0.0);
    m[0] = 1.0;
    if (count >= 1) m[1] = mean;
    for (int j = 2; j <= count; ++j)
        m[static_cast<std::size_t>(j)] = mean * m[static_cast<std::size_t>(j - 1)] +
                                         (j - 1) * var * m[static_cast<std::size_t>(j - 2)];
    m.resize(static_cast<std::size_t>(count) + 1);
    return std::vector<double>(m.begin() + 1, m.end());
}

NaturalParams initial_theta(const ExperimentConfig& config, const ExponentialFamily& family) {
    const int m = family.dim();
    if (config.init.theta0) {
        if (static_cast<int>(config.init.theta0->size()) != m)
            throw ConfigError("init.theta0 has wrong dimension");
        NaturalParams theta{*config.init.theta0};
        family.require_in_domain(theta);
        return theta;
    }
    if (config.init.moments) {
        if (static_cast<int>(config.init.moments->size()) != m)
            throw ConfigError("init.moments has wrong dimension");
        const auto& eta = *config.init.moments;
        NaturalParams guess;
        guess.theta.assign(static_cast<std::size_t>(m), 0.0);
        if (family.has_carrier()) {
            guess.theta[0] = eta[0];
        } else {
            // Gaussian warm start from the first two moments
            const double mu = eta[0];
            const double q = m >= 2 ? eta[1] - mu * mu : 1.0;
            if (!(q > 0.0)) throw ConfigError("init.moments: variance must be positive");
            guess.theta[0] = mu / q;
            if (m >= 2) guess.theta[1] = -0.5 / q;
        }
        return moment_match(family, eta, config.grid, guess);
    }
    throw ConfigError("init: need either theta0 or moments");
}

void validate_config(const ExperimentConfig& config) {
    if (!(config.t_end > 0.0) || !(config.h > 0.0))
        throw ConfigError("T and h must be positive");
    const double ratio = config.t_end / config.h;
    if (std::abs(ratio - std::round(ratio)) > 1e-9)
        throw ConfigError("T must be an integer multiple of h");
    if (!(config.mc.dt > 0.0) || config.mc.dt > config.h + 1e-15)
        throw ConfigError("mc.dt must satisfy 0 < dt <= h");
    if (config.mc.paths < 1) throw ConfigError("mc.paths must be at least 1");
    if (config.mc.bins < 2) throw ConfigError("mc.bins must be at least 2");
    if (config.ustar_stride < 1) throw ConfigError("ustar_stride must be at least 1");
    for (int m : config.m_list)
        if (m < 2 || m % 2 != 0)
            throw ConfigError("m_list entries must be even and >= 2");

    const DiffusionModel model = build_model(config.model);
    const ExponentialFamily family = build_family(config.family);
    const NaturalParams theta0 = initial_theta(config, family);

    // probe over the initial density's +-6 sd interval
    const QuadratureGrid grid = build_grid(family, theta0, config.grid);
    const MeanVar mv = density_mean_var(grid, density_values(family, theta0, grid));
    const std::vector<double> probes = probe_nodes(mv.mean, std::sqrt(std::max(mv.var, 0.0)));

    std::vector<double> times;
    const long n_steps = std::lround(config.t_end / config.h);
    const long stride = std::max(n_steps / 16L, 1L);
    for (long k = 0; k <= n_steps; k += stride)
        times.push_back(static_cast<double>(k) * config.h);

    for (double t : times) {
        const FieldDerivativeReport fr =
            check_field_derivatives(model.drift, t, probes, false);
        const FieldDerivativeReport ar =
            check_field_derivatives(model.diffusion, t, probes, true);
        if (!fr.ok || !ar.ok)
            throw ConfigError("model coefficients fail the finite-difference smoothness check");
        for (double x : probes)
            if (!(model.diffusion.value(t, x) > 0.0))
                throw ConfigError("diffusion coefficient not positive on the probe grid");
    }
    if (model.nonexplosion_k) {
        const NonexplosionReport rep =
            nonexplosion_check(model, probes, times, *model.nonexplosion_k);
        if (!rep.holds)
            throw ConfigError("nonexplosion bound violated at x=" + fmt(rep.worst_x) +
                              ", t=" + fmt(rep.worst_t));
    }
    // condition (F) surrogate at theta0 (throws ConditionFError on failure)
    projected_field(model, family, theta0, 0.0, grid);
}

namespace {

void write_trajectory_csv(std::ofstream& out, const ThetaTrajectory& traj, int m) {
    out << "t";
    for (int i = 1; i <= m; ++i) out << ",theta_" << i;
    out << ",residual,mean,var\n";
    for (const TrajectoryPoint& pt : traj.points) {
        out << fmt(pt.t);
        for (double th : pt.theta.theta) out << ',' << fmt(th);
        out << ',' << fmt(pt.residual) << ',' << fmt(pt.mean) << ',' << fmt(pt.var) << '\n';
    }
}

} // namespace

ProjectionRunResult run_projection(const ExperimentConfig& config) {
    validate_config(config);
    const DiffusionModel model = build_model(config.model);
    const ExponentialFamily family = build_family(config.family);
    const NaturalParams theta0 = initial_theta(config, family);

    ProjectionRunResult res;
    res.trajectory =
        integrate_theta(model, family, theta0, config.t_end, config.h, config.grid);

    {
        std::ofstream out = open_output(config.out_dir, "trajectory.csv", res.files);
        write_trajectory_csv(out, res.trajectory, family.dim());
    }
    const TrajectoryPoint& last = res.trajectory.back();
    res.terminal_mean = last.mean;
    res.terminal_var = last.var;
    for (const TrajectoryPoint& pt : res.trajectory.points)
        res.max_residual = std::max(res.max_residual, pt.residual);
    {
        std::ofstream out = open_output(config.out_dir, "summary.csv", res.files);
        out << "terminal_t,terminal_mean,terminal_var,max_residual,steps,completed\n";
        out << fmt(last.t) << ',' << fmt(res.terminal_mean) << ',' << fmt(res.terminal_var)
            << ',' << fmt(res.max_residual) << ',' << res.trajectory.points.size() - 1 << ','
            << (res.trajectory.completed ? 1 : 0) << '\n';
    }
    if (!res.trajectory.completed)
        throw NumericalError("projection stage failed at t=" + fmt(res.trajectory.fail_time) +
                             ": " + res.trajectory.fail_reason);
    return res;
}

namespace {

struct ConvergenceWork {
    ConvergenceRow row;
    std::vector<double> projected_density; // on the reference grid
    ThetaTrajectory trajectory;
};

ConvergenceWork run_single_m(const ExperimentConfig& config, const DiffusionModel& model,
                             int m, const QuadratureGrid& ref_grid) {
    ConvergenceWork work;
    work.row.m = m;
    const ExponentialFamily family = ExponentialFamily::polynomial(m);
    const std::vector<double> eta =
        gaussian_raw_moments(config.p0->mean, config.p0->var, m);

    NaturalParams guess;
    guess.theta.assign(static_cast<std::size_t>(m), 0.0);
    guess.theta[0] = config.p0->mean / config.p0->var;
    guess.theta[1] = -0.5 / config.p0->var;
    const NaturalParams theta0 = moment_match(family, eta, config.grid, guess);

    work.trajectory =
        integrate_theta(model, family, theta0, config.t_end, config.h, config.grid);
    if (!work.trajectory.completed)
        throw NumericalError("m=" + std::to_string(m) + " failed at t=" +
                             fmt(work.trajectory.fail_time) + ": " +
                             work.trajectory.fail_reason);

    const NaturalParams theta_t = work.trajectory.back().theta;

    // evaluate the projected terminal density on the reference grid
    const QuadratureGrid own_grid = build_grid(family, theta_t, config.grid);
    const double psi = log_partition(family, theta_t, own_grid);
    const Polynomial q = family.exponent(theta_t);
    work.projected_density.resize(ref_grid.size());
    for (std::size_t i = 0; i < ref_grid.size(); ++i)
        work.projected_density[i] = std::exp(q(ref_grid.nodes()[i]) - psi);

    work.row.residual_t0 = work.trajectory.points.front().residual;
    double acc = 0.0;
    const auto& pts = work.trajectory.points;
    for (std::size_t k = 1; k < pts.size(); ++k)
        acc += 0.5 * (pts[k].residual + pts[k - 1].residual) * (pts[k].t - pts[k - 1].t);
    work.row.integrated_residual = acc;

    // sup |u*_T - f_T| over the drift window, restricted to where the
    // projected density is not negligible (u* has no meaning far outside
    // the support and its density ratio degenerates there)
    const std::vector<double> u = ustar(model, family, theta_t, config.t_end, own_grid);
    double lo, hi;
    if (config.drift_window) {
        lo = config.drift_window->first;
        hi = config.drift_window->second;
    } else {
        const TrajectoryPoint& last = work.trajectory.back();
        const double sd = std::sqrt(std::max(last.var, 0.0));
        lo = last.mean - 4.0 * sd;
        hi = last.mean + 4.0 * sd;
    }
    {
        const std::vector<double> pt_density = density_values(family, theta_t, own_grid);
        double pmax = 0.0;
        for (double v : pt_density) pmax = std::max(pmax, v);
        double supp_lo = own_grid.x_max(), supp_hi = own_grid.x_min();
        for (std::size_t i = 0; i < own_grid.size(); ++i) {
            if (pt_density[i] >= 1e-8 * pmax) {
                supp_lo = std::min(supp_lo, own_grid.nodes()[i]);
                supp_hi = std::max(supp_hi, own_grid.nodes()[i]);
            }
        }
        lo = std::max(lo, supp_lo);
        hi = std::min(hi, supp_hi);
    }
    double sup = 0.0;
    const auto& gx = own_grid.nodes();
    for (int i = 0; i <= 400; ++i) {
        const double x = lo + (hi - lo) * i / 400.0;
        auto it = std::upper_bound(gx.begin(), gx.end(), x);
        double uv;
        if (it == gx.begin())
            uv = u.front();
        else if (it == gx.end())
            uv = u.back();
        else {
            const std::size_t j = static_cast<std::size_t>(it - gx.begin());
            const double frac = (x - gx[j - 1]) / (gx[j] - gx[j - 1]);
            uv = u[j - 1] + frac * (u[j] - u[j - 1]);
        }
        sup = std::max(sup, std::abs(uv - model.drift.value(config.t_end, x)));
    }
    work.row.drift_sup_distance = sup;
    work.row.ok = true;
    return work;
}

} // namespace

ConvergenceReport run_convergence(const ExperimentConfig& config) {
    if (config.m_list.empty()) throw ConfigError("converge: m_list is required");
    if (!config.p0) throw ConfigError("converge: p0 (gaussian mean/var) is required");
    if (!(config.p0->var > 0.0)) throw ConfigError("converge: p0.var must be positive");
    if (!std::is_sorted(config.m_list.begin(), config.m_list.end()))
        throw ConfigError("converge: m_list must be ascending");
    {
        // Generic guards (steps, coefficients, nonexplosion, p0) are checked
        // once with the smallest family; size-specific degeneracies surface
        // inside the per-m tasks, which record failures without stopping
        // the other sizes.
        ExperimentConfig probe = config;
        probe.family = FamilySpec{"poly", config.m_list.front()};
        probe.init = InitSpec{};
        probe.init.moments =
            gaussian_raw_moments(config.p0->mean, config.p0->var, config.m_list.front());
        validate_config(probe);
    }

    const DiffusionModel model = build_model(config.model);

    // reference solution on a grid at least twice as fine as the projection grid
    const ExponentialFamily fam_top = ExponentialFamily::polynomial(config.m_list.back());
    NaturalParams guess;
    guess.theta.assign(static_cast<std::size_t>(config.m_list.back()), 0.0);
    guess.theta[0] = config.p0->mean / config.p0->var;
    guess.theta[1] = -0.5 / config.p0->var;
    const QuadratureGrid top_grid = build_grid(fam_top, guess, config.grid);
    const int ref_nodes = config.fd.nodes > 0
                              ? config.fd.nodes
                              : 2 * static_cast<int>(top_grid.size()) + 1;
    const QuadratureGrid ref_grid =
        QuadratureGrid::trapezoid(top_grid.x_min(), top_grid.x_max(), ref_nodes);

    std::vector<double> reference;
    const bool use_exact = config.reference == "gaussian-exact" ||
                           (config.reference == "auto" && config.model.name == "linear");
    if (use_exact) {
        if (config.model.name != "linear")
            throw ConfigError("converge: gaussian-exact reference needs the linear model");
        const auto states = gaussian_exact([&](double) { return config.model.f_coeff; },
                                           [&](double) { return config.model.a_const; },
                                           config.p0->mean, config.p0->var, config.t_end,
                                           config.h);
        reference = gaussian_density(ref_grid, states.back().mean, states.back().var);
    } else {
        const std::vector<double> p0v =
            gaussian_density(ref_grid, config.p0->mean, config.p0->var);
        reference = fd_fpe_solve(model, p0v, config.t_end, config.fd.dt, ref_grid).density;
    }

    // family sizes run concurrently; each owns its state and output slot
    std::vector<std::future<ConvergenceWork>> futures;
    for (int m : config.m_list)
        futures.push_back(std::async(std::launch::async, [&, m] {
            return run_single_m(config, model, m, ref_grid);
        }));

    ConvergenceReport report;
    std::vector<ConvergenceWork> works;
    for (std::size_t i = 0; i < futures.size(); ++i) {
        try {
            works.push_back(futures[i].get());
        } catch (const Error& e) {
            ConvergenceWork failed;
            failed.row.m = config.m_list[i];
            failed.row.ok = false;
            failed.row.error = e.what();
            works.push_back(std::move(failed));
        }
    }

    for (ConvergenceWork& w : works) {
        if (w.row.ok) {
            const DensityDistances d = distance(ref_grid, reference, w.projected_density);
            w.row.l1 = d.l1;
            w.row.hellinger = d.hellinger;
            w.row.kl = d.kl;
            w.row.kl_infinite = d.kl_infinite;
        }
        report.rows.push_back(w.row);
    }

    {
        std::ofstream out = open_output(config.out_dir, "convergence.csv", report.files);
        out << "m,status,l1,hellinger,kl,residual_t0,integrated_residual,drift_sup_distance\n";
        for (const ConvergenceRow& r : report.rows) {
            out << r.m << ',' << (r.ok ? "ok" : "failed") << ',' << fmt(r.l1) << ','
                << fmt(r.hellinger) << ',' << (r.kl_infinite ? "inf" : fmt(r.kl)) << ','
                << fmt(r.residual_t0) << ',' << fmt(r.integrated_residual) << ','
                << fmt(r.drift_sup_distance) << '\n';
        }
    }
    for (const ConvergenceWork& w : works) {
        if (!w.row.ok) continue;
        std::ofstream out = open_output(config.out_dir,
                                        "density_m" + std::to_string(w.row.m) + ".csv",
                                        report.files);
        out << "x,p_projected,p_reference\n";
        for (std::size_t i = 0; i < ref_grid.size(); ++i)
            out << fmt(ref_grid.nodes()[i]) << ',' << fmt(w.projected_density[i]) << ','
                << fmt(reference[i]) << '\n';
    }

    // nested families project onto nested tangent spaces, so the t=0
    // residual cannot grow with m
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
        const ConvergenceRow& a = report.rows[i - 1];
        const ConvergenceRow& b = report.rows[i];
        if (a.ok && b.ok && b.residual_t0 > a.residual_t0 + 1e-10)
            throw NumericalError("convergence report: t=0 residual increased from m=" +
                                 std::to_string(a.m) + " to m=" + std::to_string(b.m));
    }
    return report;
}

ReconstructionRunResult run_reconstruction(const ExperimentConfig& config,
                                           bool emit_ustar_grids) {
    validate_config(config);
    const DiffusionModel model = build_model(config.model);
    const ExponentialFamily family = build_family(config.family);
    const NaturalParams theta0 = initial_theta(config, family);

    ReconstructionRunResult res;
    res.trajectory =
        integrate_theta(model, family, theta0, config.t_end, config.h, config.grid);
    if (!res.trajectory.completed)
        throw NumericalError("projection stage failed at t=" +
                             fmt(res.trajectory.fail_time) + ": " +
                             res.trajectory.fail_reason);

    if (emit_ustar_grids) {
        std::ofstream out = open_output(config.out_dir, "ustar.csv", res.files);
        out << "t,x,ustar\n";
        QuadratureGrid grid = build_grid(family, theta0, config.grid);
        for (std::size_t k = 0; k < res.trajectory.points.size();
             k += static_cast<std::size_t>(config.ustar_stride)) {
            const TrajectoryPoint& pt = res.trajectory.points[k];
            refresh_grid(grid, family, pt.theta, pt.mean,
                         std::sqrt(std::max(pt.var, 0.0)), config.grid);
            const std::vector<double> u = ustar(model, family, pt.theta, pt.t, grid);
            for (std::size_t i = 0; i < grid.size(); ++i)
                out << fmt(pt.t) << ',' << fmt(grid.nodes()[i]) << ',' << fmt(u[i]) << '\n';
        }
    }

    SimulationParams params;
    params.n_paths = config.mc.paths;
    params.dt = config.mc.dt;
    params.seed = config.mc.seed;
    params.bins = config.mc.bins;
    res.ensemble = simulate(model, family, res.trajectory, ustar_drift(model, family),
                            params, config.grid);

    const NaturalParams theta_t = res.trajectory.back().theta;
    const std::vector<double> p_t =
        density_values(family, theta_t, res.ensemble.terminal_grid);
    res.distances = empirical_distance(res.ensemble.histogram, res.ensemble.terminal_grid, p_t);

    {
        std::ofstream out = open_output(config.out_dir, "histogram.csv", res.files);
        out << "bin_lo,bin_hi,count,empirical_density,model_density\n";
        const Histogram& hist = res.ensemble.histogram;
        const double width = hist.bin_width();
        const std::vector<double> cdf = res.ensemble.terminal_grid.cumulative_integral(p_t);
        const auto& gx = res.ensemble.terminal_grid.nodes();
        auto cdf_at = [&](double x) {
            if (x <= gx.front()) return 0.0;
            if (x >= gx.back()) return cdf.back();
            const auto it = std::upper_bound(gx.begin(), gx.end(), x);
            const std::size_t i = static_cast<std::size_t>(it - gx.begin());
            const double f = (x - gx[i - 1]) / (gx[i] - gx[i - 1]);
            return cdf[i - 1] + f * (cdf[i] - cdf[i - 1]);
        };
        for (std::size_t b = 0; b < hist.counts.size(); ++b) {
            const double lo = hist.lo + width * static_cast<double>(b);
            const double hi = lo + width;
            const double emp = static_cast<double>(hist.counts[b]) /
                               (static_cast<double>(hist.n_kept) * width);
            const double mod = (cdf_at(hi) - cdf_at(lo)) / width;
            out << fmt(lo) << ',' << fmt(hi) << ',' << hist.counts[b] << ',' << fmt(emp)
                << ',' << fmt(mod) << '\n';
        }
    }
    {
        std::ofstream out = open_output(config.out_dir, "distances.csv", res.files);
        out << "l1,hellinger,paths,excluded,seed\n";
        out << fmt(res.distances.l1) << ',' << fmt(res.distances.hellinger) << ','
            << res.ensemble.n_paths << ',' << res.ensemble.excluded << ','
            << res.ensemble.seed << '\n';
    }
    return res;
}

OracleRunResult run_oracle(const ExperimentConfig& config) {
    if (config.model.name != "linear")
        throw ConfigError("oracle: cross-validation needs the linear model");
    if (!config.p0) throw ConfigError("oracle: p0 (gaussian mean/var) is required");
    if (!(config.p0->var > 0.0)) throw ConfigError("oracle: p0.var must be positive");
    if (!(config.t_end > 0.0) || !(config.fd.dt > 0.0))
        throw ConfigError("oracle: T and fd.dt must be positive");

    const DiffusionModel model = build_model(config.model);
    const auto states = gaussian_exact([&](double) { return config.model.f_coeff; },
                                       [&](double) { return config.model.a_const; },
                                       config.p0->mean, config.p0->var, config.t_end,
                                       config.h);
    const GaussianState terminal = states.back();

    // domain wide enough for both endpoints of the evolution
    const double sd0 = std::sqrt(config.p0->var);
    const double sdt = std::sqrt(terminal.var);
    const double lo = std::min(config.p0->mean - 10.0 * sd0, terminal.mean - 10.0 * sdt);
    const double hi = std::max(config.p0->mean + 10.0 * sd0, terminal.mean + 10.0 * sdt);
    const int nodes = config.fd.nodes > 0 ? config.fd.nodes : 400;
    const QuadratureGrid grid = QuadratureGrid::trapezoid(lo, hi, nodes);

    const std::vector<double> p0v = gaussian_density(grid, config.p0->mean, config.p0->var);
    const FdSolveResult fd = fd_fpe_solve(model, p0v, config.t_end, config.fd.dt, grid);
    const std::vector<double> exact = gaussian_density(grid, terminal.mean, terminal.var);

    OracleRunResult res;
    res.exact_terminal = terminal;
    res.distances = distance(grid, exact, fd.density);
    res.mass_drift = fd.max_mass_drift;
    res.clip_events = fd.clip_events;

    {
        std::ofstream out = open_output(config.out_dir, "oracle_density.csv", res.files);
        out << "x,p_fd,p_exact\n";
        for (std::size_t i = 0; i < grid.size(); ++i)
            out << fmt(grid.nodes()[i]) << ',' << fmt(fd.density[i]) << ','
                << fmt(exact[i]) << '\n';
    }
    {
        std::ofstream out = open_output(config.out_dir, "oracle_summary.csv", res.files);
        out << "terminal_mean,terminal_var,l1,hellinger,kl,mass_drift,clip_events\n";
        out << fmt(terminal.mean) << ',' << fmt(terminal.var) << ',' << fmt(res.distances.l1)
            << ',' << fmt(res.distances.hellinger) << ',' << fmt(res.distances.kl) << ','
            << fmt(res.mass_drift) << ',' << res.clip_events << '\n';
    }
    return res;
}

std::vector<GeometryCheckRow> run_geometry_check() {
    std::vector<GeometryCheckRow> rows;
    auto add = [&](const std::string& name, double value, double reference, double tol) {
        GeometryCheckRow r;
        r.name = name;
        r.value = value;
        r.reference = reference;
        r.error = std::abs(value - reference);
        r.tolerance = tol;
        r.pass = r.error <= tol;
        rows.push_back(r);
    };

    const QuadratureGrid grid = QuadratureGrid::gauss_legendre(-14.0, 14.0, 64, 16);
    const std::vector<double> p = gaussian_density(grid, 0.0, 1.0);
    const auto& x = grid.nodes();
    const std::size_t n = grid.size();

    // chart of N(1,1) against N(0,1) is u(x) = x
    {
        const std::vector<double> q = gaussian_density(grid, 1.0, 1.0);
        const std::vector<double> u = chart(grid, p, q);
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(u[i] - x[i]));
        add("chart_gaussian_shift_sup_error", err, 0.0, 1e-8);
    }
    // chart/patch roundtrip on a mixed direction in the Cramer class
    {
        std::vector<double> u(n);
        for (std::size_t i = 0; i < n; ++i)
            u[i] = 0.3 * x[i] + 0.1 * (x[i] * x[i] - 1.0) + 0.2 * std::sin(2.0 * x[i]);
        const double mean = [&] {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += grid.weights()[i] * p[i] * u[i];
            return s;
        }();
        for (double& v : u) v -= mean;
        const std::vector<double> q = patch(grid, p, u);
        const std::vector<double> u_back = chart(grid, p, q);
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(u_back[i] - u[i]));
        add("chart_patch_roundtrip_sup_error", err, 0.0, 1e-8);
    }
    // K_p(t x) = t^2/2 under N(0,1)
    {
        std::vector<double> u(n);
        for (std::size_t i = 0; i < n; ++i) u[i] = x[i];
        add("cumulant_linear_direction", cumulant(grid, p, u), 0.5, 1e-10);
    }
    // DK_p(u)v = E_q[v] via central differences
    {
        std::vector<double> u(n), v(n);
        for (std::size_t i = 0; i < n; ++i) {
            u[i] = 0.2 * x[i];
            v[i] = x[i] * x[i];
        }
        const double eps = 1e-4;
        std::vector<double> up(n), um(n);
        for (std::size_t i = 0; i < n; ++i) {
            up[i] = u[i] + eps * v[i];
            um[i] = u[i] - eps * v[i];
        }
        const double fd = (cumulant(grid, p, up) - cumulant(grid, p, um)) / (2.0 * eps);
        const std::vector<double> q = patch(grid, p, u);
        double eqv = 0.0;
        for (std::size_t i = 0; i < n; ++i) eqv += grid.weights()[i] * q[i] * v[i];
        add("cumulant_first_differential_rel", std::abs(fd - eqv) / std::abs(eqv), 0.0, 1e-5);

        const double f0 = cumulant(grid, p, u);
        const double fd2 = (cumulant(grid, p, up) - 2.0 * f0 + cumulant(grid, p, um)) /
                           (eps * eps);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = v[i] - eqv;
            var += grid.weights()[i] * q[i] * d * d;
        }
        add("cumulant_second_differential_rel", std::abs(fd2 - var) / var, 0.0, 1e-5);
    }
    // Orlicz norm of x under N(0,1) and its homogeneity
    {
        std::vector<double> u(n), u2(n);
        for (std::size_t i = 0; i < n; ++i) {
            u[i] = x[i];
            u2[i] = 2.0 * x[i];
        }
        const double r1 = orlicz_norm(grid, p, u);
        add("orlicz_norm_of_x", r1, 1.0 / std::sqrt(2.0 * std::log(2.0)), 1e-6);
        add("orlicz_norm_homogeneity", orlicz_norm(grid, p, u2), 2.0 * r1, 1e-6);
    }
    // ball property: ||u|| < 1 implies E[e^u] < 4, randomized scaled samples.
    // Near-critical quadratic components need a wide window, and directions
    // grow at most quadratically so they stay in the Cramer class.
    {
        const QuadratureGrid ball_grid =
            QuadratureGrid::gauss_legendre(-36.0, 36.0, 128, 16);
        const std::vector<double> pb = gaussian_density(ball_grid, 0.0, 1.0);
        const auto& xb = ball_grid.nodes();
        const std::size_t nb = ball_grid.size();
        NormalStream rng(20240817, 0);
        int failures = 0;
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<double> u(nb, 0.0);
            double c1 = rng.normal(), c2 = rng.normal(), c3 = rng.normal();
            for (std::size_t i = 0; i < nb; ++i)
                u[i] = c1 * xb[i] + 0.3 * c2 * (xb[i] * xb[i] - 1.0) +
                       c3 * std::sin(2.0 * xb[i]);
            double mean = 0.0;
            for (std::size_t i = 0; i < nb; ++i) mean += ball_grid.weights()[i] * pb[i] * u[i];
            for (double& vv : u) vv -= mean;
            const double norm = orlicz_norm(ball_grid, pb, u);
            if (!(norm > 0.0) || !std::isfinite(norm)) continue;
            const double target = 0.05 + 0.9 * rng.uniform(); // in (0, 0.95)
            for (double& vv : u) vv *= target / norm;
            const double ee = std::exp(cumulant(ball_grid, pb, u));
            if (!(ee < 4.0)) ++failures;
        }
        add("orlicz_ball_implies_Eexp_below_4_failures", failures, 0.0, 0.0);
    }
    // square-root map: finite-difference derivative and norm identity
    {
        std::vector<double> u(n), v(n);
        for (std::size_t i = 0; i < n; ++i) {
            u[i] = 0.0;
            v[i] = x[i];
        }
        const SqrtMapCheck c0 = sqrt_map_derivative_check(grid, p, u, v, 1e-4);
        add("sqrt_map_fd_rel_error_at_0", c0.fd_rel_error, 0.0, 1e-5);
        add("sqrt_map_norm_sq_at_0", c0.dh_norm_sq, 0.25, 1e-9);
        for (std::size_t i = 0; i < n; ++i) u[i] = 0.2 * x[i] - 0.02;
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += grid.weights()[i] * p[i] * u[i];
        for (double& vv : u) vv -= mean;
        const SqrtMapCheck c1 = sqrt_map_derivative_check(grid, p, u, v, 1e-4);
        add("sqrt_map_fd_rel_error", c1.fd_rel_error, 0.0, 1e-5);
        add("sqrt_map_norm_identity_rel", c1.norm_rel_mismatch, 0.0, 1e-5);
    }
    // change of coordinates between two Gaussian base points
    {
        const std::vector<double> p1 = gaussian_density(grid, 0.3, 1.0);
        const std::vector<double> p2 = gaussian_density(grid, -0.2, 1.3);
        std::vector<double> u(n);
        for (std::size_t i = 0; i < n; ++i) u[i] = 0.1 * x[i];
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += grid.weights()[i] * p1[i] * u[i];
        for (double& vv : u) vv -= mean;
        const std::vector<double> q = patch(grid, p1, u);
        const std::vector<double> lhs = chart(grid, p2, q);
        std::vector<double> rhs(n);
        for (std::size_t i = 0; i < n; ++i) rhs[i] = u[i] + std::log(p1[i] / p2[i]);
        double m2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) m2 += grid.weights()[i] * p2[i] * rhs[i];
        for (double& vv : rhs) vv -= m2;
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(lhs[i] - rhs[i]));
        add("change_of_coordinates_sup_error", err, 0.0, 1e-8);
    }
    return rows;
}

} // namespace projfpe
