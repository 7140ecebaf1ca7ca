#ifndef PROJFPE_HARNESS_HPP
#define PROJFPE_HARNESS_HPP

#include "projfpe/expfam.hpp"
#include "projfpe/model.hpp"
#include "projfpe/oracle.hpp"
#include "projfpe/projection.hpp"
#include "projfpe/reconstruction.hpp"

#include <optional>
#include <string>
#include <vector>

namespace projfpe {

struct ModelSpec {
    std::string name; // "linear" | "unit-variance" | "double-well"
    double f_coeff = -1.0;
    double a_const = 2.0;
    double k = 1.0;
    double a_base = 2.0;
    double a_amp = 1.0;
    double a_freq = 1.0;
    double sigma0_sq = 0.5;
    std::optional<double> nonexplosion_k;
};

struct FamilySpec {
    std::string basis = "poly"; // "poly" | "mean-shift-gaussian"
    int max_degree = 2;
};

struct InitSpec {
    std::optional<std::vector<double>> theta0;
    std::optional<std::vector<double>> moments; // target E[c]
};

struct McParams {
    std::size_t paths = 100000;
    double dt = 1e-3;
    std::uint64_t seed = 42;
    int bins = 200;
};

struct FdParams {
    int nodes = 0; // 0: twice the projection grid plus one
    double dt = 1e-3;
};

struct ExperimentConfig {
    ModelSpec model;
    FamilySpec family;
    InitSpec init;
    double t_end = 1.0;
    double h = 1e-3;
    GridPolicy grid;
    McParams mc;
    int ustar_stride = 1;
    std::vector<int> m_list;                       // converge
    std::optional<GaussianState> p0;               // converge / oracle initial density
    std::string reference = "auto";                // "auto" | "gaussian-exact" | "fd"
    FdParams fd;
    std::optional<std::pair<double, double>> drift_window;
    std::string out_dir = "out";
    bool quiet = false;

    static ExperimentConfig from_json_file(const std::string& path);
    static ExperimentConfig from_json_text(const std::string& text);
};

DiffusionModel build_model(const ModelSpec& spec);
ExponentialFamily build_family(const FamilySpec& spec);

// theta0 from the init block: direct natural parameters or moment matching.
NaturalParams initial_theta(const ExperimentConfig& config, const ExponentialFamily& family);

// Assumption guards, run before any computation: coefficient smoothness
// on a probe grid, positivity of a, optional nonexplosion bound, domain
// guard on theta0 and square-integrability of alpha at theta0.
void validate_config(const ExperimentConfig& config);

struct ProjectionRunResult {
    ThetaTrajectory trajectory;
    double terminal_mean = 0.0;
    double terminal_var = 0.0;
    double max_residual = 0.0;
    std::vector<std::string> files;
};

ProjectionRunResult run_projection(const ExperimentConfig& config);

struct ConvergenceRow {
    int m = 0;
    bool ok = false;
    std::string error;
    double l1 = 0.0;
    double hellinger = 0.0;
    double kl = 0.0;
    bool kl_infinite = false;
    double residual_t0 = 0.0;
    double integrated_residual = 0.0;
    double drift_sup_distance = 0.0;
};

struct ConvergenceReport {
    std::vector<ConvergenceRow> rows; // ordered by m
    std::vector<std::string> files;
};

// Nested m-sweep (family sizes run concurrently). Throws NumericalError
// if the t=0 residual column is not nonincreasing in m.
ConvergenceReport run_convergence(const ExperimentConfig& config);

struct ReconstructionRunResult {
    ThetaTrajectory trajectory;
    PathEnsemble ensemble;
    EmpiricalDistance distances;
    std::vector<std::string> files;
};

ReconstructionRunResult run_reconstruction(const ExperimentConfig& config,
                                           bool emit_ustar_grids);

struct OracleRunResult {
    GaussianState exact_terminal;
    DensityDistances distances;
    double mass_drift = 0.0;
    long clip_events = 0;
    std::vector<std::string> files;
};

// Cross-validation of the finite-difference solver against the exact
// Gaussian evolution (linear models only).
OracleRunResult run_oracle(const ExperimentConfig& config);

struct GeometryCheckRow {
    std::string name;
    double value = 0.0;
    double reference = 0.0;
    double error = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

std::vector<GeometryCheckRow> run_geometry_check();

// E[x^j], j = 1..count, of a Gaussian (recurrence; no quadrature).
std::vector<double> gaussian_raw_moments(double mean, double var, int count);

} // namespace projfpe

#endif
