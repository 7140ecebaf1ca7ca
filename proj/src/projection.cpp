#include "projfpe/projection.hpp"

#include "projfpe/errors.hpp"
#include "projfpe/ode.hpp"

#include <cmath>

namespace projfpe {

namespace {

// Node values of the centered statistics plus their means.
struct CenteredStats {
    std::vector<std::vector<double>> values; // [i][node], centered
    std::vector<double> means;
};

CenteredStats centered_stats(const ExponentialFamily& family, const QuadratureGrid& grid,
                             std::span<const double> p) {
    const int m = family.dim();
    const auto& nodes = grid.nodes();
    const auto& w = grid.weights();
    CenteredStats cs;
    cs.values.resize(static_cast<std::size_t>(m));
    cs.means.resize(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        auto& col = cs.values[static_cast<std::size_t>(i)];
        col.resize(nodes.size());
        const Polynomial& ci = family.stat(i);
        double mu = 0.0;
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            col[k] = ci(nodes[k]);
            mu += w[k] * col[k] * p[k];
        }
        cs.means[static_cast<std::size_t>(i)] = mu;
        for (double& x : col) x -= mu;
    }
    return cs;
}

Matrix gram(const CenteredStats& cs, const QuadratureGrid& grid,
            std::span<const double> p) {
    const std::size_t m = cs.values.size();
    const auto& w = grid.weights();
    Matrix g(m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i; j < m; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < p.size(); ++k)
                s += w[k] * cs.values[i][k] * cs.values[j][k] * p[k];
            g(i, j) = s;
            g(j, i) = s;
        }
    }
    double trace = 0.0;
    for (std::size_t i = 0; i < m; ++i) trace += g(i, i);
    if (min_eigenvalue_symmetric(g) < 1e-10 * trace)
        throw SingularFisherError("projection: Fisher matrix near-singular");
    return g;
}

// Square-integrability guard on alpha (condition on the model/family pair):
// the quadrature of alpha^2 p must be finite and not boundary-dominated.
// A genuinely divergent integrand puts an O(1) fraction on the boundary;
// 1e-6 flags that while tolerating the benign excursions the grid-rebuild
// policy allows between rebuilds.
void require_alpha_square_integrable(const QuadratureGrid& grid,
                                     std::span<const double> alpha,
                                     std::span<const double> p) {
    const auto& w = grid.weights();
    double s = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i)
        s += w[i] * alpha[i] * alpha[i] * p[i];
    if (!std::isfinite(s))
        throw ConditionFError("alpha not square-integrable under the current density");
    const double boundary = std::max(w.front() * alpha.front() * alpha.front() * p.front(),
                                     w.back() * alpha.back() * alpha.back() * p.back());
    if (s > 0.0 && boundary > 1e-6 * s)
        throw ConditionFError("alpha^2 quadrature dominated by the grid boundary");
}

} // namespace

ProjectionResult project(const ExponentialFamily& family, const NaturalParams& theta,
                         std::span<const double> v_values, const QuadratureGrid& grid) {
    family.require_in_domain(theta);
    if (v_values.size() != grid.size())
        throw UsageError("project: v length mismatch");
    const std::vector<double> p = density_values(family, theta, grid);
    const CenteredStats cs = centered_stats(family, grid, p);
    const Matrix g = gram(cs, grid, p);

    const int m = family.dim();
    const auto& w = grid.weights();
    std::vector<double> rhs(static_cast<std::size_t>(m), 0.0);
    for (int i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k)
            s += w[k] * v_values[k] * cs.values[static_cast<std::size_t>(i)][k] * p[k];
        rhs[static_cast<std::size_t>(i)] = s;
    }
    SpdSolveReport solve = spd_solve(g, rhs);

    ProjectionResult out;
    out.fisher_condition = solve.condition_estimate;
    out.values.assign(grid.size(), 0.0);
    for (int i = 0; i < m; ++i) {
        const double b = solve.solution[static_cast<std::size_t>(i)];
        const auto& col = cs.values[static_cast<std::size_t>(i)];
        for (std::size_t k = 0; k < out.values.size(); ++k)
            out.values[k] += b * col[k];
    }
    out.coefficients = std::move(solve.solution);
    return out;
}

double residual_norm(const ExponentialFamily& family, const NaturalParams& theta,
                     std::span<const double> v_values, const QuadratureGrid& grid) {
    const ProjectionResult proj = project(family, theta, v_values, grid);
    const std::vector<double> p = density_values(family, theta, grid);
    const auto& w = grid.weights();
    double s = 0.0;
    for (std::size_t k = 0; k < v_values.size(); ++k) {
        const double r = v_values[k] - proj.values[k];
        s += w[k] * r * r * p[k];
    }
    return std::sqrt(std::max(s, 0.0));
}

std::vector<double> projected_field(const DiffusionModel& model,
                                    const ExponentialFamily& family,
                                    const NaturalParams& theta, double t,
                                    const QuadratureGrid& grid) {
    family.require_in_domain(theta);
    const std::vector<double> p = density_values(family, theta, grid);
    const std::vector<double> alpha = alpha_field(model, t, theta, family, grid);
    require_alpha_square_integrable(grid, alpha, p);

    const CenteredStats cs = centered_stats(family, grid, p);
    const Matrix g = gram(cs, grid, p);

    const int m = family.dim();
    const auto& w = grid.weights();
    std::vector<double> rhs(static_cast<std::size_t>(m), 0.0);
    for (int i = 0; i < m; ++i) {
        const std::vector<double> lc = backward_apply(model, t, grid, family.stat(i));
        double s = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) s += w[k] * lc[k] * p[k];
        rhs[static_cast<std::size_t>(i)] = s;
    }
    return spd_solve(g, rhs).solution;
}

ThetaTrajectory integrate_theta(const DiffusionModel& model,
                                const ExponentialFamily& family,
                                const NaturalParams& theta0, double t_end, double h,
                                const GridPolicy& policy) {
    if (!(t_end > 0.0) || !(h > 0.0))
        throw UsageError("integrate_theta: T and h must be positive");
    const double steps_real = t_end / h;
    const long n_steps = std::lround(steps_real);
    if (n_steps < 1 || std::abs(steps_real - static_cast<double>(n_steps)) > 1e-9)
        throw UsageError("integrate_theta: T must be an integer multiple of h");
    family.require_in_domain(theta0);

    ThetaTrajectory traj;
    traj.step = h;
    QuadratureGrid grid = build_grid(family, theta0, policy);

    auto record = [&](double t, const NaturalParams& theta, double step_error) {
        const std::vector<double> alpha = alpha_field(model, t, theta, family, grid);
        const ProjectionResult proj = project(family, theta, alpha, grid);
        const std::vector<double> p = density_values(family, theta, grid);
        const auto& w = grid.weights();
        double s = 0.0;
        for (std::size_t k = 0; k < alpha.size(); ++k) {
            const double r = alpha[k] - proj.values[k];
            s += w[k] * r * r * p[k];
        }
        const MeanVar mv = density_mean_var(grid, p);
        TrajectoryPoint pt;
        pt.t = t;
        pt.theta = theta;
        pt.residual = std::sqrt(std::max(s, 0.0));
        pt.fisher_condition = proj.fisher_condition;
        pt.step_error = step_error;
        pt.mean = mv.mean;
        pt.var = mv.var;
        traj.points.push_back(std::move(pt));
    };

    NaturalParams theta = theta0;
    record(0.0, theta, 0.0);

    const VectorField field = [&](double t, const std::vector<double>& y) {
        NaturalParams th{y};
        return projected_field(model, family, th, t, grid);
    };

    for (long k = 0; k < n_steps; ++k) {
        const double t = static_cast<double>(k) * h;
        try {
            // fixed step; the halved-step estimate is recorded, never fed back
            Rk4StepResult step = rk4_step_with_error(field, t, theta.theta, h);
            theta.theta = std::move(step.y);
            const TrajectoryPoint& prev = traj.points.back();
            // rebuild off the previous recorded moments; cheap and lags by
            // one step, which the wide bounds absorb
            refresh_grid(grid, family, theta, prev.mean,
                         std::sqrt(std::max(prev.var, 0.0)), policy);
            record(t + h, theta, step.error_estimate);
        } catch (const Error& e) {
            traj.completed = false;
            traj.fail_time = t;
            traj.fail_reason = e.what();
            return traj;
        }
    }
    traj.completed = true;
    return traj;
}

} // namespace projfpe
