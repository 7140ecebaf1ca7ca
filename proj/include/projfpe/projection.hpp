#ifndef PROJFPE_PROJECTION_HPP
#define PROJFPE_PROJECTION_HPP

#include "projfpe/expfam.hpp"
#include "projfpe/model.hpp"
#include "projfpe/quadrature.hpp"

#include <span>
#include <string>
#include <vector>

namespace projfpe {

// Fisher-metric orthogonal projection of v onto
// span{c_i - E_theta c_i}: coefficients b = g^{-1} <v, c - E c>_theta
// and node values of b^T (c - E c).
struct ProjectionResult {
    std::vector<double> coefficients;
    std::vector<double> values;
    double fisher_condition = 0.0;
};

ProjectionResult project(const ExponentialFamily& family, const NaturalParams& theta,
                         std::span<const double> v_values, const QuadratureGrid& grid);

// sqrt(<v - Pv, v - Pv>_theta)
double residual_norm(const ExponentialFamily& family, const NaturalParams& theta,
                     std::span<const double> v_values, const QuadratureGrid& grid);

// Right-hand side of the projected parameter ODE,
// thetadot = g^{-1}(theta) E_theta[L c]. Enforces the square-
// integrability guard on alpha before evaluating.
std::vector<double> projected_field(const DiffusionModel& model,
                                    const ExponentialFamily& family,
                                    const NaturalParams& theta, double t,
                                    const QuadratureGrid& grid);

struct TrajectoryPoint {
    double t = 0.0;
    NaturalParams theta;
    double residual = 0.0;         // ||alpha - P alpha||_theta
    double fisher_condition = 0.0;
    double step_error = 0.0;       // step-halving estimate of the step that led here
    double mean = 0.0;
    double var = 0.0;
};

struct ThetaTrajectory {
    double step = 0.0;
    std::vector<TrajectoryPoint> points;
    bool completed = false;
    double fail_time = 0.0;
    std::string fail_reason;

    const TrajectoryPoint& back() const { return points.back(); }
};

// Fixed-step RK4 integration of the projected parameter ODE on [0, T]
// with grid rebuilds per the policy. A step failure stops the run and
// leaves the partial trajectory plus the failing time in the result.
ThetaTrajectory integrate_theta(const DiffusionModel& model,
                                const ExponentialFamily& family,
                                const NaturalParams& theta0, double t_end, double h,
                                const GridPolicy& policy);

} // namespace projfpe

#endif
