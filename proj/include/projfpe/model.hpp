#ifndef PROJFPE_MODEL_HPP
#define PROJFPE_MODEL_HPP

#include "projfpe/expfam.hpp"
#include "projfpe/quadrature.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace projfpe {

// Time-dependent coefficient with spatial derivatives. dxx is only
// needed for the diffusion coefficient and may be left empty elsewhere.
struct TimeSpaceField {
    std::function<double(double t, double x)> value;
    std::function<double(double t, double x)> dx;
    std::function<double(double t, double x)> dxx;
};

// Scalar Ito diffusion dX = f dt + sigma dW with a = sigma^2.
struct DiffusionModel {
    std::string name;
    TimeSpaceField drift;     // f
    TimeSpaceField diffusion; // a = sigma^2 (must stay positive)
    std::optional<double> nonexplosion_k;
};

// f(t, x) = F x, a = A.
DiffusionModel linear_model(double f_coeff, double a_const);

// Drift built so the marginal law stays N(k t, 1) for any diffusion
// coefficient: f = a'/2 + a (k t - x)/2 + k, with a(x) = base + amp sin(freq x).
DiffusionModel unit_variance_model(double k, double a_base, double a_amp,
                                   double a_freq);

// f = x - x^3, constant a = sigma0^2.
DiffusionModel double_well_model(double sigma0_sq);

// (L phi)(x) = f phi' + a phi'' / 2 at the grid nodes.
std::vector<double> backward_apply(const DiffusionModel& model, double t,
                                   const QuadratureGrid& grid,
                                   std::span<const double> phi_dx,
                                   std::span<const double> phi_dxx);
std::vector<double> backward_apply(const DiffusionModel& model, double t,
                                   const QuadratureGrid& grid, const Polynomial& phi);

// alpha_{t,theta} = (L* p) / p at p = p(., theta) through the log-density
// expansion (never by differencing p):
//   -f q' - f' + [a q'' + a q'^2 + 2 a' q' + a''] / 2,   q = log p + psi.
std::vector<double> alpha_field(const DiffusionModel& model, double t,
                                const NaturalParams& theta,
                                const ExponentialFamily& family,
                                const QuadratureGrid& grid);

struct NonexplosionReport {
    bool holds = false;
    double worst_margin = 0.0; // max over probes of 2xf + a - K(1+x^2)
    double worst_x = 0.0;
    double worst_t = 0.0;
};

// Checks 2 x f(t,x) + a(t,x) <= K (1 + x^2) on the probe nodes and times.
NonexplosionReport nonexplosion_check(const DiffusionModel& model,
                                      std::span<const double> probe_x,
                                      std::span<const double> probe_t, double k);

struct FieldDerivativeReport {
    double max_dx_rel_error = 0.0;
    double max_dxx_rel_error = 0.0;
    bool ok = false;
};

// Central finite-difference validation of the declared derivatives on a
// probe grid (step 1e-5, relative tolerance 1e-4).
FieldDerivativeReport check_field_derivatives(const TimeSpaceField& field, double t,
                                              std::span<const double> probe_x,
                                              bool check_dxx);

// 41 uniform probe nodes over mean +- 6 sd.
std::vector<double> probe_nodes(double mean, double sd);

} // namespace projfpe

#endif
