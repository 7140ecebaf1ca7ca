#include "projfpe/model.hpp"

#include "projfpe/errors.hpp"

#include <cmath>

namespace projfpe {

DiffusionModel linear_model(double f_coeff, double a_const) {
    if (!(a_const > 0.0)) throw ConfigError("linear model: diffusion constant must be positive");
    DiffusionModel m;
    m.name = "linear";
    m.drift.value = [f_coeff](double, double x) { return f_coeff * x; };
    m.drift.dx = [f_coeff](double, double) { return f_coeff; };
    m.diffusion.value = [a_const](double, double) { return a_const; };
    m.diffusion.dx = [](double, double) { return 0.0; };
    m.diffusion.dxx = [](double, double) { return 0.0; };
    return m;
}

DiffusionModel unit_variance_model(double k, double a_base, double a_amp,
                                   double a_freq) {
    if (!(a_base > std::abs(a_amp)))
        throw ConfigError("unit-variance model: need a_base > |a_amp| so a stays positive");
    auto a = [a_base, a_amp, a_freq](double x) { return a_base + a_amp * std::sin(a_freq * x); };
    auto ad = [a_amp, a_freq](double x) { return a_amp * a_freq * std::cos(a_freq * x); };
    auto add = [a_amp, a_freq](double x) { return -a_amp * a_freq * a_freq * std::sin(a_freq * x); };
    DiffusionModel m;
    m.name = "unit-variance";
    m.drift.value = [=](double t, double x) {
        return 0.5 * ad(x) + 0.5 * a(x) * (k * t - x) + k;
    };
    m.drift.dx = [=](double t, double x) {
        return 0.5 * add(x) + 0.5 * ad(x) * (k * t - x) - 0.5 * a(x);
    };
    m.diffusion.value = [=](double, double x) { return a(x); };
    m.diffusion.dx = [=](double, double x) { return ad(x); };
    m.diffusion.dxx = [=](double, double x) { return add(x); };
    return m;
}

DiffusionModel double_well_model(double sigma0_sq) {
    if (!(sigma0_sq > 0.0)) throw ConfigError("double-well model: sigma0^2 must be positive");
    DiffusionModel m;
    m.name = "double-well";
    m.drift.value = [](double, double x) { return x - x * x * x; };
    m.drift.dx = [](double, double x) { return 1.0 - 3.0 * x * x; };
    m.diffusion.value = [sigma0_sq](double, double) { return sigma0_sq; };
    m.diffusion.dx = [](double, double) { return 0.0; };
    m.diffusion.dxx = [](double, double) { return 0.0; };
    return m;
}

std::vector<double> backward_apply(const DiffusionModel& model, double t,
                                   const QuadratureGrid& grid,
                                   std::span<const double> phi_dx,
                                   std::span<const double> phi_dxx) {
    const auto& nodes = grid.nodes();
    if (phi_dx.size() != nodes.size() || phi_dxx.size() != nodes.size())
        throw UsageError("backward_apply: derivative array length mismatch");
    std::vector<double> out(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double x = nodes[i];
        out[i] = model.drift.value(t, x) * phi_dx[i] +
                 0.5 * model.diffusion.value(t, x) * phi_dxx[i];
    }
    return out;
}

std::vector<double> backward_apply(const DiffusionModel& model, double t,
                                   const QuadratureGrid& grid, const Polynomial& phi) {
    const Polynomial d1 = phi.derivative();
    const Polynomial d2 = d1.derivative();
    const auto& nodes = grid.nodes();
    std::vector<double> dx(nodes.size()), dxx(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        dx[i] = d1(nodes[i]);
        dxx[i] = d2(nodes[i]);
    }
    return backward_apply(model, t, grid, dx, dxx);
}

std::vector<double> alpha_field(const DiffusionModel& model, double t,
                                const NaturalParams& theta,
                                const ExponentialFamily& family,
                                const QuadratureGrid& grid) {
    family.require_in_domain(theta);
    const Polynomial q = family.exponent(theta);
    const Polynomial q1 = q.derivative();
    const Polynomial q2 = q1.derivative();
    const auto& nodes = grid.nodes();
    std::vector<double> out(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double x = nodes[i];
        const double lp1 = q1(x);
        const double lp2 = q2(x);
        const double f = model.drift.value(t, x);
        const double fdx = model.drift.dx(t, x);
        const double a = model.diffusion.value(t, x);
        const double adx = model.diffusion.dx(t, x);
        const double adxx = model.diffusion.dxx(t, x);
        out[i] = -f * lp1 - fdx +
                 0.5 * (a * lp2 + a * lp1 * lp1 + 2.0 * adx * lp1 + adxx);
    }
    return out;
}

NonexplosionReport nonexplosion_check(const DiffusionModel& model,
                                      std::span<const double> probe_x,
                                      std::span<const double> probe_t, double k) {
    if (!(k > 0.0)) throw UsageError("nonexplosion_check: K must be positive");
    NonexplosionReport rep;
    rep.worst_margin = -std::numeric_limits<double>::infinity();
    for (double t : probe_t) {
        for (double x : probe_x) {
            const double lhs = 2.0 * x * model.drift.value(t, x) + model.diffusion.value(t, x);
            const double margin = lhs - k * (1.0 + x * x);
            if (margin > rep.worst_margin) {
                rep.worst_margin = margin;
                rep.worst_x = x;
                rep.worst_t = t;
            }
        }
    }
    rep.holds = rep.worst_margin <= 0.0;
    return rep;
}

FieldDerivativeReport check_field_derivatives(const TimeSpaceField& field, double t,
                                              std::span<const double> probe_x,
                                              bool check_dxx) {
    constexpr double step = 1e-5;
    constexpr double tol = 1e-4;
    FieldDerivativeReport rep;
    for (double x : probe_x) {
        const double vp = field.value(t, x + step);
        const double vm = field.value(t, x - step);
        const double fd1 = (vp - vm) / (2.0 * step);
        const double d1 = field.dx(t, x);
        const double s1 = std::max({std::abs(d1), std::abs(fd1), 1.0});
        rep.max_dx_rel_error = std::max(rep.max_dx_rel_error, std::abs(fd1 - d1) / s1);
        if (check_dxx) {
            const double v0 = field.value(t, x);
            const double fd2 = (vp - 2.0 * v0 + vm) / (step * step);
            const double d2 = field.dxx(t, x);
            const double s2 = std::max({std::abs(d2), std::abs(fd2), 1.0});
            rep.max_dxx_rel_error = std::max(rep.max_dxx_rel_error, std::abs(fd2 - d2) / s2);
        }
    }
    rep.ok = rep.max_dx_rel_error <= tol && rep.max_dxx_rel_error <= tol;
    return rep;
}

std::vector<double> probe_nodes(double mean, double sd) {
    std::vector<double> x(41);
    for (int i = 0; i < 41; ++i)
        x[static_cast<std::size_t>(i)] = mean + 6.0 * sd * (i - 20) / 20.0;
    return x;
}

} // namespace projfpe
