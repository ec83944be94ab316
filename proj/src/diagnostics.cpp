#include "glf/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace glf {

namespace {

EnergyReport energy_impl(const VectorField& u, double eps, SpectralWorkspace& ws) {
    GradientField gr;
    ws.gradient(u, gr);
    return energy_from_gradient(u, gr, eps);
}

ScalarField jacobian_impl(const VectorField& u, SpectralWorkspace& ws) {
    GradientField gr;
    ws.gradient(u, gr);
    return jacobian_from_gradient(gr);
}

}  // namespace

EnergyReport energy_from_gradient(const VectorField& u, const GradientField& gr, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("energy: eps must be positive");
    const auto m = u.grid().nodes();
    double dir = 0.0, pot = 0.0;
    const auto u1 = u.comp(0), u2 = u.comp(1);
    const auto a = gr.d1u1.raw(), b = gr.d2u1.raw(), c = gr.d1u2.raw(), d = gr.d2u2.raw();
    for (std::int64_t p = 0; p < m; ++p) {
        dir += a[p] * a[p] + b[p] * b[p] + c[p] * c[p] + d[p] * d[p];
        const double q = 1.0 - (u1[p] * u1[p] + u2[p] * u2[p]);
        pot += q * q;
    }
    const double inv = 1.0 / static_cast<double>(m);
    return {dir * inv, pot * inv / (4.0 * eps * eps)};
}

ScalarField jacobian_from_gradient(const GradientField& gr) {
    ScalarField ju(gr.grid());
    const auto m = gr.grid().nodes();
    auto out = ju.raw();
    const auto a = gr.d1u1.raw(), b = gr.d2u1.raw(), c = gr.d1u2.raw(), d = gr.d2u2.raw();
    for (std::int64_t p = 0; p < m; ++p) out[p] = a[p] * d[p] - b[p] * c[p];
    return ju;
}

EnergyReport energy(const VectorField& u, double eps, SpectralWorkspace& ws) { return energy_impl(u, eps, ws); }

EnergyReport energy(const VectorField& u, double eps) {
    SpectralWorkspace ws(u.grid());
    return energy_impl(u, eps, ws);
}

ScalarField jacobian(const VectorField& u, SpectralWorkspace& ws) { return jacobian_impl(u, ws); }

ScalarField jacobian(const VectorField& u) {
    SpectralWorkspace ws(u.grid());
    return jacobian_impl(u, ws);
}

double integral(const ScalarField& f) { return mean(f.raw()); }

double bump_profile(double rho, double radius) {
    const double half = 0.5 * radius;
    if (rho <= half) return 1.0;
    if (rho >= radius) return 0.0;
    const double s = (rho - half) / half;
    const double step = s * s * s * (10.0 + s * (-15.0 + 6.0 * s));  // quintic smoothstep, C^2
    return 1.0 - step;
}

double pair_with_bump(const ScalarField& ju, Vec2 center, double radius) {
    if (!(radius > 0.0) || !(radius < 0.5))
        throw std::invalid_argument("pair_with_bump: radius must lie in (0, 1/2), got " +
                                    std::to_string(radius));
    const int n = ju.n();
    const double h = ju.grid().spacing();
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double rho = torus_dist({i * h, j * h}, center);
            if (rho >= radius) continue;
            acc += bump_profile(rho, radius) * ju.at(i, j);
        }
    }
    return acc / static_cast<double>(ju.grid().nodes());
}

std::vector<double> pair_all(const ScalarField& ju, const VortexSet& zeros, double radius) {
    if (zeros.zs.empty()) return {};
    const double minsep = zeros.zs.size() >= 2 ? zeros.min_separation() : 0.5;
    if (radius <= 0.0) radius = minsep / 3.0;
    if (radius >= 0.5 * minsep)
        throw std::invalid_argument("pair_all: bumps of radius " + std::to_string(radius) +
                                    " overlap across zeros separated by " + std::to_string(minsep));
    std::vector<double> out;
    for (const auto& z : zeros.zs) out.push_back(pair_with_bump(ju, z.pos, radius));
    return out;
}

ScalingFit fit_log_scaling(std::span<const double> eps, std::span<const double> E) {
    if (eps.size() != E.size() || eps.size() < 3)
        throw std::invalid_argument("fit_log_scaling: need >= 3 (eps, E) pairs");
    const auto n = eps.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(eps[i] > 0.0) || eps[i] >= 1.0)
            throw std::invalid_argument("fit_log_scaling: eps values must lie in (0,1)");
        const double x = std::log(1.0 / eps[i]);
        sx += x;
        sy += E[i];
        sxx += x * x;
        sxy += x * E[i];
    }
    const double den = n * sxx - sx * sx;
    if (std::abs(den) < 1e-12 * n * sxx)
        throw std::invalid_argument("fit_log_scaling: eps values must be distinct");
    ScalingFit fit;
    fit.slope = (n * sxy - sx * sy) / den;
    fit.intercept = (sy - fit.slope * sx) / n;
    for (std::size_t i = 0; i < n; ++i) {
        const double pred = fit.slope * std::log(1.0 / eps[i]) + fit.intercept;
        const double rel = std::abs(pred - E[i]) / std::max(std::abs(E[i]), 1e-300);
        fit.rel_residuals.push_back(rel);
        fit.max_rel_residual = std::max(fit.max_rel_residual, rel);
    }
    return fit;
}

VectorField first_variation(const VectorField& u, double eps, SpectralWorkspace& ws) {
    VectorField lap(u.grid());
    ws.laplacian(u, lap);
    VectorField out(u.grid());
    const auto m = u.grid().nodes();
    const double inv_eps2 = 1.0 / (eps * eps);
    for (int c = 0; c < 2; ++c) {
        auto o = out.comp(c);
        const auto l = lap.comp(c);
        const auto uc = u.comp(c);
        const auto u1 = u.comp(0), u2 = u.comp(1);
        for (std::int64_t p = 0; p < m; ++p) {
            const double q = 1.0 - (u1[p] * u1[p] + u2[p] * u2[p]);
            o[p] = -2.0 * l[p] - inv_eps2 * q * uc[p];
        }
    }
    return out;
}

VectorField pde_rhs(const VectorField& u, double eps, SpectralWorkspace& ws) {
    VectorField lap(u.grid());
    ws.laplacian(u, lap);
    VectorField out(u.grid());
    const auto m = u.grid().nodes();
    for (int c = 0; c < 2; ++c) {
        auto o = out.comp(c);
        const auto l = lap.comp(c);
        const auto uc = u.comp(c);
        const auto u1 = u.comp(0), u2 = u.comp(1);
        for (std::int64_t p = 0; p < m; ++p) {
            const double q = 1.0 - (u1[p] * u1[p] + u2[p] * u2[p]);
            o[p] = eps * eps * l[p] + q * uc[p];
        }
    }
    return out;
}

double l2_pairing(const VectorField& f, const VectorField& g) {
    if (f.grid().n != g.grid().n) throw std::invalid_argument("l2_pairing: grid mismatch");
    double acc = 0.0;
    const auto a = f.raw(), b = g.raw();
    for (std::size_t p = 0; p < a.size(); ++p) acc += a[p] * b[p];
    return acc / static_cast<double>(f.grid().nodes());
}

}  // namespace glf
