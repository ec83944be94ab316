#include "glf/initial_data.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "glf/diagnostics.hpp"
#include "glf/spectral.hpp"

namespace glf {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

VectorField make_constant(GridSpec grid, Vec2 c) {
    VectorField u(grid);
    std::fill(u.comp(0).begin(), u.comp(0).end(), c.x);
    std::fill(u.comp(1).begin(), u.comp(1).end(), c.y);
    return u;
}

VectorField make_product_sine(GridSpec grid) {
    VectorField u(grid);
    const int n = grid.n;
    for (int i = 0; i < n; ++i) {
        const double s1 = std::sin(two_pi * i / n);
        for (int j = 0; j < n; ++j) {
            u.at(0, i, j) = s1;
            u.at(1, i, j) = std::sin(two_pi * j / n);
        }
    }
    return u;
}

VectorField make_zero_free_winding(GridSpec grid) {
    VectorField u(grid);
    const int n = grid.n;
    for (int i = 0; i < n; ++i) {
        const double c = std::cos(two_pi * i / n), s = std::sin(two_pi * i / n);
        for (int j = 0; j < n; ++j) {
            u.at(0, i, j) = c;
            u.at(1, i, j) = s;
        }
    }
    return u;
}

double smooth_cutoff(double rho, double r1, double r2) {
    if (rho <= r1) return 1.0;
    if (rho >= r2) return 0.0;
    const double s = (rho - r1) / (r2 - r1);
    return 1.0 - s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

// Local degree-+1 profile around the origin of displacement coordinates:
// modulus |d|/sqrt(|d|^2 + lambda^2), phase of d.
std::complex<double> core_profile(Vec2 d, double lambda) {
    const double denom = std::sqrt(d.norm2() + lambda * lambda);
    return {d.x / denom, d.y / denom};
}

struct Dipole {
    Vec2 plus, minus, mid;
    double r1 = 0.0, r2 = 0.0;
};

VectorField make_prescribed(GridSpec grid, const std::vector<PrescribedVortex>& vs, double lambda) {
    if (vs.size() < 2) throw std::invalid_argument("prescribed_vortices: need at least one +1/-1 pair");
    int total = 0;
    for (const auto& v : vs) {
        if (v.degree != 1 && v.degree != -1)
            throw std::invalid_argument("prescribed_vortices: degrees must be +1 or -1");
        total += v.degree;
    }
    if (total != 0)
        throw std::invalid_argument(
            "prescribed_vortices: degrees must sum to 0 (the torus admits no nonvanishing "
            "field of nonzero total degree)");
    if (!(lambda > 0.0) || lambda >= 0.25)
        throw std::invalid_argument("prescribed_vortices: core width must lie in (0, 0.25)");
    for (std::size_t a = 0; a < vs.size(); ++a)
        for (std::size_t b = a + 1; b < vs.size(); ++b)
            if (torus_dist(vs[a].pos, vs[b].pos) < 2.0 * lambda)
                throw std::invalid_argument(
                    "prescribed_vortices: vortices closer than twice the core width");

    // Greedy dipole matching: each +1 takes the nearest unclaimed -1.
    std::vector<std::size_t> plus, minus;
    for (std::size_t a = 0; a < vs.size(); ++a) (vs[a].degree == 1 ? plus : minus).push_back(a);
    std::vector<bool> used(vs.size(), false);
    std::vector<Dipole> dipoles;
    for (std::size_t p : plus) {
        std::size_t best = vs.size();
        double best_d = 1e300;
        for (std::size_t m : minus) {
            if (used[m]) continue;
            const double d = torus_dist(vs[p].pos, vs[m].pos);
            if (d < best_d) {
                best_d = d;
                best = m;
            }
        }
        used[best] = true;
        Dipole dp;
        dp.plus = vs[p].pos;
        dp.minus = vs[best].pos;
        const Vec2 half = 0.5 * torus_displacement(dp.plus, dp.minus);
        dp.mid = {dp.minus.x + half.x, dp.minus.y + half.y};
        const double sep = best_d;
        // eta == 1 out to r1 (covers both cores), 0 beyond r2; r2 + sep/2 < 1/2
        // keeps the whole support clear of both vortices' cut loci.
        dp.r1 = 0.5 * sep + 3.0 * lambda;
        dp.r2 = std::min(0.48 - 0.5 * sep, dp.r1 + 0.15 + sep);
        if (dp.r2 <= dp.r1 + 0.02)
            throw std::invalid_argument(
                "prescribed_vortices: dipole separation " + std::to_string(sep) +
                " leaves no room for a periodic cutoff (reduce separations or core width)");
        dipoles.push_back(dp);
    }

    VectorField u(grid);
    const int n = grid.n;
    const double h = grid.spacing();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const Vec2 x{i * h, j * h};
            std::complex<double> f{1.0, 0.0};
            for (const auto& dp : dipoles) {
                const double rho = torus_dist(x, dp.mid);
                if (rho >= dp.r2) continue;
                const double eta = smooth_cutoff(rho, dp.r1, dp.r2);
                const std::complex<double> d =
                    core_profile(torus_displacement(x, dp.plus), lambda) *
                    std::conj(core_profile(torus_displacement(x, dp.minus), lambda));
                f *= 1.0 + eta * (d - 1.0);
            }
            u.at(0, i, j) = f.real();
            u.at(1, i, j) = f.imag();
        }
    }
    return u;
}

void cross_check_prescribed(const std::vector<PrescribedVortex>& vs, const InitialDataCertificate& cert,
                            GridSpec grid) {
    if (cert.zeros.zs.size() != vs.size())
        throw std::runtime_error("prescribed_vortices: detected " +
                                 std::to_string(cert.zeros.zs.size()) + " zeros, prescribed " +
                                 std::to_string(vs.size()));
    const double tol = 3.0 * grid.spacing();
    for (const auto& v : vs) {
        double best = 1e300;
        const Vortex* hit = nullptr;
        for (const auto& z : cert.zeros.zs) {
            const double d = torus_dist(z.pos, v.pos);
            if (d < best) {
                best = d;
                hit = &z;
            }
        }
        if (best > tol)
            throw std::runtime_error("prescribed_vortices: no detected zero within 3 cells of (" +
                                     std::to_string(v.pos.x) + ", " + std::to_string(v.pos.y) + ")");
        if (hit->degree != v.degree)
            throw std::runtime_error("prescribed_vortices: degree mismatch at (" +
                                     std::to_string(v.pos.x) + ", " + std::to_string(v.pos.y) +
                                     "): detected " + std::to_string(hit->degree) + ", prescribed " +
                                     std::to_string(v.degree));
    }
}

// Band-limited noise: per component, `modes` cosines with integer wavenumbers
// |k| in [n/8, n/4], unit-variance normalization.  Deterministic in the seed.
VectorField draw_noise(GridSpec grid, int modes, std::uint64_t seed) {
    if (modes < 1) throw std::invalid_argument("random_fourier_highenergy: noise_modes must be >= 1");
    const int n = grid.n;
    const double lo = n / 8.0, hi = n / 4.0;
    const int kmax = static_cast<int>(std::floor(hi));
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(-kmax, kmax);
    std::uniform_real_distribution<double> phase(0.0, two_pi);
    std::normal_distribution<double> amp(0.0, 1.0);

    VectorField noise(grid);
    const double norm = 1.0 / std::sqrt(0.5 * modes);
    for (int c = 0; c < 2; ++c) {
        auto plane = noise.comp(c);
        for (int m = 0; m < modes; ++m) {
            int k1 = 0, k2 = 0;
            for (;;) {
                k1 = pick(rng);
                k2 = pick(rng);
                const double kk = std::sqrt(double(k1) * k1 + double(k2) * k2);
                if (kk >= lo && kk <= hi) break;
            }
            const double ph = phase(rng);
            const double a = amp(rng) * norm;
            for (int i = 0; i < n; ++i) {
                const double row = two_pi * k1 * i / n + ph;
                const double col = two_pi * k2 / n;
                for (int j = 0; j < n; ++j)
                    plane[static_cast<std::size_t>(i) * n + j] += a * std::cos(row + col * j);
            }
        }
    }
    return noise;
}

// E_eps(base + s * noise) is an exact quartic in s: the Dirichlet part is
// quadratic (Parseval), the potential integrand is (q0 + q1 s + q2 s^2)^2
// with q0 = 1-|b|^2, q1 = -2<b,n>, q2 = -|n|^2.
struct EnergyPoly {
    double e[5] = {0, 0, 0, 0, 0};
    double operator()(double s) const {
        return e[0] + s * (e[1] + s * (e[2] + s * (e[3] + s * e[4])));
    }
};

EnergyPoly energy_polynomial(const VectorField& b, const VectorField& nz, double eps,
                             SpectralWorkspace& ws) {
    GradientField gb, gn;
    ws.gradient(b, gb);
    ws.gradient(nz, gn);
    const auto m = b.grid().nodes();
    EnergyPoly P;
    double dbb = 0, dbn = 0, dnn = 0;
    double p0 = 0, p1 = 0, p2 = 0, p3 = 0, p4 = 0;
    const auto b1 = b.comp(0), b2 = b.comp(1), n1 = nz.comp(0), n2 = nz.comp(1);
    const double* gbs[4] = {gb.d1u1.raw().data(), gb.d2u1.raw().data(), gb.d1u2.raw().data(),
                            gb.d2u2.raw().data()};
    const double* gns[4] = {gn.d1u1.raw().data(), gn.d2u1.raw().data(), gn.d1u2.raw().data(),
                            gn.d2u2.raw().data()};
    for (std::int64_t p = 0; p < m; ++p) {
        for (int q = 0; q < 4; ++q) {
            dbb += gbs[q][p] * gbs[q][p];
            dbn += gbs[q][p] * gns[q][p];
            dnn += gns[q][p] * gns[q][p];
        }
        const double q0 = 1.0 - (b1[p] * b1[p] + b2[p] * b2[p]);
        const double q1 = -2.0 * (b1[p] * n1[p] + b2[p] * n2[p]);
        const double q2 = -(n1[p] * n1[p] + n2[p] * n2[p]);
        p0 += q0 * q0;
        p1 += 2.0 * q0 * q1;
        p2 += q1 * q1 + 2.0 * q0 * q2;
        p3 += 2.0 * q1 * q2;
        p4 += q2 * q2;
    }
    const double inv = 1.0 / static_cast<double>(m);
    const double pf = inv / (4.0 * eps * eps);
    P.e[0] = dbb * inv + p0 * pf;
    P.e[1] = 2.0 * dbn * inv + p1 * pf;
    P.e[2] = dnn * inv + p2 * pf;
    P.e[3] = p3 * pf;
    P.e[4] = p4 * pf;
    return P;
}

double solve_for_amplitude(const EnergyPoly& P, double target) {
    if (P(0.0) >= target) return 0.0;
    double hi = 1e-3;
    int guard = 0;
    while (P(hi) < target) {
        hi *= 2.0;
        if (++guard > 80)
            throw std::runtime_error("random_fourier_highenergy: energy target unreachable");
    }
    double lo = 0.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (P(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

MadeDatum make_random_highenergy(const DatumSpec& spec, GridSpec grid, double eps);

MadeDatum make_certified(const DatumSpec& spec, GridSpec grid, double eps) {
    grid.require_valid();
    if (!(eps > 0.0)) throw std::invalid_argument("make_datum: eps must be positive");

    if (spec.kind == DatumKind::random_fourier_highenergy)
        return make_random_highenergy(spec, grid, eps);

    VectorField u;
    switch (spec.kind) {
        case DatumKind::constant:
            u = make_constant(grid, spec.constant_value);
            break;
        case DatumKind::product_sine:
            u = make_product_sine(grid);
            break;
        case DatumKind::zero_free_winding:
            u = make_zero_free_winding(grid);
            break;
        case DatumKind::prescribed_vortices:
            u = make_prescribed(grid, spec.vortices.empty() ? standard_four_vortices() : spec.vortices,
                                spec.core_width);
            break;
        default:
            throw std::invalid_argument("make_datum: unknown kind");
    }

    MadeDatum md;
    md.cert = certify_initial_data(u);
    if (!md.cert.pass)
        throw std::runtime_error("make_datum: certification failed, alpha0 = " +
                                 std::to_string(md.cert.alpha0) + " < 1e-3");
    if (spec.kind == DatumKind::prescribed_vortices)
        cross_check_prescribed(spec.vortices.empty() ? standard_four_vortices() : spec.vortices,
                               md.cert, grid);
    md.achieved_energy = energy(u, eps).total();
    md.u0 = std::move(u);
    return md;
}

MadeDatum make_random_highenergy(const DatumSpec& spec, GridSpec grid, double eps) {
    if (spec.base_kind == DatumKind::random_fourier_highenergy)
        throw std::invalid_argument("random_fourier_highenergy: base kind cannot be random itself");
    if (!(spec.energy_target > 0.0))
        throw std::invalid_argument("random_fourier_highenergy: energy_target must be positive");

    DatumSpec base_spec = spec;
    base_spec.kind = spec.base_kind;
    MadeDatum base = make_certified(base_spec, grid, eps);

    const VectorField noise = draw_noise(grid, spec.noise_modes, spec.seed);
    SpectralWorkspace ws(grid);
    const EnergyPoly P = energy_polynomial(base.u0, noise, eps, ws);
    const double s0 = solve_for_amplitude(P, spec.energy_target);

    double last_alpha0 = 0.0;
    for (int attempt = 0; attempt <= 10; ++attempt) {
        const double s = s0 * std::pow(0.7, attempt);
        VectorField u = base.u0;
        for (std::size_t p = 0; p < u.raw().size(); ++p) u.raw()[p] += s * noise.raw()[p];
        InitialDataCertificate cert = certify_initial_data(u, ws);
        last_alpha0 = cert.alpha0;
        // The noise must not alter the base's topology: same zero count and
        // total degree, or the datum no longer means what its spec says.
        const bool topology_kept = cert.zeros.zs.size() == base.cert.zeros.zs.size() &&
                                   cert.zeros.total_degree() == base.cert.zeros.total_degree() &&
                                   !cert.zeros.suspect;
        if (cert.pass && topology_kept) {
            MadeDatum md;
            md.cert = std::move(cert);
            md.achieved_energy = energy(u, eps, ws).total();
            md.u0 = std::move(u);
            md.retries = attempt;
            return md;
        }
    }
    throw std::runtime_error(
        "random_fourier_highenergy: certification failed after 10 amplitude reductions, "
        "last alpha0 = " +
        std::to_string(last_alpha0));
}

}  // namespace

std::vector<PrescribedVortex> standard_four_vortices() {
    return {{{0.28, 0.30}, +1}, {{0.42, 0.34}, -1}, {{0.70, 0.72}, -1}, {{0.80, 0.64}, +1}};
}

MadeDatum make_datum(const DatumSpec& spec, GridSpec grid, double eps) {
    return make_certified(spec, grid, eps);
}

}  // namespace glf
