#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>

#include "glf/grid.hpp"
#include "glf/spectral.hpp"

using namespace glf;
using std::numbers::pi;

namespace {

VectorField random_band_field(int n, unsigned seed) {
    // Smooth random field from a handful of low modes.
    VectorField u{GridSpec{n}};
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> amp(-1.0, 1.0);
    struct Mode {
        int k1, k2;
        double a1, b1, a2, b2;
    };
    std::vector<Mode> modes;
    for (int m = 0; m < 6; ++m)
        modes.push_back({m % 4 - 2, (m * 7) % 5 - 2, amp(rng), amp(rng), amp(rng), amp(rng)});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double x = static_cast<double>(i) / n, y = static_cast<double>(j) / n;
            double v1 = 0, v2 = 0;
            for (const auto& m : modes) {
                const double ph = 2.0 * pi * (m.k1 * x + m.k2 * y);
                v1 += m.a1 * std::cos(ph) + m.b1 * std::sin(ph);
                v2 += m.a2 * std::cos(ph) + m.b2 * std::sin(ph);
            }
            u.at(0, i, j) = v1;
            u.at(1, i, j) = v2;
        }
    return u;
}

double max_abs_diff(const VectorField& a, const VectorField& b) {
    double d = 0;
    const auto pa = a.raw();
    const auto pb = b.raw();
    for (std::int64_t p = 0; p < 2 * a.grid().nodes(); ++p)
        d = std::max(d, std::abs(pa[p] - pb[p]));
    return d;
}

}  // namespace

TEST_CASE("grid invariants and wavenumbers") {
    CHECK_THROWS(GridSpec{15}.require_valid());
    CHECK_THROWS(VectorField{GridSpec{14}});
    CHECK_THROWS(GridSpec{0}.require_valid());
    CHECK(!GridSpec{15}.valid());
    CHECK(GridSpec{16}.valid());
    const GridSpec g{16};
    CHECK(g.spacing() == doctest::Approx(1.0 / 16).epsilon(1e-15));
    CHECK(g.nodes() == 256);
    CHECK(signed_wavenumber(0, 16) == 0);
    CHECK(signed_wavenumber(7, 16) == 7);
    CHECK(signed_wavenumber(8, 16) == -8);
    CHECK(signed_wavenumber(15, 16) == -1);
}

TEST_CASE("field storage layout and reductions") {
    VectorField u{GridSpec{16}};
    u.at(0, 3, 5) = 2.0;
    u.at(1, 3, 5) = -1.0;
    CHECK(u.comp(0)[3 * 16 + 5] == 2.0);
    CHECK(u.comp(1)[3 * 16 + 5] == -1.0);
    CHECK(sup_norm(u) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-15));
    CHECK(min_modulus(u) == 0.0);
    CHECK(mean(u.comp(0)) == doctest::Approx(2.0 / 256).epsilon(1e-12));
    CHECK(u.all_finite());
    u.at(0, 0, 0) = std::nan("");
    CHECK(!u.all_finite());
}

TEST_CASE("snapshot files round-trip bitwise") {
    const VectorField u = random_band_field(32, 7);
    const auto path = std::filesystem::temp_directory_path() / "glf_test_snap.glf";
    write_snapshot(path.string(), u, 0.625, 0.125);
    const Snapshot s = read_snapshot(path.string());
    CHECK(s.t == 0.625);
    CHECK(s.eps == 0.125);
    CHECK(s.u == u);
    std::filesystem::remove(path);
}

TEST_CASE("heat semigroup damps a single mode by the exact factor") {
    const int n = 32;
    VectorField u{GridSpec{n}};
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) u.at(0, i, j) = std::cos(2.0 * pi * i / n);
    SpectralWorkspace ws{GridSpec{n}};
    VectorField out{GridSpec{n}};
    // eps = 0.5, tau = 0.1: exponent 4 pi^2 (1/4)(1/10) = pi^2/10.
    ws.heat(u, 0.1, 0.5, out);
    const double factor = 0.37270783885343794;
    double worst = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            worst = std::max(worst,
                             std::abs(out.at(0, i, j) - factor * std::cos(2.0 * pi * i / n)));
            worst = std::max(worst, std::abs(out.at(1, i, j)));
        }
    CHECK(worst < 1e-12);
}

TEST_CASE("heat factor for a mixed mode |k|^2 = 34") {
    const int n = 48;
    VectorField u{GridSpec{n}};
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double ph = 2.0 * pi * (3.0 * i - 5.0 * j) / n;
            u.at(0, i, j) = std::sin(ph);
            u.at(1, i, j) = 0.25 * std::cos(ph);
        }
    SpectralWorkspace ws{GridSpec{n}};
    VectorField out{GridSpec{n}};
    ws.heat(u, 0.05, 0.1, out);
    const double factor = 0.511129089539371;  // exp(-4 pi^2 * 0.01 * 0.05 * 34)
    double worst = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double ph = 2.0 * pi * (3.0 * i - 5.0 * j) / n;
            worst = std::max(worst, std::abs(out.at(0, i, j) - factor * std::sin(ph)));
            worst = std::max(worst, std::abs(out.at(1, i, j) - factor * 0.25 * std::cos(ph)));
        }
    CHECK(worst < 1e-12);
}

TEST_CASE("transform round-trip is the identity") {
    const VectorField u = random_band_field(48, 11);
    SpectralWorkspace ws{GridSpec{48}};
    const SpectralRep rep = ws.forward_transform(u);
    const VectorField back = ws.inverse_transform(rep);
    CHECK(max_abs_diff(u, back) < 1e-13);
}

TEST_CASE("heat is a semigroup and preserves the mean") {
    const VectorField u = random_band_field(32, 3);
    SpectralWorkspace ws{GridSpec{32}};
    VectorField a{GridSpec{32}}, b{GridSpec{32}}, c{GridSpec{32}};
    ws.heat(u, 0.07, 0.3, a);
    ws.heat(a, 0.05, 0.3, b);
    ws.heat(u, 0.12, 0.3, c);
    CHECK(max_abs_diff(b, c) < 1e-13);
    CHECK(mean(c.comp(0)) == doctest::Approx(mean(u.comp(0))).epsilon(1e-12));
    CHECK(mean(c.comp(1)) == doctest::Approx(mean(u.comp(1))).epsilon(1e-12));
    CHECK(sup_norm(c) <= sup_norm(u) + 1e-12);  // max principle
}

TEST_CASE("gradient and laplacian match analytic derivatives") {
    const int n = 64;
    VectorField u{GridSpec{n}};
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double x = static_cast<double>(i) / n, y = static_cast<double>(j) / n;
            u.at(0, i, j) = std::sin(2 * pi * x) * std::cos(6 * pi * y);
            u.at(1, i, j) = std::cos(4 * pi * x);
        }
    SpectralWorkspace ws{GridSpec{n}};
    GradientField g;
    ws.gradient(u, g);
    VectorField lap{GridSpec{n}};
    ws.laplacian(u, lap);
    double worst_g = 0, worst_l = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double x = static_cast<double>(i) / n, y = static_cast<double>(j) / n;
            worst_g = std::max(worst_g, std::abs(g.d1u1.at(i, j) -
                                                 2 * pi * std::cos(2 * pi * x) * std::cos(6 * pi * y)));
            worst_g = std::max(worst_g, std::abs(g.d2u1.at(i, j) +
                                                 6 * pi * std::sin(2 * pi * x) * std::sin(6 * pi * y)));
            worst_g = std::max(worst_g, std::abs(g.d1u2.at(i, j) + 4 * pi * std::sin(4 * pi * x)));
            worst_g = std::max(worst_g, std::abs(g.d2u2.at(i, j)));
            worst_l = std::max(worst_l,
                               std::abs(lap.at(0, i, j) +
                                        (4 + 36) * pi * pi * std::sin(2 * pi * x) *
                                            std::cos(6 * pi * y)));
            worst_l = std::max(worst_l,
                               std::abs(lap.at(1, i, j) + 16 * pi * pi * std::cos(4 * pi * x)));
        }
    CHECK(worst_g < 1e-10);
    CHECK(worst_l < 1e-9);
}

TEST_CASE("Nyquist mode: odd derivative drops it, even derivative keeps it") {
    const int n = 32;
    VectorField u{GridSpec{n}};
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) u.at(0, i, j) = (i % 2 == 0) ? 1.0 : -1.0;
    SpectralWorkspace ws{GridSpec{n}};
    GradientField g;
    ws.gradient(u, g);
    double worst = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) worst = std::max(worst, std::abs(g.d1u1.at(i, j)));
    CHECK(worst < 1e-11);  // first derivative of the unresolved mode is zeroed

    VectorField lap{GridSpec{n}};
    ws.laplacian(u, lap);
    const double expect = -4.0 * pi * pi * (n / 2) * (n / 2);
    double worst_l = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            worst_l = std::max(worst_l, std::abs(lap.at(0, i, j) - expect * u.at(0, i, j)));
    CHECK(worst_l / std::abs(expect) < 1e-12);
}

TEST_CASE("heat_from_coeffs returns the same field and gradient as separate calls") {
    const VectorField u = random_band_field(32, 19);
    SpectralWorkspace ws{GridSpec{32}};
    std::vector<std::complex<double>> zhat;
    ws.forward_packed(u, zhat);
    VectorField g1{GridSpec{32}};
    GradientField dg1;
    ws.heat_from_coeffs(zhat, 0.03, 0.2, g1, &dg1);
    VectorField g2{GridSpec{32}};
    ws.heat(u, 0.03, 0.2, g2);
    GradientField dg2;
    ws.gradient(g2, dg2);
    CHECK(max_abs_diff(g1, g2) < 1e-13);
    double worst = 0;
    for (int i = 0; i < 32; ++i)
        for (int j = 0; j < 32; ++j) {
            worst = std::max(worst, std::abs(dg1.d1u1.at(i, j) - dg2.d1u1.at(i, j)));
            worst = std::max(worst, std::abs(dg1.d2u2.at(i, j) - dg2.d2u2.at(i, j)));
        }
    CHECK(worst < 1e-11);
}
