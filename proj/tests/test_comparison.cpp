#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "glf/comparison.hpp"
#include "glf/initial_data.hpp"
#include "glf/integrator.hpp"

using namespace glf;

TEST_CASE("envelope formulas at frozen points") {
    CHECK(envelope_h(1.0, 0.05) == doctest::Approx(0.017177218549253977).epsilon(1e-14));
    CHECK(grad_envelope_h(1.0, 0.05) == doctest::Approx(0.12638291121558573).epsilon(1e-14));
    CHECK(envelope_h(0.0, 0.1) == 0.0);
    CHECK(grad_envelope_h(0.0, 0.1) == 0.0);
}

TEST_CASE("comparison vanishes identically for constant data") {
    VectorField u0{GridSpec{32}};
    for (int i = 0; i < 32; ++i)
        for (int j = 0; j < 32; ++j) {
            u0.at(0, i, j) = 0.4;
            u0.at(1, i, j) = -0.3;
        }
    ComparisonBuilder cb(u0, 0.2);
    // evolve exactly: constants follow the reaction flow
    VectorField ut{GridSpec{32}};
    const Vec2 y = phi(0.5, {0.4, -0.3});
    for (int i = 0; i < 32; ++i)
        for (int j = 0; j < 32; ++j) {
            ut.at(0, i, j) = y.x;
            ut.at(1, i, j) = y.y;
        }
    const ComparisonState cs = cb.at(0.5, ut, true);
    CHECK(cs.sup_et_w == 0.0);  // v is computed by the same closed form
    CHECK(cs.r_sup == 0.0);     // grad g = 0
    CHECK(cs.r_majorant == 0.0);
    CHECK(cs.sup_grad_w == 0.0);
    REQUIRE(cs.g.has_value());
    CHECK(cs.g->at(0, 3, 4) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(cs.v->at(1, 7, 9) == doctest::Approx(y.y).epsilon(1e-15));
}

TEST_CASE("retained fields satisfy the defining identities") {
    DatumSpec spec;
    spec.kind = DatumKind::product_sine;
    const MadeDatum d = make_datum(spec, GridSpec{48}, 0.25);
    FlowParams p;
    p.eps = 0.25;
    p.n = 48;
    p.dt = 0.25 / 48;
    p.c0 = 1.0;
    p.t_end = 0.12;
    const FlowState end = run(d.u0, p, ObservationPlan{}, [](const FlowState&, bool) {});

    ComparisonBuilder cb(d.u0, 0.25);
    const ComparisonState cs = cb.at(end.t, end.u, true);
    REQUIRE(cs.g.has_value());
    REQUIRE(cs.v.has_value());
    REQUIRE(cs.et_w.has_value());

    // g is the heat flow of u0
    SpectralWorkspace ws{GridSpec{48}};
    VectorField g2{GridSpec{48}};
    ws.heat(d.u0, end.t, 0.25, g2);
    CHECK(*cs.g == g2);

    // v = phi(t, g), et_w = u - v, w = e^{-t} et_w
    double worst_v = 0, worst_w = 0;
    const VectorField w = cs.w();
    for (int i = 0; i < 48; ++i)
        for (int j = 0; j < 48; ++j) {
            const Vec2 vv = phi(end.t, {cs.g->at(0, i, j), cs.g->at(1, i, j)});
            worst_v = std::max(worst_v, std::abs(cs.v->at(0, i, j) - vv.x));
            worst_v = std::max(worst_v, std::abs(cs.v->at(1, i, j) - vv.y));
            for (int c = 0; c < 2; ++c) {
                CHECK(cs.et_w->at(c, i, j) == end.u.at(c, i, j) - cs.v->at(c, i, j));
                worst_w = std::max(worst_w, std::abs(w.at(c, i, j) -
                                                     std::exp(-end.t) * cs.et_w->at(c, i, j)));
            }
        }
    CHECK(worst_v < 1e-14);
    CHECK(worst_w < 1e-16);

    // residual majorant controls the residual sup with the bilinear constant
    CHECK(cs.r_sup > 0.0);
    CHECK(cs.r_sup <= 2.0 * std::sqrt(3.0) * cs.r_majorant * (1 + 1e-12));
}

TEST_CASE("defect stays within a moderate multiple of the envelope along a flow") {
    DatumSpec spec;
    spec.kind = DatumKind::product_sine;
    const MadeDatum d = make_datum(spec, GridSpec{40}, 0.2);
    FlowParams p;
    p.eps = 0.2;
    p.n = 40;
    p.dt = 0.2 / 40;
    p.c0 = 1.0;
    p.t_end = 0.37;
    ComparisonBuilder cb(d.u0, 0.2);
    std::vector<double> ts, fs, gs;
    ObservationPlan plan;
    plan.cadence = 8;
    run(d.u0, p, plan, [&](const FlowState& s, bool) {
        if (s.t <= 0.0) return;
        const ComparisonState cs = cb.at(s.t, s.u);
        ts.push_back(s.t);
        fs.push_back(cs.sup_et_w);
        gs.push_back(cs.sup_grad_w);
    });
    REQUIRE(ts.size() >= 3);
    const EnvelopeFit fit = fit_envelope(ts, fs, 0.2);
    const EnvelopeFit gfit = fit_envelope(ts, gs, 0.2, &grad_envelope_h);
    CHECK(fit.a_fit > 0.0);
    CHECK(fit.a_fit < 30.0);  // moderate amplitude, not a blowup
    CHECK(gfit.a_fit > 0.0);
    CHECK(gfit.a_fit < 60.0);
    CHECK(fit.samples.size() == ts.size());
}

TEST_CASE("fit_envelope recovers a planted amplitude") {
    std::vector<double> ts, vals;
    for (int k = 1; k <= 20; ++k) {
        const double t = 0.05 * k;
        ts.push_back(t);
        vals.push_back(3.75 * envelope_h(t, 0.1));
    }
    vals[7] = 4.5 * envelope_h(ts[7], 0.1);  // one excursion defines the max
    const EnvelopeFit fit = fit_envelope(ts, vals, 0.1);
    CHECK(fit.a_fit == doctest::Approx(4.5).epsilon(1e-12));
    CHECK(fit.t_argmax == doctest::Approx(ts[7]).epsilon(1e-12));
}

TEST_CASE("gronwall: comfortable instance validates with margin") {
    GronwallInstance inst;
    inst.c = 1.0;
    // stay inside the horizon where the envelope integral is small; for
    // eps = 0.05 the hypothesis genuinely fails past t ~ 2.5
    for (int k = 1; k <= 30; ++k) {
        const double t = 0.05 * k;
        inst.t.push_back(t);
        inst.h.push_back(envelope_h(t, 0.05));
        inst.f.push_back(0.5 * envelope_h(t, 0.05));
    }
    inst.T = inst.t.back();
    const GronwallVerdict v = gronwall_verify(inst);
    CHECK(v.hyp_integral);
    CHECK(v.hyp_limsup);
    CHECK(v.hyp_implicit);
    CHECK(v.hypothesis());
    CHECK(v.conclusion);
    CHECK(v.validated);
    CHECK(v.margin == doctest::Approx(1.5).epsilon(1e-9));
}

TEST_CASE("gronwall: conclusion-violating data always violates a hypothesis too") {
    GronwallInstance inst;
    inst.c = 1.0;
    for (int k = 1; k <= 40; ++k) {
        const double t = 0.05 * k;
        inst.t.push_back(t);
        inst.h.push_back(envelope_h(t, 0.05));
        inst.f.push_back(3.0 * envelope_h(t, 0.05));  // f = 3h > 2h
    }
    inst.T = inst.t.back();
    const GronwallVerdict v = gronwall_verify(inst);
    CHECK(!v.conclusion);
    CHECK(!v.hypothesis());  // limsup 3 > 1.05
    CHECK(v.validated);      // vacuous
}

TEST_CASE("gronwall: jump violating the implicit inequality is caught") {
    GronwallInstance inst;
    inst.c = 1.0;
    for (int k = 1; k <= 40; ++k) {
        const double t = 0.05 * k;
        inst.t.push_back(t);
        inst.h.push_back(1e-6);
        inst.f.push_back(1.0);  // f >> c int e f^2 + h near t = 0
    }
    inst.T = inst.t.back();
    const GronwallVerdict v = gronwall_verify(inst);
    CHECK(!v.hyp_implicit);
    CHECK(!v.conclusion);
    CHECK(v.validated);
}

TEST_CASE("gronwall: leading-interval sliver is counted against the integral hypothesis") {
    // Two samples late on the axis: the flat continuation on [0, t0) is
    // included in the hypothesis integral (conservative), so a large h fails
    // even though the inter-sample contribution alone would not.
    auto make = [](double H) {
        GronwallInstance inst;
        inst.c = 1.0;
        inst.t = {0.5, 0.55, 0.6};
        inst.h = {H, H, H};
        inst.f = {0.5 * H, 0.5 * H, 0.5 * H};
        inst.T = 0.6;
        return inst;
    };
    const GronwallVerdict big = gronwall_verify(make(0.3));
    CHECK(!big.hyp_integral);
    CHECK(big.hyp_implicit);  // sliver is excluded on the strict side
    CHECK(big.validated);
    const GronwallVerdict small = gronwall_verify(make(0.05));
    CHECK(small.hyp_integral);
    CHECK(small.validated);
    CHECK(small.hypothesis());
}

TEST_CASE("gronwall: property sweep never falsifies the lemma") {
    std::mt19937 rng(2026);
    std::uniform_real_distribution<double> beta(0.0, 1.3), amp(0.5, 2.0), eps_d(0.02, 0.2),
        cc(0.5, 4.0);
    int nontrivial = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const double b = beta(rng), A = amp(rng), e = eps_d(rng), c = cc(rng);
        GronwallInstance inst;
        inst.c = c;
        const double T = 0.5 + (trial % 7) * 0.25;
        for (int k = 1; k <= 50; ++k) {
            const double t = T * k / 50.0;
            inst.t.push_back(t);
            inst.h.push_back(A * envelope_h(t, e));
            inst.f.push_back(b * A * envelope_h(t, e));
        }
        inst.T = T;
        const GronwallVerdict v = gronwall_verify(inst);
        CHECK(v.validated);
        if (v.hypothesis()) ++nontrivial;
    }
    CHECK(nontrivial > 50);  // the sweep exercises the non-vacuous branch too
}

TEST_CASE("gronwall: Picard fixed points satisfy the implicit inequality and validate") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> amp(0.5, 1.5), eps_d(0.02, 0.1);
    for (int trial = 0; trial < 30; ++trial) {
        const double A = amp(rng), e = eps_d(rng);
        GronwallInstance inst;
        inst.c = 1.0;
        const int m = 60;
        const double T = 1.5;
        for (int k = 1; k <= m; ++k) {
            const double t = T * k / m;
            inst.t.push_back(t);
            inst.h.push_back(A * envelope_h(t, e));
        }
        inst.T = T;
        // iterate f <- c int_0^t e^{t-s} f^2 ds + h on the sample grid
        inst.f = inst.h;
        for (int it = 0; it < 60; ++it) {
            std::vector<double> nf(m);
            for (int i = 0; i < m; ++i) {
                double acc = 0.0;
                for (int j = 0; j + 1 <= i; ++j) {
                    const double dt = inst.t[j + 1] - inst.t[j];
                    const double a = std::exp(inst.t[i] - inst.t[j]) * inst.f[j] * inst.f[j];
                    const double b = std::exp(inst.t[i] - inst.t[j + 1]) * inst.f[j + 1] * inst.f[j + 1];
                    acc += 0.5 * dt * (a + b);
                }
                nf[i] = inst.c * acc + inst.h[i];
            }
            inst.f = nf;
        }
        const GronwallVerdict v = gronwall_verify(inst);
        CHECK(v.validated);
        CHECK(v.hyp_implicit);
    }
}

TEST_CASE("monotone bound: closed forms and failure modes") {
    // constant h: integral = h (e^T - 1)
    const MonotoneBound a = monotone_gronwall_bound([](double) { return 0.01; }, 1.0, 1.0);
    CHECK(a.integral == doctest::Approx(0.01 * (std::exp(1.0) - 1.0)).epsilon(1e-6));
    CHECK(a.threshold == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(a.holds);
    CHECK(a.margin == doctest::Approx(0.125 / a.integral).epsilon(1e-9));
    const MonotoneBound b = monotone_gronwall_bound([](double) { return 0.1; }, 1.0, 1.0);
    CHECK(!b.holds);
    CHECK_THROWS(monotone_gronwall_bound([](double t) { return 1.0 - t; }, 1.0, 1.0));  // decreasing
}

TEST_CASE("closed-form defect instance: frozen margin and domain") {
    const MonotoneBound mb = defect_estimate_bound(0.02, 1.0);
    CHECK(mb.holds);
    CHECK(mb.margin == doctest::Approx(58.28824995680019).epsilon(1e-9));
    CHECK(mb.margin >= 2.0);
    CHECK_THROWS(defect_estimate_bound(0.2, 1.0));   // T <= 0 at A = 1
    CHECK_THROWS(defect_estimate_bound(0.02, 0.5));  // requires A >= 1
}

TEST_CASE("build_comparison convenience wrapper agrees with the builder") {
    DatumSpec spec;
    spec.kind = DatumKind::product_sine;
    const MadeDatum d = make_datum(spec, GridSpec{32}, 0.25);
    VectorField ut{GridSpec{32}};
    SpectralWorkspace ws{GridSpec{32}};
    ws.heat(d.u0, 0.2, 0.25, ut);  // any state works; use the heat flow itself
    const ComparisonState a = build_comparison(d.u0, ut, 0.2, 0.25);
    ComparisonBuilder cb(d.u0, 0.25);
    const ComparisonState b = cb.at(0.2, ut);
    CHECK(a.sup_et_w == b.sup_et_w);
    CHECK(a.sup_grad_w == b.sup_grad_w);
    CHECK(a.r_sup == b.r_sup);
    CHECK(a.r_majorant == b.r_majorant);
}
