#include "glf/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "glf/ode_flow.hpp"

namespace glf {

namespace {

// Pointwise closed-form reaction flow over time dt; returns max |u|^2 so the
// marching loop gets its finiteness check for free.
double apply_reaction(VectorField& u, double dt) {
    const double et = std::exp(dt);
    const double m = std::expm1(2.0 * dt);
    auto u1 = u.comp(0), u2 = u.comp(1);
    double worst = 0.0;
    for (std::size_t p = 0; p < u1.size(); ++p) {
        const double r2 = u1[p] * u1[p] + u2[p] * u2[p];
        const double f = phi_factor(et, m, r2);
        u1[p] *= f;
        u2[p] *= f;
        const double r2n = r2 * f * f;
        worst = r2n > worst ? r2n : worst;
    }
    return worst;
}

void check_step_finite(double max_r2, long step) {
    if (!std::isfinite(max_r2))
        throw std::runtime_error("run: non-finite state at step " + std::to_string(step));
}

}  // namespace

int FlowParams::min_nodes(double eps) {
    int n = static_cast<int>(std::ceil(8.0 / eps));
    return n + (n % 2);
}

double FlowParams::dt_cap() const { return std::min(0.05, eps * spacing()); }

double FlowParams::t_epsilon() const {
    const double l = std::log(1.0 / eps);
    return l - 0.5 * std::log(l) - c0;
}

void FlowParams::validate() const {
    GridSpec{n}.require_valid();
    if (!(eps > 0.0) || !(eps < 0.36788))
        throw std::invalid_argument("params: need 0 < eps < 1/e so that ln ln(1/eps) is defined");
    if (n < static_cast<int>(std::ceil(8.0 / eps)))
        throw std::invalid_argument("params: resolution rule n >= ceil(8/eps) violated (n=" +
                                    std::to_string(n) + ", eps=" + std::to_string(eps) + ")");
    if (!(dt > 0.0) || dt > dt_cap() * (1.0 + 1e-12))
        throw std::invalid_argument("params: step rule 0 < dt <= min(0.05, eps*spacing) violated (dt=" +
                                    std::to_string(dt) + ", cap=" + std::to_string(dt_cap()) + ")");
    if (!(t_end >= 0.0)) throw std::invalid_argument("params: t_end must be >= 0");
    if (!(t_epsilon() > 0.0))
        throw std::invalid_argument("params: T_eps = ln(1/eps) - (1/2)ln ln(1/eps) - c0 must be positive, got " +
                                    std::to_string(t_epsilon()));
}

void step_strang(FlowState& s, const FlowParams& params, SpectralWorkspace& ws) {
    ws.heat(s.u, 0.5 * params.dt, params.eps, s.u);
    const double worst = apply_reaction(s.u, params.dt);
    check_step_finite(worst, s.step_count + 1);
    ws.heat(s.u, 0.5 * params.dt, params.eps, s.u);
    s.step_count += 1;
    s.t = static_cast<double>(s.step_count) * params.dt;
}

namespace {

FlowState run_from(FlowState state, const FlowParams& params, const ObservationPlan& plan,
                   const Observer& observe, bool emit_at_start) {
    params.validate();
    if (state.u.grid().n != params.n) throw std::invalid_argument("run: state grid does not match params.n");
    if (!state.u.all_finite()) throw std::invalid_argument("run: non-finite initial data");
    if (plan.cadence < 1) throw std::invalid_argument("run: observation cadence must be >= 1");

    const double dt = params.dt;
    const long K = static_cast<long>(std::floor(params.t_end / dt + 1e-9));
    const long start = state.step_count;
    if (start < 0 || start > K || std::abs(state.t - static_cast<double>(start) * dt) > 1e-9)
        throw std::invalid_argument("run: start state is not on the step grid within [0, t_end]");

    // Specials mapped to their base step (largest full step not after them).
    struct Special {
        long base;
        double t;
    };
    std::vector<Special> specials;
    for (double s : plan.special_times) {
        if (s < -1e-12 || s > params.t_end + 1e-9)
            throw std::invalid_argument("run: special time " + std::to_string(s) + " outside [0, t_end]");
        long base = static_cast<long>(std::floor(s / dt + 1e-9));
        base = std::min(base, K);
        if (base > start || (base == start && emit_at_start)) specials.push_back({base, s});
    }
    std::sort(specials.begin(), specials.end(), [](auto& a, auto& b) { return a.t < b.t; });

    SpectralWorkspace ws(state.u.grid());

    auto emit_specials_at = [&](long step) {
        for (const auto& sp : specials) {
            if (sp.base != step) continue;
            const double delta = sp.t - static_cast<double>(step) * dt;
            if (delta <= 1e-12) {
                FlowState view{sp.t, step, state.u};
                observe(view, true);
            } else {
                FlowState view{0.0, step, state.u};
                ws.heat(view.u, 0.5 * delta, params.eps, view.u);
                check_step_finite(apply_reaction(view.u, delta), step);
                ws.heat(view.u, 0.5 * delta, params.eps, view.u);
                view.t = sp.t;
                observe(view, true);
            }
        }
    };

    if (emit_at_start) {
        observe(state, false);
        emit_specials_at(start);
    }

    // Boundary steps where the physical (un-staggered) state is needed.
    std::vector<long> boundaries;
    for (long b = (start / plan.cadence + 1) * plan.cadence; b < K; b += plan.cadence)
        boundaries.push_back(b);
    for (const auto& sp : specials)
        if (sp.base > start && sp.base < K) boundaries.push_back(sp.base);
    if (K > start) boundaries.push_back(K);
    std::sort(boundaries.begin(), boundaries.end());
    boundaries.erase(std::unique(boundaries.begin(), boundaries.end()), boundaries.end());

    long step = start;
    for (long b : boundaries) {
        // March (b - step) Strang steps with interior half-heats merged:
        // H(dt/2) [phi(dt) H(dt)]^{m-1} phi(dt) H(dt/2)  ==  strang^m  exactly.
        const long steps_here = b - step;
        ws.heat(state.u, 0.5 * dt, params.eps, state.u);
        for (long k = 0; k < steps_here; ++k) {
            check_step_finite(apply_reaction(state.u, dt), step + k + 1);
            const bool last = (k + 1 == steps_here);
            ws.heat(state.u, last ? 0.5 * dt : dt, params.eps, state.u);
        }
        step = b;
        state.step_count = step;
        state.t = static_cast<double>(step) * dt;
        const bool cadence_hit = (step % plan.cadence == 0) || step == K;
        if (cadence_hit) observe(state, false);
        emit_specials_at(step);
    }
    return state;
}

}  // namespace

FlowState run(const VectorField& u0, const FlowParams& params, const ObservationPlan& plan,
              const Observer& observe) {
    return run_from(FlowState{0.0, 0, u0}, params, plan, observe, true);
}

FlowState run(FlowState start, const FlowParams& params, const ObservationPlan& plan,
              const Observer& observe) {
    return run_from(std::move(start), params, plan, observe, false);
}

ConvergenceReport convergence_order(const VectorField& u0, FlowParams params, int refinements,
                                    const Stepper& stepper) {
    if (refinements < 3)
        throw std::invalid_argument("convergence_order: need at least 3 refinements");
    params.validate();
    const long base_steps = static_cast<long>(std::llround(params.t_end / params.dt));
    if (base_steps < 1 || std::abs(base_steps * params.dt - params.t_end) > 1e-9 * params.t_end)
        throw std::invalid_argument("convergence_order: t_end must be a multiple of dt");

    const Stepper& advance = stepper ? stepper : Stepper(
        [](FlowState& s, const FlowParams& p, SpectralWorkspace& w) { step_strang(s, p, w); });

    SpectralWorkspace ws(u0.grid());
    std::vector<VectorField> finals;
    for (int level = 0; level <= refinements; ++level) {
        FlowParams p = params;
        p.dt = params.dt / static_cast<double>(1L << level);
        const long steps = base_steps * (1L << level);
        FlowState s{0.0, 0, u0};
        for (long k = 0; k < steps; ++k) advance(s, p, ws);
        finals.push_back(std::move(s.u));
    }

    ConvergenceReport rep;
    double scale = sup_norm(finals.back());
    for (std::size_t i = 0; i + 1 < finals.size(); ++i) {
        VectorField d = finals[i];
        for (std::size_t p = 0; p < d.raw().size(); ++p) d.raw()[p] -= finals[i + 1].raw()[p];
        rep.diffs.push_back(sup_norm(d));
    }
    rep.conclusive = true;
    const double floor = 1e-13 * std::max(1.0, scale);
    for (std::size_t i = 0; i + 1 < rep.diffs.size(); ++i) {
        if (rep.diffs[i] <= floor || rep.diffs[i + 1] <= floor || rep.diffs[i + 1] >= rep.diffs[i]) {
            rep.conclusive = false;  // noise floor or non-monotone refinement
        }
        rep.orders.push_back(std::log2(rep.diffs[i] / rep.diffs[i + 1]));
    }
    return rep;
}

}  // namespace glf
