// Time integration of  du/dt = eps^2 Laplace u + (1 - |u|^2) u  on the unit
// torus by Strang splitting between two exactly-solvable flows:
//
//   u <- e^{eps^2 (dt/2) Laplace} . phi(dt, .) . e^{eps^2 (dt/2) Laplace} u
//
// (spectral heat multiplier and the closed-form reaction flow phi).  Both
// sub-flows are exact, so the only discretization error is the O(dt^2)
// splitting error.  Uniform time grid; exact-time observations between grid
// points are produced by one sub-step of the exact flows applied to a copy,
// leaving the marching state untouched.

#pragma once

#include <functional>
#include <vector>

#include "glf/grid.hpp"
#include "glf/spectral.hpp"

namespace glf {

struct FlowParams {
    double eps = 0.0;
    int n = 0;
    double dt = 0.0;
    double c0 = 2.0;
    double t_end = 0.0;

    double spacing() const { return 1.0 / n; }
    static int min_nodes(double eps);          // smallest even n with n >= 8/eps
    double dt_cap() const;                     // min(0.05, eps * spacing)
    double t_epsilon() const;                  // ln(1/eps) - (1/2) ln ln(1/eps) - c0
    void validate() const;                     // throws std::invalid_argument
};

struct FlowState {
    double t = 0.0;
    long step_count = 0;
    VectorField u;
};

// One full Strang step; advances t by params.dt.
void step_strang(FlowState& s, const FlowParams& params, SpectralWorkspace& ws);

// Pluggable stepper for convergence studies (default: step_strang).
using Stepper = std::function<void(FlowState&, const FlowParams&, SpectralWorkspace&)>;

struct ObservationPlan {
    long cadence = 10;                  // observe every cadence-th step (plus step 0 and the last)
    std::vector<double> special_times;  // exact observation times in (0, t_end]
};

// Called with the state at each observation; `special` marks an exact-time
// observation produced off the uniform grid.
using Observer = std::function<void(const FlowState&, bool special)>;

// Marches from t=0 to the last full step <= t_end.  Consecutive heat
// half-steps between observation boundaries are merged via the semigroup law,
// which is exact in exact arithmetic; regrouping the multipliers shifts the
// trajectory only at rounding level, and a fixed plan is bitwise
// deterministic.  Returns the final on-grid state.
FlowState run(const VectorField& u0, const FlowParams& params, const ObservationPlan& plan,
              const Observer& observe);

// Resume variant: continues from a mid-trajectory on-grid state (start.t must
// equal start.step_count * dt).  Observations at or before the start step are
// assumed already emitted and are skipped.
FlowState run(FlowState start, const FlowParams& params, const ObservationPlan& plan,
              const Observer& observe);

// Richardson self-convergence: runs at dt, dt/2, ..., dt/2^refinements and
// estimates the order from successive sup-norm differences at t_end.
struct ConvergenceReport {
    std::vector<double> diffs;   // sup|u_{level i} - u_{level i+1}|(t_end)
    std::vector<double> orders;  // log2(diffs[i]/diffs[i+1])
    bool conclusive = false;     // false if diffs are non-monotone or at noise floor
    double order() const { return orders.empty() ? 0.0 : orders.back(); }
};
ConvergenceReport convergence_order(const VectorField& u0, FlowParams params, int refinements = 3,
                                    const Stepper& stepper = {});

}  // namespace glf
