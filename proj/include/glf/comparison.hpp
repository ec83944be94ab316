// Comparison-map machinery: from the simulated state u(t) and the initial
// datum u0, build
//
//   g(t) = e^{eps^2 t Laplace} u0          (exact heat flow of the datum)
//   v(t) = phi(t, g(t))                    (reaction flow applied pointwise)
//   w(t) = e^{-t} (u(t) - v(t))            (normalized defect)
//   R(t) = -eps^2 sum_a D^2phi(t,g)[d_a g, d_a g]   (forcing residual of v)
//
// plus the sup-norm envelopes the defect is measured against,
//
//   h(t)      = eps^2 e^t sqrt(e^{2t} - 1)   for sup |e^t w|,
//   h_grad(t) = eps sqrt(t) sqrt(e^{2t} - 1) for sup |grad w|,
//
// and a numerical verifier for the quadratic Gronwall lemma that closes the
// defect estimate.

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "glf/grid.hpp"
#include "glf/ode_flow.hpp"
#include "glf/spectral.hpp"

namespace glf {

struct ComparisonState {
    double t = 0.0;
    double eps = 0.0;
    double sup_et_w = 0.0;    // sup |u - v| = sup |e^t w|
    double sup_grad_w = 0.0;  // sup Frobenius norm of grad w
    double r_sup = 0.0;       // sup |R|
    // sup of the pointwise residual majorant
    //   eps^2 e^t |g| (e^{2t}-1) / (1 + |g|^2 (e^{2t}-1))^{3/2} * |grad g|_F^2,
    // against which r_sup <= C * r_majorant with a moderate C.
    double r_majorant = 0.0;
    // fields retained only on request (they are large)
    std::optional<VectorField> g, v, et_w;
    VectorField w() const;  // e^{-t} * et_w; requires retained fields
};

class ComparisonBuilder {
  public:
    ComparisonBuilder(const VectorField& u0, double eps);
    // Evaluate the comparison at time t against the simulated state u_t.
    ComparisonState at(double t, const VectorField& u_t, bool keep_fields = false);
    SpectralWorkspace& workspace() { return ws_; }

  private:
    SpectralWorkspace ws_;
    std::vector<std::complex<double>> zhat0_;
    double eps_;
    GridSpec grid_;
};

ComparisonState build_comparison(const VectorField& u0, const VectorField& u_t, double t, double eps,
                                 bool keep_fields = false);

double envelope_h(double t, double eps);       // eps^2 e^t sqrt(e^{2t}-1)
double grad_envelope_h(double t, double eps);  // eps sqrt(t) sqrt(e^{2t}-1)

// a_fit = max over samples with h(t) > 0 of value/h(t); samples with t <= 0
// are skipped (the defect vanishes identically at t = 0).
struct EnvelopeSample {
    double t = 0.0;
    double value = 0.0;
    double h = 0.0;
};
struct EnvelopeFit {
    double a_fit = 0.0;
    double t_argmax = 0.0;
    std::vector<EnvelopeSample> samples;
};
EnvelopeFit fit_envelope(std::span<const double> t, std::span<const double> value, double eps,
                         double (*h)(double, double) = &envelope_h);

// Gronwall lemma verifier.  Instance: samples of f and h on a common positive
// time grid, constant c, horizon T (= last sample time).
struct GronwallInstance {
    std::vector<double> t, f, h;
    double c = 1.0;
    double T = 0.0;
};

struct GronwallVerdict {
    bool hyp_integral = false;  // sup_t int_0^t e^{t-s} (h(s)/h(t)) h(s) ds <= 1/(8c)
    bool hyp_limsup = false;    // f/h <= 1.05 on the first three samples
    bool hyp_implicit = false;  // f(t) <= c int_0^t e^{t-s} f(s)^2 ds + h(t) at every sample
    bool hypothesis() const { return hyp_integral && hyp_limsup && hyp_implicit; }
    bool conclusion = false;    // f <= 2h at every sample
    bool validated = false;     // hypothesis implies conclusion (vacuously true if hypothesis fails)
    double margin = 0.0;        // 2 - max f/h
    double integral_sup = 0.0;  // the sup in hyp_integral
};

GronwallVerdict gronwall_verify(const GronwallInstance& inst);

// Sufficient criterion for nondecreasing h:  int_0^T e^{T-s} h(s) ds <= 1/(8c).
struct MonotoneBound {
    bool holds = false;
    double integral = 0.0;
    double threshold = 0.0;  // 1/(8c)
    double margin = 0.0;     // threshold / integral
};
MonotoneBound monotone_gronwall_bound(const std::function<double(double)>& h, double c, double T,
                                      int samples = 4096);

// The defect estimate's own instance: h(t) = A eps^2 e^t sqrt(e^{2t}-1),
// c = A, T = ln(1/eps) - ln(16 A^2).  Requires eps < 1/(16 A^2).
MonotoneBound defect_estimate_bound(double eps, double A);

}  // namespace glf
