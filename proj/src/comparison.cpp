#include "glf/comparison.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace glf {

VectorField ComparisonState::w() const {
    if (!et_w) throw std::logic_error("ComparisonState::w: fields were not retained");
    VectorField out = *et_w;
    const double scale = std::exp(-t);
    for (auto& x : out.raw()) x *= scale;
    return out;
}

ComparisonBuilder::ComparisonBuilder(const VectorField& u0, double eps)
    : ws_(u0.grid()), eps_(eps), grid_(u0.grid()) {
    if (!(eps > 0.0)) throw std::invalid_argument("comparison: eps must be positive");
    if (!u0.all_finite()) throw std::invalid_argument("comparison: non-finite initial data");
    ws_.forward_packed(u0, zhat0_);
}

ComparisonState ComparisonBuilder::at(double t, const VectorField& u_t, bool keep_fields) {
    if (!(t >= 0.0)) throw std::invalid_argument("comparison: t must be >= 0");
    if (u_t.grid().n != grid_.n) throw std::invalid_argument("comparison: grid mismatch");

    VectorField g(grid_);
    GradientField dg;
    ws_.heat_from_coeffs(zhat0_, t, eps_, g, &dg);

    ComparisonState st;
    st.t = t;
    st.eps = eps_;

    // v = phi(t, g) pointwise; R = -eps^2 sum_a D2phi(t,g)[d_a g, d_a g];
    // et_w = u - v held exactly so v + et_w reconstructs u bitwise.
    VectorField v(grid_);
    VectorField etw(grid_);
    const double et = std::exp(t);
    const double m = std::expm1(2.0 * t);
    const double eps2 = eps_ * eps_;
    const int n = grid_.n;
    double sup_etw2 = 0.0, sup_r2 = 0.0, sup_maj = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const Vec2 x{g.at(0, i, j), g.at(1, i, j)};
            const double r2 = x.norm2();
            const double fac = phi_factor(et, m, r2);
            const double v1 = fac * x.x, v2 = fac * x.y;
            v.at(0, i, j) = v1;
            v.at(1, i, j) = v2;
            const double e1 = u_t.at(0, i, j) - v1, e2 = u_t.at(1, i, j) - v2;
            etw.at(0, i, j) = e1;
            etw.at(1, i, j) = e2;
            sup_etw2 = std::max(sup_etw2, e1 * e1 + e2 * e2);

            // D2phi(t,x)[p,p] summed over the two derivative directions
            const double s2 = 1.0 + r2 * m;
            const double s = std::sqrt(s2);
            const double c1 = -et * m / (s2 * s);
            const double c3 = 3.0 * et * m * m / (s2 * s2 * s);
            const Vec2 p1{dg.d1u1.at(i, j), dg.d1u2.at(i, j)};
            const Vec2 p2{dg.d2u1.at(i, j), dg.d2u2.at(i, j)};
            double r1 = 0.0, rr2 = 0.0;
            for (const Vec2& p : {p1, p2}) {
                const double xp = dot(x, p), pp = dot(p, p);
                r1 += c1 * (2.0 * p.x * xp + x.x * pp) + c3 * x.x * xp * xp;
                rr2 += c1 * (2.0 * p.y * xp + x.y * pp) + c3 * x.y * xp * xp;
            }
            sup_r2 = std::max(sup_r2, eps2 * eps2 * (r1 * r1 + rr2 * rr2));
            const double frob2 = p1.norm2() + p2.norm2();
            sup_maj = std::max(sup_maj, eps2 * et * std::sqrt(r2) * m / (s2 * s) * frob2);
        }
    }
    st.sup_et_w = std::sqrt(sup_etw2);
    st.r_sup = std::sqrt(sup_r2);
    st.r_majorant = sup_maj;

    // grad w spectrally from w = e^{-t} (u - v)
    VectorField wfield = etw;
    const double emt = std::exp(-t);
    for (auto& xx : wfield.raw()) xx *= emt;
    GradientField dw;
    ws_.gradient(wfield, dw);
    double sup_dw2 = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) sup_dw2 = std::max(sup_dw2, dw.frob2(i, j));
    st.sup_grad_w = std::sqrt(sup_dw2);

    if (keep_fields) {
        st.g = std::move(g);
        st.v = std::move(v);
        st.et_w = std::move(etw);
    }
    return st;
}

ComparisonState build_comparison(const VectorField& u0, const VectorField& u_t, double t, double eps,
                                 bool keep_fields) {
    ComparisonBuilder b(u0, eps);
    return b.at(t, u_t, keep_fields);
}

double envelope_h(double t, double eps) {
    return eps * eps * std::exp(t) * std::sqrt(std::expm1(2.0 * t));
}

double grad_envelope_h(double t, double eps) {
    return eps * std::sqrt(t) * std::sqrt(std::expm1(2.0 * t));
}

EnvelopeFit fit_envelope(std::span<const double> t, std::span<const double> value, double eps,
                         double (*h)(double, double)) {
    if (t.size() != value.size()) throw std::invalid_argument("fit_envelope: size mismatch");
    EnvelopeFit fit;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(t[i] > 0.0)) continue;
        const double hh = h(t[i], eps);
        if (!(hh > 0.0)) continue;
        fit.samples.push_back({t[i], value[i], hh});
        const double ratio = value[i] / hh;
        if (ratio > fit.a_fit) {
            fit.a_fit = ratio;
            fit.t_argmax = t[i];
        }
    }
    return fit;
}

namespace {

void check_instance(const GronwallInstance& inst) {
    const auto n = inst.t.size();
    if (n < 3 || inst.f.size() != n || inst.h.size() != n)
        throw std::invalid_argument("gronwall: need >= 3 samples of (t, f, h) on a common grid");
    if (!(inst.c > 0.0)) throw std::invalid_argument("gronwall: c must be positive");
    for (std::size_t i = 0; i < n; ++i) {
        if (!(inst.t[i] > 0.0) || (i > 0 && inst.t[i] <= inst.t[i - 1]))
            throw std::invalid_argument("gronwall: sample times must be positive and increasing");
        if (!(inst.h[i] > 0.0)) throw std::invalid_argument("gronwall: h must be positive");
        if (!(inst.f[i] >= 0.0)) throw std::invalid_argument("gronwall: f must be nonnegative");
    }
}

// Trapezoid of e^{t_i - s} q(s) over the sample grid up to index i.  The
// [0, t_1) sliver is included with q extended flat from the first sample when
// `with_sliver` (conservative direction differs per use; see callers).
double weighted_trapz(const std::vector<double>& t, const std::vector<double>& q, std::size_t i,
                      bool with_sliver) {
    double acc = 0.0;
    const double ti = t[i];
    if (with_sliver)
        acc += 0.5 * t[0] * (std::exp(ti) * q[0] + std::exp(ti - t[0]) * q[0]);
    for (std::size_t k = 0; k + 1 <= i; ++k) {
        const double w0 = std::exp(ti - t[k]) * q[k];
        const double w1 = std::exp(ti - t[k + 1]) * q[k + 1];
        acc += 0.5 * (t[k + 1] - t[k]) * (w0 + w1);
    }
    return acc;
}

}  // namespace

GronwallVerdict gronwall_verify(const GronwallInstance& inst) {
    check_instance(inst);
    const auto n = inst.t.size();
    GronwallVerdict v;

    // (1) sup_t (1/h(t)) int_0^t e^{t-s} h(s)^2 ds <= 1/(8c); the sliver is
    // included so the integral is not underestimated near t = 0.
    std::vector<double> h2(n);
    for (std::size_t i = 0; i < n; ++i) h2[i] = inst.h[i] * inst.h[i];
    v.integral_sup = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        v.integral_sup = std::max(v.integral_sup, weighted_trapz(inst.t, h2, i, true) / inst.h[i]);
    v.hyp_integral = v.integral_sup <= 1.0 / (8.0 * inst.c);

    // (2) limsup_{t->0+} f/h <= 1, checked on the first three samples with 5%
    v.hyp_limsup = true;
    for (std::size_t i = 0; i < std::min<std::size_t>(3, n); ++i)
        if (inst.f[i] / inst.h[i] > 1.05) v.hyp_limsup = false;

    // (3) f(t) <= c int_0^t e^{t-s} f(s)^2 ds + h(t); no sliver here, so the
    // right side is not inflated by quadrature.
    std::vector<double> f2(n);
    for (std::size_t i = 0; i < n; ++i) f2[i] = inst.f[i] * inst.f[i];
    v.hyp_implicit = true;
    for (std::size_t i = 0; i < n; ++i) {
        const double rhs = inst.c * weighted_trapz(inst.t, f2, i, false) + inst.h[i];
        if (inst.f[i] > rhs * (1.0 + 1e-12)) v.hyp_implicit = false;
    }

    double worst_ratio = 0.0;
    for (std::size_t i = 0; i < n; ++i) worst_ratio = std::max(worst_ratio, inst.f[i] / inst.h[i]);
    v.conclusion = worst_ratio <= 2.0;
    v.margin = 2.0 - worst_ratio;
    v.validated = !v.hypothesis() || v.conclusion;
    return v;
}

MonotoneBound monotone_gronwall_bound(const std::function<double(double)>& h, double c, double T,
                                      int samples) {
    if (!(c > 0.0) || !(T > 0.0)) throw std::invalid_argument("monotone_gronwall_bound: need c > 0, T > 0");
    if (samples < 16) throw std::invalid_argument("monotone_gronwall_bound: too few samples");
    double prev = h(0.0);
    if (!(prev >= 0.0)) throw std::invalid_argument("monotone_gronwall_bound: h must be nonnegative");
    double acc = 0.0;
    for (int k = 0; k < samples; ++k) {
        const double s0 = T * k / samples, s1 = T * (k + 1) / samples;
        const double h1 = h(s1);
        if (h1 < prev * (1.0 - 1e-9))
            throw std::invalid_argument("monotone_gronwall_bound: h is not nondecreasing at s=" +
                                        std::to_string(s1));
        acc += 0.5 * (s1 - s0) * (std::exp(T - s0) * prev + std::exp(T - s1) * h1);
        prev = h1;
    }
    MonotoneBound b;
    b.integral = acc;
    b.threshold = 1.0 / (8.0 * c);
    b.holds = acc <= b.threshold;
    b.margin = b.threshold / acc;
    return b;
}

MonotoneBound defect_estimate_bound(double eps, double A) {
    if (!(A >= 1.0)) throw std::invalid_argument("defect_estimate_bound: A must be >= 1");
    const double T = std::log(1.0 / eps) - std::log(16.0 * A * A);
    if (!(T > 0.0))
        throw std::invalid_argument("defect_estimate_bound: horizon nonpositive; need eps < 1/(16 A^2)");
    auto h = [eps, A](double t) { return A * envelope_h(t, eps); };
    return monotone_gronwall_bound(h, A, T);
}

}  // namespace glf
