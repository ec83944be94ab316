#include "glf/ode_flow.hpp"

#include <stdexcept>
#include <string>

namespace glf {

namespace {

// Shared setup: m = e^{2t}-1, S^2 = 1 + m |x|^2.  The flow is defined only
// where S^2 > 0 (automatic for t >= 0; a real constraint for t < 0).
struct Frame {
    double et, m, s2, s;
};

Frame frame(double t, Vec2 x, const char* who) {
    Frame f;
    f.et = std::exp(t);
    f.m = std::expm1(2.0 * t);
    f.s2 = 1.0 + x.norm2() * f.m;
    if (!(f.s2 > 0.0))
        throw std::domain_error(std::string(who) + ": 1 + |x|^2(e^{2t}-1) = " + std::to_string(f.s2) +
                                " <= 0 (t=" + std::to_string(t) + ", |x|=" + std::to_string(x.norm()) + ")");
    f.s = std::sqrt(f.s2);
    return f;
}

}  // namespace

Vec2 phi(double t, Vec2 x) {
    const auto f = frame(t, x, "phi");
    return (f.et / f.s) * x;
}

Mat2 dphi(double t, Vec2 x) {
    // d phi_i / d x_j = e^t [ delta_ij / S - m x_i x_j / S^3 ]
    const auto f = frame(t, x, "dphi");
    const double s3 = f.s2 * f.s;
    const double diag = f.et / f.s;
    const double cross = f.et * f.m / s3;
    return {diag - cross * x.x * x.x, -cross * x.x * x.y, -cross * x.y * x.x, diag - cross * x.y * x.y};
}

Bilinear2 d2phi(double t, Vec2 x) {
    // d^2 phi_i / dx_j dx_k =
    //   e^t [ -m (delta_ij x_k + delta_ik x_j + delta_jk x_i)/S^3
    //         + 3 m^2 x_i x_j x_k / S^5 ]
    const auto f = frame(t, x, "d2phi");
    const double s3 = f.s2 * f.s;
    const double s5 = s3 * f.s2;
    const double c1 = -f.et * f.m / s3;
    const double c3 = 3.0 * f.et * f.m * f.m / s5;
    auto entry = [&](int i, int j, int k) {
        const double xi = (i == 0) ? x.x : x.y;
        const double xj = (j == 0) ? x.x : x.y;
        const double xk = (k == 0) ? x.x : x.y;
        double v = c3 * xi * xj * xk;
        if (i == j) v += c1 * xk;
        if (i == k) v += c1 * xj;
        if (j == k) v += c1 * xi;
        return v;
    };
    Bilinear2 out;
    out.comp1 = {entry(0, 0, 0), entry(0, 0, 1), entry(0, 1, 0), entry(0, 1, 1)};
    out.comp2 = {entry(1, 0, 0), entry(1, 0, 1), entry(1, 1, 0), entry(1, 1, 1)};
    return out;
}

double d2phi_norm_bound(double t, double x_norm) {
    const double m = std::expm1(2.0 * t);
    const double s2 = 1.0 + x_norm * x_norm * m;
    if (!(s2 > 0.0)) throw std::domain_error("d2phi_norm_bound: outside flow domain");
    return std::exp(t) * x_norm * std::abs(m) / (s2 * std::sqrt(s2));
}

Vec2 phi_inverse(double t, Vec2 y) {
    // phi(-t, y); for t > 0 the domain condition reads |y|^2 (1-e^{-2t}) < 1.
    const double shrink = -std::expm1(-2.0 * t);  // 1 - e^{-2t}
    if (t > 0.0 && !(y.norm2() * shrink < 1.0))
        throw std::domain_error("phi_inverse: |y|^2 (1 - e^{-2t}) >= 1, point not in the range of phi(t,.)");
    return phi(-t, y);
}

}  // namespace glf
