// Closed-form flow of the planar reaction ODE  X' = (1 - |X|^2) X:
//
//   phi(t, X) = e^t X / sqrt(1 + |X|^2 (e^{2t} - 1)),
//
// together with its first and second differentials in X (hand-differentiated;
// the finite-difference versions live only in the tests as oracles) and the
// inverse map phi(-t, .).  Domain violations throw std::domain_error; nothing
// is clamped.

#pragma once

#include <cmath>

namespace glf {

struct Vec2 {
    double x = 0.0, y = 0.0;
    double norm2() const { return x * x + y * y; }
    double norm() const { return std::sqrt(norm2()); }
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

struct Mat2 {
    // row-major: [a b; c d]
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
    Vec2 apply(Vec2 v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
    double frob() const { return std::sqrt(a * a + b * b + c * c + d * d); }
};

// Symmetric bilinear second differential D^2 phi(t,X): pair of symmetric 2x2
// blocks, one per output component.
struct Bilinear2 {
    Mat2 comp1, comp2;  // D^2 phi_1, D^2 phi_2
    Vec2 apply(Vec2 p, Vec2 q) const {
        return {dot({comp1.a * p.x + comp1.b * p.y, comp1.c * p.x + comp1.d * p.y}, q),
                dot({comp2.a * p.x + comp2.b * p.y, comp2.c * p.x + comp2.d * p.y}, q)};
    }
    double frob() const {
        return std::sqrt(comp1.a * comp1.a + comp1.b * comp1.b + comp1.c * comp1.c + comp1.d * comp1.d +
                         comp2.a * comp2.a + comp2.b * comp2.b + comp2.c * comp2.c + comp2.d * comp2.d);
    }
};

Vec2 phi(double t, Vec2 x);
Mat2 dphi(double t, Vec2 x);
Bilinear2 d2phi(double t, Vec2 x);

// Majorant for |D^2 phi|: e^t |x| |e^{2t}-1| / (1 + |x|^2 (e^{2t}-1))^{3/2}.
// The Frobenius norm of d2phi is between sqrt(3) and 2*sqrt(3) times this.
double d2phi_norm_bound(double t, double x_norm);
inline double d2phi_norm_bound(double t, Vec2 x) { return d2phi_norm_bound(t, x.norm()); }

// Inverse flow: phi(-t, y); requires |y|^2 (1 - e^{-2t}) < 1 when t > 0.
Vec2 phi_inverse(double t, Vec2 y);

// Fast pointwise application used by the integrator: the scalar factor
// e^t / sqrt(1 + r2 * (e^{2t}-1)) given precomputed et = e^t, m = expm1(2t).
inline double phi_factor(double et, double m, double r2) { return et / std::sqrt(1.0 + r2 * m); }

}  // namespace glf
