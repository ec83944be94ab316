// Energy, Jacobian, and scaling diagnostics.
//
//   E_eps(u)  = int |grad u|^2 + (1/4 eps^2) (1 - |u|^2)^2 dx
//   Ju        = det grad u = d1u1 d2u2 - d2u1 d1u2
//
// Derivatives are spectral; integrals are the plain grid mean (trapezoid on a
// periodic uniform grid), which is spectrally accurate quadrature.  Bump
// pairings int phi Ju / pi localize the Jacobian near a zero; phi is a radial
// C^2 quintic smoothstep, identically 1 inside half its radius.

#pragma once

#include <functional>
#include <span>
#include <vector>

#include "glf/grid.hpp"
#include "glf/ode_flow.hpp"
#include "glf/spectral.hpp"
#include "glf/vortex.hpp"

namespace glf {

struct EnergyReport {
    double dirichlet = 0.0;
    double potential = 0.0;
    double total() const { return dirichlet + potential; }
};

EnergyReport energy(const VectorField& u, double eps);
EnergyReport energy(const VectorField& u, double eps, SpectralWorkspace& ws);
// Variant for callers that already hold grad u (saves the transforms).
EnergyReport energy_from_gradient(const VectorField& u, const GradientField& du, double eps);

ScalarField jacobian(const VectorField& u);
ScalarField jacobian(const VectorField& u, SpectralWorkspace& ws);
ScalarField jacobian_from_gradient(const GradientField& du);

double integral(const ScalarField& f);  // integral over the unit torus = grid mean

// Radial C^2 bump: 1 on [0, r/2], quintic smoothstep down to 0 at r.
double bump_profile(double rho, double radius);

// int phi(|x - center|) Ju dx.  Requires 0 < radius < 1/2 (support must not
// wrap onto itself).
double pair_with_bump(const ScalarField& ju, Vec2 center, double radius);

// Pairings at every zero of the set.  radius <= 0 means the default, 1/3 of
// the minimum pairwise zero distance; radius >= minsep/2 (overlapping bumps
// across zeros) is an error.
std::vector<double> pair_all(const ScalarField& ju, const VortexSet& zeros, double radius = -1.0);

// Least-squares affine fit E ~ slope * ln(1/eps) + intercept.
struct ScalingFit {
    double slope = 0.0;
    double intercept = 0.0;
    std::vector<double> rel_residuals;  // |fit - E| / |E| per point
    double max_rel_residual = 0.0;
};
ScalingFit fit_log_scaling(std::span<const double> eps, std::span<const double> E);

// Discrete L^2 gradient of E_eps:  -2 Laplace u - (1/eps^2)(1 - |u|^2) u.
VectorField first_variation(const VectorField& u, double eps, SpectralWorkspace& ws);

// Right-hand side of the simulated PDE: eps^2 Laplace u + (1 - |u|^2) u.
// Equals minus the L^2 gradient of (eps^2/2) int |grad u|^2 + (1/4) int (1-|u|^2)^2.
VectorField pde_rhs(const VectorField& u, double eps, SpectralWorkspace& ws);

// L^2 pairing <f, g> = int f . g dx on the grid.
double l2_pairing(const VectorField& f, const VectorField& g);

}  // namespace glf
