// Spectral operators on the unit torus, backed by FFTW complex transforms.
//
// Convention: u(x) = sum_k uhat(k) e^{2 pi i k.x} with k in {-n/2,...,n/2-1}^2,
// so the discrete operators act as exact Fourier multipliers:
//   heat semigroup e^{eps^2 tau Laplace}:  uhat(k) *= exp(-4 pi^2 eps^2 tau |k|^2)
//   laplacian:                             uhat(k) *= -4 pi^2 |k|^2
//   d/dx_a:                                uhat(k) *= 2 pi i k_a   (Nyquist row zeroed)
// The two real components are packed as z = u1 + i u2; every multiplier above
// is a real-impulse-response operator, so the packing commutes with it and the
// components unpack as real/imaginary parts.

#pragma once

#include <complex>
#include <map>
#include <memory>
#include <vector>

#include "glf/grid.hpp"

namespace glf {

// True Fourier coefficients per component (normalized: c(0) = mean).
struct SpectralRep {
    GridSpec grid;
    std::vector<std::complex<double>> c1, c2;  // row-major over (k-index i, j)
};

class SpectralWorkspace {
  public:
    explicit SpectralWorkspace(GridSpec g);
    ~SpectralWorkspace();
    SpectralWorkspace(const SpectralWorkspace&) = delete;
    SpectralWorkspace& operator=(const SpectralWorkspace&) = delete;

    const GridSpec& grid() const { return grid_; }

    // Packed unnormalized forward/backward transforms of z = u1 + i u2.
    void forward_packed(const VectorField& u, std::vector<std::complex<double>>& zhat);
    void inverse_packed(std::vector<std::complex<double>>& zhat_scratch, VectorField& out);

    // e^{eps^2 tau Laplace} f, exact multiplier.  tau >= 0.
    void heat(const VectorField& f, double tau, double eps, VectorField& out);

    // From cached packed coefficients zhat0 (unnormalized, as produced by
    // forward_packed): g = e^{eps^2 t Laplace} u0 and optionally its gradient.
    void heat_from_coeffs(const std::vector<std::complex<double>>& zhat0, double tau, double eps,
                          VectorField& g, GradientField* grad);

    void laplacian(const VectorField& f, VectorField& out);
    void gradient(const VectorField& f, GradientField& out);

    SpectralRep forward_transform(const VectorField& u);
    VectorField inverse_transform(const SpectralRep& rep);

  private:
    const std::vector<double>& heat_table(double tau, double eps);
    void gradient_from_spectrum(const std::vector<std::complex<double>>& zhat, GradientField& out);

    GridSpec grid_;
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::map<double, std::vector<double>> heat_cache_;  // keyed by 4 pi^2 eps^2 tau
};

// Convenience wrappers (allocate a workspace per call; fine outside hot loops).
VectorField heat_semigroup(const VectorField& f, double tau, double eps);
VectorField laplacian(const VectorField& f);
GradientField gradient(const VectorField& f);

}  // namespace glf
