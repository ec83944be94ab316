#include "glf/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace glf {

namespace {

// FFTW's planner is not thread-safe; execution on distinct buffers is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

constexpr double two_pi = 2.0 * std::numbers::pi;

void require_finite(const VectorField& f, const char* who) {
    if (!f.all_finite()) throw std::invalid_argument(std::string(who) + ": non-finite input values");
}

}  // namespace

struct SpectralWorkspace::Impl {
    fftw_complex* a = nullptr;  // transform input
    fftw_complex* b = nullptr;  // transform output
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;
    std::vector<std::complex<double>> scratch;
};

SpectralWorkspace::SpectralWorkspace(GridSpec g) : grid_(g), impl_(std::make_unique<Impl>()) {
    g.require_valid();
    const int n = g.n;
    std::lock_guard<std::mutex> lock(planner_mutex());
    impl_->a = fftw_alloc_complex(static_cast<std::size_t>(n) * n);
    impl_->b = fftw_alloc_complex(static_cast<std::size_t>(n) * n);
    if (!impl_->a || !impl_->b) throw std::bad_alloc();
    // FFTW_ESTIMATE keeps planning deterministic run-to-run.
    impl_->fwd = fftw_plan_dft_2d(n, n, impl_->a, impl_->b, FFTW_FORWARD, FFTW_ESTIMATE);
    impl_->bwd = fftw_plan_dft_2d(n, n, impl_->a, impl_->b, FFTW_BACKWARD, FFTW_ESTIMATE);
    if (!impl_->fwd || !impl_->bwd) throw std::runtime_error("spectral: FFTW plan creation failed");
}

SpectralWorkspace::~SpectralWorkspace() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (impl_->fwd) fftw_destroy_plan(impl_->fwd);
    if (impl_->bwd) fftw_destroy_plan(impl_->bwd);
    if (impl_->a) fftw_free(impl_->a);
    if (impl_->b) fftw_free(impl_->b);
}

void SpectralWorkspace::forward_packed(const VectorField& u, std::vector<std::complex<double>>& zhat) {
    const auto m = grid_.nodes();
    const auto u1 = u.comp(0), u2 = u.comp(1);
    for (std::int64_t p = 0; p < m; ++p) {
        impl_->a[p][0] = u1[p];
        impl_->a[p][1] = u2[p];
    }
    fftw_execute(impl_->fwd);
    zhat.resize(m);
    for (std::int64_t p = 0; p < m; ++p) zhat[p] = {impl_->b[p][0], impl_->b[p][1]};
}

void SpectralWorkspace::inverse_packed(std::vector<std::complex<double>>& zhat, VectorField& out) {
    const auto m = grid_.nodes();
    for (std::int64_t p = 0; p < m; ++p) {
        impl_->a[p][0] = zhat[p].real();
        impl_->a[p][1] = zhat[p].imag();
    }
    fftw_execute(impl_->bwd);
    if (out.grid().n != grid_.n) out = VectorField(grid_);
    auto u1 = out.comp(0), u2 = out.comp(1);
    const double inv = 1.0 / static_cast<double>(m);
    for (std::int64_t p = 0; p < m; ++p) {
        u1[p] = impl_->b[p][0] * inv;
        u2[p] = impl_->b[p][1] * inv;
    }
}

const std::vector<double>& SpectralWorkspace::heat_table(double tau, double eps) {
    const double a = 4.0 * std::numbers::pi * std::numbers::pi * eps * eps * tau;
    auto it = heat_cache_.find(a);
    if (it != heat_cache_.end()) return it->second;
    if (heat_cache_.size() > 64) heat_cache_.clear();  // bound the cache; marching reuses one entry
    const int n = grid_.n;
    std::vector<double> tab(grid_.nodes());
    for (int i = 0; i < n; ++i) {
        const double k1 = signed_wavenumber(i, n);
        for (int j = 0; j < n; ++j) {
            const double k2 = signed_wavenumber(j, n);
            tab[static_cast<std::int64_t>(i) * n + j] = std::exp(-a * (k1 * k1 + k2 * k2));
        }
    }
    return heat_cache_.emplace(a, std::move(tab)).first->second;
}

void SpectralWorkspace::heat(const VectorField& f, double tau, double eps, VectorField& out) {
    require_finite(f, "heat_semigroup");
    if (!(tau >= 0.0)) throw std::domain_error("heat_semigroup: tau must be >= 0");
    const auto& tab = heat_table(tau, eps);
    auto& z = impl_->scratch;
    forward_packed(f, z);
    for (std::size_t p = 0; p < z.size(); ++p) z[p] *= tab[p];
    inverse_packed(z, out);
}

void SpectralWorkspace::heat_from_coeffs(const std::vector<std::complex<double>>& zhat0, double tau,
                                         double eps, VectorField& g, GradientField* grad) {
    if (!(tau >= 0.0)) throw std::domain_error("heat_semigroup: tau must be >= 0");
    const auto& tab = heat_table(tau, eps);
    auto& z = impl_->scratch;
    z.resize(zhat0.size());
    for (std::size_t p = 0; p < z.size(); ++p) z[p] = zhat0[p] * tab[p];
    auto zg = z;  // keep g's spectrum for the derivative passes
    inverse_packed(z, g);
    if (grad) gradient_from_spectrum(zg, *grad);
}

void SpectralWorkspace::gradient_from_spectrum(const std::vector<std::complex<double>>& zhat,
                                               GradientField& out) {
    const int n = grid_.n;
    if (out.d1u1.grid().n != n) {
        out.d1u1 = ScalarField(grid_);
        out.d2u1 = ScalarField(grid_);
        out.d1u2 = ScalarField(grid_);
        out.d2u2 = ScalarField(grid_);
    }
    auto& z = impl_->scratch;
    z.resize(zhat.size());
    VectorField tmp(grid_);
    // axis 1: multiplier 2 pi i k1; the unpaired Nyquist mode k1 = -n/2 is
    // zeroed so the derivative stays a real operator (exact on band-limited
    // fields, which is all the resolution rule admits).
    for (int i = 0; i < n; ++i) {
        const int k1s = signed_wavenumber(i, n);
        const double k1 = (i == n / 2) ? 0.0 : k1s;
        const std::complex<double> mult(0.0, two_pi * k1);
        for (int j = 0; j < n; ++j) {
            const auto p = static_cast<std::int64_t>(i) * n + j;
            z[p] = zhat[p] * mult;
        }
    }
    inverse_packed(z, tmp);
    std::copy(tmp.comp(0).begin(), tmp.comp(0).end(), out.d1u1.raw().begin());
    std::copy(tmp.comp(1).begin(), tmp.comp(1).end(), out.d1u2.raw().begin());
    // axis 2
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const int k2s = signed_wavenumber(j, n);
            const double k2 = (j == n / 2) ? 0.0 : k2s;
            const auto p = static_cast<std::int64_t>(i) * n + j;
            z[p] = zhat[p] * std::complex<double>(0.0, two_pi * k2);
        }
    }
    inverse_packed(z, tmp);
    std::copy(tmp.comp(0).begin(), tmp.comp(0).end(), out.d2u1.raw().begin());
    std::copy(tmp.comp(1).begin(), tmp.comp(1).end(), out.d2u2.raw().begin());
}

void SpectralWorkspace::laplacian(const VectorField& f, VectorField& out) {
    require_finite(f, "laplacian");
    const int n = grid_.n;
    auto& z = impl_->scratch;
    forward_packed(f, z);
    for (int i = 0; i < n; ++i) {
        const double k1 = signed_wavenumber(i, n);
        for (int j = 0; j < n; ++j) {
            const double k2 = signed_wavenumber(j, n);
            z[static_cast<std::int64_t>(i) * n + j] *= -4.0 * std::numbers::pi * std::numbers::pi * (k1 * k1 + k2 * k2);
        }
    }
    inverse_packed(z, out);
}

void SpectralWorkspace::gradient(const VectorField& f, GradientField& out) {
    require_finite(f, "gradient");
    auto& z = impl_->scratch;
    forward_packed(f, z);
    auto zf = z;
    gradient_from_spectrum(zf, out);
}

SpectralRep SpectralWorkspace::forward_transform(const VectorField& u) {
    require_finite(u, "forward_transform");
    const int n = grid_.n;
    const auto m = grid_.nodes();
    std::vector<std::complex<double>> z;
    forward_packed(u, z);
    SpectralRep rep{grid_, std::vector<std::complex<double>>(m), std::vector<std::complex<double>>(m)};
    const double inv = 1.0 / static_cast<double>(m);
    // Unpack z = FFT(u1 + i u2):  u1hat(k) = (z(k) + conj(z(-k)))/2,
    // u2hat(k) = (z(k) - conj(z(-k)))/(2i), then normalize.
    for (int i = 0; i < n; ++i) {
        const int im = (n - i) % n;
        for (int j = 0; j < n; ++j) {
            const int jm = (n - j) % n;
            const auto p = static_cast<std::int64_t>(i) * n + j;
            const auto q = static_cast<std::int64_t>(im) * n + jm;
            const auto zp = z[p], zqc = std::conj(z[q]);
            rep.c1[p] = 0.5 * inv * (zp + zqc);
            rep.c2[p] = std::complex<double>(0.0, -0.5) * inv * (zp - zqc);
        }
    }
    return rep;
}

VectorField SpectralWorkspace::inverse_transform(const SpectralRep& rep) {
    if (rep.grid.n != grid_.n) throw std::invalid_argument("inverse_transform: grid mismatch");
    const auto m = grid_.nodes();
    auto& z = impl_->scratch;
    z.resize(m);
    const double scale = static_cast<double>(m);
    for (std::int64_t p = 0; p < m; ++p)
        z[p] = scale * (rep.c1[p] + std::complex<double>(0.0, 1.0) * rep.c2[p]);
    VectorField out(grid_);
    inverse_packed(z, out);
    return out;
}

VectorField heat_semigroup(const VectorField& f, double tau, double eps) {
    SpectralWorkspace ws(f.grid());
    VectorField out(f.grid());
    ws.heat(f, tau, eps, out);
    return out;
}

VectorField laplacian(const VectorField& f) {
    SpectralWorkspace ws(f.grid());
    VectorField out(f.grid());
    ws.laplacian(f, out);
    return out;
}

GradientField gradient(const VectorField& f) {
    SpectralWorkspace ws(f.grid());
    GradientField out;
    ws.gradient(f, out);
    return out;
}

}  // namespace glf
