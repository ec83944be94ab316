// Generators of certified initial data.  Every generator returns the field
// together with its nondegeneracy certificate; a datum that cannot be
// certified is an error, never a silent return.
//
// Kinds:
//   constant                  u = const vector (trivial certificate)
//   product_sine              (sin 2pi x1, sin 2pi x2): 4 zeros, degrees +-+1
//   zero_free_winding         (cos 2pi x1, sin 2pi x1): unit modulus, no zeros
//   prescribed_vortices       product of mollified degree-+-1 dipole profiles
//                             at prescribed positions (degrees must sum to 0)
//   random_fourier_highenergy band-limited noise (wavenumbers in [n/8, n/4])
//                             superposed on a certified base, amplitude chosen
//                             so E_eps(u0) hits a target while the certificate
//                             still passes; deterministic in the seed

#pragma once

#include <cstdint>
#include <vector>

#include "glf/grid.hpp"
#include "glf/vortex.hpp"

namespace glf {

enum class DatumKind {
    constant,
    product_sine,
    prescribed_vortices,
    random_fourier_highenergy,
    zero_free_winding,
};

struct PrescribedVortex {
    Vec2 pos;
    int degree = 1;  // +1 or -1
};

struct DatumSpec {
    DatumKind kind = DatumKind::product_sine;

    // constant
    Vec2 constant_value{1.0, 0.0};

    // prescribed_vortices; empty means the standard 4-vortex configuration
    std::vector<PrescribedVortex> vortices;
    double core_width = 0.05;  // vortex core length scale of the local profile

    // random_fourier_highenergy
    DatumKind base_kind = DatumKind::zero_free_winding;  // base the noise rides on
    double energy_target = 0.0;                          // E_eps(u0) to reach; > 0 required
    int noise_modes = 128;                               // Fourier modes per component
    std::uint64_t seed = 20260823;
};

// The standard asymmetric 4-vortex configuration (degrees +1, -1, -1, +1).
std::vector<PrescribedVortex> standard_four_vortices();

struct MadeDatum {
    VectorField u0;
    InitialDataCertificate cert;
    double achieved_energy = 0.0;  // E_eps(u0); meaningful for the random kind
    int retries = 0;               // noise-amplitude reductions before certification
};

// Build the datum on the grid and certify it.  eps enters the certificate
// thresholds and the energy of the random kind.  Throws std::runtime_error
// carrying the failing alpha0 if certification fails (after retries for the
// random kind).
MadeDatum make_datum(const DatumSpec& spec, GridSpec grid, double eps);

}  // namespace glf
