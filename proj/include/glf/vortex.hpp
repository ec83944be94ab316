// Zero detection, degree computation, and temporal tracking for two-component
// fields on the torus.  Candidate cells are those where both components change
// sign; positions are refined by Newton iteration on the bilinear interpolant;
// degrees come from the winding number of the field along the 8-node loop of
// grid points surrounding the node nearest the refined zero.

#pragma once

#include <vector>

#include "glf/grid.hpp"
#include "glf/ode_flow.hpp"
#include "glf/spectral.hpp"

namespace glf {

// Distance on the unit torus (minimum over lattice shifts).
double torus_dist(Vec2 a, Vec2 b);
// Displacement a - b wrapped to [-1/2, 1/2)^2.
Vec2 torus_displacement(Vec2 a, Vec2 b);

struct Vortex {
    Vec2 pos;
    int degree = 0;
    double winding_residual = 0.0;  // |winding - nearest integer|; > 0.1 flags the set
};

struct VortexSet {
    std::vector<Vortex> zs;  // sorted lexicographically by position
    bool suspect = false;    // non-integer winding, unconverged Newton, or crowding
    int total_degree() const {
        int s = 0;
        for (const auto& z : zs) s += z.degree;
        return s;
    }
    double min_separation() const;  // min pairwise torus distance; +inf if < 2 zeros
};

VortexSet detect_zeros(const VectorField& u);

// Nearest-neighbor tracking in the torus metric.  add() throws on zero-count
// changes, on displacements > 10 eps per interval, and on ambiguous matches
// (second-nearest within factor 1.2 of nearest), naming the violating time.
struct TrackPoint {
    double t = 0.0;
    Vec2 pos;
    int degree = 0;
    double drift = 0.0;  // torus distance to the track's initial position
};

struct TrackRecord {
    std::vector<int> initial_degrees;
    std::vector<Vec2> initial_positions;
    std::vector<std::vector<TrackPoint>> points;  // [track][observation]
    double max_drift = 0.0;
    bool degrees_conserved() const;
    double drift_at(double t) const;  // max over tracks of drift at the sample nearest t
};

class Tracker {
  public:
    explicit Tracker(double eps) : eps_(eps) {}
    void add(double t, const VortexSet& vs);
    bool started() const { return started_; }
    const TrackRecord& record() const { return rec_; }

  private:
    double eps_;
    bool started_ = false;
    std::vector<Vec2> last_;
    TrackRecord rec_;
};

// Nondegeneracy certificate for initial data:
//   alpha0 = min over nodes of |u0| + |det grad u0|   (spectral gradient),
// plus the zero set, the determinant at each zero, and separation data
// (r0 = 1/3 of the minimum pairwise zero distance, beta0 = min |u0| outside
// the r0-disks).  pass requires alpha0 >= 1e-3.
struct InitialDataCertificate {
    double alpha0 = 0.0;
    bool pass = false;
    VortexSet zeros;
    std::vector<double> det_at_zeros;
    double beta0 = 0.0;
    double r0 = 0.0;
};

InitialDataCertificate certify_initial_data(const VectorField& u0);
InitialDataCertificate certify_initial_data(const VectorField& u0, SpectralWorkspace& ws);

// Modulus recovery outside shrinking disks: checks |u(x)| >= 1/2 at every node
// with dist(x, zeros) >= m * eps * sqrt(ln(1/eps)).  m_min is the smallest m
// that would make the check pass (0 if no node is below 1/2 anywhere).
struct BadDiskReport {
    double m_min = 0.0;
    double min_modulus_outside(double m) const;  // from the recorded scan
    bool pass(double m) const { return m >= m_min; }
    double disk_radius_unit = 0.0;  // eps * sqrt(ln(1/eps))
    // violating nodes, as (distance to zero set, modulus), for diagnostics
    std::vector<std::pair<double, double>> below_half;
};

BadDiskReport bad_disk_scan(const VectorField& u, const VortexSet& initial_zeros, double eps);
bool bad_disk_check(const VectorField& u, const VortexSet& initial_zeros, double eps, double m);

}  // namespace glf
