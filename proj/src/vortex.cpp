#include "glf/vortex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace glf {

namespace {

double wrap_unit(double x) {
    x -= std::floor(x);
    return x >= 1.0 ? x - 1.0 : x;
}

double wrap_half(double d) {
    d -= std::round(d);
    return d;
}

}  // namespace

Vec2 torus_displacement(Vec2 a, Vec2 b) { return {wrap_half(a.x - b.x), wrap_half(a.y - b.y)}; }

double torus_dist(Vec2 a, Vec2 b) { return torus_displacement(a, b).norm(); }

double VortexSet::min_separation() const {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < zs.size(); ++a)
        for (std::size_t b = a + 1; b < zs.size(); ++b)
            m = std::min(m, torus_dist(zs[a].pos, zs[b].pos));
    return m;
}

namespace {

struct Candidate {
    Vec2 pos;        // refined position in [0,1)^2
    double residual; // bilinear |f| at the accepted iterate, relative to corner scale
    bool converged;
};

// Newton on the bilinear interpolant of one cell.  Local coordinates
// (s,t) in [0,1]^2; iterates confined to one cell diameter around the cell.
bool newton_in_cell(const double a1[4], const double a2[4], double& s, double& t, double& rel_res) {
    // f(s,t) = c00 + c10 s + c01 t + c11 s t  per component
    const double c00[2] = {a1[0], a2[0]};
    const double c10[2] = {a1[1] - a1[0], a2[1] - a2[0]};
    const double c01[2] = {a1[2] - a1[0], a2[2] - a2[0]};
    const double c11[2] = {a1[0] - a1[1] - a1[2] + a1[3], a2[0] - a2[1] - a2[2] + a2[3]};
    double scale = 0.0;
    for (int k = 0; k < 4; ++k) scale = std::max({scale, std::abs(a1[k]), std::abs(a2[k])});
    if (scale == 0.0) return false;  // flat-zero cell: degenerate, refuse
    s = 0.5;
    t = 0.5;
    const double tol = 1e-10;
    for (int it = 0; it < 20; ++it) {
        const double f1 = c00[0] + c10[0] * s + c01[0] * t + c11[0] * s * t;
        const double f2 = c00[1] + c10[1] * s + c01[1] * t + c11[1] * s * t;
        const double j11 = c10[0] + c11[0] * t, j12 = c01[0] + c11[0] * s;
        const double j21 = c10[1] + c11[1] * t, j22 = c01[1] + c11[1] * s;
        const double det = j11 * j22 - j12 * j21;
        if (det == 0.0) return false;
        const double ds = (f1 * j22 - f2 * j12) / det;
        const double dtt = (j11 * f2 - j21 * f1) / det;
        s -= ds;
        t -= dtt;
        s = std::clamp(s, -0.5, 1.5);
        t = std::clamp(t, -0.5, 1.5);
        if (std::abs(ds) < tol && std::abs(dtt) < tol) {
            const double g1 = c00[0] + c10[0] * s + c01[0] * t + c11[0] * s * t;
            const double g2 = c00[1] + c10[1] * s + c01[1] * t + c11[1] * s * t;
            rel_res = std::hypot(g1, g2) / scale;
            return true;
        }
    }
    return false;
}

// Winding number of u along the counterclockwise 8-node loop around node
// (ic, jc): sum of angle increments wrapped to (-pi, pi], divided by 2 pi.
double winding_at_node(const VectorField& u, int ic, int jc, bool& degenerate) {
    static const int off[8][2] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}};
    const int n = u.n();
    double angles[8];
    degenerate = false;
    for (int k = 0; k < 8; ++k) {
        const int i = (ic + off[k][0] + n) % n;
        const int j = (jc + off[k][1] + n) % n;
        const double a = u.at(0, i, j), b = u.at(1, i, j);
        if (a == 0.0 && b == 0.0) {
            degenerate = true;
            return 0.0;
        }
        angles[k] = std::atan2(b, a);
    }
    double total = 0.0;
    for (int k = 0; k < 8; ++k) {
        double d = angles[(k + 1) % 8] - angles[k];
        if (d > std::numbers::pi) d -= 2.0 * std::numbers::pi;
        if (d <= -std::numbers::pi) d += 2.0 * std::numbers::pi;
        total += d;
    }
    return total / (2.0 * std::numbers::pi);
}

}  // namespace

VortexSet detect_zeros(const VectorField& u) {
    if (!u.all_finite()) throw std::invalid_argument("detect_zeros: non-finite field");
    const int n = u.n();
    const double h = u.grid().spacing();
    VortexSet out;
    std::vector<Candidate> cands;

    for (int i = 0; i < n; ++i) {
        const int ip = (i + 1) % n;
        for (int j = 0; j < n; ++j) {
            const int jp = (j + 1) % n;
            // corners in bilinear order: (0,0), (1,0), (0,1), (1,1) in (s,t)
            const double a1[4] = {u.at(0, i, j), u.at(0, ip, j), u.at(0, i, jp), u.at(0, ip, jp)};
            const double a2[4] = {u.at(1, i, j), u.at(1, ip, j), u.at(1, i, jp), u.at(1, ip, jp)};
            auto crosses = [](const double a[4]) {
                double lo = std::min(std::min(a[0], a[1]), std::min(a[2], a[3]));
                double hi = std::max(std::max(a[0], a[1]), std::max(a[2], a[3]));
                return lo <= 0.0 && hi >= 0.0;
            };
            if (!crosses(a1) || !crosses(a2)) continue;
            double scale = 0.0;
            for (int k = 0; k < 4; ++k) scale = std::max({scale, std::abs(a1[k]), std::abs(a2[k])});
            if (scale == 0.0) {
                out.suspect = true;  // flat-zero cell: genuinely degenerate data
                continue;
            }
            double s, t, rel_res = 0.0;
            if (!newton_in_cell(a1, a2, s, t, rel_res)) {
                // sign changes in both components but the bilinear interpolant
                // has no common zero here; benign near-miss cell
                continue;
            }
            if (rel_res > 1e-6) continue;  // interpolant does not actually vanish here
            cands.push_back({{wrap_unit((i + s) * h), wrap_unit((j + t) * h)}, rel_res, true});
        }
    }

    // The same zero is typically found from up to four adjacent cells (exact
    // node zeros in particular); merge clusters within one grid spacing.
    std::vector<bool> used(cands.size(), false);
    for (std::size_t a = 0; a < cands.size(); ++a) {
        if (used[a]) continue;
        Candidate best = cands[a];
        used[a] = true;
        for (std::size_t b = a + 1; b < cands.size(); ++b) {
            if (used[b]) continue;
            if (torus_dist(cands[b].pos, best.pos) < 1.0 * h) {
                used[b] = true;
                if (cands[b].residual < best.residual) best = cands[b];
            }
        }
        Vortex v;
        v.pos = best.pos;
        const int ic = static_cast<int>(std::lround(best.pos.x / h)) % n;
        const int jc = static_cast<int>(std::lround(best.pos.y / h)) % n;
        bool degen = false;
        const double w = winding_at_node(u, ic, jc, degen);
        v.winding_residual = std::abs(w - std::round(w));
        v.degree = static_cast<int>(std::lround(w));
        if (degen || v.winding_residual > 0.1) out.suspect = true;
        out.zs.push_back(v);
    }

    std::sort(out.zs.begin(), out.zs.end(), [](const Vortex& a, const Vortex& b) {
        return a.pos.x != b.pos.x ? a.pos.x < b.pos.x : a.pos.y < b.pos.y;
    });
    if (out.zs.size() >= 2 && out.min_separation() <= 2.0 * h) out.suspect = true;  // under-resolved
    return out;
}

bool TrackRecord::degrees_conserved() const {
    for (std::size_t j = 0; j < points.size(); ++j)
        for (const auto& p : points[j])
            if (p.degree != initial_degrees[j]) return false;
    return true;
}

double TrackRecord::drift_at(double t) const {
    double worst = 0.0;
    for (const auto& track : points) {
        if (track.empty()) continue;
        const TrackPoint* best = &track.front();
        for (const auto& p : track)
            if (std::abs(p.t - t) < std::abs(best->t - t)) best = &p;
        worst = std::max(worst, best->drift);
    }
    return worst;
}

void Tracker::add(double t, const VortexSet& vs) {
    if (!started_) {
        started_ = true;
        for (const auto& z : vs.zs) {
            rec_.initial_degrees.push_back(z.degree);
            rec_.initial_positions.push_back(z.pos);
            rec_.points.push_back({TrackPoint{t, z.pos, z.degree, 0.0}});
            last_.push_back(z.pos);
        }
        return;
    }
    if (vs.zs.size() != last_.size())
        throw std::runtime_error("track: zero count changed from " + std::to_string(last_.size()) +
                                 " to " + std::to_string(vs.zs.size()) + " at t=" + std::to_string(t));
    std::vector<int> claimed(vs.zs.size(), -1);
    for (std::size_t j = 0; j < last_.size(); ++j) {
        double d1 = std::numeric_limits<double>::infinity(), d2 = d1;
        int best = -1;
        for (std::size_t k = 0; k < vs.zs.size(); ++k) {
            const double d = torus_dist(vs.zs[k].pos, last_[j]);
            if (d < d1) {
                d2 = d1;
                d1 = d;
                best = static_cast<int>(k);
            } else if (d < d2) {
                d2 = d;
            }
        }
        if (vs.zs.size() > 1 && d2 < 1.2 * d1)
            throw std::runtime_error("track: ambiguous match (second-nearest within factor 1.2) at t=" +
                                     std::to_string(t));
        if (d1 > 10.0 * eps_)
            throw std::runtime_error("track: displacement " + std::to_string(d1) + " exceeds 10*eps at t=" +
                                     std::to_string(t));
        if (claimed[best] >= 0)
            throw std::runtime_error("track: two tracks claim one zero at t=" + std::to_string(t));
        claimed[best] = static_cast<int>(j);
        const double drift = torus_dist(vs.zs[best].pos, rec_.initial_positions[j]);
        rec_.points[j].push_back({t, vs.zs[best].pos, vs.zs[best].degree, drift});
        rec_.max_drift = std::max(rec_.max_drift, drift);
    }
    for (std::size_t j = 0; j < last_.size(); ++j) last_[j] = rec_.points[j].back().pos;
}

namespace {

InitialDataCertificate certify_impl(const VectorField& u0, SpectralWorkspace& ws) {
    InitialDataCertificate cert;
    GradientField gr;
    ws.gradient(u0, gr);
    const int n = u0.n();
    double alpha0 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double mod = std::hypot(u0.at(0, i, j), u0.at(1, i, j));
            const double det =
                gr.d1u1.at(i, j) * gr.d2u2.at(i, j) - gr.d2u1.at(i, j) * gr.d1u2.at(i, j);
            alpha0 = std::min(alpha0, mod + std::abs(det));
        }
    }
    cert.alpha0 = alpha0;
    cert.pass = alpha0 >= 1e-3;
    cert.zeros = detect_zeros(u0);

    // determinant at each zero via bilinear interpolation of the det field
    const double h = u0.grid().spacing();
    for (const auto& z : cert.zeros.zs) {
        const double fi = z.pos.x / h, fj = z.pos.y / h;
        const int i = static_cast<int>(std::floor(fi)) % n, j = static_cast<int>(std::floor(fj)) % n;
        const double s = fi - std::floor(fi), t = fj - std::floor(fj);
        const int ip = (i + 1) % n, jp = (j + 1) % n;
        auto det_at = [&](int a, int b) {
            return gr.d1u1.at(a, b) * gr.d2u2.at(a, b) - gr.d2u1.at(a, b) * gr.d1u2.at(a, b);
        };
        cert.det_at_zeros.push_back((1 - s) * (1 - t) * det_at(i, j) + s * (1 - t) * det_at(ip, j) +
                                    (1 - s) * t * det_at(i, jp) + s * t * det_at(ip, jp));
    }

    if (cert.zeros.zs.empty()) {
        cert.r0 = 0.0;
        cert.beta0 = min_modulus(u0);
    } else {
        const double minsep = cert.zeros.zs.size() >= 2 ? cert.zeros.min_separation() : 0.5;
        cert.r0 = minsep / 3.0;
        double beta0 = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const Vec2 x{i * h, j * h};
                double d = std::numeric_limits<double>::infinity();
                for (const auto& z : cert.zeros.zs) d = std::min(d, torus_dist(x, z.pos));
                if (d >= cert.r0)
                    beta0 = std::min(beta0, std::hypot(u0.at(0, i, j), u0.at(1, i, j)));
            }
        }
        cert.beta0 = beta0;
    }
    return cert;
}

}  // namespace

InitialDataCertificate certify_initial_data(const VectorField& u0, SpectralWorkspace& ws) {
    return certify_impl(u0, ws);
}

InitialDataCertificate certify_initial_data(const VectorField& u0) {
    SpectralWorkspace ws(u0.grid());
    return certify_impl(u0, ws);
}

BadDiskReport bad_disk_scan(const VectorField& u, const VortexSet& initial_zeros, double eps) {
    BadDiskReport rep;
    rep.disk_radius_unit = eps * std::sqrt(std::log(1.0 / eps));
    const int n = u.n();
    const double h = u.grid().spacing();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double mod = std::hypot(u.at(0, i, j), u.at(1, i, j));
            if (mod >= 0.5) continue;
            const Vec2 x{i * h, j * h};
            double d = std::numeric_limits<double>::infinity();
            for (const auto& z : initial_zeros.zs) d = std::min(d, torus_dist(x, z.pos));
            rep.below_half.emplace_back(d, mod);
            rep.m_min = std::max(rep.m_min, std::nextafter(d / rep.disk_radius_unit,
                                                          std::numeric_limits<double>::infinity()));
        }
    }
    return rep;
}

double BadDiskReport::min_modulus_outside(double m) const {
    double worst = 1.0;  // only nodes below 1/2 were recorded; outside those, >= 1/2 by scan
    for (const auto& [d, mod] : below_half)
        if (d >= m * disk_radius_unit) worst = std::min(worst, mod);
    return worst;
}

bool bad_disk_check(const VectorField& u, const VortexSet& initial_zeros, double eps, double m) {
    return bad_disk_scan(u, initial_zeros, eps).pass(m);
}

}  // namespace glf
