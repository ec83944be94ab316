#include "glf/grid.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace glf {

void GridSpec::require_valid() const {
    if (!valid())
        throw std::invalid_argument("grid: n must be even and >= 16, got n=" + std::to_string(n));
}

VectorField::VectorField(GridSpec g) : grid_(g), v_(2 * g.nodes(), 0.0) { g.require_valid(); }

ScalarField::ScalarField(GridSpec g) : grid_(g), v_(g.nodes(), 0.0) { g.require_valid(); }

bool VectorField::all_finite() const {
    for (double x : v_)
        if (!std::isfinite(x)) return false;
    return true;
}

double sup_norm(const VectorField& f) {
    const auto u1 = f.comp(0), u2 = f.comp(1);
    double m = 0.0;
    for (std::size_t p = 0; p < u1.size(); ++p)
        m = std::max(m, u1[p] * u1[p] + u2[p] * u2[p]);
    return std::sqrt(m);
}

double min_modulus(const VectorField& f) {
    const auto u1 = f.comp(0), u2 = f.comp(1);
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < u1.size(); ++p)
        m = std::min(m, u1[p] * u1[p] + u2[p] * u2[p]);
    return std::sqrt(m);
}

ScalarField pointwise_modulus(const VectorField& f) {
    ScalarField out(f.grid());
    const auto u1 = f.comp(0), u2 = f.comp(1);
    auto o = out.raw();
    for (std::size_t p = 0; p < u1.size(); ++p)
        o[p] = std::hypot(u1[p], u2[p]);
    return out;
}

double mean(std::span<const double> values) {
    double s = 0.0;
    for (double x : values) s += x;
    return s / static_cast<double>(values.size());
}

namespace {

static_assert(sizeof(double) == 8);

void put_u64(std::ostream& os, std::uint64_t x) {
    unsigned char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(x >> (8 * k));
    os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double x) { put_u64(os, std::bit_cast<std::uint64_t>(x)); }

std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t x = 0;
    for (int k = 0; k < 8; ++k) x |= static_cast<std::uint64_t>(b[k]) << (8 * k);
    return x;
}

double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

}  // namespace

void write_snapshot(const std::string& path, const VectorField& u, double t, double eps) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("snapshot: cannot open for write: " + path);
    os.write("GLF1", 4);
    put_u64(os, static_cast<std::uint64_t>(u.n()));
    put_f64(os, t);
    put_f64(os, eps);
    if constexpr (std::endian::native == std::endian::little) {
        os.write(reinterpret_cast<const char*>(u.raw().data()), u.raw().size() * sizeof(double));
    } else {
        for (double x : u.raw()) put_f64(os, x);
    }
    if (!os) throw std::runtime_error("snapshot: write failed: " + path);
}

Snapshot read_snapshot(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("snapshot: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "GLF1", 4) != 0)
        throw std::runtime_error("snapshot: bad magic in " + path);
    const auto n64 = get_u64(is);
    if (n64 == 0 || n64 > (1u << 16)) throw std::runtime_error("snapshot: implausible n in " + path);
    Snapshot s;
    s.t = get_f64(is);
    s.eps = get_f64(is);
    s.u = VectorField(GridSpec{static_cast<int>(n64)});
    if constexpr (std::endian::native == std::endian::little) {
        is.read(reinterpret_cast<char*>(s.u.raw().data()), s.u.raw().size() * sizeof(double));
    } else {
        for (double& x : s.u.raw()) x = get_f64(is);
    }
    if (!is) throw std::runtime_error("snapshot: truncated file " + path);
    return s;
}

}  // namespace glf
