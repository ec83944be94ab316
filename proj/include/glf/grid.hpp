// Uniform periodic grid on the unit torus [0,1)^2 and the field containers
// used throughout: two-component real vector fields u = (u1,u2), scalar
// fields, and 2x2 gradient fields.  Node (i,j) sits at x = (i/n, j/n);
// storage is component-major, then row-major in i (x1) with j (x2) fastest.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace glf {

struct GridSpec {
    int n = 0;  // nodes per side; even, >= 16

    double spacing() const { return 1.0 / n; }
    std::int64_t nodes() const { return static_cast<std::int64_t>(n) * n; }
    bool valid() const { return n >= 16 && n % 2 == 0; }
    void require_valid() const;  // throws std::invalid_argument

    bool operator==(const GridSpec&) const = default;
};

// Signed wavenumber for index i along one axis: k in {-n/2, ..., n/2-1}.
inline int signed_wavenumber(int i, int n) { return i < n / 2 ? i : i - n; }

// Two-component real field, 2*n*n doubles.
class VectorField {
  public:
    VectorField() = default;
    explicit VectorField(GridSpec g);

    const GridSpec& grid() const { return grid_; }
    int n() const { return grid_.n; }

    double& at(int comp, int i, int j) { return v_[idx(comp, i, j)]; }
    double at(int comp, int i, int j) const { return v_[idx(comp, i, j)]; }

    std::span<double> comp(int c) { return {v_.data() + c * grid_.nodes(), static_cast<std::size_t>(grid_.nodes())}; }
    std::span<const double> comp(int c) const { return {v_.data() + c * grid_.nodes(), static_cast<std::size_t>(grid_.nodes())}; }

    std::span<double> raw() { return v_; }
    std::span<const double> raw() const { return v_; }

    bool all_finite() const;

    bool operator==(const VectorField&) const = default;

  private:
    std::int64_t idx(int comp, int i, int j) const {
        return comp * grid_.nodes() + static_cast<std::int64_t>(i) * grid_.n + j;
    }

    GridSpec grid_;
    std::vector<double> v_;
};

class ScalarField {
  public:
    ScalarField() = default;
    explicit ScalarField(GridSpec g);

    const GridSpec& grid() const { return grid_; }
    int n() const { return grid_.n; }

    double& at(int i, int j) { return v_[static_cast<std::int64_t>(i) * grid_.n + j]; }
    double at(int i, int j) const { return v_[static_cast<std::int64_t>(i) * grid_.n + j]; }

    std::span<double> raw() { return v_; }
    std::span<const double> raw() const { return v_; }

  private:
    GridSpec grid_;
    std::vector<double> v_;
};

// Gradient of a two-component field: planes in the order
// (d1 u1, d2 u1, d1 u2, d2 u2).
struct GradientField {
    ScalarField d1u1, d2u1, d1u2, d2u2;
    const GridSpec& grid() const { return d1u1.grid(); }

    // Frobenius norm squared of the 2x2 matrix at a node.
    double frob2(int i, int j) const {
        double a = d1u1.at(i, j), b = d2u1.at(i, j);
        double c = d1u2.at(i, j), d = d2u2.at(i, j);
        return a * a + b * b + c * c + d * d;
    }
};

double sup_norm(const VectorField& f);               // max_x |f(x)| (euclidean modulus)
double min_modulus(const VectorField& f);            // min_x |f(x)|
ScalarField pointwise_modulus(const VectorField& f); // |f(x)| per node
double mean(std::span<const double> values);

// Snapshot file: magic "GLF1", u64 n, f64 t, f64 eps, then 2n^2 f64
// little-endian, component-major then row-major.
void write_snapshot(const std::string& path, const VectorField& u, double t, double eps);
struct Snapshot {
    VectorField u;
    double t = 0.0;
    double eps = 0.0;
};
Snapshot read_snapshot(const std::string& path);

}  // namespace glf
