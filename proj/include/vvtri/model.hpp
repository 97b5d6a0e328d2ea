#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "vvtri/errors.hpp"

namespace vv {

// A point in state space. Also used for tangent vectors and covectors,
// which all live in R^2 for this problem.
struct State {
    double u1 = 0.0;
    double u2 = 0.0;

    State& operator+=(const State& o) { u1 += o.u1; u2 += o.u2; return *this; }
    State& operator-=(const State& o) { u1 -= o.u1; u2 -= o.u2; return *this; }
    State& operator*=(double s) { u1 *= s; u2 *= s; return *this; }
    bool finite() const { return std::isfinite(u1) && std::isfinite(u2); }
};
using Vec2 = State;

inline State operator+(State a, const State& b) { return a += b; }
inline State operator-(State a, const State& b) { return a -= b; }
inline State operator-(const State& a) { return {-a.u1, -a.u2}; }
inline State operator*(double s, State a) { return a *= s; }
inline State operator*(State a, double s) { return a *= s; }
inline double dot(const State& a, const State& b) { return a.u1 * b.u1 + a.u2 * b.u2; }
inline double norm_inf(const State& a) { return std::max(std::abs(a.u1), std::abs(a.u2)); }
inline double norm1(const State& a) { return std::abs(a.u1) + std::abs(a.u2); }
inline double norm2(const State& a) { return std::hypot(a.u1, a.u2); }

struct Mat2 {
    double a11, a12, a21, a22;
    State operator*(const State& v) const { return {a11 * v.u1 + a12 * v.u2, a21 * v.u1 + a22 * v.u2}; }
};

using Coef = std::function<double(const State&)>;
using Grad = std::function<State(const State&)>;

// A(u) = [[lambda1(u1), 0], [g(u), lambda2(u)]] on the box K = {|u - u_star|_inf <= delta_box}.
struct TriangularSystem {
    std::string name;
    Coef lambda1;
    Coef lambda2;
    Coef g;
    Grad dlambda1;  // optional analytic gradients; empty means finite differences
    Grad dlambda2;
    Grad dg;
    State u_star;
    double delta_box = 0.5;
    double c = 0.5;

    Mat2 A(const State& u) const { return {lambda1(u), 0.0, g(u), lambda2(u)}; }
    bool in_box(const State& u, double scale = 1.0) const {
        return norm_inf(u - u_star) <= scale * delta_box * (1.0 + 1e-12);
    }
    State grad_lambda1(const State& u) const;
    State grad_lambda2(const State& u) const;
    State grad_g(const State& u) const;
};

struct Spectral {
    double lambda1, lambda2;
    State r1, r2;      // r1 = (1, h), r2 = (0, 1)
    State ell1, ell2;  // dual base: ell1 = (1, 0), ell2 = (-h, 1)
};

// Closed-form spectral data; no neighborhood check. Used inside solvers that
// police the neighborhood themselves.
Spectral spectral(const TriangularSystem& sys, const State& u);

// Checked version: OutOfNeighborhood outside K, DegenerateSpectrum if the
// eigenvalues are closer than 2c.
Spectral eigensystem(const TriangularSystem& sys, const State& u);

struct HyperbolicCertificate {
    double c_measured = 0.0;
    bool ok = false;
    State worst;  // state realizing the minimum gap
};

HyperbolicCertificate certify_hyperbolic(const TriangularSystem& sys, int samples);

// Lower-triangular entries with affine dependence on the state. Inline configs
// are restricted to this family.
struct AffineCoefficients {
    double l1_0 = -1, l1_1 = 0;            // lambda1 = l1_0 + l1_1*u1
    double l2_0 = 1, l2_1 = 0, l2_2 = 0;   // lambda2 = l2_0 + l2_1*u1 + l2_2*u2
    double g_0 = 0, g_1 = 0, g_2 = 0;      // g = g_0 + g_1*u1 + g_2*u2
};

TriangularSystem affine_system(const std::string& name, const AffineCoefficients& k, State u_star,
                               double delta_box, double c);

// "diag", "const-coupled", "burgers-triangular", "conservative-triangular",
// "scalar-burgers".
TriangularSystem builtin_system(const std::string& name);
std::vector<std::string> builtin_names();

}  // namespace vv
