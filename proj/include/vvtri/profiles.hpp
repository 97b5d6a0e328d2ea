#pragma once

#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include "vvtri/model.hpp"

namespace vv {

enum class LayerFamily { Stable, Unstable };

// Orbit of u' = p, p' = A(u) p sampled on x. Stable orbits live on [0, x_max]
// and decay as x grows; unstable ones live on [-x_max, 0] and decay as x
// decreases.
struct LayerOrbit {
    std::vector<double> x;
    std::vector<State> u;
    std::vector<Vec2> p;
    LayerFamily family = LayerFamily::Stable;
    State limit;              // the equilibrium the orbit converges to
    double decay_rate = 0.0;  // slope of log|p| on the half of the orbit away from x = 0
};

// Stable boundary layer converging to u_bar with p1(0) = p1_0. The orbit is
// started at x_max on the local stable manifold of (u_bar, 0) and integrated
// backward; the starting amplitude is fixed by linear shooting plus secant
// passes. NoConvergence if the orbit leaves K or |p1_0| > delta_box / 4.
LayerOrbit stable_layer(const TriangularSystem& sys, const State& u_bar, double p1_0, double x_max = 0.0,
                        int samples = 801);

// Unstable layer on [-x_max, 0] converging to u_bar as x -> -inf with p2(0) = p2_0.
// Triangularity makes p1 vanish on it, so only u2 moves.
LayerOrbit unstable_layer(const TriangularSystem& sys, const State& u_bar, double p2_0, double x_max = 0.0,
                          int samples = 801);

// Center-stable manifold p = p1 (1, f(u, p1)). Computed by shooting the orbit
// through (u, p1); f(u, 0) is the closed form g / (lambda1 - lambda2).
double manifold_f(const TriangularSystem& sys, const State& u, double p1);
Vec2 hat_r1(const TriangularSystem& sys, const State& u, double p1);
// Dual covector of (hat r1, r2) with <hat ell2, r2> = 1.
Vec2 hat_ell2(const TriangularSystem& sys, const State& u, double p1);
// lambda2 - p1 <hat ell2, D hat r1 r2>; here <hat ell2, D hat r1 r2> = df/du2.
double hat_lambda2(const TriangularSystem& sys, const State& u, double p1);

// First-order center-manifold vector of the travelling-wave system:
// m = m0 + v1 (D m0 r1) / (lambda2 - 2 lambda1 + sigma1), m0 = g / (lambda1 - lambda2).
Vec2 tilde_r1(const TriangularSystem& sys, const State& u, double v1, double sigma1);

// Lattice memo of f over K x [-delta_box/4, delta_box/4], filled lazily.
// Stores f - f(u, 0) so that hat r1(u, 0) = r1(u) holds exactly after
// trilinear interpolation. Safe for concurrent callers.
class ManifoldCache {
public:
    explicit ManifoldCache(const TriangularSystem& sys, int nu = 9, int np = 9);
    double f(const State& u, double p1);
    Vec2 hat_r1(const State& u, double p1) { return {1.0, f(u, p1)}; }
    double hat_lambda2(const State& u, double p1);
    std::size_t filled() const;

private:
    double node(int i, int j, int k);
    const TriangularSystem& sys_;
    int nu_, np_;
    double pmax_;
    mutable std::mutex mutex_;
    std::map<std::tuple<int, int, int>, double> table_;
};

struct DoubleProfile {
    std::vector<double> x;
    std::vector<State> z;
    std::vector<double> p1;
    std::vector<double> p2;
    State Ub0, UbL;
    double mismatch = 0.0;  // |z(L) - UbL|_inf at exit
    int iterations = 0;
};

struct DoubleProfileOptions {
    int n = 2001;
    double tol = 1e-12;
    int max_iter = 60;
};

// Two-point problem z_x = p1 hat r1(z, p1) + p2 r2, p1_x = lambda1(z) p1,
// p2_x = hat lambda2(z, p1) p2, z(0) = Ub0, z(L) = UbL. Picard iteration on z
// with a 2x2 Newton correction of (p1(0), p2(L)); cell integrals of p are
// exact for exponentials. NoContraction when the iteration stalls.
DoubleProfile double_profile(const TriangularSystem& sys, const State& Ub0, const State& UbL, double L,
                             const DoubleProfileOptions& opt = {});
DoubleProfile double_profile(const TriangularSystem& sys, ManifoldCache& cache, const State& Ub0, const State& UbL,
                             double L, const DoubleProfileOptions& opt = {});

// Least-squares slope and R^2 of log|v| against x over the samples where |v| > floor.
struct LogFit {
    double slope = 0.0;
    double r2 = 0.0;
};
LogFit log_linear_fit(const std::vector<double>& x, const std::vector<double>& v, std::size_t from, std::size_t to,
                      double floor = 1e-300);

}  // namespace vv
