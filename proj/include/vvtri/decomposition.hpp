#pragma once

#include <array>
#include <vector>

#include "vvtri/model.hpp"
#include "vvtri/solver.hpp"

namespace vv {

class ManifoldCache;

// Scalar samples on the (t, x) grid of a GridField, row-major in t.
struct ScalarField {
    int nt = 0;
    int nx = 0;
    std::vector<double> v;

    void resize(int t, int x) { nt = t, nx = x, v.assign(static_cast<std::size_t>(t) * x, 0.0); }
    double& operator()(int n, int i) { return v[static_cast<std::size_t>(n) * nx + i]; }
    double operator()(int n, int i) const { return v[static_cast<std::size_t>(n) * nx + i]; }
};

// u_x = v1 tr1 + v2 r2 + p1 hr1 + p2 r2 and u_t = w1 tr1 + w2 r2, where
// tr1 = (1, m(u, v1, sigma1)) and hr1 = (1, f(u, p1)).
struct DecompFields {
    std::vector<double> x, t;
    double L = 0.0;
    double delta1 = 0.0;  // size of the data, measured on the field
    double delta_hat = 0.0;
    double c = 0.0;        // certified separation speed of the system
    double lambda1_star = 0.0;
    ScalarField v1, v2, p1, p2, w1, w2;
    ScalarField sigma1;
    ScalarField m, f;                // second components of tr1 and hr1
    ScalarField lambda1, lambda2, hat_lambda2;
    ScalarField s1_residual;         // defect of v2 in its transport equation
    ScalarField e;                   // defect of the w2 relation
    double v1_consistency = 0.0;     // sup |v1 from its own equation - (u1_x - p1)|
    double cutoff_fraction = 0.0;    // mass of |v1| where theta vanishes over the mass of |v1| + |p1|
};

struct DecomposeOptions {
    double delta_hat = 1.0 / 3.0;
    // delta_hat must exceed min_ratio * delta1
    double min_ratio = 10.0;
    // Data smaller than this are treated as exactly constant.
    double zero_floor = 1e-13;
    double max_cutoff_fraction = 0.5;
};

// theta(s): odd, equal to s on |s| <= dh, 0 on |s| >= 3 dh, quintic C^2 blend between.
double cutoff_theta(double s, double dh);

// The measured size of the data carried by a field: total variations of the
// initial row and of the two traces, and sup distance to u_star.
double field_delta1(const GridField& f, const State& u_star);

// Gradient decomposition of a finite-difference solution. p1, p2 and a
// reference v1 are obtained from their conservative transport equations on the
// stored grid; the stored v1 is u1_x - p1 and v2 closes the reconstruction.
// Raises InvalidArgument when delta_hat is outside (min_ratio delta1, 1/3] or the
// report diverged, CutoffDominates when theta vanishes on more than
// max_cutoff_fraction of the mass of |v1| + |p1|. The viscous part v1_x / v1 of the
// speed keeps the blending zone populated for any data size; the region where
// theta is zero grows with the drift of lambda1 away from lambda1(u_star).
DecompFields decompose(const TriangularSystem& sys, const SolveReport& report, const DecomposeOptions& opt = {});
DecompFields decompose(const TriangularSystem& sys, ManifoldCache& cache, const SolveReport& report,
                       const DecomposeOptions& opt = {});

struct SourceBudget {
    double integral_s1 = 0.0;
    double integral_s2 = 0.0;
    // Time integrals of the boundary fluxes:
    // |v2_x - l2 v2|(0), |v1_x - l1 v1|(L), |p1_x - l1 p1|(0), |p1_x - l1 p1|(L),
    // |p2_x - hl2 p2|(0), |p2_x - hl2 p2|(L).
    std::array<double, 6> boundary_integrals{};
    double e_integral = 0.0;
    double e_boundary0 = 0.0;  // int |e(s, 0)| ds
    // Integrals of the five groups in the pointwise bound of the sources.
    double interaction = 0.0;
    double wave_layer = 0.0;
    double layer_layer = 0.0;
    double sigma_variation = 0.0;
    double cutoff_active = 0.0;
    double termwise_total() const { return interaction + wave_layer + layer_layer + sigma_variation + cutoff_active; }
};

SourceBudget source_budget(const DecompFields& d);

struct DecayCheck {
    double C1 = 0.0;
    double C2 = 0.0;
    bool ok = false;
};

// Envelope prefactors of |p1| <= C1 delta1 e^{-c x / 2} and |p2| <= C2 delta1 e^{c (x - L) / 2} over all t.
DecayCheck exp_decay_check(const DecompFields& d, double c_max = 20.0);

struct TimeIntegrability {
    std::vector<double> y;
    // Per column y: int |v_i| ds, int |v_ix| ds, int |w_i| ds, int |w_ix| ds for i = 1, 2.
    std::array<std::vector<double>, 8> columns;
    double C = 0.0;  // largest entry divided by delta1
};

TimeIntegrability time_integrability_check(const DecompFields& d);

}  // namespace vv
