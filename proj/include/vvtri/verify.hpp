#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vvtri/decomposition.hpp"
#include "vvtri/model.hpp"
#include "vvtri/solver.hpp"

namespace vv {

// ---------------------------------------------------------------- stability

// L1 distance between two data triples: initial data on [0, L] plus both
// boundary data on [0, T], by the trapezoid rule on `samples` points.
double data_distance(const DataTriple& a, const DataTriple& b, double L, double T, int samples = 4001);

struct StabilityPair {
    std::string label;
    double data_distance = 0.0;
    std::vector<double> t;
    std::vector<double> ratio;  // |u(t) - v(t)|_1 / data_distance
    double max_ratio = 0.0;
    bool degenerate = false;    // identical data; excluded from the constants
};

struct StabilityReport {
    std::vector<StabilityPair> pairs;
    double L1_const = 0.0;
    // |u(t) - u(s)|_1 <= L2 (|t - s| + |sqrt t - sqrt s|) fitted on the base run.
    double L2_const = 0.0;
    int modulus_pairs = 0;
};

struct StabilityOptions {
    double L = 8.0;
    double T = 2.0;
    double eps = 0.0;  // 0 runs the unit-viscosity problem on (0, L), otherwise solve_eps on (0, L)
    FdOptions fd;
    int modulus_levels = 6;  // time ladder T 2^-k, k = 0..levels-1, plus t = 0
};

struct LabelledData {
    std::string label;
    DataTriple data;
};

StabilityReport stability_experiment(const TriangularSystem& sys, const DataTriple& base,
                                     const std::vector<LabelledData>& perturbed, const StabilityOptions& opt = {});

// -------------------------------------------------------------- convergence

struct ConvergenceOptions {
    double l = 1.0;
    FdOptions fd;     // grid options in the rescaled variables
    int samples = 2001;  // comparison grid on [0, l]
};

struct ConvergenceReport {
    std::vector<double> eps;
    std::vector<double> gaps;  // |u^{eps_k} - u^{eps_k+1}|_1 at t_eval
    bool cauchy_ok = false;    // gaps decrease up to 10% noise
    double slope = 0.0;        // of log gap against log eps
    std::vector<double> x;     // comparison grid
    std::vector<State> limit;  // Richardson extrapolation of the two finest runs
    double limit_error = 0.0;  // finest gap
};

ConvergenceReport convergence_experiment(const TriangularSystem& sys, const DataTriple& data,
                                         const std::vector<double>& eps_ladder, double t_eval,
                                         const ConvergenceOptions& opt = {});

// L1 distance of the two limits against the smaller of the two finest gaps.
struct LadderAgreement {
    double distance = 0.0;
    double finest_gap = 0.0;
    bool ok = false;
};
LadderAgreement ladders_agree(const ConvergenceReport& a, const ConvergenceReport& b);

// Extrapolated limit 2 u^{eps} - u^{2 eps} resampled on a uniform (t, x) grid.
struct LimitField {
    GridField field;
    double eps = 0.0;
    double error_estimate = 0.0;  // sup over t of |u^{eps} - u^{2 eps}|_1
};

LimitField extrapolated_limit(const TriangularSystem& sys, const DataTriple& data, double l, double T, double eps,
                              int nt_out, int nx_out, const FdOptions& fd = {});

// -------------------------------------------------------------- functionals

struct FunctionalTrace {
    std::vector<double> t;
    std::vector<double> Q;            // int int P(x - y) |v1(x)| |v2(y)|
    std::vector<double> area;         // 1/2 int int_{y <= x} |v1(x) w1(y) - v1(y) w1(x)|
    std::vector<double> length;       // int sqrt(v1^2 + w1^2)
    std::vector<double> weighted_v1;  // int |v1| P_y with the weight open towards x = 0, y = L / 2
    std::vector<double> weighted_v2;  // int |v2| P_y with the weight open towards x = L, y = L / 2
    double interaction = 0.0;         // int int |v1| |v2| dx dt
    double q_drop = 0.0;              // total decrease of Q
    double area_increase = 0.0;
    double length_increase = 0.0;
    double budget = 0.0;              // measured sources plus boundary fluxes
    bool near_monotone = false;       // both increases within the budget
};

// P(xi) = e^{c xi} / 2c for xi < 0 and 1 / 2c otherwise.
double interaction_weight(double xi, double c);

// Evaluates every `stride`-th stored row; stride 0 picks one that keeps at most 200 rows.
FunctionalTrace functionals_trace(const DecompFields& d, int stride = 0);

// Q on one row in O(nx) by a running exponential sum.
double interaction_potential(const std::vector<double>& x, const std::vector<double>& a, const std::vector<double>& b,
                             double c);

// ------------------------------------------------------ viscosity solution

struct TestPoint {
    double tau = 0.0;
    double xi = 0.0;
};

struct ViscosityOptions {
    std::vector<double> h_ladder;  // strictly decreasing, at least 4 rungs
    double beta = 0.0;             // 0 picks 2 max |lambda| over the field
    double rho = 0.0;              // 0 picks l / 10
    double delta1 = 0.0;           // scale of the final-rung tolerance; 0 measures it from the field
    double trace_tol = 1e-3;
    double c_max = 10.0;
    // L1 error estimate of u_limit (LimitField::error_estimate). A rung may exceed the
    // first one by limit_error / h, the most the limit error can contribute there.
    double limit_error = 0.0;
};

enum class PointKind { Interior, LeftBoundary, RightBoundary };

struct PointCheck {
    TestPoint point;
    PointKind kind = PointKind::Interior;
    State minus, plus;             // traces u(tau, xi-), u(tau, xi+); the boundary trace for boundary points
    std::vector<double> riemann;   // conditions (ii) or (iii) per rung
    std::vector<double> linear;    // condition (iv) per rung, interior points only
    double local_tv = 0.0;
    double C = 0.0;                // max over rungs of linear / local_tv^2
    bool trend_ok = false;         // final rung <= 0.05 delta1 and no larger than the first up to the limit error
    bool linear_ok = true;         // C <= c_max
};

struct ViscosityCheckReport {
    std::vector<double> h_ladder;
    double beta = 0.0, rho = 0.0, delta1 = 0.0;
    std::vector<PointCheck> points;
    bool ok() const;
};

// u_limit is sampled on a uniform time grid (as produced by extrapolated_limit).
// TraceUndefined when one-sided averages around a point do not settle.
ViscosityCheckReport viscosity_check(const TriangularSystem& sys, const GridField& u_limit, const StateFn& ub0,
                                     const StateFn& ubL, const std::vector<TestPoint>& points,
                                     const ViscosityOptions& opt);

// One-sided average of u(tau, .) over [xi - w, xi - dx] (side < 0) or [xi + dx, xi + w]
// (side > 0) for w = rho 2^-k, at most five windows of three cells or more, extrapolated
// linearly to w = 0 from the last two. TraceUndefined if those two differ by more than tol.
State one_sided_trace(const GridField& u, double tau, double xi, int side, double rho, double tol);

// Linear interpolation of a stored field in t and x.
State sample_field(const GridField& u, double t, double x);

}  // namespace vv
