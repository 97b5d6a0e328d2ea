#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vvtri/model.hpp"

namespace vv {

// Space-time samples of u on a uniform x grid. Row n holds u(t[n], x[.]).
struct GridField {
    double L = 0.0;
    double T = 0.0;
    std::vector<double> x;
    std::vector<double> t;
    std::vector<State> u;  // row-major, t.size() rows of x.size() states
    std::vector<State> ic;
    std::vector<State> bc0;
    std::vector<State> bcL;

    int nx() const { return static_cast<int>(x.size()); }
    int nt() const { return static_cast<int>(t.size()); }
    double dx() const { return x.size() > 1 ? x[1] - x[0] : 0.0; }
    State& at(int n, int i) { return u[static_cast<std::size_t>(n) * x.size() + i]; }
    const State& at(int n, int i) const { return u[static_cast<std::size_t>(n) * x.size() + i]; }
    std::span<const State> row(int n) const { return {u.data() + static_cast<std::size_t>(n) * x.size(), x.size()}; }

    void resize(int nt, int nx);
    // Appends a row and its traces.
    void push_row(double time, std::span<const State> values);
};

using StateFn = std::function<State(double)>;

// Initial datum on (0, L) and the two boundary data as functions of time.
struct DataTriple {
    StateFn u0;
    StateFn ub0;
    StateFn ubL;
    double delta1 = 0.0;
};

// Total variation of a sampled function, in the sum norm of the components.
double total_variation(std::span<const State> v);

// Measured size of the data: the larger of the three total variations and of the
// sup distances to u_star, sampled on [0, L] and [0, T].
double measure_delta1(const DataTriple& data, const State& u_star, double L, double T, int samples = 4001);

namespace data {

DataTriple constant(const State& u);
// u_star + amp * bump((x - x0) / width) * dir, with bump(s) = cos^4(pi s / 2) on |s| < 1.
// Boundary data stay at u_star.
DataTriple pulse(const State& u_star, const State& dir, double amp, double x0, double width);
// Riemann datum left/right of x0, boundary data equal to the adjacent constant.
DataTriple step(const State& left, const State& right, double x0);
// Piecewise-linear interpolation of (x, state) knots; constant outside the table.
StateFn table(std::vector<std::pair<double, State>> knots);
// Fills delta1 from measure_delta1.
DataTriple with_delta1(DataTriple d, const State& u_star, double L, double T);

}  // namespace data

enum class SolveMethod { FiniteDifference, RepresentationFixedPoint };

struct SolveReport {
    GridField field;
    std::vector<double> tv_history;
    std::vector<double> ux_l1;
    std::vector<double> uxx_l1;
    SolveMethod method = SolveMethod::FiniteDifference;
    double refinement_order = 0.0;  // filled by measure_refinement_order
    bool diverged = false;
    std::string message;
    int iterations = 0;
    double contraction = 0.0;  // last ratio of successive Picard differences
};

struct FdOptions {
    int nx = 401;
    double dx_target = 0.0;  // when > 0, overrides nx with ceil(L / dx_target) + 1
    int nt = 0;              // 0 picks dt from cfl_target
    double theta = 0.5;      // implicit weight of the diffusion
    int upwind_order = 2;    // 1 or 2
    bool ab2 = true;         // Adams-Bashforth 2 for advection, else forward Euler
    // Advective Courant numbers. cfl_max = 0 selects the linear stability limit
    // of the chosen pair: the k = pi symbol of the upwind stencil is -2 (first
    // order) or -4 (second order) times the Courant number, and the explicit
    // step is stable on (-1, 0) for AB2 and (-2, 0) for forward Euler.
    double cfl_target = 0.0;  // 0 means half of the limit
    double cfl_max = 0.0;
    int store_every = 1;
};

// Finite differences for u_t + A(u) u_x = u_xx on (0, L) x (0, T) with
// Dirichlet data. Diffusion is theta-implicit; advection is explicit and
// upwinded family by family through the dual base.
SolveReport solve_fd(const TriangularSystem& sys, const DataTriple& data, double L, double T, const FdOptions& opt = {});

// Number of time steps solve_fd takes with these options.
int fd_step_count(const TriangularSystem& sys, double L, double T, const FdOptions& opt = {});

struct RepresentationOptions {
    int nx = 401;
    int nt = 50;
    double picard_tol = 1e-10;
    int max_iter = 30;
};

// Picard iteration of the Duhamel formula around A* = A(u_star), written in
// the characteristic variables of A*. Raises NoContraction when the iterates
// stop contracting.
SolveReport solve_representation(const TriangularSystem& sys, const DataTriple& data, double L, double T,
                                 const RepresentationOptions& opt = {});

// The problem u_t + A(u) u_x = eps u_xx on (0, l) is solved in the rescaled
// variables (t/eps, x/eps) and mapped back. All reported quantities are in the
// original coordinates.
SolveReport solve_eps(const TriangularSystem& sys, const DataTriple& data, double l, double eps, double T,
                      const FdOptions& opt = {});

// Order p from three nested FD runs at nx, 2nx-1, 4nx-3 compared at final time.
double measure_refinement_order(const TriangularSystem& sys, const DataTriple& data, double L, double T,
                                FdOptions opt);

struct UxxBound {
    double sup_scaled = 0.0;  // sup of sqrt(t)*|u_xx|_1 on (0,1] and |u_xx|_1 for t > 1
    double c_prime = 0.0;     // sup_scaled / delta1
    bool ok = false;
};

UxxBound uxx_bound_check(const SolveReport& report, double delta1, double c_max = 20.0);

// Integral over x of |a - b| (sum norm) at row n, trapezoid rule. Rows and grids must match.
double l1_distance(std::span<const State> a, std::span<const State> b, double dx);

// Second-order one-sided derivative at the ends, central inside.
std::vector<State> derivative_x(std::span<const State> v, double dx);

}  // namespace vv
