#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "vvtri/riemann.hpp"
#include "vvtri/verify.hpp"

using namespace vv;

namespace {

template <class F>
ErrorKind kind_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error raised");
    return ErrorKind::InvalidArgument;
}

DataTriple sum_of_pulses(const DataTriple& a, const DataTriple& b) {
    DataTriple d = a;
    d.u0 = [a, b](double x) { return a.u0(x) + b.u0(x); };
    return d;
}

double l1_rows(std::span<const State> a, std::span<const State> b, double dx) { return l1_distance(a, b, dx); }

// Two shocks from x = 1/2 and mismatched Dirichlet data at both ends.
struct RiemannSetup {
    State um{0.04, 0.03}, up{-0.03, -0.02}, b0{0.01, 0.06}, bL{-0.06, 0.0};
    DataTriple data() const {
        DataTriple d;
        d.u0 = [um = um, up = up](double x) { return x < 0.5 ? um : up; };
        d.ub0 = [b = b0](double) { return b; };
        d.ubL = [b = bL](double) { return b; };
        return d;
    }
};

}  // namespace

TEST_CASE("stability experiment") {
    SUBCASE("identical data make a degenerate pair") {
        const auto sys = builtin_system("diag");
        const auto base = data::pulse(sys.u_star, {1, 1}, 0.02, 4, 2);
        const auto rep = stability_experiment(sys, base, {{"same", base}});
        REQUIRE(rep.pairs.size() == 1);
        CHECK(rep.pairs[0].degenerate);
        CHECK(rep.L1_const == 0.0);
    }
    SUBCASE("the linear system is an L1 contraction of data differences") {
        const auto sys = builtin_system("diag");
        const auto base = data::pulse(sys.u_star, {1, 1}, 0.02, 4, 2);
        DataTriple bdry = base;
        bdry.ub0 = [](double t) { return State{0.004 * std::sin(t), 0.0}; };
        const std::vector<LabelledData> P{{"amp", data::pulse(sys.u_star, {1, 1}, 0.024, 4, 2)},
                                          {"shift", data::pulse(sys.u_star, {1, -1}, 0.004, 2, 1)},
                                          {"boundary", bdry}};
        const auto rep = stability_experiment(sys, base, P);
        CHECK(rep.L1_const <= 1.0 + 1e-3);
        CHECK(rep.L1_const > 0.5);
        CHECK(rep.modulus_pairs >= 3);
        CHECK(std::isfinite(rep.L2_const));
        CHECK(rep.L2_const > 0.0);
        for (const auto& p : rep.pairs)
            for (double r : p.ratio) CHECK(std::isfinite(r));

        StabilityOptions fine;
        fine.fd.nx = 801;
        const auto rep2 = stability_experiment(sys, base, P, fine);
        CHECK(rep2.L1_const == doctest::Approx(rep.L1_const).epsilon(0.05));
    }
    SUBCASE("nonlinear constants do not change when the perturbations halve") {
        const auto sys = builtin_system("burgers-triangular");
        const auto base = data::pulse(sys.u_star, {1, 1}, 0.02, 4, 2);
        auto suite = [&](double a) {
            DataTriple bdry = base;
            bdry.ub0 = [a](double t) { return State{a * std::sin(t), 0.0}; };
            return std::vector<LabelledData>{{"amp", data::pulse(sys.u_star, {1, 1}, 0.02 + a, 4, 2)},
                                             {"shift", data::pulse(sys.u_star, {1, -1}, a, 2, 1)},
                                             {"boundary", bdry}};
        };
        const auto big = stability_experiment(sys, base, suite(0.004));
        const auto small = stability_experiment(sys, base, suite(0.002));
        CHECK(std::isfinite(big.L1_const));
        CHECK(small.L1_const == doctest::Approx(big.L1_const).epsilon(0.2));
        for (std::size_t k = 0; k < big.pairs.size(); ++k)
            CHECK(small.pairs[k].max_ratio == doctest::Approx(big.pairs[k].max_ratio).epsilon(0.2));
    }
}

TEST_CASE("convergence in eps") {
    const std::vector<double> ladder_a{0.08, 0.04, 0.02, 0.01}, ladder_b{0.06, 0.03, 0.015, 0.0075};
    ConvergenceOptions o;
    o.fd.dx_target = 0.25;
    SUBCASE("constant data") {
        const auto sys = builtin_system("burgers-triangular");
        const auto rep = convergence_experiment(sys, data::constant({0.01, -0.02}), ladder_a, 0.1, o);
        for (double g : rep.gaps) CHECK(g <= 1e-13);
        CHECK(rep.cauchy_ok);
    }
    SUBCASE("smooth data converge at first order") {
        const auto sys = builtin_system("diag");
        const auto d = data::pulse(sys.u_star, {1, 1}, 0.05, 0.5, 0.4);
        const auto a = convergence_experiment(sys, d, ladder_a, 0.02, o);
        CHECK(a.cauchy_ok);
        CHECK(a.slope >= 0.7);
        CHECK(a.slope <= 1.3);
        const auto b = convergence_experiment(sys, d, ladder_b, 0.02, o);
        const auto agree = ladders_agree(a, b);
        CHECK(agree.ok);
        CHECK(agree.distance <= agree.finest_gap);
    }
    SUBCASE("interleaved ladders agree on a nonlinear system") {
        const auto sys = builtin_system("conservative-triangular");
        const auto d = data::pulse(sys.u_star, {1, 1}, 0.05, 0.5, 0.4);
        const auto a = convergence_experiment(sys, d, ladder_a, 0.02, o);
        const auto b = convergence_experiment(sys, d, ladder_b, 0.02, o);
        CHECK(a.cauchy_ok);
        CHECK(b.cauchy_ok);
        CHECK(ladders_agree(a, b).ok);
    }
    SUBCASE("the ladder must decrease") {
        const auto sys = builtin_system("diag");
        CHECK(kind_of([&] { convergence_experiment(sys, data::constant({}), {0.01, 0.02}, 0.1, o); }) ==
              ErrorKind::InvalidArgument);
    }
}

TEST_CASE("extrapolated limit") {
    const auto sys = builtin_system("burgers-triangular");
    const auto d = RiemannSetup{}.data();
    FdOptions o;
    o.dx_target = 0.75;
    const auto lim = extrapolated_limit(sys, d, 1.0, 0.05, 0.004, 11, 201, o);
    REQUIRE(lim.field.nt() == 11);
    REQUIRE(lim.field.nx() == 201);
    CHECK(lim.field.t.back() == doctest::Approx(0.05));
    for (int i = 0; i < 201; ++i) CHECK(norm_inf(lim.field.at(0, i) - d.u0(lim.field.x[i])) == 0.0);
    CHECK(lim.error_estimate > 0.0);
    CHECK(lim.error_estimate < 0.01);
}

TEST_CASE("interaction potential") {
    CHECK(interaction_weight(0.0, 1.0) == doctest::Approx(0.5));
    CHECK(interaction_weight(-1.0, 2.0) == doctest::Approx(std::exp(-2.0) / 4));
    CHECK(interaction_weight(3.0, 2.0) == doctest::Approx(0.25));

    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const int n = 300;
    std::vector<double> x(n), a(n), b(n);
    for (int i = 0; i < n; ++i) x[i] = 8.0 * i / (n - 1), a[i] = U(rng), b[i] = U(rng);
    const double c = 0.7;
    double brute = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double wi = (i == 0 || i == n - 1 ? 0.5 : 1.0) * (x[1] - x[0]);
            const double wj = (j == 0 || j == n - 1 ? 0.5 : 1.0) * (x[1] - x[0]);
            brute += wi * wj * a[i] * b[j] * interaction_weight(x[i] - x[j], c);
        }
    CHECK(interaction_potential(x, a, b, c) == doctest::Approx(brute).epsilon(1e-12));

    const int big = 4096;
    std::vector<double> X(big), A(big), B(big);
    for (int i = 0; i < big; ++i) X[i] = 8.0 * i / (big - 1), A[i] = U(rng), B[i] = U(rng);
    const auto t0 = std::chrono::steady_clock::now();
    const double q = interaction_potential(X, A, B, 1.0);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(q > 0.0);
    CHECK(secs < 1.0);
}

TEST_CASE("functionals") {
    FdOptions o;
    o.nx = 401;
    SUBCASE("a constant run has vanishing functionals") {
        const auto sys = builtin_system("burgers-triangular");
        const auto f = decompose(sys, solve_fd(sys, data::constant({0.01, -0.005}), 8, 1, o));
        const auto tr = functionals_trace(f);
        for (std::size_t k = 0; k < tr.t.size(); ++k) {
            CHECK(tr.Q[k] <= 1e-24);
            CHECK(tr.area[k] <= 1e-24);
            CHECK(tr.length[k] <= 1e-12);
            CHECK(tr.weighted_v1[k] <= 1e-12);
            CHECK(tr.weighted_v2[k] <= 1e-12);
        }
    }
    SUBCASE("one family alone does not interact") {
        const auto sys = builtin_system("diag");
        const auto f = decompose(sys, solve_fd(sys, data::pulse(sys.u_star, {1, 0}, 0.01, 4, 2), 8, 1, o));
        const auto tr = functionals_trace(f);
        for (double q : tr.Q) CHECK(q == 0.0);
        CHECK(tr.interaction == 0.0);
        CHECK(tr.length.front() > 0.0);
    }
    SUBCASE("crossing pulses") {
        const auto sys = builtin_system("burgers-triangular");
        const auto d = sum_of_pulses(data::pulse(sys.u_star, {1, 0}, 0.005, 5.5, 1.0),
                                     data::pulse(sys.u_star, {0, 1}, 0.005, 2.5, 1.0));
        const auto f = decompose(sys, solve_fd(sys, d, 8, 2, o));
        const auto tr = functionals_trace(f);
        REQUIRE(tr.t.size() >= 10);
        CHECK(tr.t.size() <= 201);
        CHECK(tr.Q.front() > 0.0);
        CHECK(tr.Q.back() <= 0.05 * tr.Q.front());
        CHECK(tr.interaction > 0.0);
        CHECK(2 * f.c * tr.q_drop >= tr.interaction);
        for (std::size_t k = 0; k < tr.t.size(); ++k) {
            CHECK(tr.Q[k] >= 0.0);
            CHECK(tr.area[k] >= 0.0);
            CHECK(tr.length[k] >= 0.0);
            CHECK(tr.weighted_v1[k] >= 0.0);
            CHECK(tr.weighted_v2[k] >= 0.0);
        }
        CHECK(tr.budget >= 0.0);
        CHECK(tr.near_monotone);
    }
}

TEST_CASE("one-sided traces") {
    GridField g;
    const int nx = 2001;
    std::vector<State> row(nx);
    for (int i = 0; i < nx; ++i) {
        g.x.push_back(static_cast<double>(i) / (nx - 1));
        const double r = g.x[i] - 0.5;
        // phase advances by pi each time the distance halves, so dyadic means never settle
        row[i] = r > 0 ? State{0.02 * std::sin(std::numbers::pi * std::log2(r)), 0.0}
                       : State{0.01 + 0.03 * r, -0.01};
    }
    g.push_row(0.0, row);
    g.push_row(1.0, row);
    const State left = one_sided_trace(g, 0.0, 0.5, -1, 0.1, 1e-3);
    CHECK(left.u1 == doctest::Approx(0.01).epsilon(1e-6));
    CHECK(left.u2 == doctest::Approx(-0.01));
    CHECK(kind_of([&] { one_sided_trace(g, 0.0, 0.5, +1, 0.1, 1e-3); }) == ErrorKind::TraceUndefined);
    CHECK(kind_of([&] { one_sided_trace(g, 0.0, 0.5, -1, 1e-4, 1e-3); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("viscosity solution checks") {
    const auto sys = builtin_system("burgers-triangular");
    const RiemannSetup rs;
    SUBCASE("the exact fan passes up to its sampling error") {
        const auto fan = solve_riemann(sys, rs.um, rs.up);
        GridField g;
        const int nx = 2001;
        for (int i = 0; i < nx; ++i) g.x.push_back(static_cast<double>(i) / (nx - 1));
        std::vector<State> row(nx);
        for (int n = 0; n <= 100; ++n) {
            const double t = 0.001 * n;
            for (int i = 0; i < nx; ++i) row[i] = t == 0.0 ? (g.x[i] < 0.5 ? rs.um : rs.up) : fan.evaluate((g.x[i] - 0.5) / t);
            g.push_row(t, row);
        }
        ViscosityOptions vo;
        vo.h_ladder = {0.08, 0.04, 0.02, 0.01};
        vo.rho = 0.45;
        const StateFn ub0 = [&](double) { return rs.um; }, ubL = [&](double) { return rs.up; };
        const auto rep = viscosity_check(sys, g, ub0, ubL, {{0.0, 0.5}}, vo);
        const auto& p = rep.points[0];
        CHECK(p.kind == PointKind::Interior);
        CHECK(norm_inf(p.minus - rs.um) <= 1e-12);
        CHECK(norm_inf(p.plus - rs.up) <= 1e-12);
        const double jumps = norm1(rs.um - rs.up);
        for (std::size_t k = 0; k < vo.h_ladder.size(); ++k) CHECK(p.riemann[k] <= jumps * g.dx() / vo.h_ladder[k]);
        CHECK(rep.beta == doctest::Approx(2 * std::max(std::abs(sys.lambda1(rs.up)), std::abs(sys.lambda2(rs.um)))).epsilon(0.02));
    }
    SUBCASE("smooth points of an extrapolated limit") {
        DataTriple d = rs.data();
        const State um{0.01, 0.005}, up{-0.005, 0.0}, b0{-0.008, 0.015}, bL{-0.012, -0.004};
        d.u0 = [=](double x) {
            State s = x < 0.5 ? um : up;
            const double z = (x - 0.25) / 0.1;
            if (std::abs(z) < 1) s += 0.004 * std::pow(std::cos(0.5 * std::numbers::pi * z), 4) * State{1, -1};
            return s;
        };
        d.ub0 = [=](double) { return b0; };
        d.ubL = [=](double) { return bL; };
        FdOptions o;
        o.dx_target = 0.75;
        const auto lim = extrapolated_limit(sys, d, 1.0, 0.06, 0.001, 121, 4001, o);
        ViscosityOptions vo;
        vo.h_ladder = {0.004, 0.002, 0.001, 0.0005};
        vo.limit_error = lim.error_estimate;
        const auto rep = viscosity_check(sys, lim.field, d.ub0, d.ubL, {{0.02, 0.25}, {0.03, 0.25}, {0.05, 0.3}}, vo);
        CHECK(rep.ok());
        for (const auto& p : rep.points) {
            CAPTURE(p.point.tau);
            CHECK(p.local_tv > 0.0);
            CHECK(p.C <= 10.0);
            CHECK(p.riemann.back() <= 0.05 * rep.delta1);
            // first order in h at a smooth point
            CHECK(p.riemann.back() <= 0.25 * p.riemann.front());
        }
    }
    SUBCASE("boundary points after a boundary Riemann run") {
        const auto d = rs.data();
        FdOptions o;
        o.dx_target = 0.75;
        const auto lim = extrapolated_limit(sys, d, 1.0, 0.08, 2e-4, 161, 4001, o);
        ViscosityOptions vo;
        vo.h_ladder = {0.08, 0.04, 0.02, 0.01};
        vo.limit_error = lim.error_estimate;
        const auto rep = viscosity_check(sys, lim.field, d.ub0, d.ubL, {{0.0, 0.0}, {0.0, 1.0}}, vo);
        CHECK(rep.delta1 == doctest::Approx(0.23).epsilon(1e-6));
        CHECK(rep.points[0].kind == PointKind::LeftBoundary);
        CHECK(rep.points[1].kind == PointKind::RightBoundary);
        for (const auto& p : rep.points) {
            CHECK(p.trend_ok);
            CHECK(p.riemann.back() <= 0.05 * rep.delta1);
        }
        const auto fan = solve_boundary_riemann(sys, rs.um, rs.b0, BoundarySide::Left);
        for (double tau : {0.02, 0.05}) {
            const State tr = one_sided_trace(lim.field, tau, 0.0, +1, 0.05, 1e-3);
            CHECK(norm1(tr - *fan.trace) <= 0.05 * rep.delta1);
        }
    }
    SUBCASE("argument checks") {
        GridField g;
        g.x = {0.0, 0.5, 1.0};
        ViscosityOptions vo;
        vo.h_ladder = {0.1, 0.05, 0.02};
        CHECK(kind_of([&] { viscosity_check(sys, g, {}, {}, {}, vo); }) == ErrorKind::InvalidArgument);
        vo.h_ladder = {0.1, 0.05, 0.05, 0.01};
        CHECK(kind_of([&] { viscosity_check(sys, g, {}, {}, {}, vo); }) == ErrorKind::InvalidArgument);
    }
}

TEST_CASE("semigroup composition") {
    const auto sys = builtin_system("burgers-triangular");
    const auto d = data::pulse(sys.u_star, {1, 1}, 0.02, 4, 2);
    const double L = 8.0;
    FdOptions half;
    half.nx = 401;
    half.store_every = 1 << 30;
    half.nt = fd_step_count(sys, L, 0.5, half);
    FdOptions o = half;
    o.nt = 2 * half.nt;
    const auto whole = solve_fd(sys, d, L, 1.0, o);

    const auto first = solve_fd(sys, d, L, 0.5, half);
    std::vector<std::pair<double, State>> knots;
    const auto mid = first.field.row(first.field.nt() - 1);
    for (int i = 0; i < first.field.nx(); ++i) knots.emplace_back(first.field.x[i], mid[i]);
    DataTriple restart = d;
    restart.u0 = data::table(knots);
    const auto second = solve_fd(sys, restart, L, 0.5, half);

    FdOptions fine = o;
    fine.nx = 801;
    fine.nt = 0;
    const auto ref = solve_fd(sys, d, L, 1.0, fine);
    std::vector<State> ref_on_coarse;
    const auto ref_row = ref.field.row(ref.field.nt() - 1);
    for (int i = 0; i < ref.field.nx(); i += 2) ref_on_coarse.push_back(ref_row[i]);

    const double dx = whole.field.dx();
    const auto a = whole.field.row(whole.field.nt() - 1);
    const auto b = second.field.row(second.field.nt() - 1);
    const double solver_error = l1_rows(a, ref_on_coarse, dx);
    CAPTURE(solver_error);
    CHECK(solver_error > 0.0);
    CHECK(l1_rows(a, b, dx) <= 2 * solver_error);
}
