#include <cmath>
#include <random>

#include "doctest.h"
#include "vvtri/riemann.hpp"
#include "vvtri/solver.hpp"

using namespace vv;

namespace {

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> t(n);
    for (int k = 0; k < n; ++k) t[k] = a + (b - a) * k / (n - 1);
    return t;
}

// Least concave majorant at each sample: the highest chord over it.
std::vector<double> brute_force_majorant(const std::vector<double>& t, const std::vector<double>& f) {
    const int n = static_cast<int>(t.size());
    std::vector<double> out(f);
    for (int j = 0; j < n; ++j)
        for (int k = j + 2; k < n; ++k)
            for (int i = j + 1; i < k; ++i)
                out[i] = std::max(out[i], f[j] + (f[k] - f[j]) * (t[i] - t[j]) / (t[k] - t[j]));
    return out;
}

State conservative_flux(const State& u) { return {-u.u1 + u.u1 * u.u1 / 2, u.u2 + u.u2 * u.u2 / 2 + u.u1 * u.u1 / 2}; }

void check_curve_invariants(const AdmissibleCurve& c) {
    CHECK(c.u.front().u1 == c.anchor.u1);
    CHECK(c.u.front().u2 == c.anchor.u2);
    for (std::size_t k = 1; k < c.sigma.size(); ++k) CHECK(c.sigma[k] <= c.sigma[k - 1] + 1e-14);
    for (double v : c.v) CHECK(v * (c.s < 0 ? -1.0 : 1.0) >= 0.0);
    CHECK(c.v.front() == 0.0);
    CHECK(c.v.back() == 0.0);
}

}  // namespace

TEST_CASE("concave envelope") {
    const double s = 0.3;
    const auto t = linspace(0, s, 101);
    SUBCASE("a concave function is its own envelope") {
        std::vector<double> f;
        for (double x : t) f.push_back(-x * x);
        const auto e = envelope_concave(t, f);
        for (std::size_t k = 0; k < t.size(); ++k) CHECK(e.value[k] == f[k]);
        for (std::size_t k = 1; k < e.slope.size(); ++k) CHECK(e.slope[k] < e.slope[k - 1]);
    }
    SUBCASE("a convex kink is bridged by its chord") {
        std::vector<double> f;
        for (double x : t) f.push_back(std::abs(x - s / 2));
        const auto e = envelope_concave(t, f);
        CHECK(e.vertices == std::vector<int>{0, 100});
        for (std::size_t k = 0; k < t.size(); ++k) CHECK(e.value[k] == doctest::Approx(s / 2).epsilon(1e-14));
    }
    SUBCASE("random piecewise-linear samples match the brute-force majorant") {
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> U(-1, 1);
        const auto tr = linspace(0, 1, 200);
        std::vector<double> f(200);
        double y = 0;
        for (auto& v : f) v = (y += 0.05 * U(rng));
        const auto e = envelope_concave(tr, f);
        const auto ref = brute_force_majorant(tr, f);
        double gap = 0;
        for (int k = 0; k < 200; ++k) gap = std::max(gap, std::abs(e.value[k] - ref[k]));
        CHECK(gap <= 1e-12);
        CHECK(e.value.front() == f.front());
        CHECK(e.value.back() == f.back());
        for (int k = 1; k + 1 < 200; ++k) {
            CHECK(e.value[k] >= f[k]);
            CHECK(e.value[k + 1] - 2 * e.value[k] + e.value[k - 1] <= 1e-12);
        }
    }
    CHECK_THROWS_AS(envelope_concave({0, 1}, {0, 1}), Error);
}

TEST_CASE("admissible curves of linear systems are straight") {
    for (const char* name : {"diag", "const-coupled"}) {
        CAPTURE(name);
        const auto sys = builtin_system(name);
        for (int fam : {1, 2})
            for (double s : {0.2, -0.15}) {
                const auto c = admissible_curve(sys, fam, {0.1, -0.1}, s);
                const State r = fam == 1 ? spectral(sys, c.anchor).r1 : State{0, 1};
                const double lam = fam == 1 ? -1.0 : 1.0;
                for (std::size_t k = 0; k < c.u.size(); ++k) {
                    CHECK(norm_inf(c.u[k] - (c.anchor + c.tau[k] * r)) <= 1e-14);
                    CHECK(std::abs(c.v[k]) <= 1e-14);
                    CHECK(c.sigma[k] == doctest::Approx(lam).epsilon(1e-12));
                }
                CHECK(c.vertices.size() == 2);
            }
    }
}

TEST_CASE("scalar sublayer: rarefaction and shock") {
    const auto sys = builtin_system("scalar-burgers");
    const State ur{0.05, 0.0};
    SUBCASE("rarefaction sign") {
        const auto c = admissible_curve(sys, 1, ur, -0.1);
        check_curve_invariants(c);
        for (std::size_t k = 1; k < c.sigma.size(); ++k) CHECK(c.sigma[k] < c.sigma[k - 1]);
        CHECK(c.end().u1 == doctest::Approx(-0.05).epsilon(1e-14));
    }
    SUBCASE("shock sign") {
        const auto c = admissible_curve(sys, 1, ur, 0.1);
        check_curve_invariants(c);
        for (double sg : c.sigma) CHECK(sg == doctest::Approx(-1.0 + 0.1).epsilon(1e-12));
    }
    SUBCASE("fans match the exact scalar solution") {
        // u_t + (-u + u^2/2)_x = 0: rarefaction u = 1 + xi, shock at -1 + (ul + ur) / 2
        for (auto [ul, urr] : {std::pair{-0.1, 0.1}, std::pair{0.12, -0.04}}) {
            const auto fan = solve_riemann(sys, {ul, 0.0}, {urr, 0.0});
            double gap = 0;
            for (double xi = -1.3; xi <= -0.7; xi += 1e-3) {
                double exact;
                if (ul < urr) exact = std::clamp(1.0 + xi, ul, urr);
                else exact = xi < -1 + (ul + urr) / 2 ? ul : urr;
                const double got = fan.evaluate(xi).u1;
                if (ul > urr && std::abs(xi - (-1 + (ul + urr) / 2)) < 1e-3) continue;
                gap = std::max(gap, std::abs(got - exact));
                CHECK(fan.evaluate(xi).u2 == 0.0);
            }
            CAPTURE(ul);
            CHECK(gap <= 1e-6);
        }
    }
}

TEST_CASE("admissible curve is Lipschitz in s") {
    const auto sys = builtin_system("burgers-triangular");
    const State ur{0.03, -0.02};
    for (double s : {0.08, -0.08}) {
        const auto a = admissible_curve(sys, 1, ur, s), b = admissible_curve(sys, 1, ur, s / 2);
        check_curve_invariants(a);
        CHECK(norm_inf(a.end() - b.end()) <= 2.0 * std::abs(s) / 2);
        const auto c2 = admissible_curve(sys, 2, ur, s);
        check_curve_invariants(c2);
        CHECK(c2.end().u1 == ur.u1);
    }
    CHECK_THROWS_AS(admissible_curve(sys, 1, ur, 0.6), Error);
}

TEST_CASE("Riemann solver") {
    SUBCASE("equal states give a constant fan") {
        const auto sys = builtin_system("burgers-triangular");
        const auto fan = solve_riemann(sys, {0.01, 0.02}, {0.01, 0.02});
        CHECK(fan.segments.size() == 1);
        CHECK(fan.wave_speeds().empty());
    }
    SUBCASE("decoupled transport") {
        const auto sys = builtin_system("diag");
        const auto fan = solve_riemann(sys, {0, 0}, {1, 1});
        CHECK(fan.s1 == doctest::Approx(-1.0));
        CHECK(fan.s2 == doctest::Approx(-1.0));
        CHECK(norm_inf(fan.evaluate(-1.5)) == 0.0);
        CHECK(norm_inf(fan.evaluate(-1.0)) == 0.0);  // left state at a jump
        CHECK(norm_inf(fan.evaluate(0.0) - State{1, 0}) <= 1e-12);
        CHECK(norm_inf(fan.evaluate(1.5) - State{1, 1}) == 0.0);
        const auto sp = fan.wave_speeds();
        REQUIRE(sp.size() == 2);
        CHECK(sp[0] == doctest::Approx(-1.0).epsilon(1e-12));
        CHECK(sp[1] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("Rankine-Hugoniot on the conservative system") {
        const auto sys = builtin_system("conservative-triangular");
        for (auto [um, up] : {std::pair<State, State>{{0.05, 0.06}, {-0.05, -0.05}},
                              std::pair<State, State>{{0.02, -0.04}, {-0.03, 0.05}},
                              std::pair<State, State>{{-0.04, 0.03}, {0.04, 0.01}}}) {
            const auto fan = solve_riemann(sys, um, up);
            int jumps = 0;
            for (const auto& g : fan.segments)
                if (g.kind == SegmentKind::Jump) {
                    ++jumps;
                    const State l = g.states[0], r = g.states[1];
                    const State R = conservative_flux(r) - conservative_flux(l) - g.speed_lo * (r - l);
                    CHECK(norm_inf(R) <= 1e-6);
                }
            CHECK(jumps >= 1);
        }
    }
    SUBCASE("speeds are ordered and separated") {
        const auto sys = builtin_system("burgers-triangular");
        const State um{0.04, -0.03}, up{-0.02, 0.05};
        const auto fan = solve_riemann(sys, um, up);
        const double delta1 = norm1(um - up);
        const auto sp = fan.wave_speeds();
        CHECK(std::is_sorted(sp.begin(), sp.end()));
        for (const auto& g : fan.segments) {
            if (g.family == 1) CHECK(g.speed_hi <= -sys.c + 2 * delta1);
            if (g.family == 2) CHECK(g.speed_lo >= sys.c - 2 * delta1);
        }
        CHECK(norm_inf(fan.evaluate(-10) - um) <= 1e-10);
        CHECK(norm_inf(fan.evaluate(10) - up) == 0.0);
        // self-similar profile is monotone across the rarefaction knots
        CHECK(norm_inf(fan.evaluate(-2.0) - fan.evaluate(-2.0 + 1e-12)) <= 1e-6);
    }
    SUBCASE("a state on the first curve gives a single first-family wave") {
        const auto sys = builtin_system("burgers-triangular");
        const State up{0.01, 0.02};
        const State um = admissible_curve(sys, 1, up, -0.05).end();
        const auto fan = solve_riemann(sys, um, up);
        CHECK(std::abs(fan.s2) <= 1e-9);
        CHECK(fan.s1 == doctest::Approx(-0.05).epsilon(1e-9));
        for (const auto& g : fan.segments) CHECK(g.family != 2);
        CHECK(norm_inf(fan.evaluate(0.0) - up) <= 1e-9);
    }
    SUBCASE("states outside K have no solution") {
        const auto sys = builtin_system("burgers-triangular");
        try {
            solve_riemann(sys, {0.7, 0.0}, {0.0, 0.0});
            FAIL("accepted");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::NoSolution);
        }
    }
}

TEST_CASE("boundary curve Z1") {
    const auto diag = builtin_system("diag");
    const State ub{0.1, -0.2};
    CHECK(norm_inf(boundary_curve_Z1(diag, ub, 0.0) - ub) == 0.0);
    CHECK(norm_inf(boundary_curve_Z1(diag, ub, 0.07) - (ub + State{0.07, 0})) <= 1e-9);
    const auto sys = builtin_system("burgers-triangular");
    const State u{0.02, -0.01};
    const double h = 1e-4;
    const State tangent = (1.0 / (2 * h)) * (boundary_curve_Z1(sys, u, h) - boundary_curve_Z1(sys, u, -h));
    const State r1 = spectral(sys, u).r1;
    CHECK(norm_inf(tangent - r1) <= 1e-4);
    CHECK(boundary_curve_Z1(sys, u, 0.03).u1 == doctest::Approx(u.u1 + 0.03).epsilon(1e-14));
}

TEST_CASE("boundary Riemann solver") {
    SUBCASE("matching data") {
        const auto sys = builtin_system("burgers-triangular");
        const State u0{0.01, 0.02};
        for (auto side : {BoundarySide::Left, BoundarySide::Right}) {
            const auto fan = solve_boundary_riemann(sys, u0, u0, side);
            CHECK(fan.s1 == 0.0);
            CHECK(fan.s2 == 0.0);
            CHECK(norm_inf(*fan.trace - u0) == 0.0);
            CHECK(fan.wave_speeds().empty());
            REQUIRE(fan.layer);
            for (const auto& u : fan.layer->u) CHECK(norm_inf(u - u0) == 0.0);
        }
    }
    SUBCASE("decoupled system") {
        const auto sys = builtin_system("diag");
        const double a = 0.1, b = -0.2, c = -0.05, d = -0.05;
        const auto left = solve_boundary_riemann(sys, {c, d}, {a, b}, BoundarySide::Left);
        CHECK(left.s2 == doctest::Approx(b - d));
        CHECK(left.s1 == doctest::Approx(a - c));
        CHECK(norm_inf(*left.trace - State{c, b}) <= 1e-12);
        CHECK(norm_inf(left.evaluate(0.5) - State{c, b}) <= 1e-12);
        CHECK(norm_inf(left.evaluate(1.5) - State{c, d}) <= 1e-12);
        CHECK(norm_inf(left.layer->u.front() - State{a, b}) <= 1e-9);
        const auto right = solve_boundary_riemann(sys, {c, d}, {a, b}, BoundarySide::Right);
        CHECK(norm_inf(*right.trace - State{a, d}) <= 1e-12);
        CHECK(norm_inf(right.evaluate(-0.5) - State{a, d}) <= 1e-12);
        CHECK(norm_inf(right.evaluate(-1.5) - State{c, d}) <= 1e-12);
        CHECK(norm_inf(right.layer->u.back() - State{a, b}) <= 1e-9);
        for (const auto& g : left.segments) CHECK(g.family != 1);
        for (const auto& g : right.segments) CHECK(g.family != 2);
    }
    SUBCASE("nonlinear composition and layer endpoint") {
        const auto sys = builtin_system("burgers-triangular");
        const State u0{0.02, -0.01}, ub{-0.01, 0.02};
        const auto left = solve_boundary_riemann(sys, u0, ub, BoundarySide::Left);
        const State mid = admissible_curve(sys, 2, u0, left.s2).end();
        CHECK(norm_inf(mid - *left.trace) == 0.0);
        CHECK(norm_inf(boundary_curve_Z1(sys, mid, left.s1) - ub) <= 1e-10);
        CHECK(norm_inf(left.layer->u.front() - ub) <= 1e-4);
        CHECK(norm_inf(left.layer->limit - *left.trace) == 0.0);
        for (double sp : left.wave_speeds()) CHECK(sp >= 0.0);

        const auto right = solve_boundary_riemann(sys, u0, ub, BoundarySide::Right);
        CHECK(norm_inf(admissible_curve(sys, 1, *right.trace, right.s1).end() - u0) <= 1e-10);
        CHECK(norm_inf(right.layer->u.back() - ub) <= 1e-4);
        for (double sp : right.wave_speeds()) CHECK(sp <= 0.0);
    }
}

TEST_CASE("boundary Riemann fan is the vanishing-viscosity limit") {
    const auto sys = builtin_system("burgers-triangular");
    const State u0{0.02, -0.01}, ub{-0.01, 0.02};
    const double delta1 = norm1(ub - u0);
    const auto fan = solve_boundary_riemann(sys, u0, ub, BoundarySide::Left);
    DataTriple d = data::constant(u0);
    d.ub0 = [ub](double) { return ub; };
    const double l = 1.5, T = 0.5;
    std::vector<double> gaps;
    for (double eps : {0.02, 0.01}) {
        FdOptions o;
        o.dx_target = 0.25;
        o.store_every = 1 << 30;
        const auto rep = solve_eps(sys, d, l, eps, T, o);
        const auto& f = rep.field;
        const int last = f.nt() - 1;
        const double strip = 3 * std::sqrt(eps);
        double gap = 0.0;
        for (int i = 0; i + 1 < f.nx(); ++i) {
            if (f.x[i] < strip) continue;
            const double dx = f.x[i + 1] - f.x[i];
            gap += 0.5 * dx * (norm1(f.at(last, i) - fan.evaluate(f.x[i] / T)) +
                               norm1(f.at(last, i + 1) - fan.evaluate(f.x[i + 1] / T)));
        }
        gaps.push_back(gap);
        if (eps == 0.01) {
            // the trace seen past the layer is the intermediate state, not the datum
            int i = 0;
            while (f.x[i] < strip) ++i;
            CHECK(norm1(f.at(last, i) - *fan.trace) <= 0.05 * delta1);
        }
    }
    CAPTURE(gaps[0]);
    CAPTURE(gaps[1]);
    CHECK(gaps[1] < gaps[0]);
    CHECK(gaps[1] <= 0.1 * delta1);
}
