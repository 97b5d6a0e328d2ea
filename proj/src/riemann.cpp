#include "vvtri/riemann.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>

namespace vv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double cross(double ax, double ay, double bx, double by, double cx, double cy) {
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
}

// int_a^b lambda(u with one component running from a to b)
double speed_integral(const std::function<double(double)>& lam, double a, double b) {
    if (a == b) return 0.0;
    return boost::math::quadrature::gauss<double, 20>::integrate(lam, a, b);
}

struct Newton2 {
    std::array<double, 2> x{};
    double residual = kInf;
};

// Damped Newton with a forward-difference Jacobian and Armijo backtracking.
// The residual may throw; a throwing trial step is treated as a failed one.
Newton2 damped_newton(const std::function<State(double, double)>& F, std::array<double, 2> x, double scale) {
    auto norm = [](const State& r) { return norm_inf(r); };
    State r = F(x[0], x[1]);
    Newton2 out{x, norm(r)};
    for (int it = 0; it < 40 && out.residual > 1e-13 * std::max(1.0, scale); ++it) {
        const double h = 1e-7 * std::max(scale, 1e-3);
        const State c0 = (1.0 / h) * (F(x[0] + h, x[1]) - r);
        const State c1 = (1.0 / h) * (F(x[0], x[1] + h) - r);
        const double det = c0.u1 * c1.u2 - c1.u1 * c0.u2;
        if (!std::isfinite(det) || det == 0.0) break;
        const double d0 = -(c1.u2 * r.u1 - c1.u1 * r.u2) / det;
        const double d1 = -(-c0.u2 * r.u1 + c0.u1 * r.u2) / det;
        double step = 1.0;
        bool accepted = false;
        for (int k = 0; k < 30; ++k, step *= 0.5) {
            const std::array<double, 2> y{x[0] + step * d0, x[1] + step * d1};
            State ry;
            try {
                ry = F(y[0], y[1]);
            } catch (const Error&) {
                continue;
            }
            if (ry.finite() && norm(ry) <= (1.0 - 1e-4 * step) * out.residual) {
                x = y, r = ry, accepted = true;
                out = {x, norm(r)};
                break;
            }
        }
        if (!accepted) break;
    }
    return out;
}

// Fan segments of one family, left to right. The curve anchor is the right state.
void append_waves(std::vector<FanSegment>& segs, const AdmissibleCurve& c) {
    const auto& V = c.vertices;
    const int m = static_cast<int>(V.size()) - 1;
    auto constant = [&](const State& u, double lo) {
        segs.push_back({lo, kInf, SegmentKind::ConstantState, 0, {}, {u}});
    };
    int j = m - 1;
    while (j >= 0) {
        int a = j;
        if (V[j + 1] - V[j] == 1)
            while (a - 1 >= 0 && V[a] - V[a - 1] == 1) --a;
        if (a == j) {
            // a hull segment spanning several samples, or a lone single-sample one
            const double sp = c.slope[V[j]];
            segs.back().speed_hi = sp;
            segs.push_back({sp, sp, SegmentKind::Jump, c.family, {sp, sp}, {c.u[V[j + 1]], c.u[V[j]]}});
            constant(c.u[V[j]], sp);
            --j;
            continue;
        }
        // run of single-sample hull segments j, j-1, ..., a
        FanSegment r;
        r.kind = SegmentKind::RarefactionLike;
        r.family = c.family;
        for (int q = j + 1; q >= a; --q) {
            double sp;
            if (q == j + 1) sp = c.slope[V[j]];
            else if (q == a) sp = c.slope[V[a]];
            else sp = 0.5 * (c.slope[V[q - 1]] + c.slope[V[q]]);
            if (!r.speeds.empty()) sp = std::max(sp, r.speeds.back());
            r.speeds.push_back(sp);
            r.states.push_back(c.u[V[q]]);
        }
        r.speed_lo = r.speeds.front();
        r.speed_hi = r.speeds.back();
        segs.back().speed_hi = r.speed_lo;
        segs.push_back(r);
        constant(c.u[V[a]], r.speed_hi);
        j = a - 1;
    }
}

// Wave strengths below the Newton tolerance are not resolved; drop them.
double snap(double s, double scale) { return std::abs(s) <= 1e-10 * std::max(1.0, scale) ? 0.0 : s; }

WaveFan start_fan(const State& left) {
    WaveFan w;
    w.segments.push_back({-kInf, kInf, SegmentKind::ConstantState, 0, {}, {left}});
    return w;
}

double family_speed(const TriangularSystem& sys, int family, const State& u) {
    return family == 1 ? sys.lambda1(u) : sys.lambda2(u);
}

}  // namespace

Envelope envelope_concave(const std::vector<double>& tau, const std::vector<double>& f) {
    const int n = static_cast<int>(tau.size());
    if (n < 3 || f.size() != tau.size()) fail(ErrorKind::InvalidArgument, "envelope needs n >= 3 matching samples");
    double fs = 0.0;
    for (double y : f) fs = std::max(fs, std::abs(y));
    const double tol = 1e-13 * std::max(fs, 1e-300) * std::abs(tau.back() - tau.front());
    Envelope e;
    auto& H = e.vertices;
    for (int k = 0; k < n; ++k) {
        // pop while the last turn is not strictly clockwise; near-collinear points are dropped
        while (H.size() >= 2) {
            const int a = H[H.size() - 2], b = H.back();
            if (cross(tau[a], f[a], tau[b], f[b], tau[k], f[k]) >= -tol) H.pop_back();
            else break;
        }
        H.push_back(k);
    }
    e.value.resize(n);
    e.slope.resize(n - 1);
    for (std::size_t j = 0; j + 1 < H.size(); ++j) {
        const int a = H[j], b = H[j + 1];
        const double sl = (f[b] - f[a]) / (tau[b] - tau[a]);
        for (int k = a; k <= b; ++k) e.value[k] = (k == a) ? f[a] : (k == b ? f[b] : f[a] + sl * (tau[k] - tau[a]));
        for (int k = a; k < b; ++k) e.slope[k] = sl;
    }
    // keep the envelope a majorant against the tolerance used above
    for (int k = 0; k < n; ++k) e.value[k] = std::max(e.value[k], f[k]);
    return e;
}

AdmissibleCurve admissible_curve(const TriangularSystem& sys, int family, const State& anchor, double s,
                                 const CurveOptions& opt) {
    if (family != 1 && family != 2) fail(ErrorKind::InvalidArgument, "family must be 1 or 2");
    if (opt.n < 3) fail(ErrorKind::InvalidArgument, "curve needs n >= 3");
    if (!sys.in_box(anchor)) fail(ErrorKind::OutOfNeighborhood, "curve anchor outside K");
    const int n = opt.n;
    const double sg = s < 0 ? -1.0 : 1.0;
    const double hr = std::abs(s) / (n - 1);
    AdmissibleCurve c;
    c.family = family;
    c.anchor = anchor;
    c.s = s;
    c.tau.resize(n);
    std::vector<double> rho(n);
    for (int k = 0; k < n; ++k) rho[k] = hr * k, c.tau[k] = sg * rho[k];
    c.v.assign(n, 0.0);
    c.sigma.assign(n, 0.0);
    c.slope.assign(n - 1, 0.0);

    const Spectral sp0 = spectral(sys, anchor);
    const State r0 = family == 1 ? sp0.r1 : sp0.r2;
    c.u.resize(n);
    for (int k = 0; k < n; ++k) c.u[k] = anchor + (sg * rho[k]) * r0;
    if (s == 0.0) {
        c.vertices = {0, n - 1};
        const double l = family_speed(sys, family, anchor);
        std::fill(c.sigma.begin(), c.sigma.end(), l);
        std::fill(c.slope.begin(), c.slope.end(), l);
        return c;
    }

    auto direction = [&](const State& u, double v, double sigma) -> State {
        if (family == 2) return {0.0, 1.0};
        // along the travelling profile u1' = -(conc F - F): the gap decreases where u1 does
        return tilde_r1(sys, u, -v, sigma);
    };
    std::vector<double> G(n);
    for (int it = 1; it <= opt.max_iter; ++it) {
        for (const auto& u : c.u)
            if (!sys.in_box(u)) fail(ErrorKind::OutOfNeighborhood, "admissible curve leaves K");
        G[0] = 0.0;
        double lprev = family_speed(sys, family, c.u[0]);
        for (int k = 1; k < n; ++k) {
            const double l = family_speed(sys, family, c.u[k]);
            G[k] = G[k - 1] + 0.5 * hr * (lprev + l);
            lprev = l;
        }
        Envelope e = envelope_concave(rho, G);
        for (int k = 0; k < n; ++k) c.v[k] = sg * (e.value[k] - G[k]);
        c.slope = e.slope;
        c.vertices = e.vertices;
        std::vector<State> next(n);
        next[0] = anchor;
        for (int k = 0; k + 1 < n; ++k) {
            const State d0 = direction(c.u[k], c.v[k], c.slope[k]);
            const State d1 = direction(c.u[k + 1], c.v[k + 1], c.slope[k]);
            next[k + 1] = next[k] + (0.5 * sg * hr) * (d0 + d1);
        }
        double diff = 0.0;
        for (int k = 0; k < n; ++k) diff = std::max(diff, norm_inf(next[k] - c.u[k]));
        c.u = std::move(next);
        c.iterations = it;
        if (!std::isfinite(diff)) break;
        if (diff <= opt.tol) {
            for (int k = 0; k < n; ++k) {
                if (k == 0) c.sigma[k] = c.slope[0];
                else if (k == n - 1) c.sigma[k] = c.slope[n - 2];
                else c.sigma[k] = 0.5 * (c.slope[k - 1] + c.slope[k]);
            }
            for (const auto& u : c.u)
                if (!sys.in_box(u)) fail(ErrorKind::OutOfNeighborhood, "admissible curve leaves K");
            return c;
        }
    }
    std::ostringstream msg;
    msg << "admissible curve of family " << family << " with s = " << s << " did not settle";
    fail(ErrorKind::NoContraction, msg.str());
}

State WaveFan::evaluate(double xi) const {
    for (const auto& g : segments) {
        switch (g.kind) {
        case SegmentKind::ConstantState:
            if (xi <= g.speed_hi) return g.states[0];
            break;
        case SegmentKind::Jump:
            if (xi <= g.speed_lo) return g.states[0];
            break;
        case SegmentKind::RarefactionLike:
            if (xi <= g.speed_hi) {
                const auto it = std::lower_bound(g.speeds.begin(), g.speeds.end(), xi);
                const auto k = static_cast<std::size_t>(it - g.speeds.begin());
                if (k == 0) return g.states.front();
                const double w = g.speeds[k] - g.speeds[k - 1];
                const double a = w > 0 ? (xi - g.speeds[k - 1]) / w : 1.0;
                return (1.0 - a) * g.states[k - 1] + a * g.states[k];
            }
            break;
        }
    }
    return segments.back().states.back();
}

std::vector<double> WaveFan::wave_speeds() const {
    std::vector<double> out;
    for (const auto& g : segments)
        if (g.kind == SegmentKind::Jump) out.push_back(g.speed_lo);
        else if (g.kind == SegmentKind::RarefactionLike) out.insert(out.end(), g.speeds.begin(), g.speeds.end());
    return out;
}

WaveFan solve_riemann(const TriangularSystem& sys, const State& u_minus, const State& u_plus) {
    if (!sys.in_box(u_minus) || !sys.in_box(u_plus)) fail(ErrorKind::NoSolution, "Riemann states outside K");
    WaveFan fan = start_fan(u_minus);
    if (norm_inf(u_minus - u_plus) == 0.0) return fan;
    auto compose = [&](double s1, double s2) {
        const State mid = admissible_curve(sys, 2, u_plus, s2).end();
        return admissible_curve(sys, 1, mid, s1).end();
    };
    const Spectral sp = spectral(sys, u_plus);
    const State d = u_minus - u_plus;
    const double scale = norm_inf(d);
    const auto sol = damped_newton([&](double a, double b) { return compose(a, b) - u_minus; },
                                   {d.u1, d.u2 - sp.r1.u2 * d.u1}, scale);
    if (!(sol.residual <= 1e-10 * std::max(1.0, scale))) {
        std::ostringstream msg;
        msg << "Riemann Newton stalled at residual " << sol.residual;
        fail(ErrorKind::NoSolution, msg.str());
    }
    fan.s1 = snap(sol.x[0], scale);
    fan.s2 = snap(sol.x[1], scale);
    const auto c2 = admissible_curve(sys, 2, u_plus, fan.s2);
    const auto c1 = admissible_curve(sys, 1, c2.end(), fan.s1);
    if (fan.s1 != 0.0) append_waves(fan.segments, c1);
    if (fan.s2 != 0.0) append_waves(fan.segments, c2);
    fan.segments.back().states[0] = u_plus;
    return fan;
}

State boundary_curve_Z1(const TriangularSystem& sys, const State& u_bar, double s1) {
    if (s1 == 0.0) return u_bar;
    const auto lam = [&](double w) { return sys.lambda1(State{w, u_bar.u2}); };
    const double p1 = speed_integral(lam, u_bar.u1, u_bar.u1 + s1);
    const auto orbit = stable_layer(sys, u_bar, p1);
    State z = orbit.u.front();
    z.u1 = u_bar.u1 + s1;
    return z;
}

WaveFan solve_boundary_riemann(const TriangularSystem& sys, const State& u0, const State& ub, BoundarySide side) {
    if (!sys.in_box(u0) || !sys.in_box(ub)) fail(ErrorKind::NoSolution, "boundary Riemann states outside K");
    const double scale = norm_inf(ub - u0);
    auto stalled = [](const Newton2& s, double sc) {
        if (!(s.residual <= 1e-10 * std::max(1.0, sc))) {
            std::ostringstream msg;
            msg << "boundary Riemann Newton stalled at residual " << s.residual;
            fail(ErrorKind::NoSolution, msg.str());
        }
    };
    if (side == BoundarySide::Left) {
        auto F = [&](double s1, double s2) {
            return boundary_curve_Z1(sys, admissible_curve(sys, 2, u0, s2).end(), s1) - ub;
        };
        const Spectral sp = spectral(sys, u0);
        const State d = ub - u0;
        Newton2 sol{{0.0, 0.0}, 0.0};
        if (scale > 0) sol = damped_newton(F, {d.u1, d.u2 - sp.r1.u2 * d.u1}, scale);
        stalled(sol, scale);
        WaveFan fan;
        fan.s1 = snap(sol.x[0], scale);
        fan.s2 = snap(sol.x[1], scale);
        const auto c2 = admissible_curve(sys, 2, u0, fan.s2);
        fan.segments = start_fan(c2.end()).segments;
        if (fan.s2 != 0.0) append_waves(fan.segments, c2);
        fan.segments.back().states[0] = u0;
        fan.trace = c2.end();
        const auto lam = [&](double w) { return sys.lambda1(State{w, fan.trace->u2}); };
        fan.layer = stable_layer(sys, *fan.trace, speed_integral(lam, fan.trace->u1, fan.trace->u1 + fan.s1));
        fan.side = side;
        return fan;
    }
    // Right end: u0 sits left of the entering first-family waves.
    auto F = [&](double s1, double s2) {
        return admissible_curve(sys, 1, ub - State{0.0, s2}, s1).end() - u0;
    };
    const State d = u0 - ub;
    const Spectral sp = spectral(sys, ub);
    Newton2 sol{{0.0, 0.0}, 0.0};
    if (scale > 0) sol = damped_newton(F, {d.u1, sp.r1.u2 * d.u1 - d.u2}, scale);
    stalled(sol, scale);
    WaveFan fan = start_fan(u0);
    fan.s1 = snap(sol.x[0], scale);
    fan.s2 = snap(sol.x[1], scale);
    const State trace = ub - State{0.0, fan.s2};
    const auto c1 = admissible_curve(sys, 1, trace, fan.s1);
    if (fan.s1 != 0.0) append_waves(fan.segments, c1);
    fan.segments.back().states[0] = trace;
    fan.trace = trace;
    const auto lam = [&](double w) { return sys.lambda2(State{trace.u1, w}); };
    fan.layer = unstable_layer(sys, trace, speed_integral(lam, trace.u2, ub.u2));
    fan.side = side;
    return fan;
}

}  // namespace vv
