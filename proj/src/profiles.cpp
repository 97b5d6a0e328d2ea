#include "vvtri/profiles.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <limits>
#include <sstream>

namespace vv {

namespace {

namespace ode = boost::numeric::odeint;
using Phase = std::array<double, 4>;  // u1, u2, p1, p2

struct LayerRhs {
    const TriangularSystem& sys;
    void operator()(const Phase& s, Phase& d, double) const {
        const State u{s[0], s[1]};
        d[0] = s[2];
        d[1] = s[3];
        d[2] = sys.lambda1(u) * s[2];
        d[3] = sys.g(u) * s[2] + sys.lambda2(u) * s[3];
    }
};

struct Escaped {};

struct Sampled {
    std::vector<double> x;
    std::vector<Phase> s;
    bool escaped = false;
};

// Integrates from times.front() to times.back() (either direction) and samples at every entry.
Sampled integrate_orbit(const TriangularSystem& sys, Phase start, const std::vector<double>& times, double box_scale) {
    Sampled out;
    out.x.reserve(times.size());
    out.s.reserve(times.size());
    auto stepper = ode::make_dense_output(1e-24, 1e-12, ode::runge_kutta_dopri5<Phase>());
    const double dir = times.back() < times.front() ? -1.0 : 1.0;
    const double dt0 = dir * 1e-3;
    try {
        ode::integrate_times(stepper, LayerRhs{sys}, start, times.begin(), times.end(), dt0, [&](const Phase& s, double x) {
            out.x.push_back(x);
            out.s.push_back(s);
            if (!std::isfinite(s[0]) || !std::isfinite(s[1]) || !sys.in_box({s[0], s[1]}, box_scale)) {
                throw Escaped{};
            }
        });
    } catch (const Escaped&) {
        out.escaped = true;
    } catch (const ode::odeint_error&) {
        out.escaped = true;
    }
    return out;
}

// int_a^b lambda(s) ds along one coordinate, with the other frozen.
template <class F>
double line_integral(F&& lam, double a, double b) {
    if (a == b) return 0.0;
    return boost::math::quadrature::gauss<double, 20>::integrate(lam, a, b);
}

double f0(const TriangularSystem& sys, const State& u) { return sys.g(u) / (sys.lambda1(u) - sys.lambda2(u)); }

double default_xmax(double rate) { return 32.0 / std::abs(rate); }

std::vector<double> grid(double a, double b, int n) {
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = a + (b - a) * i / (n - 1);
    x.back() = b;
    return x;
}

// Stable orbit with limit u_bar and p1(0) = p1_0, sampled on times (descending,
// ending at 0). The start sits on the linear stable manifold of (u_bar, 0).
Sampled shoot_stable(const TriangularSystem& sys, const State& u_bar, double p1_0, const std::vector<double>& times,
                     double box_scale) {
    const Spectral sp = spectral(sys, u_bar);
    const double lam1 = sp.lambda1, h = sp.r1.u2;
    const double x_max = times.front();
    // The unknown is p1 at x_max; the offset of u1 follows to second order in
    // it, which is far below round-off there.
    auto start = [&](double p1) {
        const double d = p1 / lam1;
        return Phase{u_bar.u1 + d, u_bar.u2 + h * d, p1, h * p1};
    };
    auto run = [&](double d) {
        Sampled s = integrate_orbit(sys, start(d), times, box_scale);
        if (s.escaped) {
            std::ostringstream os;
            os << "stable layer toward (" << u_bar.u1 << ", " << u_bar.u2 << ") with p1(0) = " << p1_0 << " leaves K";
            fail(ErrorKind::NoConvergence, os.str());
        }
        return s;
    };
    double d0 = p1_0 * std::exp(lam1 * x_max);
    Sampled s0 = run(d0);
    double e0 = s0.s.back()[2] - p1_0;
    // linear shooting, then secant passes
    double d1 = d0 * p1_0 / s0.s.back()[2];
    Sampled s1 = run(d1);
    double e1 = s1.s.back()[2] - p1_0;
    for (int it = 0; it < 30 && std::abs(e1) > 1e-14 * std::abs(p1_0); ++it) {
        if (e1 == e0) break;
        const double d2 = d1 - e1 * (d1 - d0) / (e1 - e0);
        d0 = d1, e0 = e1;
        d1 = d2;
        s1 = run(d1);
        e1 = s1.s.back()[2] - p1_0;
    }
    if (std::abs(e1) > 1e-10 * std::abs(p1_0)) {
        std::ostringstream os;
        os << "stable layer shooting missed p1(0) by " << e1;
        fail(ErrorKind::NoConvergence, os.str());
    }
    return s1;
}

}  // namespace

LogFit log_linear_fit(const std::vector<double>& x, const std::vector<double>& v, std::size_t from, std::size_t to,
                      double floor) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    int n = 0;
    for (std::size_t i = from; i < to && i < v.size(); ++i) {
        const double a = std::abs(v[i]);
        if (!(a > floor)) continue;
        const double y = std::log(a);
        sx += x[i], sy += y, sxx += x[i] * x[i], sxy += x[i] * y, syy += y * y;
        ++n;
    }
    LogFit f;
    if (n < 3) return f;
    const double cxx = sxx - sx * sx / n, cxy = sxy - sx * sy / n, cyy = syy - sy * sy / n;
    if (cxx <= 0.0) return f;
    f.slope = cxy / cxx;
    f.r2 = cyy > 0.0 ? (cxy * cxy) / (cxx * cyy) : 1.0;
    return f;
}

LayerOrbit stable_layer(const TriangularSystem& sys, const State& u_bar, double p1_0, double x_max, int samples) {
    if (std::abs(p1_0) > sys.delta_box / 4) {
        std::ostringstream os;
        os << "|p1(0)| = " << std::abs(p1_0) << " beyond the manifold chart delta_box/4 = " << sys.delta_box / 4;
        fail(ErrorKind::NoConvergence, os.str());
    }
    const Spectral sp = eigensystem(sys, u_bar);
    if (x_max <= 0.0) x_max = default_xmax(sp.lambda1);
    if (samples < 3) fail(ErrorKind::InvalidArgument, "stable_layer needs >= 3 samples");
    LayerOrbit orbit;
    orbit.family = LayerFamily::Stable;
    orbit.limit = u_bar;
    orbit.x = grid(0.0, x_max, samples);
    if (p1_0 == 0.0) {
        orbit.u.assign(samples, u_bar);
        orbit.p.assign(samples, Vec2{});
        orbit.decay_rate = sp.lambda1;
        return orbit;
    }
    std::vector<double> times(orbit.x.rbegin(), orbit.x.rend());
    const Sampled s = shoot_stable(sys, u_bar, p1_0, times, 1.0);
    orbit.u.resize(samples);
    orbit.p.resize(samples);
    for (int k = 0; k < samples; ++k) {
        const auto& v = s.s[samples - 1 - k];
        orbit.u[k] = {v[0], v[1]};
        orbit.p[k] = {v[2], v[3]};
    }
    std::vector<double> pn(samples);
    for (int k = 0; k < samples; ++k) pn[k] = norm2(orbit.p[k]);
    orbit.decay_rate = log_linear_fit(orbit.x, pn, samples / 2, samples).slope;
    return orbit;
}

LayerOrbit unstable_layer(const TriangularSystem& sys, const State& u_bar, double p2_0, double x_max, int samples) {
    const Spectral sp = eigensystem(sys, u_bar);
    if (std::abs(p2_0) > sys.delta_box / 4) {
        fail(ErrorKind::NoConvergence, "|p2(0)| beyond the manifold chart delta_box/4");
    }
    if (x_max <= 0.0) x_max = default_xmax(sp.lambda2);
    LayerOrbit orbit;
    orbit.family = LayerFamily::Unstable;
    orbit.limit = u_bar;
    orbit.x = grid(-x_max, 0.0, samples);
    if (p2_0 == 0.0) {
        orbit.u.assign(samples, u_bar);
        orbit.p.assign(samples, Vec2{});
        orbit.decay_rate = sp.lambda2;
        return orbit;
    }
    // p1 = 0 on this manifold, so u1 stays at u_bar1.
    auto run = [&](double p2) {
        Sampled s = integrate_orbit(sys, Phase{u_bar.u1, u_bar.u2 + p2 / sp.lambda2, 0.0, p2}, orbit.x, 1.0);
        if (s.escaped) fail(ErrorKind::NoConvergence, "unstable layer leaves K");
        return s;
    };
    double d0 = p2_0 * std::exp(-sp.lambda2 * x_max);
    Sampled s0 = run(d0);
    double e0 = s0.s.back()[3] - p2_0;
    double d1 = d0 * p2_0 / s0.s.back()[3];
    Sampled s1 = run(d1);
    double e1 = s1.s.back()[3] - p2_0;
    for (int it = 0; it < 30 && std::abs(e1) > 1e-14 * std::abs(p2_0); ++it) {
        if (e1 == e0) break;
        const double d2 = d1 - e1 * (d1 - d0) / (e1 - e0);
        d0 = d1, e0 = e1, d1 = d2;
        s1 = run(d1);
        e1 = s1.s.back()[3] - p2_0;
    }
    if (std::abs(e1) > 1e-10 * std::abs(p2_0)) fail(ErrorKind::NoConvergence, "unstable layer shooting did not converge");
    orbit.u.resize(samples);
    orbit.p.resize(samples);
    std::vector<double> pn(samples);
    for (int k = 0; k < samples; ++k) {
        orbit.u[k] = {s1.s[k][0], s1.s[k][1]};
        orbit.p[k] = {s1.s[k][2], s1.s[k][3]};
        pn[k] = std::abs(s1.s[k][3]);
    }
    orbit.decay_rate = log_linear_fit(orbit.x, pn, 0, samples / 2).slope;
    return orbit;
}

double manifold_f(const TriangularSystem& sys, const State& u, double p1) {
    if (p1 == 0.0) return f0(sys, u);
    // Limit of the first component: int_{ub1}^{u1} lambda1 = p1, by Newton.
    auto lam_u1 = [&](double s) { return sys.lambda1({s, u.u2}); };
    double ub1 = u.u1 - p1 / sys.lambda1(u);
    for (int it = 0; it < 50; ++it) {
        const double F = line_integral(lam_u1, ub1, u.u1) - p1;
        const double step = F / sys.lambda1({ub1, u.u2});
        ub1 += step;
        if (std::abs(step) < 1e-15 * (1.0 + std::abs(ub1))) break;
    }
    const double x_max = default_xmax(sys.lambda1(u));
    const std::vector<double> times = grid(x_max, 0.0, 65);
    auto at_zero = [&](double ub2) { return shoot_stable(sys, {ub1, ub2}, p1, times, 1.5).s.back(); };
    // Secant on the second limit component so that u2(0) hits u2.
    double a = u.u2 + f0(sys, u) * (ub1 - u.u1);
    Phase sa = at_zero(a);
    double ea = sa[1] - u.u2;
    double b = a - ea;
    Phase sb = at_zero(b);
    double eb = sb[1] - u.u2;
    for (int it = 0; it < 30 && std::abs(eb) > 1e-14; ++it) {
        if (eb == ea) break;
        const double c = b - eb * (b - a) / (eb - ea);
        a = b, ea = eb, b = c;
        sb = at_zero(b);
        eb = sb[1] - u.u2;
    }
    if (std::abs(eb) > 1e-10) fail(ErrorKind::NoConvergence, "manifold_f: could not place the orbit through u");
    return sb[3] / sb[2];
}

Vec2 hat_r1(const TriangularSystem& sys, const State& u, double p1) { return {1.0, manifold_f(sys, u, p1)}; }

Vec2 hat_ell2(const TriangularSystem& sys, const State& u, double p1) { return {-manifold_f(sys, u, p1), 1.0}; }

double hat_lambda2(const TriangularSystem& sys, const State& u, double p1) {
    if (p1 == 0.0) return sys.lambda2(u);
    const double h = 1e-4 * sys.delta_box;
    const double df = (manifold_f(sys, u + State{0, h}, p1) - manifold_f(sys, u - State{0, h}, p1)) / (2 * h);
    return sys.lambda2(u) - p1 * df;
}

Vec2 tilde_r1(const TriangularSystem& sys, const State& u, double v1, double sigma1) {
    const double l1 = sys.lambda1(u), l2 = sys.lambda2(u), g = sys.g(u);
    const double m0 = g / (l1 - l2);
    if (v1 == 0.0) return {1.0, m0};
    const State gg = sys.grad_g(u), g1 = sys.grad_lambda1(u), g2 = sys.grad_lambda2(u);
    const double den = (l1 - l2) * (l1 - l2);
    const State dm0 = (1.0 / den) * ((l1 - l2) * gg - g * (g1 - g2));
    const double dm0_r1 = dm0.u1 + m0 * dm0.u2;
    return {1.0, m0 + v1 * dm0_r1 / (l2 - 2.0 * l1 + sigma1)};
}

ManifoldCache::ManifoldCache(const TriangularSystem& sys, int nu, int np)
    : sys_(sys), nu_(nu), np_(np), pmax_(sys.delta_box / 4) {
    if (nu < 2 || np < 3 || np % 2 == 0) fail(ErrorKind::InvalidArgument, "ManifoldCache needs nu >= 2 and odd np >= 3");
}

std::size_t ManifoldCache::filled() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return table_.size();
}

double ManifoldCache::node(int i, int j, int k) {
    const auto key = std::make_tuple(i, j, k);
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = table_.find(key);
        if (it != table_.end()) return it->second;
    }
    const State u = sys_.u_star + sys_.delta_box * State{-1.0 + 2.0 * i / (nu_ - 1), -1.0 + 2.0 * j / (nu_ - 1)};
    const double p = pmax_ * (-1.0 + 2.0 * k / (np_ - 1));
    const double q = (k == (np_ - 1) / 2) ? 0.0 : manifold_f(sys_, u, p) - f0(sys_, u);
    std::lock_guard<std::mutex> lock(mutex_);
    table_.emplace(key, q);
    return q;
}

double ManifoldCache::f(const State& u, double p1) {
    const double base = f0(sys_, u);
    if (p1 == 0.0) return base;
    auto locate = [](double s, int n, int& i, double& w) {
        const double pos = std::clamp((s + 1.0) * 0.5 * (n - 1), 0.0, static_cast<double>(n - 1));
        i = std::min(static_cast<int>(pos), n - 2);
        w = pos - i;
    };
    int i, j, k;
    double wi, wj, wk;
    locate((u.u1 - sys_.u_star.u1) / sys_.delta_box, nu_, i, wi);
    locate((u.u2 - sys_.u_star.u2) / sys_.delta_box, nu_, j, wj);
    // Beyond the chart q is continued linearly in p1 from the edge.
    const double pc = std::clamp(p1, -pmax_, pmax_);
    locate(pc / pmax_, np_, k, wk);
    double q = 0.0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) {
                const double w = (a ? wi : 1 - wi) * (b ? wj : 1 - wj) * (c ? wk : 1 - wk);
                if (w != 0.0) q += w * node(i + a, j + b, k + c);
            }
    if (pc != p1) q *= p1 / pc;
    return base + q;
}

double ManifoldCache::hat_lambda2(const State& u, double p1) {
    if (p1 == 0.0) return sys_.lambda2(u);
    const double h = 0.25 * sys_.delta_box / (nu_ - 1);
    const double df = (f(u + State{0, h}, p1) - f(u - State{0, h}, p1)) / (2 * h);
    return sys_.lambda2(u) - p1 * df;
}

DoubleProfile double_profile(const TriangularSystem& sys, const State& Ub0, const State& UbL, double L,
                             const DoubleProfileOptions& opt) {
    ManifoldCache cache(sys);
    return double_profile(sys, cache, Ub0, UbL, L, opt);
}

DoubleProfile double_profile(const TriangularSystem& sys, ManifoldCache& cache, const State& Ub0, const State& UbL,
                             double L, const DoubleProfileOptions& opt) {
    if (!(L > 0.0) || opt.n < 3) fail(ErrorKind::InvalidArgument, "double_profile needs L > 0 and n >= 3");
    eigensystem(sys, Ub0);
    eigensystem(sys, UbL);
    const int n = opt.n;
    DoubleProfile out;
    out.Ub0 = Ub0;
    out.UbL = UbL;
    out.x = grid(0.0, L, n);
    const double h = L / (n - 1);
    auto& z = out.z;
    if (norm_inf(Ub0 - UbL) == 0.0) {
        z.assign(n, Ub0);
        out.p1.assign(n, 0.0);
        out.p2.assign(n, 0.0);
        return out;
    }
    z.resize(n);
    for (int i = 0; i < n; ++i) z[i] = (1.0 - out.x[i] / L) * Ub0 + (out.x[i] / L) * UbL;

    // int over a cell of p with p(x_i + s) = p_i exp(k s)
    auto cell = [h](double p, double k) { return std::abs(k * h) < 1e-8 ? p * h * (1 + 0.5 * k * h) : p * std::expm1(k * h) / k; };

    std::vector<double> p1(n), p2(n), l1(n), zl(n);
    std::vector<State> zn(n);
    // One sweep with (a, b) = (p1(0), p2(L)) over the frozen profile zf.
    auto sweep = [&](double a, double b, const std::vector<State>& zf, std::vector<State>& znew) {
        for (int i = 0; i < n; ++i) l1[i] = sys.lambda1(zf[i]);
        p1[0] = a;
        for (int i = 0; i + 1 < n; ++i) p1[i + 1] = p1[i] * std::exp(0.5 * h * (l1[i] + l1[i + 1]));
        for (int i = 0; i < n; ++i) zl[i] = cache.hat_lambda2(zf[i], p1[i]);
        p2[n - 1] = b;
        for (int i = n - 1; i > 0; --i) p2[i - 1] = p2[i] * std::exp(-0.5 * h * (zl[i] + zl[i - 1]));
        znew[0] = Ub0;
        for (int i = 0; i + 1 < n; ++i) {
            const State zm = 0.5 * (zf[i] + zf[i + 1]);
            const double pm = 0.5 * (p1[i] + p1[i + 1]);
            const double I1 = cell(p1[i], 0.5 * (l1[i] + l1[i + 1]));
            const double I2 = cell(p2[i], 0.5 * (zl[i] + zl[i + 1]));
            znew[i + 1] = znew[i] + I1 * cache.hat_r1(zm, pm) + State{0.0, I2};
        }
    };

    // Initial (a, b) from the frozen-coefficient problem at Ub0.
    const Spectral s0 = spectral(sys, Ub0);
    const double I1 = std::expm1(s0.lambda1 * L) / s0.lambda1;
    const double I2 = -std::expm1(-s0.lambda2 * L) / s0.lambda2;
    const State jump = UbL - Ub0;
    double a = jump.u1 / I1;
    double b = (jump.u2 - a * I1 * s0.r1.u2) / I2;

    double prev_change = std::numeric_limits<double>::infinity();
    int stalls = 0;
    for (int it = 1; it <= opt.max_iter; ++it) {
        // Newton on the endpoint mismatch for the frozen profile.
        for (int k = 0; k < 8; ++k) {
            sweep(a, b, z, zn);
            const State r = zn[n - 1] - UbL;
            if (norm_inf(r) <= 0.1 * opt.tol) break;
            const double da = 1e-7 * (std::abs(a) + 1e-12), db = 1e-7 * (std::abs(b) + 1e-12);
            sweep(a + da, b, z, zn);
            const State ca = (1.0 / da) * (zn[n - 1] - UbL - r);
            sweep(a, b + db, z, zn);
            const State cb = (1.0 / db) * (zn[n - 1] - UbL - r);
            const double det = ca.u1 * cb.u2 - cb.u1 * ca.u2;
            if (det == 0.0) fail(ErrorKind::NoContraction, "double_profile: singular endpoint Jacobian");
            a -= (r.u1 * cb.u2 - cb.u1 * r.u2) / det;
            b -= (ca.u1 * r.u2 - r.u1 * ca.u2) / det;
        }
        sweep(a, b, z, zn);
        double change = 0.0;
        for (int i = 0; i < n; ++i) change = std::max(change, norm_inf(zn[i] - z[i]));
        z.swap(zn);
        out.iterations = it;
        out.mismatch = norm_inf(z[n - 1] - UbL);
        if (change <= opt.tol && out.mismatch <= opt.tol) break;
        if (change >= prev_change) ++stalls;
        if (stalls >= 3 || !std::isfinite(change) || it == opt.max_iter) {
            std::ostringstream os;
            os << "double_profile: Picard change " << change << " after " << it << " iterations, endpoint mismatch "
               << out.mismatch;
            fail(ErrorKind::NoContraction, os.str());
        }
        prev_change = change;
    }
    out.p1 = p1;
    out.p2 = p2;
    return out;
}

}  // namespace vv
