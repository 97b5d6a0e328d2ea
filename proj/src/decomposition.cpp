#include "vvtri/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vvtri/profiles.hpp"

namespace vv {

namespace {

enum class BcKind { Dirichlet, Flux };

// Boundary condition for q_t = (q_x - a q)_x: either q = g(t) or q_x - a q = g(t).
struct Bc {
    BcKind kind;
    std::vector<double> g;  // one value per stored time
};

// Vertex-centred finite volumes on the stored grid. Diffusion is Crank-Nicolson,
// the advective flux a q is explicit Adams-Bashforth 2 with upwind-biased linear
// reconstruction at the faces. Stored steps are split so that the Courant number
// stays below 0.2.
ScalarField transport(const std::vector<double>& x, const std::vector<double>& t, const ScalarField& a,
                      const std::vector<double>& q0, const Bc& left, const Bc& right) {
    const int nx = static_cast<int>(x.size()), nt = static_cast<int>(t.size());
    const int N = nx - 1;
    const double h = x[1] - x[0];
    ScalarField out;
    out.resize(nt, nx);
    for (int i = 0; i < nx; ++i) out(0, i) = q0[i];

    std::vector<double> q(q0), adv(nx), adv_prev(nx), coef(nx), coef_prev(nx);
    std::vector<double> lo(nx), di(nx), up(nx), rhs(nx), cp(nx), dp(nx);
    std::vector<double> rho(nx, h);
    if (left.kind == BcKind::Flux) rho[0] = 0.5 * h;
    if (right.kind == BcKind::Flux) rho[N] = 0.5 * h;

    // net advective flux out of each control volume
    auto advective = [&](const std::vector<double>& qq, const std::vector<double>& aa, std::vector<double>& res) {
        std::fill(res.begin(), res.end(), 0.0);
        for (int j = 0; j < N; ++j) {
            const double af = 0.5 * (aa[j] + aa[j + 1]);
            double qf;
            if (af > 0.0) qf = j >= 1 ? qq[j] + 0.5 * (qq[j] - qq[j - 1]) : qq[j];
            else qf = j + 2 <= N ? qq[j + 1] + 0.5 * (qq[j + 1] - qq[j + 2]) : qq[j + 1];
            const double F = af * qf;
            res[j] += F;
            res[j + 1] -= F;
        }
    };
    auto diffusive = [&](const std::vector<double>& qq, int j) {
        double s = 0.0;
        if (j < N) s += (qq[j + 1] - qq[j]) / h;
        if (j > 0) s -= (qq[j] - qq[j - 1]) / h;
        return s;
    };

    bool first = true;
    for (int n = 0; n + 1 < nt; ++n) {
        const double Dt = t[n + 1] - t[n];
        double amax = 0.0;
        for (int i = 0; i < nx; ++i) amax = std::max({amax, std::abs(a(n, i)), std::abs(a(n + 1, i))});
        const int sub = std::max(1, static_cast<int>(std::ceil(Dt * amax / (0.2 * h))));
        const double dt = Dt / sub;
        for (int k = 0; k < sub; ++k) {
            const double s0 = static_cast<double>(k) / sub, s1 = static_cast<double>(k + 1) / sub;
            for (int i = 0; i < nx; ++i) coef[i] = (1 - s0) * a(n, i) + s0 * a(n + 1, i);
            advective(q, coef, adv);
            auto gb = [&](const Bc& b, double s) { return (1 - s) * b.g[n] + s * b.g[n + 1]; };
            for (int j = 0; j < nx; ++j) {
                const double A = first ? adv[j] : 1.5 * adv[j] - 0.5 * adv_prev[j];
                const double r = dt / (2.0 * rho[j] * h);
                lo[j] = j > 0 ? -r : 0.0;
                up[j] = j < N ? -r : 0.0;
                di[j] = 1.0 - lo[j] - up[j];
                rhs[j] = q[j] + dt / rho[j] * (0.5 * diffusive(q, j) - A);
            }
            const double sm = 0.5 * (s0 + s1);
            if (left.kind == BcKind::Dirichlet) {
                lo[0] = up[0] = 0.0, di[0] = 1.0, rhs[0] = gb(left, s1);
            } else {
                rhs[0] -= dt / rho[0] * gb(left, sm);
            }
            if (right.kind == BcKind::Dirichlet) {
                lo[N] = up[N] = 0.0, di[N] = 1.0, rhs[N] = gb(right, s1);
            } else {
                rhs[N] += dt / rho[N] * gb(right, sm);
            }
            cp[0] = up[0] / di[0];
            dp[0] = rhs[0] / di[0];
            for (int j = 1; j < nx; ++j) {
                const double den = di[j] - lo[j] * cp[j - 1];
                cp[j] = up[j] / den;
                dp[j] = (rhs[j] - lo[j] * dp[j - 1]) / den;
            }
            q[N] = dp[N];
            for (int j = N - 1; j >= 0; --j) q[j] = dp[j] - cp[j] * q[j + 1];
            std::swap(adv_prev, adv);
            first = false;
        }
        for (int i = 0; i < nx; ++i) out(n + 1, i) = q[i];
    }
    return out;
}

double dx_at(const ScalarField& f, int n, int i, double h) {
    const int N = f.nx - 1;
    if (i == 0) return (-3.0 * f(n, 0) + 4.0 * f(n, 1) - f(n, 2)) / (2 * h);
    if (i == N) return (3.0 * f(n, N) - 4.0 * f(n, N - 1) + f(n, N - 2)) / (2 * h);
    return (f(n, i + 1) - f(n, i - 1)) / (2 * h);
}

// Residual q_t + (a q)_x - q_xx, zero on the two outer layers of nodes and
// rows. The skipped stencils would reach the one-sided differences stored on
// the edges, whose different truncation error gets amplified by 1 / h^2 or 1 / dt.
ScalarField transport_residual(const ScalarField& q, const ScalarField& a, const std::vector<double>& t, double h) {
    ScalarField r;
    r.resize(q.nt, q.nx);
    for (int n = 2; n + 2 < q.nt; ++n) {
        const double dt2 = t[n + 1] - t[n - 1];
        for (int i = 2; i + 2 < q.nx; ++i) {
            const double qt = (q(n + 1, i) - q(n - 1, i)) / dt2;
            const double fx = (a(n, i + 1) * q(n, i + 1) - a(n, i - 1) * q(n, i - 1)) / (2 * h);
            const double qxx = (q(n, i + 1) - 2 * q(n, i) + q(n, i - 1)) / (h * h);
            r(n, i) = qt + fx - qxx;
        }
    }
    return r;
}

template <class F>
double trapezoid_t(const std::vector<double>& t, F&& g) {
    double s = 0.0;
    for (std::size_t n = 0; n + 1 < t.size(); ++n) s += 0.5 * (t[n + 1] - t[n]) * (g(n) + g(n + 1));
    return s;
}

double tv_of(const std::vector<State>& v) { return v.empty() ? 0.0 : total_variation(v); }

}  // namespace

double cutoff_theta(double s, double dh) {
    const double a = std::abs(s);
    if (a <= dh) return s;
    if (a >= 3 * dh) return 0.0;
    const double tau = (a - dh) / (2 * dh);
    const double S = tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau);
    return s * (1.0 - S);
}

double field_delta1(const GridField& f, const State& u_star) {
    double d = std::max({tv_of(f.ic), tv_of(f.bc0), tv_of(f.bcL)});
    for (const auto* v : {&f.ic, &f.bc0, &f.bcL})
        for (const auto& s : *v) d = std::max(d, norm_inf(s - u_star));
    return d;
}

DecompFields decompose(const TriangularSystem& sys, const SolveReport& report, const DecomposeOptions& opt) {
    ManifoldCache cache(sys);
    return decompose(sys, cache, report, opt);
}

DecompFields decompose(const TriangularSystem& sys, ManifoldCache& cache, const SolveReport& report,
                       const DecomposeOptions& opt) {
    const GridField& F = report.field;
    if (report.diverged) fail(ErrorKind::InvalidArgument, "decompose: the solution diverged");
    if (F.nx() < 5 || F.nt() < 3) fail(ErrorKind::InvalidArgument, "decompose needs nx >= 5 and at least 3 stored rows");
    const int nt = F.nt(), nx = F.nx(), N = nx - 1;
    const double h = F.dx();

    DecompFields d;
    d.x = F.x;
    d.t = F.t;
    d.L = F.L;
    d.c = sys.c;
    d.delta_hat = opt.delta_hat;
    d.delta1 = field_delta1(F, sys.u_star);
    d.lambda1_star = sys.lambda1(sys.u_star);
    if (!(opt.delta_hat <= 1.0 / 3.0 + 1e-15) || !(opt.delta_hat > opt.min_ratio * d.delta1)) {
        std::ostringstream os;
        os << "delta_hat = " << opt.delta_hat << " must lie in (" << opt.min_ratio << " delta1, 1/3] with delta1 = " << d.delta1;
        fail(ErrorKind::InvalidArgument, os.str());
    }
    for (auto* s : {&d.v1, &d.v2, &d.p1, &d.p2, &d.w1, &d.w2, &d.sigma1, &d.m, &d.f, &d.lambda1, &d.lambda2,
                    &d.hat_lambda2, &d.s1_residual, &d.e})
        s->resize(nt, nx);

    std::vector<State> ux(static_cast<std::size_t>(nt) * nx), ut(ux.size());
    for (int n = 0; n < nt; ++n) {
        const auto dxr = derivative_x(F.row(n), h);
        std::copy(dxr.begin(), dxr.end(), ux.begin() + static_cast<std::ptrdiff_t>(n) * nx);
        for (int i = 0; i < nx; ++i) {
            State v;
            // second-order one-sided differences in the first and last rows
            if (n == 0) {
                v = (1.0 / (F.t[2] - F.t[0])) * (-3.0 * F.at(0, i) + 4.0 * F.at(1, i) - F.at(2, i));
            } else if (n == nt - 1) {
                v = (1.0 / (F.t[n] - F.t[n - 2])) * (3.0 * F.at(n, i) - 4.0 * F.at(n - 1, i) + F.at(n - 2, i));
            } else {
                v = (1.0 / (F.t[n + 1] - F.t[n - 1])) * (F.at(n + 1, i) - F.at(n - 1, i));
            }
            ut[static_cast<std::size_t>(n) * nx + i] = v;
            d.lambda1(n, i) = sys.lambda1(F.at(n, i));
            d.lambda2(n, i) = sys.lambda2(F.at(n, i));
        }
    }
    auto UX = [&](int n, int i) -> const State& { return ux[static_cast<std::size_t>(n) * nx + i]; };
    auto UT = [&](int n, int i) -> const State& { return ut[static_cast<std::size_t>(n) * nx + i]; };

    if (d.delta1 <= opt.zero_floor) {
        for (int n = 0; n < nt; ++n)
            for (int i = 0; i < nx; ++i) {
                const State& u = F.at(n, i);
                d.sigma1(n, i) = d.lambda1_star;
                d.m(n, i) = d.f(n, i) = sys.g(u) / (sys.lambda1(u) - sys.lambda2(u));
                d.hat_lambda2(n, i) = d.lambda2(n, i);
            }
        return d;
    }

    // p1 and the reference v1 share the transport operator of lambda1.
    Bc p1_left{BcKind::Dirichlet, std::vector<double>(nt)}, p1_right{BcKind::Flux, std::vector<double>(nt, 0.0)};
    Bc v1_left{BcKind::Dirichlet, std::vector<double>(nt, 0.0)}, v1_right{BcKind::Flux, std::vector<double>(nt)};
    std::vector<double> zero(nx, 0.0), v1_init(nx);
    for (int n = 0; n < nt; ++n) {
        p1_left.g[n] = UX(n, 0).u1;
        v1_right.g[n] = UT(n, N).u1;
    }
    for (int i = 0; i < nx; ++i) v1_init[i] = UX(0, i).u1;
    d.p1 = transport(F.x, F.t, d.lambda1, zero, p1_left, p1_right);
    const ScalarField v1_ref = transport(F.x, F.t, d.lambda1, v1_init, v1_left, v1_right);

    double mass = 0.0, active = 0.0;
    for (int n = 0; n < nt; ++n)
        for (int i = 0; i < nx; ++i) {
            const State& u = F.at(n, i);
            const double v1 = UX(n, i).u1 - d.p1(n, i);
            const double w1 = UT(n, i).u1;
            d.v1(n, i) = v1;
            d.w1(n, i) = w1;
            d.v1_consistency = std::max(d.v1_consistency, std::abs(v1 - v1_ref(n, i)));
            double sigma = d.lambda1_star;
            mass += std::abs(v1) + std::abs(d.p1(n, i));
            if (std::abs(v1) >= 1e-12) {
                const double s = w1 / v1 + d.lambda1_star;
                sigma = d.lambda1_star - cutoff_theta(s, opt.delta_hat);
                if (std::abs(s) >= 3.0 * opt.delta_hat) active += std::abs(v1);
            }
            d.sigma1(n, i) = sigma;
            d.m(n, i) = tilde_r1(sys, u, v1, sigma).u2;
            d.f(n, i) = cache.f(u, d.p1(n, i));
            d.hat_lambda2(n, i) = cache.hat_lambda2(u, d.p1(n, i));
        }
    d.cutoff_fraction = mass > 0.0 ? active / mass : 0.0;
    if (d.cutoff_fraction > opt.max_cutoff_fraction) {
        std::ostringstream os;
        os << "cutoff suppresses the speed on " << 100.0 * d.cutoff_fraction << "% of the mass of v1 + p1";
        fail(ErrorKind::CutoffDominates, os.str());
    }

    Bc p2_left{BcKind::Flux, std::vector<double>(nt, 0.0)}, p2_right{BcKind::Dirichlet, std::vector<double>(nt)};
    for (int n = 0; n < nt; ++n) {
        const double m = d.m(n, N), f = d.f(n, N);
        p2_right.g[n] = UX(n, N).u2 - m * UX(n, N).u1 - d.p1(n, N) * (f - m);
    }
    d.p2 = transport(F.x, F.t, d.hat_lambda2, zero, p2_left, p2_right);

    for (int n = 0; n < nt; ++n)
        for (int i = 0; i < nx; ++i) {
            const double m = d.m(n, i);
            d.v2(n, i) = UX(n, i).u2 - m * d.v1(n, i) - d.f(n, i) * d.p1(n, i) - d.p2(n, i);
            d.w2(n, i) = UT(n, i).u2 - m * UT(n, i).u1;
        }
    d.s1_residual = transport_residual(d.v2, d.lambda2, F.t, h);
    for (int n = 0; n < nt; ++n)
        for (int i = 0; i < nx; ++i) {
            d.e(n, i) = d.w2(n, i) - (dx_at(d.v2, n, i, h) - d.lambda2(n, i) * d.v2(n, i) + dx_at(d.p2, n, i, h) -
                                      d.hat_lambda2(n, i) * d.p2(n, i));
        }
    return d;
}

SourceBudget source_budget(const DecompFields& d) {
    SourceBudget b;
    const int nt = d.v1.nt, nx = d.v1.nx, N = nx - 1;
    if (nt < 2) return b;
    const double h = d.x[1] - d.x[0];
    const ScalarField s2 = transport_residual(d.w2, d.lambda2, d.t, h);

    std::vector<double> row_s1(nt), row_s2(nt), row_e(nt), grp[5];
    for (auto& g : grp) g.assign(nt, 0.0);
    std::array<std::vector<double>, 6> bflux;
    for (auto& v : bflux) v.assign(nt, 0.0);
    std::vector<double> e0(nt);
    for (int n = 0; n < nt; ++n) {
        double a1 = 0, a2 = 0, ae = 0;
        for (int i = 0; i < nx; ++i) {
            const double w = (i == 0 || i == N) ? 0.5 * h : h;
            a1 += w * std::abs(d.s1_residual(n, i));
            a2 += w * std::abs(s2(n, i));
            ae += w * std::abs(d.e(n, i));

            const double v[2] = {d.v1(n, i), d.v2(n, i)}, w_[2] = {d.w1(n, i), d.w2(n, i)};
            const double p[2] = {d.p1(n, i), d.p2(n, i)};
            const double vx[2] = {dx_at(d.v1, n, i, h), dx_at(d.v2, n, i, h)};
            const double wx[2] = {dx_at(d.w1, n, i, h), dx_at(d.w2, n, i, h)};
            const double px[2] = {dx_at(d.p1, n, i, h), dx_at(d.p2, n, i, h)};
            double inter = 0.0, wl = 0.0;
            for (int k = 0; k < 2; ++k) {
                const int j = 1 - k;
                inter += std::abs(v[k]) * (std::abs(v[j]) + std::abs(vx[j]) + std::abs(w_[j]) + std::abs(wx[j])) +
                         std::abs(w_[k]) * (std::abs(w_[j]) + std::abs(vx[j]));
                for (int q = 0; q < 2; ++q)
                    wl += (std::abs(p[k]) + std::abs(px[k])) *
                          (std::abs(v[q]) + std::abs(vx[q]) + std::abs(w_[q]) + std::abs(wx[q]));
            }
            const double ll = std::abs(px[0] - d.lambda1(n, i) * p[0]) * (std::abs(px[0]) + std::abs(p[1]));
            const double cross = w_[0] * vx[0] - v[0] * wx[0];
            double sv = std::abs(cross);
            if (std::abs(v[0]) > 1e-12 && std::abs(w_[0]) <= d.delta1 * std::abs(v[0])) sv += cross * cross / (v[0] * v[0]);
            const double ca = std::abs(w_[0] + d.sigma1(n, i) * v[0]) *
                              (std::abs(v[0]) + std::abs(vx[0]) + std::abs(w_[0]) + std::abs(wx[0]));
            grp[0][n] += w * inter;
            grp[1][n] += w * wl;
            grp[2][n] += w * ll;
            grp[3][n] += w * sv;
            grp[4][n] += w * ca;
        }
        row_s1[n] = a1, row_s2[n] = a2, row_e[n] = ae;
        e0[n] = std::abs(d.e(n, 0));
        bflux[0][n] = std::abs(dx_at(d.v2, n, 0, h) - d.lambda2(n, 0) * d.v2(n, 0));
        bflux[1][n] = std::abs(dx_at(d.v1, n, N, h) - d.lambda1(n, N) * d.v1(n, N));
        bflux[2][n] = std::abs(dx_at(d.p1, n, 0, h) - d.lambda1(n, 0) * d.p1(n, 0));
        bflux[3][n] = std::abs(dx_at(d.p1, n, N, h) - d.lambda1(n, N) * d.p1(n, N));
        bflux[4][n] = std::abs(dx_at(d.p2, n, 0, h) - d.hat_lambda2(n, 0) * d.p2(n, 0));
        bflux[5][n] = std::abs(dx_at(d.p2, n, N, h) - d.hat_lambda2(n, N) * d.p2(n, N));
    }
    auto integ = [&](const std::vector<double>& v) { return trapezoid_t(d.t, [&](std::size_t n) { return v[n]; }); };
    b.integral_s1 = integ(row_s1);
    b.integral_s2 = integ(row_s2);
    b.e_integral = integ(row_e);
    b.e_boundary0 = integ(e0);
    for (int k = 0; k < 6; ++k) b.boundary_integrals[k] = integ(bflux[k]);
    b.interaction = integ(grp[0]);
    b.wave_layer = integ(grp[1]);
    b.layer_layer = integ(grp[2]);
    b.sigma_variation = integ(grp[3]);
    b.cutoff_active = integ(grp[4]);
    return b;
}

DecayCheck exp_decay_check(const DecompFields& d, double c_max) {
    DecayCheck r;
    if (d.delta1 > 0.0) {
        for (int n = 0; n < d.p1.nt; ++n)
            for (int i = 0; i < d.p1.nx; ++i) {
                const double x = d.x[i];
                r.C1 = std::max(r.C1, std::abs(d.p1(n, i)) / (d.delta1 * std::exp(-d.c * x / 2)));
                r.C2 = std::max(r.C2, std::abs(d.p2(n, i)) / (d.delta1 * std::exp(d.c * (x - d.L) / 2)));
            }
    }
    r.ok = r.C1 <= c_max && r.C2 <= c_max;
    return r;
}

TimeIntegrability time_integrability_check(const DecompFields& d) {
    TimeIntegrability r;
    r.y = d.x;
    const int nx = d.v1.nx;
    const double h = d.x[1] - d.x[0];
    for (auto& c : r.columns) c.assign(nx, 0.0);
    const ScalarField* v[2] = {&d.v1, &d.v2};
    const ScalarField* w[2] = {&d.w1, &d.w2};
    double worst = 0.0;
    for (int i = 0; i < nx; ++i) {
        for (int k = 0; k < 2; ++k) {
            r.columns[4 * k + 0][i] = trapezoid_t(d.t, [&](std::size_t n) { return std::abs((*v[k])(n, i)); });
            r.columns[4 * k + 1][i] = trapezoid_t(d.t, [&](std::size_t n) { return std::abs(dx_at(*v[k], n, i, h)); });
            r.columns[4 * k + 2][i] = trapezoid_t(d.t, [&](std::size_t n) { return std::abs((*w[k])(n, i)); });
            r.columns[4 * k + 3][i] = trapezoid_t(d.t, [&](std::size_t n) { return std::abs(dx_at(*w[k], n, i, h)); });
        }
        for (const auto& c : r.columns) worst = std::max(worst, c[i]);
    }
    r.C = d.delta1 > 0.0 ? worst / d.delta1 : 0.0;
    return r;
}

}  // namespace vv
