#include "vvtri/model.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace vv {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::OutOfNeighborhood: return "OutOfNeighborhood";
        case ErrorKind::DegenerateSpectrum: return "DegenerateSpectrum";
        case ErrorKind::NonpositiveTime: return "NonpositiveTime";
        case ErrorKind::TruncationOverflow: return "TruncationOverflow";
        case ErrorKind::CharacteristicDrift: return "CharacteristicDrift";
        case ErrorKind::QuadratureFailure: return "QuadratureFailure";
        case ErrorKind::Diverged: return "Diverged";
        case ErrorKind::StabilityViolation: return "StabilityViolation";
        case ErrorKind::NoContraction: return "NoContraction";
        case ErrorKind::NoConvergence: return "NoConvergence";
        case ErrorKind::CutoffDominates: return "CutoffDominates";
        case ErrorKind::NoSolution: return "NoSolution";
        case ErrorKind::TraceUndefined: return "TraceUndefined";
        case ErrorKind::ConfigError: return "ConfigError";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

namespace {

State fd_gradient(const Coef& f, const State& u) {
    const double h1 = 1e-6 * (1.0 + std::abs(u.u1));
    const double h2 = 1e-6 * (1.0 + std::abs(u.u2));
    return {(f({u.u1 + h1, u.u2}) - f({u.u1 - h1, u.u2})) / (2 * h1),
            (f({u.u1, u.u2 + h2}) - f({u.u1, u.u2 - h2})) / (2 * h2)};
}

}  // namespace

State TriangularSystem::grad_lambda1(const State& u) const {
    return dlambda1 ? dlambda1(u) : fd_gradient(lambda1, u);
}
State TriangularSystem::grad_lambda2(const State& u) const {
    return dlambda2 ? dlambda2(u) : fd_gradient(lambda2, u);
}
State TriangularSystem::grad_g(const State& u) const { return dg ? dg(u) : fd_gradient(g, u); }

Spectral spectral(const TriangularSystem& sys, const State& u) {
    Spectral s;
    s.lambda1 = sys.lambda1(u);
    s.lambda2 = sys.lambda2(u);
    const double h = sys.g(u) / (s.lambda1 - s.lambda2);
    s.r1 = {1.0, h};
    s.r2 = {0.0, 1.0};
    s.ell1 = {1.0, 0.0};
    s.ell2 = {-h, 1.0};
    return s;
}

Spectral eigensystem(const TriangularSystem& sys, const State& u) {
    if (!u.finite() || !sys.in_box(u)) {
        std::ostringstream os;
        os << "state (" << u.u1 << ", " << u.u2 << ") outside K of half-width " << sys.delta_box;
        fail(ErrorKind::OutOfNeighborhood, os.str());
    }
    Spectral s = spectral(sys, u);
    if (std::abs(s.lambda1 - s.lambda2) < 2 * sys.c) {
        std::ostringstream os;
        os << "eigenvalue gap " << std::abs(s.lambda1 - s.lambda2) << " below 2c = " << 2 * sys.c;
        fail(ErrorKind::DegenerateSpectrum, os.str());
    }
    return s;
}

HyperbolicCertificate certify_hyperbolic(const TriangularSystem& sys, int samples) {
    if (samples < 4) fail(ErrorKind::InvalidArgument, "certify_hyperbolic needs >= 4 samples per axis");
    HyperbolicCertificate cert;
    cert.c_measured = std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
        for (int j = 0; j < samples; ++j) {
            const double a = -1.0 + 2.0 * i / (samples - 1);
            const double b = -1.0 + 2.0 * j / (samples - 1);
            const State u{sys.u_star.u1 + a * sys.delta_box, sys.u_star.u2 + b * sys.delta_box};
            const double gap = std::min(-sys.lambda1(u), sys.lambda2(u));
            if (gap < cert.c_measured) {
                cert.c_measured = gap;
                cert.worst = u;
            }
        }
    }
    cert.ok = cert.c_measured > sys.c;
    return cert;
}

TriangularSystem affine_system(const std::string& name, const AffineCoefficients& k, State u_star,
                               double delta_box, double c) {
    TriangularSystem s;
    s.name = name;
    s.lambda1 = [k](const State& u) { return k.l1_0 + k.l1_1 * u.u1; };
    s.lambda2 = [k](const State& u) { return k.l2_0 + k.l2_1 * u.u1 + k.l2_2 * u.u2; };
    s.g = [k](const State& u) { return k.g_0 + k.g_1 * u.u1 + k.g_2 * u.u2; };
    s.dlambda1 = [k](const State&) { return State{k.l1_1, 0.0}; };
    s.dlambda2 = [k](const State&) { return State{k.l2_1, k.l2_2}; };
    s.dg = [k](const State&) { return State{k.g_1, k.g_2}; };
    s.u_star = u_star;
    s.delta_box = delta_box;
    s.c = c;
    return s;
}

TriangularSystem builtin_system(const std::string& name) {
    AffineCoefficients k;
    if (name == "diag") {
        return affine_system(name, k, {0, 0}, 1.0, 0.5);
    }
    if (name == "const-coupled") {
        k.g_0 = 1.0;
        return affine_system(name, k, {0, 0}, 1.0, 0.5);
    }
    if (name == "burgers-triangular") {
        k.l1_0 = -2; k.l1_1 = 1;
        k.l2_0 = 2; k.l2_2 = 1;
        k.g_1 = 1;
        return affine_system(name, k, {0, 0}, 0.5, 1.0);
    }
    if (name == "conservative-triangular") {
        // A = Df for f(u) = (-u1 + u1^2/2, u2 + u2^2/2 + u1^2/2)
        k.l1_0 = -1; k.l1_1 = 1;
        k.l2_0 = 1; k.l2_2 = 1;
        k.g_1 = 1;
        return affine_system(name, k, {0, 0}, 0.3, 0.5);
    }
    if (name == "scalar-burgers") {
        k.l1_0 = -1; k.l1_1 = 1;
        return affine_system(name, k, {0, 0}, 0.3, 0.5);
    }
    fail(ErrorKind::ConfigError, "unknown built-in system '" + name + "'");
}

std::vector<std::string> builtin_names() {
    return {"diag", "const-coupled", "burgers-triangular", "conservative-triangular", "scalar-burgers"};
}

}  // namespace vv
