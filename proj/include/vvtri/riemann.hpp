#pragma once

#include <optional>
#include <vector>

#include "vvtri/model.hpp"
#include "vvtri/profiles.hpp"

namespace vv {

// Least concave majorant of samples (tau_k, f_k), tau increasing.
struct Envelope {
    std::vector<double> value;   // at every sample
    std::vector<double> slope;   // on every interval [tau_k, tau_k+1]; nonincreasing
    std::vector<int> vertices;   // hull vertices, first and last sample included
};

Envelope envelope_concave(const std::vector<double>& tau, const std::vector<double>& f);

// States reachable from the anchor by waves of one family. For s > 0 the
// curve is the fixed point of
//   u(tau) = anchor + int_0^tau r(u, v, sigma),  F = int_0^tau lambda(u),
//   v = conc F - F,  sigma = d conc F / d tau.
// For s < 0 the same system is solved in rho = -tau, which amounts to the
// convex envelope on [s, 0]; v is then nonpositive. sigma is nonincreasing
// along the samples in both cases, and tau[k] = s k / (n - 1).
struct AdmissibleCurve {
    int family = 1;
    State anchor;
    double s = 0.0;
    std::vector<double> tau;
    std::vector<State> u;
    std::vector<double> v;
    std::vector<double> sigma;   // per sample; hull vertices take the mean of the adjacent slopes
    std::vector<int> vertices;   // hull vertices of the envelope, in sample indices
    std::vector<double> slope;   // per interval
    int iterations = 0;

    const State& end() const { return u.back(); }
};

struct CurveOptions {
    int n = 400;
    double tol = 1e-13;
    int max_iter = 60;
};

// NoContraction if the Picard iteration does not settle, OutOfNeighborhood if
// the curve leaves K.
AdmissibleCurve admissible_curve(const TriangularSystem& sys, int family, const State& anchor, double s,
                                 const CurveOptions& opt = {});

enum class SegmentKind { ConstantState, RarefactionLike, Jump };

// speeds and states are knots of a monotone map xi -> u; constant states and
// jumps carry one and two states. Jumps have speed_lo == speed_hi.
struct FanSegment {
    double speed_lo = 0.0;
    double speed_hi = 0.0;
    SegmentKind kind = SegmentKind::ConstantState;
    int family = 0;
    std::vector<double> speeds;
    std::vector<State> states;
};

enum class BoundarySide { Left, Right };

struct WaveFan {
    std::vector<FanSegment> segments;  // ordered by speed, outer constants reach +-infinity
    double s1 = 0.0;
    double s2 = 0.0;
    // Boundary problems only: the layer joining the boundary datum to the
    // trace of the inviscid solution, and that trace.
    std::optional<LayerOrbit> layer;
    std::optional<State> trace;
    std::optional<BoundarySide> side;

    // Self-similar profile at xi = x / t (xi = (x - L) / t for the right
    // boundary). At a jump speed the left state is returned.
    State evaluate(double xi) const;
    // Speeds of all non-constant segments, nondecreasing.
    std::vector<double> wave_speeds() const;
};

// u_minus = T1_{s1}(T2_{s2} u_plus) by damped Newton. NoSolution when Newton
// stalls or a curve leaves K.
WaveFan solve_riemann(const TriangularSystem& sys, const State& u_minus, const State& u_plus);

// Z1_{s1} u_bar: the state at x = 0 of the stable layer converging to u_bar
// whose first component is offset by s1 there.
State boundary_curve_Z1(const TriangularSystem& sys, const State& u_bar, double s1);

// Left: ub = Z1_{s1}(T2_{s2} u0), only second-family waves enter, trace = T2_{s2} u0.
// Right: the unstable layer moves only u2, so ub = trace + (0, s2) and u0 = T1_{s1} trace;
// only first-family waves enter.
WaveFan solve_boundary_riemann(const TriangularSystem& sys, const State& u0, const State& ub, BoundarySide side);

}  // namespace vv
