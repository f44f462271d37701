#pragma once

#include "npw/core.hpp"
#include "npw/manifold.hpp"
#include "npw/picard.hpp"
#include "npw/quadrature.hpp"
#include "npw/solver.hpp"
#include "npw/trajectory.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

namespace npw {

namespace detail {

/// Spatial trajectory sampled from an exact solution on Chebyshev-Lobatto panels.
inline Trajectory panel_sampled(int m, double t0, double t1, double width,
                                const std::function<Vec(double)>& state) {
    constexpr int kNodes = 16;
    const auto tau = lobatto_nodes(kNodes);
    const auto w = lobatto_weights(kNodes);
    const int panels = std::max(1, static_cast<int>(std::ceil((t1 - t0) / width)));
    Trajectory out(m, Layout::Spatial);
    out.push_first(t0, state(t0));
    for (int k = 0; k < panels; ++k) {
        const double a = t0 + (t1 - t0) * k / panels;
        const double b = k + 1 == panels ? t1 : t0 + (t1 - t0) * (k + 1) / panels;
        NodalSegment seg;
        seg.weights = w;
        for (int j = 0; j < kNodes; ++j) {
            double t = 0.5 * (a + b) + 0.5 * (b - a) * tau[static_cast<std::size_t>(j)];
            if (j == 0) t = a;
            if (j == kNodes - 1) t = b;
            seg.nodes.push_back(t);
            seg.values.push_back(j == 0 ? out.state(out.size() - 1) : state(t));
        }
        for (int j = 1; j < kNodes; ++j) {
            out.push(seg.nodes[static_cast<std::size_t>(j)], seg.values[static_cast<std::size_t>(j)], seg);
        }
    }
    out.status = {Termination::Completed, t1, 0.0};
    return out;
}

}  // namespace detail

/// Flat-space plane wave x'' = h(u) x with h(u) = h0 + sin(u) h1, from (x0, xdot0) at u0.
/// Constant h propagates the companion system with a matrix exponential; otherwise the
/// system is integrated adaptively at tol / 100.
inline Trajectory plane_wave_reference(const Mat& h0, const std::optional<Mat>& h1, const Vec& x0,
                                       const Vec& xdot0, double u0, double horizon, double tol) {
    if (!(tol > 0.0)) throw InvalidParams("tolerance must be positive");
    const auto m = h0.rows();
    if (h0.cols() != m || x0.size() != m || xdot0.size() != m) {
        throw InvalidParams("plane wave data have inconsistent sizes");
    }
    const bool constant = !h1 || h1->isZero(0.0);
    if (constant) {
        Mat A = Mat::Zero(2 * m, 2 * m);
        A.topRightCorner(m, m) = Mat::Identity(m, m);
        A.bottomLeftCorner(m, m) = h0;
        Vec y0(2 * m);
        y0 << x0, xdot0;
        return detail::panel_sampled(static_cast<int>(m), u0, horizon, 0.25, [&](double u) {
            const Mat E = (A * (u - u0)).exp();
            return Vec(E * y0);
        });
    }
    const Mat osc = *h1;
    ode::Rhs f = [&](double u, const Vec& y, Vec& dy) {
        dy.resize(2 * m);
        dy.head(m) = y.tail(m);
        dy.tail(m) = (h0 + std::sin(u) * osc) * y.head(m);
    };
    ode::Options opt;
    opt.rtol = tol / 100.0;
    opt.atol = tol / 100.0;
    Vec y0(2 * m);
    y0 << x0, xdot0;
    return ode::integrate(f, u0, y0, horizon, opt, static_cast<int>(m), Layout::Spatial);
}

struct JumpPrediction {
    Vec delta_xdot;
    double v_jump = 0.0;
};

/// Formal integration of the delta term across u = 0 at the crossing point:
/// delta_xdot = (a/2) h^kl d_l f (the jump of dx/ds = a dx/du) and v_jump = -f/2.
/// The v-jump is a jump of the coordinate v, so it does not depend on a.
inline JumpPrediction jump_prediction(const SpatialManifold& M, const ScalarField& f,
                                      const Vec& x_cross, double a = 1.0) {
    if (!M.in_chart(x_cross)) throw PointOutsideChart("crossing point outside the chart");
    JumpPrediction j;
    j.delta_xdot = 0.5 * a * gradient(M, f, x_cross);
    j.v_jump = -0.5 * f.value(x_cross);
    return j;
}

/// Quantities read off one regularised run.
struct LimitSample {
    double eps = 0.0;
    Vec crossing_point;
    Vec pre_velocity;
    Vec post_velocity;
    double v_jump = 0.0;
};

/// Richardson-extrapolated eps -> 0 limit; velocities are u-derivatives.
struct LimitEstimate {
    Vec crossing_point;
    Vec pre_velocity;
    Vec post_velocity;
    double v_jump = 0.0;
    double observed_order = 0.0;  ///< NaN when the samples do not move with eps
    double error_estimate = 0.0;  ///< |extrapolated - finest| in the sup norm
    std::vector<double> eps_sequence;
    std::vector<LimitSample> samples;
    std::vector<double> successive_differences;  ///< sup-norm distance of consecutive samples
};

inline constexpr double kSampleMargin = 2.0;

inline LimitSample limit_sample(const GeodesicProblem& base, double eps, double tol) {
    GeodesicProblem p = base;
    p.eps = eps;
    const int m = p.dim();
    const double r = p.support_radius();
    const double ur = kSampleMargin * r;
    Trajectory tr = solve_three_phase(p, ur, tol);
    if (!tr.status.completed()) {
        throw Error("impulsive_limit run ended with " + to_string(tr.status.kind));
    }
    const Vec ym = tr.dense_eval(-ur);
    const Vec y0 = tr.dense_eval(0.0);
    const Vec yp = tr.state(tr.size() - 1);
    LimitSample s;
    s.eps = eps;
    s.crossing_point = y0.segment(1, m);
    s.pre_velocity = ym.segment(m + 2, m);
    s.post_velocity = yp.segment(m + 2, m);
    // v is linear outside the zone; extend both sides to u = 0.
    const double v_left = ym(0) + ur * ym(m + 1);
    const double v_right = yp(0) - ur * yp(m + 1);
    s.v_jump = v_right - v_left;
    return s;
}

namespace detail {

inline Vec pack(const LimitSample& s) {
    const auto m = s.crossing_point.size();
    Vec q(3 * m + 1);
    q << s.crossing_point, s.pre_velocity, s.post_velocity, s.v_jump;
    return q;
}

}  // namespace detail

/// Solves the base problem at each eps, then extrapolates the last three samples with the
/// fitted order p = log(|q1 - q2| / |q2 - q3|) / log(ratio).
inline LimitEstimate impulsive_limit(const GeodesicProblem& base, const std::vector<double>& eps_sequence,
                                     double tol) {
    if (!base.impulsive()) throw InvalidParams("impulsive_limit needs an impulsive profile");
    if (eps_sequence.empty()) throw InvalidParams("eps sequence must be nonempty");
    for (std::size_t i = 1; i < eps_sequence.size(); ++i) {
        if (!(eps_sequence[i] < eps_sequence[i - 1])) {
            throw InvalidParams("eps sequence must be strictly decreasing");
        }
    }
    LimitEstimate L;
    L.eps_sequence = eps_sequence;
    for (double e : eps_sequence) L.samples.push_back(limit_sample(base, e, tol));
    std::vector<Vec> q;
    for (const auto& s : L.samples) q.push_back(detail::pack(s));
    for (std::size_t i = 1; i < q.size(); ++i) L.successive_differences.push_back(sup_abs(q[i] - q[i - 1]));

    Vec best = q.back();
    L.observed_order = std::nan("");
    L.error_estimate = 0.0;
    if (q.size() >= 3) {
        const std::size_t n = q.size();
        const Vec d1 = q[n - 2] - q[n - 3];
        const Vec d2 = q[n - 1] - q[n - 2];
        const double ratio = eps_sequence[n - 2] / eps_sequence[n - 1];
        const double a1 = sup_abs(d1), a2 = sup_abs(d2);
        if (a1 > 0.0 && a2 > 0.0 && a2 < a1) {
            const double p = std::log(a1 / a2) / std::log(ratio);
            L.observed_order = p;
            best = q[n - 1] + d2 / (std::pow(ratio, p) - 1.0);
            L.error_estimate = sup_abs(best - q[n - 1]);
        } else {
            L.error_estimate = a2;
        }
    } else if (q.size() == 2) {
        L.error_estimate = sup_abs(q[1] - q[0]);
    }
    const auto m = base.dim();
    L.crossing_point = best.segment(0, m);
    L.pre_velocity = best.segment(m, m);
    L.post_velocity = best.segment(2 * m, m);
    L.v_jump = best(3 * m);
    return L;
}

/// Finite escape time of rho'' = n rho^(n-1) from (rho0, rhodot0): the radial motion along
/// theta = 0 under V = -rho^n cos(n theta). With E = rhodot0^2 / 2 - rho0^n the time is
/// the integral of d rho / sqrt(2 (E + rho^n)); inward data with E < 0 first turn at
/// rho_min = (-E)^(1/n).
inline double homogeneous_blowup_reference(int n, double rho0, double rhodot0) {
    if (n < 3) throw InvalidParams("finite-time blow-up needs n >= 3");
    if (!(rho0 > 0.0)) throw InvalidParams("rho0 must be positive");
    const double nn = static_cast<double>(n);
    const double E = 0.5 * rhodot0 * rhodot0 - std::pow(rho0, nn);

    // Integral from ra to infinity of d rho / sqrt(2 (c + rho^n - ra^n)), c = E + ra^n >= 0.
    auto escape = [nn](double ra, double c) {
        // rho = ra + s^2 on [ra, 2 ra].
        auto near = [&](double s) {
            const double g = c + std::pow(ra, nn) * std::expm1(nn * std::log1p(s * s / ra));
            return 2.0 * s / std::sqrt(2.0 * g);
        };
        // rho = 2 ra / t^2 on (0, 1], written to stay finite as t -> 0.
        const double base = std::pow(2.0 * ra, nn);
        auto far = [&](double t) {
            const double denom = 2.0 * ((c - std::pow(ra, nn)) * std::pow(t, 2.0 * nn) + base);
            return 4.0 * ra * std::pow(t, nn - 3.0) / std::sqrt(denom);
        };
        const double a = quad::integrate(near, 0.0, std::sqrt(ra), 1e-14).value;
        const double b = quad::integrate(far, 0.0, 1.0, 1e-14).value;
        return a + b;
    };

    if (rhodot0 >= 0.0) {
        // Outward or at rest: monotone escape; c = rhodot0^2 / 2.
        return escape(rho0, 0.5 * rhodot0 * rhodot0);
    }
    if (E >= 0.0) throw InvalidParams("inward data with E >= 0 reach the origin");
    const double rmin = std::pow(-E, 1.0 / nn);
    // Inward leg rmin..rho0 is traversed twice, then the escape from rho0 outward.
    auto leg = [&](double s) {
        const double g = std::pow(rmin, nn) * std::expm1(nn * std::log1p(s * s / rmin));
        return 2.0 * s / std::sqrt(2.0 * g);
    };
    const double inward = quad::integrate(leg, 0.0, std::sqrt(rho0 - rmin), 1e-14).value;
    return 2.0 * inward + escape(rho0, 0.5 * rhodot0 * rhodot0);
}

}  // namespace npw
