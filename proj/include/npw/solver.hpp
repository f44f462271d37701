#pragma once

#include "npw/core.hpp"
#include "npw/deltanets.hpp"
#include "npw/manifold.hpp"
#include "npw/ode.hpp"
#include "npw/profiles.hpp"
#include "npw/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace npw {

inline constexpr double kDefaultBlowupThreshold = 1e8;

/// Geodesic data for g = 2 du dv + H du^2 + h, posed at u = start_u.
///
/// For a != 0 the curve is parametrised by u and vdot0, xdot0 are u-derivatives.
/// For a = 0 the wave coordinate stays at start_u and the parameter is the affine one.
struct GeodesicProblem {
    SpatialManifold manifold;
    WaveProfile profile;
    double eps = 0.1;
    double a = 1.0;
    double v0 = 0.0;
    double vdot0 = 0.0;
    Vec x0;
    Vec xdot0;
    double start_u = -1.0;
    /// Constant extra acceleration added to the x-equation (perturbation studies only).
    std::optional<Vec> forcing;

    GeodesicProblem(SpatialManifold m, WaveProfile p) : manifold(std::move(m)), profile(std::move(p)) {}

    int dim() const { return manifold.dim(); }
    bool impulsive() const { return profile.is_impulsive(); }
    double support_radius() const {
        return impulsive() ? profile.impulsive().net.support_radius(eps) : 0.0;
    }

    void validate() const {
        const int m = dim();
        if (x0.size() != m || xdot0.size() != m) throw InvalidParams("initial data has wrong dimension");
        if (profile.dim() != 0 && profile.dim() != m) {
            throw InvalidParams("profile '" + profile.name() + "' needs dimension " +
                                std::to_string(profile.dim()));
        }
        if (forcing && forcing->size() != m) throw InvalidParams("forcing has wrong dimension");
        if (!manifold.in_chart(x0)) throw PointOutsideChart("x0 outside the chart of " + manifold.name());
        if (!std::isfinite(a)) throw InvalidParams("a must be finite");
        if (impulsive()) {
            DeltaNet::check_eps(eps);
            if (!(start_u < -support_radius())) {
                throw InvalidParams("impulsive data must be posed before the wave zone");
            }
        }
    }
};

namespace detail {

/// Wave-profile terms at (u, x): H, dH/du and the coordinate gradient of H.
struct WaveTerms {
    double H = 0.0;
    double H_u = 0.0;
    Vec dH;
};

inline WaveTerms wave_terms(const GeodesicProblem& p, double u, const Vec& x) {
    WaveTerms w;
    if (p.impulsive()) {
        const auto& ip = p.profile.impulsive();
        const double d = ip.net.eval(p.eps, u);
        const double dd = ip.net.eval_derivative(p.eps, u);
        if (d == 0.0 && dd == 0.0) {
            w.dH = Vec::Zero(x.size());
            return w;
        }
        const double f = ip.f.value(x);
        w.H = f * d;
        w.H_u = f * dd;
        w.dH = d * ip.f.partials(x);
        return w;
    }
    const auto& s = p.profile.smooth();
    w.H = s.H(u, x);
    w.H_u = s.dH_du(u, x);
    w.dH = s.dH_dx(u, x);
    return w;
}

inline double H_at(const GeodesicProblem& p, double u, const Vec& x) {
    if (p.impulsive()) {
        const auto& ip = p.profile.impulsive();
        const double d = ip.net.eval(p.eps, u);
        return d == 0.0 ? 0.0 : ip.f.value(x) * d;
    }
    return p.profile.smooth().H(u, x);
}

/// Internal first-order system in (v, x, w, xdot) with w = v' + H/2. The energy is then
/// 2w + h(xdot, xdot), and w stays O(1) across the pulse while v' does not.
inline ode::Rhs internal_rhs(const GeodesicProblem& p) {
    const int m = p.dim();
    return [&p, m](double u, const Vec& z, Vec& dz) {
        const Vec x = z.segment(1, m);
        const Vec xd = z.segment(m + 2, m);
        if (!p.manifold.in_chart(x)) throw PointOutsideChart("left the chart");
        const WaveTerms wt = wave_terms(p, u, x);
        Vec acc = -p.manifold.christoffel_at(x).contract(xd);
        if (wt.dH.squaredNorm() > 0.0) acc += 0.5 * (p.manifold.inverse_metric_at(x) * wt.dH);
        if (p.forcing) acc += *p.forcing;
        dz.resize(2 * m + 2);
        dz(0) = z(m + 1) - 0.5 * wt.H;
        dz.segment(1, m) = xd;
        dz(m + 1) = -0.5 * wt.dH.dot(xd);
        dz.segment(m + 2, m) = acc;
    };
}

inline void to_internal(const GeodesicProblem& p, double u, Vec& y) {
    const int m = p.dim();
    y(m + 1) += 0.5 * H_at(p, u, y.segment(1, m));
}

inline void from_internal(const GeodesicProblem& p, double u, Vec& y) {
    const int m = p.dim();
    y(m + 1) -= 0.5 * H_at(p, u, y.segment(1, m));
}

inline Vec full_state(double v, const Vec& x, double vdot, const Vec& xdot) {
    const auto m = x.size();
    Vec y(2 * m + 2);
    y(0) = v;
    y.segment(1, m) = x;
    y(m + 1) = vdot;
    y.segment(m + 2, m) = xdot;
    return y;
}

}  // namespace detail

/// (vdot, xdot, vddot, xddot) of the geodesic system in the u-parametrisation:
/// v'' = -H_u/2 - d_iH x'^i and x''^k = -Gamma^k_ij x'^i x'^j + h^kl d_lH / 2.
/// For impulsive profiles H = f delta_eps, so d_iH = delta_eps d_i f and H_u = f delta_eps'.
inline Vec rhs(const GeodesicProblem& p, double u, const Vec& state) {
    const int m = p.dim();
    const Vec x = state.segment(1, m);
    const Vec xd = state.segment(m + 2, m);
    if (!p.manifold.in_chart(x)) throw PointOutsideChart("point outside the chart");
    Vec out(2 * m + 2);
    out(0) = state(m + 1);
    out.segment(1, m) = xd;
    if (p.a == 0.0) {
        out(m + 1) = 0.0;
        out.segment(m + 2, m) = -p.manifold.christoffel_at(x).contract(xd);
        return out;
    }
    const auto wt = detail::wave_terms(p, u, x);
    Vec acc = -p.manifold.christoffel_at(x).contract(xd);
    if (wt.dH.squaredNorm() > 0.0) acc += 0.5 * (p.manifold.inverse_metric_at(x) * wt.dH);
    if (p.forcing) acc += *p.forcing;
    out(m + 1) = -0.5 * wt.H_u - wt.dH.dot(xd);
    out.segment(m + 2, m) = acc;
    return out;
}

/// g(gamma', gamma') for a full-layout state. With u-derivatives this is
/// a^2 (2 v' + H + h(x', x')); for a = 0 it reduces to h(xdot, xdot).
inline double energy(const GeodesicProblem& p, double eps, double u, const Vec& state) {
    const int m = p.dim();
    const Vec x = state.segment(1, m);
    const Vec xd = state.segment(m + 2, m);
    const double hh = p.manifold.inner(x, xd, xd);
    if (p.a == 0.0) return hh;
    GeodesicProblem q = p;
    q.eps = eps;
    return p.a * p.a * (2.0 * state(m + 1) + detail::H_at(q, u, x) + hh);
}

inline double energy_drift(const GeodesicProblem& p, const Trajectory& tr) {
    if (tr.empty()) return 0.0;
    const double e0 = energy(p, p.eps, tr.param(0), tr.state(0));
    double d = 0.0;
    for (std::size_t i = 0; i < tr.size(); ++i) {
        d = std::max(d, std::abs(energy(p, p.eps, tr.param(i), tr.state(i)) - e0));
    }
    return d;
}

struct IntegrateOptions {
    double tol = 1e-9;
    double blowup_threshold = kDefaultBlowupThreshold;
    std::size_t max_steps = 2'000'000;
};

/// Integrates the full system from (u0, y0) to u1 in either direction.
/// y0 is a full-layout state with u-derivatives; requires a != 0.
inline Trajectory integrate_between(const GeodesicProblem& p, double u0, const Vec& y0, double u1,
                                    const IntegrateOptions& io) {
    if (!(io.tol > 0.0)) throw InvalidParams("tolerance must be positive");
    if (p.a == 0.0) throw InvalidParams("integrate_between needs a != 0");
    const int m = p.dim();
    const double r = p.support_radius();
    ode::Options opt;
    opt.rtol = io.tol;
    opt.atol = io.tol;
    opt.max_steps = io.max_steps;
    if (p.impulsive()) {
        opt.nodes = {-r, r};
        const double cap = r / 50.0;
        opt.step_cap = [r, cap](double t, int dir) {
            const bool inside = dir > 0 ? (t >= -r && t < r) : (t > -r && t <= r);
            return inside ? cap : kInf;
        };
    }
    const double thr = io.blowup_threshold;
    opt.stop = [m, thr](double t, const Vec& z) -> std::optional<Status> {
        const double nx = sup_abs(z.segment(1, m));
        const double nxd = sup_abs(z.segment(m + 2, m));
        const double n = std::max(nx, nxd);
        if (n > thr) return Status{Termination::BlowUp, t, n};
        return std::nullopt;
    };
    Vec z0 = y0;
    detail::to_internal(p, u0, z0);
    const ode::Rhs f = detail::internal_rhs(p);
    Trajectory raw = ode::integrate(f, u0, z0, u1, opt, m, Layout::Full);

    // Convert samples to (v, x, v', x'); segments stay internal and are mapped on evaluation.
    // The starting sample is the caller's vector itself so joined runs match bit for bit.
    Trajectory out(m, Layout::Full);
    const std::size_t start_index = raw.recorded_backward ? raw.size() - 1 : 0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        Vec y = raw.state(i);
        if (i == start_index) {
            y = y0;
        } else {
            detail::from_internal(p, raw.param(i), y);
        }
        if (i == 0) {
            out.push_first(raw.param(i), std::move(y));
        } else {
            out.push(raw.param(i), std::move(y), raw.segments()[i - 1]);
        }
    }
    out.status = raw.status;
    out.diagnostics = raw.diagnostics;
    out.recorded_backward = raw.recorded_backward;
    out.output_map = [copy = p](double u, Vec& y) { detail::from_internal(copy, u, y); };
    if (!p.forcing) out.diagnostics.energy_drift = energy_drift(p, out);
    return out;
}

/// Adaptive Dormand-Prince integration from start_u to horizon. Inside the impulse zone
/// the step is capped at support_radius / 50 and the stepper lands on +-support_radius.
/// A run whose |x| or |xdot| exceeds blowup_threshold ends with BlowUp.
inline Trajectory integrate_adaptive(const GeodesicProblem& p, double horizon, double tol,
                                     double blowup_threshold = kDefaultBlowupThreshold,
                                     std::size_t max_steps = 2'000'000) {
    p.validate();
    if (!(horizon > p.start_u)) throw InvalidParams("horizon must exceed start_u");
    if (!(tol > 0.0)) throw InvalidParams("tolerance must be positive");
    if (p.a == 0.0) {
        // u stays at start_u, so H(u, x) does not act: v is linear and x a background geodesic.
        Trajectory bg = background_geodesic(p.manifold, p.x0, p.xdot0, p.start_u, horizon, tol,
                                            max_steps);
        Trajectory out = lift_with_linear_v(bg, p.start_u, p.v0, p.vdot0);
        out.diagnostics.energy_drift = energy_drift(p, out);
        return out;
    }
    IntegrateOptions io;
    io.tol = tol;
    io.blowup_threshold = blowup_threshold;
    io.max_steps = max_steps;
    const Vec y0 = detail::full_state(p.v0, p.x0, p.vdot0, p.xdot0);
    return integrate_between(p, p.start_u, y0, horizon, io);
}

/// Phase-1 endpoint. Fixed and inside every admissible zone, so the background run
/// before the pulse does not depend on eps.
inline constexpr double kPhaseOneEnd = 0.0;

/// Background geodesic before the wave zone, truncated at u = -support_radius and
/// lifted with v linear. Bitwise independent of eps below -support_radius.
inline Trajectory phase_one(const GeodesicProblem& p, double tol) {
    const double r = p.support_radius();
    Trajectory bg = background_geodesic(p.manifold, p.x0, p.xdot0, p.start_u, kPhaseOneEnd, tol);
    Trajectory cut(p.dim(), Layout::Spatial);
    cut.diagnostics = bg.diagnostics;
    std::size_t i = 0;
    for (; i < bg.size() && bg.param(i) < -r; ++i) {
        if (i == 0) {
            cut.push_first(bg.param(i), bg.state(i));
        } else {
            cut.push(bg.param(i), bg.state(i), bg.segments()[i - 1]);
        }
    }
    if (i < bg.size()) {
        cut.push(-r, bg.dense_eval(-r), bg.segments()[i - 1]);
        cut.status = {Termination::Completed, -r, 0.0};
    } else {
        cut.status = bg.status;
    }
    return lift_with_linear_v(cut, p.start_u, p.v0, p.vdot0);
}

/// Constructive solution: background geodesic up to -eps, the full system across the
/// zone, and a background geodesic with linear v after it. Requires an impulsive profile.
inline Trajectory solve_three_phase(const GeodesicProblem& p, double horizon, double tol,
                                    double blowup_threshold = kDefaultBlowupThreshold) {
    p.validate();
    if (!p.impulsive()) throw InvalidParams("solve_three_phase needs an impulsive profile");
    if (!(horizon > p.start_u)) throw InvalidParams("horizon must exceed start_u");
    if (p.a == 0.0) return integrate_adaptive(p, horizon, tol, blowup_threshold);
    const int m = p.dim();
    const double r = p.support_radius();

    Trajectory out = phase_one(p, tol);
    auto finish = [&](Trajectory& tr) -> Trajectory& {
        if (tr.status.completed()) tr.diagnostics.energy_drift = energy_drift(p, tr);
        return tr;
    };
    if (!out.status.completed() || horizon <= -r) {
        // Horizon before the zone: the background run already covers it.
        if (out.status.completed()) {
            Trajectory direct = integrate_adaptive(p, horizon, tol, blowup_threshold);
            return direct;
        }
        return out;
    }

    IntegrateOptions io;
    io.tol = tol;
    io.blowup_threshold = blowup_threshold;
    const double u2 = std::min(horizon, r);
    Trajectory zone = integrate_between(p, -r, out.state(out.size() - 1), u2, io);
    // H vanishes outside the zone, so the map is the identity on the background phases.
    auto map = zone.output_map;
    Diagnostics d = out.diagnostics;
    out.append(zone);
    out.output_map = map;
    out.status = zone.status;
    d.accepted_steps += zone.diagnostics.accepted_steps;
    d.rejected_steps += zone.diagnostics.rejected_steps;
    d.rhs_evaluations += zone.diagnostics.rhs_evaluations;
    d.min_step = std::min(d.min_step, zone.diagnostics.min_step);
    d.max_step = std::max(d.max_step, zone.diagnostics.max_step);
    out.diagnostics = d;
    if (!zone.status.completed() || horizon <= r) return finish(out);

    const Vec yr = out.state(out.size() - 1);
    Trajectory bg = background_geodesic(p.manifold, yr.segment(1, m), yr.segment(m + 2, m), r,
                                        horizon, tol);
    Trajectory tail = lift_with_linear_v(bg, r, yr(0), yr(m + 1));
    // The lifted start re-derives v and v'; pin it to the exact phase-2 end state.
    Trajectory tail_fixed(m, Layout::Full);
    tail_fixed.push_first(r, yr);
    for (std::size_t i = 1; i < tail.size(); ++i) {
        tail_fixed.push(tail.param(i), tail.state(i), tail.segments()[i - 1]);
    }
    out.append(tail_fixed);
    out.status = bg.status;
    if (bg.status.completed()) out.status.at = horizon;
    d.accepted_steps += bg.diagnostics.accepted_steps;
    d.rejected_steps += bg.diagnostics.rejected_steps;
    d.rhs_evaluations += bg.diagnostics.rhs_evaluations;
    d.min_step = std::min(d.min_step, bg.diagnostics.min_step);
    d.max_step = std::max(d.max_step, bg.diagnostics.max_step);
    out.diagnostics = d;
    return finish(out);
}

/// Sup-norm bounds entering the existence interval.
struct AlphaBounds {
    double F1_sup = 0.0;  ///< sup |Gamma(x)(p, p)| over I1 x I2
    double F2_sup = 0.0;  ///< sup |h^kl d_l f / 2| over I1
    double K = 1.0;       ///< L1 bound of the net
};

struct AlphaResult {
    double alpha = 0.0;
    AlphaBounds bounds;
    double b = 1.0;
    double c = 1.0;
    double velocity_radius = 0.0;  ///< radius of I2 = c + K F2_sup
    double eps0() const { return alpha / 2.0; }
};

inline constexpr double kSupSafety = 1.05;
inline constexpr int kPositionGrid = 201;
inline constexpr int kChristoffelPositionGrid = 51;
inline constexpr int kVelocityGrid = 21;

namespace detail {

/// Calls fn(point) for every point of an n^dim grid on the cube of half-width radius
/// about centre that lies in the closed ball of that radius.
template <class Fn>
void for_ball_grid(const Vec& centre, double radius, int n, Fn&& fn) {
    const auto dim = centre.size();
    std::vector<int> idx(static_cast<std::size_t>(dim), 0);
    Vec pt(dim);
    const double step = n > 1 ? 2.0 * radius / (n - 1) : 0.0;
    while (true) {
        for (Eigen::Index k = 0; k < dim; ++k) {
            pt(k) = n > 1 ? centre(k) - radius + step * idx[static_cast<std::size_t>(k)] : centre(k);
        }
        if ((pt - centre).norm() <= radius * (1.0 + 1e-12)) fn(pt);
        Eigen::Index k = 0;
        for (; k < dim; ++k) {
            auto& i = idx[static_cast<std::size_t>(k)];
            if (++i < n) break;
            i = 0;
        }
        if (k == dim) break;
    }
}

inline double sup_F2(const GeodesicProblem& p, const Vec& centre, double b) {
    const auto& f = p.profile.impulsive().f;
    double s = 0.0;
    for_ball_grid(centre, b, kPositionGrid, [&](const Vec& x) {
        if (!p.manifold.in_chart(x)) return;
        s = std::max(s, (0.5 * (p.manifold.inverse_metric_at(x) * f.partials(x))).norm());
    });
    return s;
}

inline double sup_F1(const GeodesicProblem& p, const Vec& centre, double b, const Vec& vcentre,
                     double vr) {
    double s = 0.0;
    for_ball_grid(centre, b, kChristoffelPositionGrid, [&](const Vec& x) {
        if (!p.manifold.in_chart(x)) return;
        const Christoffel g = p.manifold.christoffel_at(x);
        if (g.is_zero()) return;
        for_ball_grid(vcentre, vr, kVelocityGrid,
                      [&](const Vec& v) { s = std::max(s, g.contract(v).norm()); });
    });
    return s;
}

inline double safe_ratio(double num, double den) { return den == 0.0 ? kInf : num / den; }

}  // namespace detail

/// alpha = min(1, b / (|xdot0| + F1 + K F2), c / F1) with I1 the b-ball about x0 and I2 the
/// (c + K F2)-ball about xdot0. Sups come from grid sampling times 1.05 unless analytic
/// bounds are supplied; a vanishing denominator removes the corresponding constraint.
/// Grid points outside the chart are skipped.
inline AlphaResult existence_alpha(const GeodesicProblem& p, double b = 1.0, double c = 1.0,
                                   std::optional<AlphaBounds> analytic = std::nullopt) {
    if (!(b > 0.0) || !(c > 0.0)) throw InvalidParams("b and c must be positive");
    if (!p.impulsive()) throw InvalidParams("existence_alpha needs an impulsive profile");
    AlphaResult res;
    res.b = b;
    res.c = c;
    if (analytic) {
        res.bounds = *analytic;
        res.velocity_radius = c + res.bounds.K * res.bounds.F2_sup;
    } else {
        res.bounds.K = p.profile.impulsive().net.l1_bound();
        res.bounds.F2_sup = kSupSafety * detail::sup_F2(p, p.x0, b);
        res.velocity_radius = c + res.bounds.K * res.bounds.F2_sup;
        res.bounds.F1_sup =
            kSupSafety * detail::sup_F1(p, p.x0, b, p.xdot0, res.velocity_radius);
    }
    const auto& B = res.bounds;
    const double t2 = detail::safe_ratio(b, p.xdot0.norm() + B.F1_sup + B.K * B.F2_sup);
    const double t3 = detail::safe_ratio(c, B.F1_sup);
    res.alpha = std::min({1.0, t2, t3});
    return res;
}

}  // namespace npw
