#pragma once

#include "npw/core.hpp"
#include "npw/manifold.hpp"
#include "npw/solver.hpp"
#include "npw/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace npw {

struct PicardOptions {
    int nodes_per_panel = 16;
    int zone_panels = 32;      ///< panels across [-support_radius, support_radius]
    double outer_width = 0.05;  ///< largest panel outside the zone
};

namespace detail {

/// Chebyshev-Lobatto nodes on [-1, 1], ascending.
inline std::vector<double> lobatto_nodes(int n) {
    std::vector<double> t(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) t[static_cast<std::size_t>(j)] = -std::cos(std::numbers::pi * j / (n - 1));
    return t;
}

inline std::vector<double> lobatto_weights(int n) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) w[static_cast<std::size_t>(j)] = (j % 2 == 0 ? 1.0 : -1.0);
    w.front() *= 0.5;
    w.back() *= 0.5;
    return w;
}

/// S with (S g)_i = integral from -1 to tau_i of the interpolant of g.
inline Mat cumulative_integration_matrix(const std::vector<double>& tau) {
    const auto n = static_cast<Eigen::Index>(tau.size());
    Mat V(n, n), W(n, n);
    auto cheb = [](int k, double x) { return std::cos(k * std::acos(std::clamp(x, -1.0, 1.0))); };
    // Antiderivative of T_k vanishing at -1.
    auto anti = [&](int k, double x) {
        auto F = [&](double y) {
            if (k == 0) return y;
            if (k == 1) return 0.5 * y * y;
            return cheb(k + 1, y) / (2.0 * (k + 1)) - cheb(k - 1, y) / (2.0 * (k - 1));
        };
        return F(x) - F(-1.0);
    };
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < n; ++k) {
            V(i, k) = cheb(static_cast<int>(k), tau[static_cast<std::size_t>(i)]);
            W(i, k) = anti(static_cast<int>(k), tau[static_cast<std::size_t>(i)]);
        }
    }
    return W * V.partialPivLu().inverse();
}

inline std::vector<double> picard_breakpoints(const GeodesicProblem& p, double t0, double t1,
                                              const PicardOptions& po) {
    std::vector<double> pts = {t0, t1};
    if (p.impulsive()) {
        const double r = p.support_radius();
        for (int k = 0; k <= po.zone_panels; ++k) {
            pts.push_back(-r + 2.0 * r * k / po.zone_panels);
        }
        for (double b : p.profile.impulsive().net.breakpoints(p.eps)) pts.push_back(b);
    }
    std::sort(pts.begin(), pts.end());
    std::vector<double> kept;
    for (double x : pts) {
        if (x < t0 || x > t1) continue;
        if (!kept.empty() && x - kept.back() <= 1e-14 * std::max(1.0, std::abs(x))) continue;
        kept.push_back(x);
    }
    if (kept.back() != t1) kept.back() = t1;
    std::vector<double> out = {kept.front()};
    for (std::size_t i = 1; i < kept.size(); ++i) {
        const double gap = kept[i] - kept[i - 1];
        const int pieces = std::max(1, static_cast<int>(std::ceil(gap / po.outer_width - 1e-12)));
        const bool in_zone = p.impulsive() && kept[i - 1] >= -p.support_radius() &&
                             kept[i] <= p.support_radius();
        const int use = in_zone ? 1 : pieces;
        for (int k = 1; k < use; ++k) out.push_back(kept[i - 1] + gap * k / use);
        out.push_back(kept[i]);
    }
    return out;
}

}  // namespace detail

/// Fixed-point iteration of the integral operator
///   A(x)(t) = x0 + xdot0 (t - t0) + int_t0^t int_t0^s F(r, x(r), xdot(r)) dr ds,
/// F = -Gamma(x)(xdot, xdot) + h^kl d_l H / 2, started from the constant-velocity curve.
/// Iterates are piecewise Chebyshev-Lobatto interpolants; the panels resolve the zone.
/// Stops when successive iterates differ by less than tol in sup|x| + sup|xdot|.
/// Data at t0 come from the background geodesic when t0 > start_u.
inline Trajectory picard_solve(const GeodesicProblem& p, double t0, double t1, double tol,
                               int max_iter = 200, const PicardOptions& po = {}) {
    p.validate();
    if (!(tol > 0.0)) throw InvalidParams("tolerance must be positive");
    if (!(t1 > t0)) throw InvalidParams("picard interval must be nonempty");
    if (p.a == 0.0) throw InvalidParams("picard_solve needs a != 0");
    if (t0 < p.start_u) throw InvalidParams("picard interval starts before the data");
    if (po.nodes_per_panel < 3 || po.zone_panels < 1 || !(po.outer_width > 0.0)) {
        throw InvalidParams("invalid picard discretisation");
    }
    const int m = p.dim();
    Vec xa = p.x0, xda = p.xdot0;
    if (t0 > p.start_u) {
        if (p.impulsive() && t0 > -p.support_radius()) {
            throw InvalidParams("picard interval must start before the wave zone");
        }
        Trajectory bg = background_geodesic(p.manifold, p.x0, p.xdot0, p.start_u, t0, tol * 1e-2);
        if (!bg.status.completed()) throw Error("background run to the picard start failed");
        xa = bg.state(bg.size() - 1).head(m);
        xda = bg.state(bg.size() - 1).tail(m);
    }

    const int N = po.nodes_per_panel;
    const auto tau = detail::lobatto_nodes(N);
    const auto bw = detail::lobatto_weights(N);
    const Mat S = detail::cumulative_integration_matrix(tau);
    const auto bps = detail::picard_breakpoints(p, t0, t1, po);
    const std::size_t P = bps.size() - 1;

    std::vector<double> times;  // panel-major, N per panel
    for (std::size_t k = 0; k < P; ++k) {
        const double a = bps[k], b = bps[k + 1];
        for (int j = 0; j < N; ++j) {
            times.push_back(0.5 * (a + b) + 0.5 * (b - a) * tau[static_cast<std::size_t>(j)]);
        }
        times[k * N] = a;
        times[k * N + N - 1] = b;
    }
    const std::size_t total = times.size();

    auto force = [&](double t, const Vec& x, const Vec& xd) {
        Vec F = -p.manifold.christoffel_at(x).contract(xd);
        Vec dH;
        if (p.impulsive()) {
            const double d = p.profile.impulsive().net.eval(p.eps, t);
            if (d != 0.0) dH = d * p.profile.impulsive().f.partials(x);
        } else {
            dH = p.profile.smooth().dH_dx(t, x);
        }
        if (dH.size() > 0) F += 0.5 * (p.manifold.inverse_metric_at(x) * dH);
        if (p.forcing) F += *p.forcing;
        return F;
    };

    std::vector<Vec> X(total), XD(total);
    for (std::size_t i = 0; i < total; ++i) {
        X[i] = xa + xda * (times[i] - t0);
        XD[i] = xda;
    }

    auto apply = [&](const std::vector<Vec>& x, const std::vector<Vec>& xd, std::vector<Vec>& nx,
                     std::vector<Vec>& nxd) {
        nx.assign(total, Vec());
        nxd.assign(total, Vec());
        Vec xs = xa, xds = xda;
        Mat G(N, m), Vd(N, m);
        for (std::size_t k = 0; k < P; ++k) {
            const double half = 0.5 * (bps[k + 1] - bps[k]);
            for (int j = 0; j < N; ++j) {
                const std::size_t i = k * N + static_cast<std::size_t>(j);
                G.row(j) = force(times[i], x[i], xd[i]).transpose();
            }
            const Mat I1 = half * (S * G);
            for (int j = 0; j < N; ++j) Vd.row(j) = xds.transpose() + I1.row(j);
            const Mat I2 = half * (S * Vd);
            for (int j = 0; j < N; ++j) {
                const std::size_t i = k * N + static_cast<std::size_t>(j);
                nxd[i] = Vd.row(j).transpose();
                nx[i] = xs + I2.row(j).transpose();
            }
            xs = nx[k * N + N - 1];
            xds = nxd[k * N + N - 1];
        }
    };
    auto distance = [&](const std::vector<Vec>& a, const std::vector<Vec>& b,
                        const std::vector<Vec>& ad, const std::vector<Vec>& bd) {
        double dx = 0.0, dv = 0.0;
        for (std::size_t i = 0; i < total; ++i) {
            dx = std::max(dx, sup_abs(a[i] - b[i]));
            dv = std::max(dv, sup_abs(ad[i] - bd[i]));
        }
        return dx + dv;
    };

    Diagnostics diag;
    std::vector<Vec> NX, NXD;
    bool converged = false;
    for (int it = 1; it <= max_iter; ++it) {
        apply(X, XD, NX, NXD);
        const double d = distance(NX, X, NXD, XD);
        diag.iterate_distances.push_back(d);
        X.swap(NX);
        XD.swap(NXD);
        diag.iterations = it;
        if (!std::isfinite(d)) break;
        if (d < tol) {
            converged = true;
            break;
        }
    }
    if (!converged) throw NoConvergence("picard iteration did not converge", diag.iterations);
    apply(X, XD, NX, NXD);
    diag.residual = distance(NX, X, NXD, XD);
    diag.rhs_evaluations = static_cast<std::size_t>(diag.iterations + 1) * total;

    Trajectory out(m, Layout::Spatial);
    auto stacked = [&](std::size_t i) {
        Vec y(2 * m);
        y << X[i], XD[i];
        return y;
    };
    out.push_first(times[0], stacked(0));
    for (std::size_t k = 0; k < P; ++k) {
        NodalSegment seg;
        for (int j = 0; j < N; ++j) {
            const std::size_t i = k * N + static_cast<std::size_t>(j);
            seg.nodes.push_back(times[i]);
            seg.values.push_back(stacked(i));
        }
        seg.weights = bw;
        for (int j = 1; j < N; ++j) out.push(times[k * N + static_cast<std::size_t>(j)], stacked(k * N + static_cast<std::size_t>(j)), seg);
    }
    out.status = {Termination::Completed, t1, 0.0};
    out.diagnostics = diag;
    return out;
}

}  // namespace npw
