#pragma once

#include "npw/core.hpp"
#include "npw/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

namespace npw::ode {

using Rhs = std::function<void(double t, const Vec& y, Vec& dy)>;

struct Options {
    double rtol = 1e-9;
    double atol = 1e-9;
    double h_init = 0.0;  ///< 0 selects the step automatically
    std::size_t max_steps = 2'000'000;
    /// Largest admissible |h| for a step starting at t moving in direction dir.
    std::function<double(double t, int dir)> step_cap;
    /// Parameter values the stepper must land on exactly.
    std::vector<double> nodes;
    /// Checked after every accepted step; returning a status ends the run.
    std::function<std::optional<Status>(double t, const Vec& y)> stop;
};

namespace detail {

// Dormand-Prince 5(4) coefficients.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                        a75 = -2187.0 / 6784, a76 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

inline double error_norm(const Vec& err, const Vec& y0, const Vec& y1, double rtol, double atol) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < err.size(); ++i) {
        const double sc = atol + rtol * std::max(std::abs(y0(i)), std::abs(y1(i)));
        m = std::max(m, std::abs(err(i)) / sc);
    }
    return m;
}

}  // namespace detail

/// Integrates y' = f(t, y) from t0 to t1 (either direction) with the Dormand-Prince
/// 5(4) pair and local extrapolation. The right-hand side may throw PointOutsideChart;
/// such steps are rejected and retried smaller, and a run that cannot advance without
/// leaving the chart ends with LeftChart.
inline Trajectory integrate(const Rhs& f, double t0, const Vec& y0, double t1, const Options& opt,
                            int dim, Layout layout) {
    using namespace detail;
    Trajectory out(dim, layout);
    out.push_first(t0, y0);
    Diagnostics& diag = out.diagnostics;
    const int dir = t1 >= t0 ? 1 : -1;
    if (dir < 0) out.begin_backward_recording();

    auto finish = [&](Status s) {
        out.status = s;
        if (dir < 0) out.reverse_recorded();
        return out;
    };
    if (t1 == t0) return finish({Termination::Completed, t1, 0.0});

    std::vector<double> nodes;
    for (double n : opt.nodes) {
        if ((n - t0) * dir > 0.0 && (t1 - n) * dir > 0.0) nodes.push_back(n);
    }
    nodes.push_back(t1);
    std::sort(nodes.begin(), nodes.end(), [dir](double a, double b) { return a * dir < b * dir; });
    std::size_t next_node = 0;

    const Eigen::Index n = y0.size();
    Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), y1(n), err(n);
    Vec y = y0;
    double t = t0;

    auto eval = [&](double tt, const Vec& yy, Vec& out_dy) {
        ++diag.rhs_evaluations;
        f(tt, yy, out_dy);
    };
    try {
        eval(t, y, k1);
    } catch (const PointOutsideChart&) {
        return finish({Termination::LeftChart, t, 0.0});
    }

    auto cap_at = [&](double tt) {
        double cap = std::abs(t1 - t0);
        if (opt.step_cap) cap = std::min(cap, opt.step_cap(tt, dir));
        return cap;
    };

    double h = opt.h_init;
    if (h <= 0.0) {
        // Starting step heuristic after Hairer, Norsett & Wanner.
        auto rms = [&](const Vec& v) {
            double s = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double sc = opt.atol + opt.rtol * std::abs(y(i));
                s += (v(i) / sc) * (v(i) / sc);
            }
            return std::sqrt(s / static_cast<double>(n));
        };
        const double dn0 = rms(y), dn1 = rms(k1);
        double h0 = (dn0 < 1e-5 || dn1 < 1e-5) ? 1e-6 : 0.01 * dn0 / dn1;
        h0 = std::min(h0, cap_at(t));
        ytmp = y + dir * h0 * k1;
        double h1 = h0;
        try {
            eval(t + dir * h0, ytmp, k2);
            const double dn2 = rms(k2 - k1) / h0;
            const double dm = std::max(dn1, dn2);
            h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
        } catch (const PointOutsideChart&) {
            h1 = h0 * 1e-2;
        }
        h = std::min(100.0 * h0, h1);
    }

    bool last_reject_chart = false;
    bool rejected_prev = false;
    while (true) {
        if (diag.accepted_steps + diag.rejected_steps >= opt.max_steps) {
            return finish({Termination::MaxSteps, t, sup_abs(y)});
        }
        h = std::min(h, cap_at(t));
        const double target = nodes[next_node];
        bool hits_node = false;
        if (std::abs(target - t) <= h * (1.0 + 1e-12)) {
            h = std::abs(target - t);
            hits_node = true;
        }
        const double hmin = 16.0 * 2.2e-16 * std::max(1.0, std::abs(t));
        if (h < hmin) {
            const Termination why = last_reject_chart ? Termination::LeftChart : Termination::BlowUp;
            return finish({why, t, sup_abs(y)});
        }
        const double hs = dir * h;
        const double tn = hits_node ? target : t + hs;

        bool ok = true;
        try {
            ytmp = y + hs * (a21 * k1);
            eval(t + c2 * hs, ytmp, k2);
            ytmp = y + hs * (a31 * k1 + a32 * k2);
            eval(t + c3 * hs, ytmp, k3);
            ytmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
            eval(t + c4 * hs, ytmp, k4);
            ytmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
            eval(t + c5 * hs, ytmp, k5);
            ytmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
            eval(t + hs, ytmp, k6);
            y1 = y + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
            eval(tn, y1, k7);
        } catch (const PointOutsideChart&) {
            ok = false;
        }
        if (!ok) {
            ++diag.rejected_steps;
            last_reject_chart = true;
            rejected_prev = true;
            h *= 0.25;
            continue;
        }
        err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const double en = error_norm(err, y, y1, opt.rtol, opt.atol);
        if (!std::isfinite(en) || !y1.allFinite()) {
            ++diag.rejected_steps;
            last_reject_chart = false;
            rejected_prev = true;
            h *= 0.2;
            continue;
        }
        if (en > 1.0) {
            ++diag.rejected_steps;
            last_reject_chart = false;
            rejected_prev = true;
            h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
            continue;
        }

        RkSegment seg;
        seg.t0 = t;
        seg.h = tn - t;
        const Vec ydiff = y1 - y;
        const Vec bspl = seg.h * k1 - ydiff;
        seg.rc[0] = y;
        seg.rc[1] = ydiff;
        seg.rc[2] = bspl;
        seg.rc[3] = ydiff - seg.h * k7 - bspl;
        seg.rc[4] = seg.h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);

        ++diag.accepted_steps;
        diag.min_step = std::min(diag.min_step, h);
        diag.max_step = std::max(diag.max_step, h);
        t = tn;
        y = y1;
        k1 = k7;
        out.push(t, y, std::move(seg));
        last_reject_chart = false;

        if (opt.stop) {
            if (auto s = opt.stop(t, y)) return finish(*s);
        }
        if (hits_node) {
            if (next_node + 1 == nodes.size()) return finish({Termination::Completed, t, sup_abs(y)});
            ++next_node;
        }
        double fac = en == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(en, -0.2)));
        if (rejected_prev) fac = std::min(fac, 1.0);
        rejected_prev = false;
        h *= fac;
    }
}

}  // namespace npw::ode
