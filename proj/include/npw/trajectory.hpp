#pragma once

#include "npw/core.hpp"

#include <algorithm>
#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace npw {

enum class Termination { Completed, BlowUp, LeftChart, MaxSteps };

inline std::string to_string(Termination t) {
    switch (t) {
        case Termination::Completed: return "Completed";
        case Termination::BlowUp: return "BlowUp";
        case Termination::LeftChart: return "LeftChart";
        case Termination::MaxSteps: return "MaxSteps";
    }
    return "Unknown";
}

/// How a run ended. `at` is the parameter value where it stopped (the horizon for
/// Completed runs, the exit/blow-up location otherwise); `norm` is the state norm
/// that triggered a BlowUp.
struct Status {
    Termination kind = Termination::Completed;
    double at = 0.0;
    double norm = 0.0;

    bool completed() const { return kind == Termination::Completed; }
};

struct Diagnostics {
    std::size_t accepted_steps = 0;
    std::size_t rejected_steps = 0;
    std::size_t rhs_evaluations = 0;
    double min_step = kInf;
    double max_step = 0.0;
    double energy_drift = 0.0;  ///< max |lambda(u) - lambda(start)| over samples
    int iterations = 0;         ///< Picard iterations, 0 for stepping solvers
    double residual = 0.0;      ///< integral-equation residual, Picard only
    std::vector<double> iterate_distances;
};

/// One Dormand-Prince step with its continuous extension.
struct RkSegment {
    double t0 = 0.0;
    double h = 0.0;
    std::array<Vec, 5> rc;

    Vec eval(double t) const {
        const double s = (t - t0) / h;
        const double s1 = 1.0 - s;
        return rc[0] + s * (rc[1] + s1 * (rc[2] + s * (rc[3] + s1 * rc[4])));
    }
};

/// Polynomial interpolant through nodal values (barycentric form).
struct NodalSegment {
    std::vector<double> nodes;
    std::vector<Vec> values;
    std::vector<double> weights;

    Vec eval(double t) const {
        Vec num = Vec::Zero(values.front().size());
        double den = 0.0;
        for (std::size_t j = 0; j < nodes.size(); ++j) {
            const double d = t - nodes[j];
            if (d == 0.0) return values[j];
            const double w = weights[j] / d;
            num += w * values[j];
            den += w;
        }
        return num / den;
    }
};

using Segment = std::variant<RkSegment, NodalSegment>;

/// Which components a trajectory carries. Full: (v, x, vdot, xdot); Spatial: (x, xdot).
enum class Layout { Full, Spatial };

/// Sampled solution with piecewise dense output. Samples are stored with strictly
/// increasing parameter; `segments[i]` interpolates between samples i and i+1.
class Trajectory {
public:
    Trajectory() = default;
    Trajectory(int dim, Layout layout) : dim_(dim), layout_(layout) {}

    int dim() const { return dim_; }
    Layout layout() const { return layout_; }
    std::size_t state_size() const {
        return static_cast<std::size_t>(layout_ == Layout::Full ? 2 * dim_ + 2 : 2 * dim_);
    }

    std::size_t size() const { return t_.size(); }
    bool empty() const { return t_.empty(); }
    const std::vector<double>& params() const { return t_; }
    const std::vector<Vec>& states() const { return y_; }
    const std::vector<Segment>& segments() const { return segments_; }
    double param(std::size_t i) const { return t_[i]; }
    const Vec& state(std::size_t i) const { return y_[i]; }
    double front_param() const { return t_.front(); }
    double back_param() const { return t_.back(); }

    double v(const Vec& y) const { return layout_ == Layout::Full ? y(0) : 0.0; }
    double vdot(const Vec& y) const { return layout_ == Layout::Full ? y(dim_ + 1) : 0.0; }
    Vec x(const Vec& y) const { return y.segment(x_offset(), dim_); }
    Vec xdot(const Vec& y) const { return y.segment(xdot_offset(), dim_); }
    Eigen::Index x_offset() const { return layout_ == Layout::Full ? 1 : 0; }
    Eigen::Index xdot_offset() const { return layout_ == Layout::Full ? dim_ + 2 : dim_; }

    /// Interpolated state; exact at sample nodes. Throws outside the sampled range.
    Vec dense_eval(double t) const {
        if (t_.empty()) throw Error("dense_eval on empty trajectory");
        if (t < t_.front() || t > t_.back()) {
            throw Error("dense_eval outside trajectory range");
        }
        auto it = std::lower_bound(t_.begin(), t_.end(), t);
        const auto idx = static_cast<std::size_t>(it - t_.begin());
        if (it != t_.end() && *it == t) return y_[idx];
        const std::size_t seg = idx - 1;
        Vec y = std::visit([t](const auto& s) { return s.eval(t); }, segments_[seg]);
        if (output_map) output_map(t, y);
        return y;
    }

    /// Appends a sample; `seg` interpolates from the previous sample to this one.
    void push(double t, Vec y, Segment seg) {
        if (!t_.empty() && !((t - t_.back()) * recording_dir_ > 0.0)) {
            throw Error("trajectory samples must be strictly monotone");
        }
        if (!t_.empty()) segments_.push_back(std::move(seg));
        t_.push_back(t);
        y_.push_back(std::move(y));
    }
    void push_first(double t, Vec y) {
        if (!t_.empty()) throw Error("push_first on non-empty trajectory");
        t_.push_back(t);
        y_.push_back(std::move(y));
    }

    /// Subsequent push() calls must decrease the parameter; finish with reverse_recorded().
    void begin_backward_recording() { recording_dir_ = -1; }

    /// Restores increasing order after a backward recording.
    void reverse_recorded() {
        std::reverse(t_.begin(), t_.end());
        std::reverse(y_.begin(), y_.end());
        std::reverse(segments_.begin(), segments_.end());
        recording_dir_ = 1;
        recorded_backward = true;
    }

    /// Appends `other`, whose first sample must coincide with this trajectory's last.
    void append(const Trajectory& other) {
        if (other.empty()) return;
        std::size_t start = 0;
        if (!t_.empty()) {
            if (other.t_.front() != t_.back()) throw Error("appended trajectory does not join");
            start = 1;
        }
        for (std::size_t i = start; i < other.t_.size(); ++i) {
            t_.push_back(other.t_[i]);
            y_.push_back(other.y_[i]);
            segments_.push_back(other.segments_[i - 1]);
        }
    }

    Status status;
    Diagnostics diagnostics;
    /// Applied to interpolated states when segments are stored in internal variables.
    std::function<void(double, Vec&)> output_map;
    bool recorded_backward = false;  ///< integration ran from back_param() to front_param()

    /// State where the integration finished (last computed, in integration order).
    const Vec& final_state() const { return recorded_backward ? y_.front() : y_.back(); }
    double final_param() const { return recorded_backward ? t_.front() : t_.back(); }

private:
    int dim_ = 0;
    Layout layout_ = Layout::Full;
    std::vector<double> t_;
    std::vector<Vec> y_;
    std::vector<Segment> segments_;
    int recording_dir_ = 1;
};

/// Lifts a spatial trajectory to the full layout with v(t) = v_start + vdot (t - t_start).
inline Trajectory lift_with_linear_v(const Trajectory& spatial, double t_start, double v_start,
                                     double vdot) {
    if (spatial.layout() != Layout::Spatial) throw Error("lift expects a spatial trajectory");
    const int m = spatial.dim();
    Trajectory out(m, Layout::Full);
    out.status = spatial.status;
    out.diagnostics = spatial.diagnostics;
    out.recorded_backward = spatial.recorded_backward;
    auto lift_state = [&](const Vec& s, double v, double vd) {
        Vec y(2 * m + 2);
        y(0) = v;
        y.segment(1, m) = s.head(m);
        y(m + 1) = vd;
        y.segment(m + 2, m) = s.tail(m);
        return y;
    };
    const auto& ts = spatial.params();
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double vi = v_start + vdot * (ts[i] - t_start);
        Vec yi = lift_state(spatial.state(i), vi, vdot);
        if (i == 0) {
            out.push_first(ts[i], std::move(yi));
            continue;
        }
        Segment seg = std::visit(
            [&](const auto& s) -> Segment {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, RkSegment>) {
                    RkSegment r;
                    r.t0 = s.t0;
                    r.h = s.h;
                    const double v0 = v_start + vdot * (s.t0 - t_start);
                    r.rc[0] = lift_state(s.rc[0], v0, vdot);
                    r.rc[1] = lift_state(s.rc[1], vdot * s.h, 0.0);
                    for (int k = 2; k < 5; ++k) r.rc[k] = lift_state(s.rc[k], 0.0, 0.0);
                    return r;
                } else {
                    NodalSegment n = s;
                    for (std::size_t j = 0; j < n.nodes.size(); ++j) {
                        n.values[j] = lift_state(
                            s.values[j], v_start + vdot * (s.nodes[j] - t_start), vdot);
                    }
                    return n;
                }
            },
            spatial.segments()[i - 1]);
        out.push(ts[i], std::move(yi), std::move(seg));
    }
    return out;
}

}  // namespace npw
