#pragma once

#include "npw/core.hpp"
#include "npw/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace npw {

namespace bump {

inline double raw(double t) {
    const double s = 1.0 - t * t;
    return s > 0.0 ? std::exp(-1.0 / s) : 0.0;
}

/// Z = integral of exp(-1/(1-t^2)) over (-1, 1), computed once.
inline double normaliser() {
    static const double z = [] {
        const std::array<double, 3> pts = {-1.0, 0.0, 1.0};
        return quad::integrate_pieces(raw, pts, 1e-15).value;
    }();
    return z;
}

/// Unit-mass bump c exp(-1/(1-t^2)) supported on [-1, 1].
inline double value(double t) {
    if (!(std::abs(t) < 1.0)) return 0.0;
    return raw(t) / normaliser();
}

inline double derivative(double t) {
    if (!(std::abs(t) < 1.0)) return 0.0;
    const double s = 1.0 - t * t;
    return value(t) * (-2.0 * t / (s * s));
}

}  // namespace bump

enum class NetKind { Model, Shifted, Signed, Custom };

inline std::string to_string(NetKind k) {
    switch (k) {
        case NetKind::Model: return "Model";
        case NetKind::Shifted: return "Shifted";
        case NetKind::Signed: return "Signed";
        case NetKind::Custom: return "Custom";
    }
    return "Unknown";
}

/// One term w / r * bump((t - c) / r) of a kernel; supports of distinct terms are disjoint.
struct KernelTerm {
    double weight = 1.0;
    double centre = 0.0;
    double radius = 1.0;
};

/// Strict delta net delta_eps(u) = rho(u / eps) / eps built from a compactly supported
/// smooth kernel rho on [-1, 1].
class DeltaNet {
public:
    DeltaNet(std::string name, NetKind kind, std::vector<KernelTerm> terms)
        : name_(std::move(name)), kind_(kind), terms_(std::move(terms)) {
        if (terms_.empty()) throw InvalidParams("kernel needs at least one term");
        for (const auto& t : terms_) {
            if (!(t.radius > 0.0) || t.centre - t.radius < -1.0 - 1e-15 ||
                t.centre + t.radius > 1.0 + 1e-15) {
                throw InvalidParams("kernel term must lie inside [-1, 1]");
            }
        }
        std::sort(terms_.begin(), terms_.end(),
                  [](const KernelTerm& a, const KernelTerm& b) { return a.centre < b.centre; });
        for (std::size_t i = 0; i + 1 < terms_.size(); ++i) {
            const auto& a = terms_[i];
            const auto& b = terms_[i + 1];
            if (a.centre + a.radius > b.centre - b.radius + 1e-15) {
                throw InvalidParams("kernel term supports must be disjoint");
            }
        }
        for (const auto& t : terms_) {
            mass_ += t.weight;
            l1_ += std::abs(t.weight);
        }
        if (!(l1_ > 0.0)) throw InvalidParams("kernel must not vanish");
    }

    /// Standard normalised bump.
    static DeltaNet model() { return DeltaNet("bump", NetKind::Model, {{1.0, 0.0, 1.0}}); }

    /// Bump re-centred at `offset` (a fraction of eps) and shrunk to stay inside [-1, 1].
    static DeltaNet shifted(double offset) {
        if (!(std::abs(offset) < 1.0)) throw InvalidParams("shift offset must lie in (-1, 1)");
        return DeltaNet("shifted", NetKind::Shifted, {{1.0, offset, 1.0 - std::abs(offset)}});
    }

    /// Even signed kernel 2 B(0, 1/2) - B(+-3/4, 1/4) / 2 with mass 1 and L1 norm 3.
    static DeltaNet signed_kernel() {
        return DeltaNet("signed", NetKind::Signed,
                        {{-0.5, -0.75, 0.25}, {2.0, 0.0, 0.5}, {-0.5, 0.75, 0.25}});
    }

    /// Bump with total mass `mass`; mass != 1 is not a delta net (negative control).
    static DeltaNet scaled(double mass) {
        return DeltaNet("scaled", NetKind::Custom, {{mass, 0.0, 1.0}});
    }

    const std::string& name() const { return name_; }
    NetKind kind() const { return kind_; }
    const std::vector<KernelTerm>& terms() const { return terms_; }
    double kernel_mass() const { return mass_; }
    /// Declared L1 bound K (exact because term supports are disjoint).
    double l1_bound() const { return l1_; }
    double support_radius(double eps) const { return eps; }

    double kernel(double t) const {
        double s = 0.0;
        for (const auto& term : terms_) {
            s += term.weight / term.radius * bump::value((t - term.centre) / term.radius);
        }
        return s;
    }

    double kernel_derivative(double t) const {
        double s = 0.0;
        for (const auto& term : terms_) {
            s += term.weight / (term.radius * term.radius) *
                 bump::derivative((t - term.centre) / term.radius);
        }
        return s;
    }

    double eval(double eps, double u) const {
        check_eps(eps);
        const double t = u / eps;
        if (!(std::abs(t) < 1.0)) return 0.0;
        return kernel(t) / eps;
    }

    double eval_derivative(double eps, double u) const {
        check_eps(eps);
        const double t = u / eps;
        if (!(std::abs(t) < 1.0)) return 0.0;
        return kernel_derivative(t) / (eps * eps);
    }

    /// Sorted support boundaries of every kernel term, scaled by eps.
    std::vector<double> breakpoints(double eps) const {
        std::vector<double> pts;
        for (const auto& t : terms_) {
            pts.push_back((t.centre - t.radius) * eps);
            pts.push_back(t.centre * eps);
            pts.push_back((t.centre + t.radius) * eps);
        }
        std::sort(pts.begin(), pts.end());
        pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
        return pts;
    }

    static void check_eps(double eps) {
        if (!(eps > 0.0 && eps <= 1.0)) throw InvalidEpsilon("eps must lie in (0, 1]");
    }

private:
    std::string name_;
    NetKind kind_;
    std::vector<KernelTerm> terms_;
    double mass_ = 0.0;
    double l1_ = 0.0;
};

/// Quadrature of g(u) * delta_eps(u) over the support, split at every term boundary.
template <class G>
double integrate_against(const DeltaNet& net, double eps, G&& g, double abs_tol = 1e-14) {
    const auto pts = net.breakpoints(eps);
    return quad::integrate_pieces([&](double u) { return g(u) * net.eval(eps, u); }, pts, abs_tol)
        .value;
}

struct AxiomRow {
    double eps = 0.0;
    double support_radius = 0.0;
    double mass = 0.0;
    double l1 = 0.0;
};

struct AxiomReport {
    std::vector<AxiomRow> rows;
    bool support_shrinks = false;  ///< supp(delta_eps) -> {0}
    bool mass_to_one = false;      ///< integral of delta_eps -> 1
    bool l1_bounded = false;       ///< integral of |delta_eps| <= K
    double observed_k = 0.0;
    double declared_k = 0.0;
    double kernel_mass = 0.0;

    bool all_pass() const { return support_shrinks && mass_to_one && l1_bounded; }
};

inline constexpr double kMassTolerance = 1e-10;
inline constexpr double kL1Tolerance = 1e-8;

/// Checks the three strict-delta-net axioms numerically on a decreasing eps list.
/// Mass is required to be within 1e-10 of one at the smallest eps and never to move away
/// from one as eps decreases; the L1 bound must hold with the declared K.
inline AxiomReport verify_axioms(const DeltaNet& net, const std::vector<double>& eps_list) {
    AxiomReport rep;
    rep.declared_k = net.l1_bound();
    rep.kernel_mass = net.kernel_mass();
    if (eps_list.empty()) return rep;
    for (double eps : eps_list) {
        AxiomRow row;
        row.eps = eps;
        row.support_radius = net.support_radius(eps);
        const auto pts = net.breakpoints(eps);
        row.mass = quad::integrate_pieces([&](double u) { return net.eval(eps, u); }, pts, 1e-14)
                       .value;
        row.l1 = quad::integrate_pieces([&](double u) { return std::abs(net.eval(eps, u)); }, pts,
                                        1e-14)
                     .value;
        rep.rows.push_back(row);
    }
    bool shrink = true;
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
        shrink = shrink && rep.rows[i].eps < rep.rows[i - 1].eps &&
                 rep.rows[i].support_radius <= rep.rows[i - 1].support_radius;
    }
    for (const auto& r : rep.rows) shrink = shrink && r.support_radius <= r.eps * (1.0 + 1e-12);
    rep.support_shrinks = shrink;

    bool mass_ok = std::abs(rep.rows.back().mass - 1.0) <= kMassTolerance;
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
        mass_ok = mass_ok && std::abs(rep.rows[i].mass - 1.0) <=
                                 std::abs(rep.rows[i - 1].mass - 1.0) + kMassTolerance;
    }
    rep.mass_to_one = mass_ok;

    double kmax = 0.0;
    for (const auto& r : rep.rows) kmax = std::max(kmax, r.l1);
    rep.observed_k = kmax;
    rep.l1_bounded = kmax <= rep.declared_k + kL1Tolerance;
    return rep;
}

}  // namespace npw
