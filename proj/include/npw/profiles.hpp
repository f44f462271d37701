#pragma once

#include "npw/core.hpp"
#include "npw/deltanets.hpp"
#include "npw/field.hpp"
#include "npw/manifold.hpp"

#include <json.hpp>

#include <complex>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <variant>

namespace npw {

namespace fields {

inline ScalarField zero() {
    ScalarField f;
    f.name = "zero";
    f.value = [](const Vec&) { return 0.0; };
    f.partials = [](const Vec& x) { return Vec(Vec::Zero(x.size())); };
    f.second_partials = [](const Vec& x) { return Mat(Mat::Zero(x.size(), x.size())); };
    return f;
}

inline ScalarField constant(double c) {
    ScalarField f = zero();
    f.name = "constant";
    f.value = [c](const Vec&) { return c; };
    return f;
}

/// Re((x + i y)^n) and its derivatives on R^2.
inline ScalarField harmonic_poly(int n, double scale = 1.0) {
    if (n < 1) throw InvalidParams("harmonic_poly needs n >= 1");
    using C = std::complex<double>;
    auto zpow = [](const Vec& x, int k) {
        C z(x(0), x(1)), r(1.0, 0.0);
        for (int i = 0; i < k; ++i) r *= z;
        return r;
    };
    ScalarField f;
    f.name = "harmonic_poly";
    f.dim = 2;
    f.value = [=](const Vec& x) { return scale * zpow(x, n).real(); };
    f.partials = [=](const Vec& x) {
        const C d = static_cast<double>(n) * zpow(x, n - 1);
        return Vec(make_vec({scale * d.real(), -scale * d.imag()}));
    };
    f.second_partials = [=](const Vec& x) {
        Mat h = Mat::Zero(2, 2);
        if (n >= 2) {
            const C d2 = static_cast<double>(n) * static_cast<double>(n - 1) * zpow(x, n - 2);
            h(0, 0) = scale * d2.real();
            h(1, 1) = -scale * d2.real();
            h(0, 1) = h(1, 0) = -scale * d2.imag();
        }
        return h;
    };
    return f;
}

/// 2 Re((x + i y)^n), so that V = -H/2 = -rho^n cos(n theta).
inline ScalarField homogeneous(int n) {
    ScalarField f = harmonic_poly(n, 2.0);
    f.name = "homogeneous";
    return f;
}

/// A exp(-|x|^2 / (2 sigma^2)); not harmonic.
inline ScalarField gaussian_bump(double sigma, double amplitude = 1.0) {
    if (!(sigma > 0.0)) throw InvalidParams("gaussian_bump needs sigma > 0");
    const double s2 = sigma * sigma;
    ScalarField f;
    f.name = "gaussian_bump";
    f.value = [=](const Vec& x) { return amplitude * std::exp(-x.squaredNorm() / (2.0 * s2)); };
    f.partials = [=](const Vec& x) {
        const double v = amplitude * std::exp(-x.squaredNorm() / (2.0 * s2));
        return Vec(-v / s2 * x);
    };
    f.second_partials = [=](const Vec& x) {
        const double v = amplitude * std::exp(-x.squaredNorm() / (2.0 * s2));
        const auto m = x.size();
        return Mat(v * (x * x.transpose() / (s2 * s2) - Mat::Identity(m, m) / s2));
    };
    return f;
}

/// h_ij x^i x^j for a constant symmetric h.
inline ScalarField quadratic_form(const Mat& h) {
    if (h.rows() != h.cols() || !h.isApprox(h.transpose(), 0.0)) {
        throw InvalidParams("quadratic form matrix must be square and symmetric");
    }
    ScalarField f;
    f.name = "quadratic_form";
    f.dim = static_cast<int>(h.rows());
    f.value = [h](const Vec& x) { return x.dot(h * x); };
    f.partials = [h](const Vec& x) { return Vec(2.0 * h * x); };
    f.second_partials = [h](const Vec&) { return Mat(2.0 * h); };
    return f;
}

}  // namespace fields

/// H(u, x) with its u- and spatial derivatives.
struct SmoothProfile {
    std::string name;
    std::function<double(double, const Vec&)> H;
    std::function<double(double, const Vec&)> dH_du;
    std::function<Vec(double, const Vec&)> dH_dx;
    std::function<Mat(double, const Vec&)> d2H_dx2;
    int dim = 0;

    /// x -> H(u, x) at fixed u.
    ScalarField spatial(double u) const {
        ScalarField f;
        f.name = name;
        f.dim = dim;
        auto self = *this;
        f.value = [self, u](const Vec& x) { return self.H(u, x); };
        f.partials = [self, u](const Vec& x) { return self.dH_dx(u, x); };
        f.second_partials = [self, u](const Vec& x) { return self.d2H_dx2(u, x); };
        return f;
    }
};

/// H_eps(u, x) = f(x) delta_eps(u).
struct ImpulsiveProfile {
    ScalarField f;
    DeltaNet net;
};

class WaveProfile {
public:
    explicit WaveProfile(SmoothProfile s) : v_(std::move(s)) {}
    explicit WaveProfile(ImpulsiveProfile p) : v_(std::move(p)) {}

    static WaveProfile impulsive(ScalarField f, DeltaNet net) {
        return WaveProfile(ImpulsiveProfile{std::move(f), std::move(net)});
    }

    /// u-independent smooth profile H(u, x) = f(x).
    static WaveProfile autonomous(const ScalarField& f) {
        SmoothProfile s;
        s.name = f.name;
        s.dim = f.dim;
        s.H = [f](double, const Vec& x) { return f.value(x); };
        s.dH_du = [](double, const Vec&) { return 0.0; };
        s.dH_dx = [f](double, const Vec& x) { return f.partials(x); };
        s.d2H_dx2 = [f](double, const Vec& x) { return f.second_partials(x); };
        return WaveProfile(std::move(s));
    }

    /// Plane wave H = x^T h(u) x with h(u) = h0 + sin(u) h1.
    static WaveProfile plane_wave(const Mat& h0, const std::optional<Mat>& h1 = std::nullopt) {
        const Mat osc = h1.value_or(Mat::Zero(h0.rows(), h0.cols()));
        if (h0.rows() != h0.cols() || !h0.isApprox(h0.transpose(), 0.0) ||
            osc.rows() != h0.rows() || osc.cols() != h0.cols() ||
            !osc.isApprox(osc.transpose(), 0.0)) {
            throw InvalidParams("plane_wave matrices must be square, symmetric and equal-sized");
        }
        SmoothProfile s;
        s.name = "plane_wave";
        s.dim = static_cast<int>(h0.rows());
        auto hm = [h0, osc](double u) { return Mat(h0 + std::sin(u) * osc); };
        s.H = [hm](double u, const Vec& x) { return x.dot(hm(u) * x); };
        s.dH_du = [osc](double u, const Vec& x) { return std::cos(u) * x.dot(osc * x); };
        s.dH_dx = [hm](double u, const Vec& x) { return Vec(2.0 * hm(u) * x); };
        s.d2H_dx2 = [hm](double u, const Vec&) { return Mat(2.0 * hm(u)); };
        return WaveProfile(std::move(s));
    }

    bool is_impulsive() const { return std::holds_alternative<ImpulsiveProfile>(v_); }
    const SmoothProfile& smooth() const { return std::get<SmoothProfile>(v_); }
    const ImpulsiveProfile& impulsive() const { return std::get<ImpulsiveProfile>(v_); }
    const std::string& name() const {
        return is_impulsive() ? impulsive().f.name : smooth().name;
    }
    int dim() const { return is_impulsive() ? impulsive().f.dim : smooth().dim; }

private:
    std::variant<SmoothProfile, ImpulsiveProfile> v_;
};

/// H(u, x) for smooth profiles, f(x) delta_eps(u) for impulsive ones.
inline double eval_H(const SpatialManifold& M, const WaveProfile& p, double eps, double u,
                     const Vec& x) {
    if (!M.in_chart(x)) throw PointOutsideChart("point outside the chart of " + M.name());
    if (p.is_impulsive()) {
        const auto& ip = p.impulsive();
        const double d = ip.net.eval(eps, u);
        return d == 0.0 ? 0.0 : ip.f.value(x) * d;
    }
    return p.smooth().H(u, x);
}

/// Laplace-Beltrami of H(u, .) (smooth) or of f (impulsive): the coefficient of the wave
/// term in the Ricci tensor, up to the factor -1/2.
inline double vacuum_residual(const SpatialManifold& M, const WaveProfile& p, const Vec& x,
                              std::optional<double> u = std::nullopt) {
    if (p.is_impulsive()) return laplace_beltrami(M, p.impulsive().f, x);
    if (!u) throw InvalidParams("vacuum_residual of a smooth profile needs u");
    return laplace_beltrami(M, p.smooth().spatial(*u), x);
}

namespace detail {

inline double param_or(const nlohmann::json& params, const char* key, double fallback) {
    if (!params.contains(key)) return fallback;
    if (!params.at(key).is_number()) {
        throw InvalidParams(std::string("parameter '") + key + "' must be a number");
    }
    return params.at(key).get<double>();
}

inline int int_param(const nlohmann::json& params, const char* key) {
    if (!params.contains(key) || !params.at(key).is_number_integer()) {
        throw InvalidParams(std::string("parameter '") + key + "' must be an integer");
    }
    return params.at(key).get<int>();
}

inline Mat matrix_param(const nlohmann::json& j, const char* key) {
    if (!j.is_array() || j.empty()) {
        throw InvalidParams(std::string("parameter '") + key + "' must be a square matrix");
    }
    const auto n = static_cast<Eigen::Index>(j.size());
    Mat m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = j.at(static_cast<std::size_t>(i));
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
            throw InvalidParams(std::string("parameter '") + key + "' must be a square matrix");
        }
        for (Eigen::Index k = 0; k < n; ++k) m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
    }
    return m;
}

inline void allow_only(const nlohmann::json& params, std::set<std::string> keys) {
    if (params.is_null()) return;
    if (!params.is_object()) throw InvalidParams("profile params must be an object");
    for (auto it = params.begin(); it != params.end(); ++it) {
        if (!keys.count(it.key())) throw InvalidParams("unknown profile parameter '" + it.key() + "'");
    }
}

}  // namespace detail

/// Named scalar field: zero, constant(c), harmonic_poly(n), homogeneous(n),
/// gaussian_bump(sigma[, amplitude]) or plane_wave(h) read as the quadratic form h_ij x^i x^j.
inline ScalarField builtin_field(const std::string& name, const nlohmann::json& params = {}) {
    using namespace detail;
    if (name == "zero") {
        allow_only(params, {});
        return fields::zero();
    }
    if (name == "constant") {
        allow_only(params, {"c"});
        return fields::constant(param_or(params, "c", 1.0));
    }
    if (name == "harmonic_poly") {
        allow_only(params, {"n"});
        return fields::harmonic_poly(int_param(params, "n"));
    }
    if (name == "homogeneous") {
        allow_only(params, {"n"});
        return fields::homogeneous(int_param(params, "n"));
    }
    if (name == "gaussian_bump") {
        allow_only(params, {"sigma", "amplitude"});
        return fields::gaussian_bump(param_or(params, "sigma", 1.0),
                                     param_or(params, "amplitude", 1.0));
    }
    if (name == "plane_wave") {
        allow_only(params, {"h"});
        if (!params.contains("h")) throw InvalidParams("plane_wave needs 'h'");
        return fields::quadratic_form(matrix_param(params.at("h"), "h"));
    }
    throw UnknownProfile("unknown profile '" + name + "'");
}

/// Named wave profile. With a net the field becomes the impulsive profile f delta_eps;
/// without one it is the smooth profile H(u, x) = f(x), except plane_wave, whose
/// optional "h_osc" matrix adds sin(u) h_osc to h.
inline WaveProfile builtin_profile(const std::string& name, const nlohmann::json& params = {},
                                   const std::optional<DeltaNet>& net = std::nullopt) {
    if (name == "plane_wave" && !net) {
        detail::allow_only(params, {"h", "h_osc"});
        if (!params.contains("h")) throw InvalidParams("plane_wave needs 'h'");
        std::optional<Mat> osc;
        if (params.contains("h_osc")) osc = detail::matrix_param(params.at("h_osc"), "h_osc");
        return WaveProfile::plane_wave(detail::matrix_param(params.at("h"), "h"), osc);
    }
    ScalarField f = builtin_field(name, params);
    if (net) return WaveProfile::impulsive(std::move(f), *net);
    return WaveProfile::autonomous(f);
}

}  // namespace npw
