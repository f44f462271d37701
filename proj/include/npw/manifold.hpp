#pragma once

#include "npw/core.hpp"
#include "npw/field.hpp"
#include "npw/ode.hpp"
#include "npw/trajectory.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace npw {

enum class DerivativeMode { Analytic, FiniteDifference };

/// Christoffel symbols Gamma^k_ij stored densely, k-major.
class Christoffel {
public:
    explicit Christoffel(int dim = 0)
        : dim_(dim), g_(static_cast<std::size_t>(dim * dim * dim), 0.0) {}

    int dim() const { return dim_; }
    double operator()(int k, int i, int j) const { return g_[index(k, i, j)]; }
    double& operator()(int k, int i, int j) { return g_[index(k, i, j)]; }

    /// Gamma^k_ij p^i p^j.
    Vec contract(const Vec& p) const {
        Vec out = Vec::Zero(dim_);
        for (int k = 0; k < dim_; ++k) {
            double s = 0.0;
            for (int i = 0; i < dim_; ++i) {
                for (int j = 0; j < dim_; ++j) s += (*this)(k, i, j) * p(i) * p(j);
            }
            out(k) = s;
        }
        return out;
    }

    bool is_zero() const {
        for (double v : g_) {
            if (v != 0.0) return false;
        }
        return true;
    }

private:
    std::size_t index(int k, int i, int j) const {
        return static_cast<std::size_t>((k * dim_ + i) * dim_ + j);
    }
    int dim_;
    std::vector<double> g_;
};

/// Riemannian manifold (N, h) given in a single chart. Immutable after construction.
class SpatialManifold {
public:
    using ChartFn = std::function<bool(const Vec&)>;
    using MatrixFn = std::function<Mat(const Vec&)>;
    using ChristoffelFn = std::function<Christoffel(const Vec&)>;

    struct Definition {
        std::string name;
        int dim = 0;
        ChartFn in_chart;
        MatrixFn metric;
        MatrixFn inverse_metric;    ///< optional; inverted numerically when empty
        ChristoffelFn christoffel;  ///< optional; finite differences when empty
        bool complete = false;      ///< declared, never verified
    };

    static constexpr double kDefaultFdStep = 1e-5;

    explicit SpatialManifold(Definition def)
        : def_(std::make_shared<const Definition>(std::move(def))) {
        if (def_->dim < 1) throw InvalidParams("manifold dimension must be >= 1");
        if (!def_->in_chart || !def_->metric) throw InvalidParams("manifold needs chart and metric");
        if (!def_->christoffel) mode_ = DerivativeMode::FiniteDifference;
    }

    /// Euclidean R^m. Named "flat2" for m = 2 and "flatN(m)" otherwise.
    static SpatialManifold flat(int m) {
        if (m < 1) throw InvalidParams("flat manifold dimension must be >= 1");
        Definition d;
        d.name = m == 2 ? "flat2" : "flatN(" + std::to_string(m) + ")";
        d.dim = m;
        d.in_chart = [](const Vec& x) { return x.allFinite(); };
        d.metric = [m](const Vec&) { return Mat::Identity(m, m); };
        d.inverse_metric = [m](const Vec&) { return Mat::Identity(m, m); };
        d.christoffel = [m](const Vec&) { return Christoffel(m); };
        d.complete = true;
        return SpatialManifold(std::move(d));
    }

    /// Hyperbolic upper half-plane h = (dx^2 + dy^2) / y^2 on {y > 0}.
    static SpatialManifold half_plane() {
        Definition d;
        d.name = "half_plane";
        d.dim = 2;
        d.in_chart = [](const Vec& x) { return x.allFinite() && x(1) > 0.0; };
        d.metric = [](const Vec& x) { return Mat(Mat::Identity(2, 2) / (x(1) * x(1))); };
        d.inverse_metric = [](const Vec& x) { return Mat(Mat::Identity(2, 2) * (x(1) * x(1))); };
        d.christoffel = [](const Vec& x) {
            const double iy = 1.0 / x(1);
            Christoffel g(2);
            g(0, 0, 1) = g(0, 1, 0) = -iy;
            g(1, 0, 0) = iy;
            g(1, 1, 1) = -iy;
            return g;
        };
        d.complete = true;
        return SpatialManifold(std::move(d));
    }

    /// Copy that computes Christoffels from central differences of the metric.
    SpatialManifold with_finite_differences(double step = kDefaultFdStep) const {
        if (!(step > 0.0)) throw InvalidParams("finite-difference step must be positive");
        SpatialManifold m = *this;
        m.mode_ = DerivativeMode::FiniteDifference;
        m.fd_step_ = step;
        return m;
    }
    SpatialManifold with_analytic_derivatives() const {
        if (!def_->christoffel) throw InvalidParams("manifold has no analytic Christoffels");
        SpatialManifold m = *this;
        m.mode_ = DerivativeMode::Analytic;
        return m;
    }

    const std::string& name() const { return def_->name; }
    int dim() const { return def_->dim; }
    bool complete() const { return def_->complete; }
    DerivativeMode derivative_mode() const { return mode_; }
    double fd_step() const { return fd_step_; }

    bool in_chart(const Vec& x) const {
        return x.size() == def_->dim && def_->in_chart(x);
    }

    Mat metric_at(const Vec& x) const {
        require_chart(x);
        return def_->metric(x);
    }

    Mat inverse_metric_at(const Vec& x) const {
        require_chart(x);
        if (def_->inverse_metric) return def_->inverse_metric(x);
        return def_->metric(x).ldlt().solve(Mat::Identity(dim(), dim()));
    }

    Christoffel christoffel_at(const Vec& x) const {
        require_chart(x);
        if (mode_ == DerivativeMode::Analytic) return def_->christoffel(x);
        return fd_christoffel(x);
    }

    /// h(a, b) at x.
    double inner(const Vec& x, const Vec& a, const Vec& b) const {
        return a.dot(metric_at(x) * b);
    }

private:
    void require_chart(const Vec& x) const {
        if (!in_chart(x)) throw PointOutsideChart("point outside the chart of " + name());
    }

    Christoffel fd_christoffel(const Vec& x) const {
        const int m = dim();
        // dh[l] = d h / d x^l
        std::vector<Mat> dh(static_cast<std::size_t>(m));
        for (int l = 0; l < m; ++l) {
            Vec xp = x, xm = x;
            xp(l) += fd_step_;
            xm(l) -= fd_step_;
            require_chart(xp);
            require_chart(xm);
            dh[static_cast<std::size_t>(l)] =
                (def_->metric(xp) - def_->metric(xm)) / (2.0 * fd_step_);
        }
        const Mat hinv = inverse_metric_at(x);
        Christoffel g(m);
        for (int k = 0; k < m; ++k) {
            for (int i = 0; i < m; ++i) {
                for (int j = i; j < m; ++j) {
                    double s = 0.0;
                    for (int l = 0; l < m; ++l) {
                        const auto ui = static_cast<std::size_t>(i);
                        const auto uj = static_cast<std::size_t>(j);
                        const auto ul = static_cast<std::size_t>(l);
                        s += hinv(k, l) * (dh[ui](l, j) + dh[uj](l, i) - dh[ul](i, j));
                    }
                    g(k, i, j) = g(k, j, i) = 0.5 * s;
                }
            }
        }
        return g;
    }

    std::shared_ptr<const Definition> def_;
    DerivativeMode mode_ = DerivativeMode::Analytic;
    double fd_step_ = kDefaultFdStep;
};

inline Mat metric_at(const SpatialManifold& M, const Vec& x) { return M.metric_at(x); }
inline Christoffel christoffel_at(const SpatialManifold& M, const Vec& x) {
    return M.christoffel_at(x);
}

/// grad^h f = h^kl d_l f.
inline Vec gradient(const SpatialManifold& M, const ScalarField& f, const Vec& x) {
    return M.inverse_metric_at(x) * f.partials(x);
}

/// Laplace-Beltrami operator, h^kl (d_k d_l f - Gamma^m_kl d_m f).
inline double laplace_beltrami(const SpatialManifold& M, const ScalarField& f, const Vec& x) {
    const Mat hinv = M.inverse_metric_at(x);
    const Christoffel g = M.christoffel_at(x);
    const Vec df = f.partials(x);
    const Mat d2f = f.second_partials(x);
    const int m = M.dim();
    double s = 0.0;
    for (int k = 0; k < m; ++k) {
        for (int l = 0; l < m; ++l) {
            double hess = d2f(k, l);
            for (int q = 0; q < m; ++q) hess -= g(q, k, l) * df(q);
            s += hinv(k, l) * hess;
        }
    }
    return s;
}

/// Geodesic of (N, h) from (x0, xdot0) at t0, integrated to t1 (either direction).
/// The result has the spatial layout; leaving the chart ends it with LeftChart.
inline Trajectory background_geodesic(const SpatialManifold& M, const Vec& x0, const Vec& xdot0,
                                      double t0, double t1, double tol,
                                      std::size_t max_steps = 2'000'000) {
    if (!(tol > 0.0)) throw InvalidParams("tolerance must be positive");
    if (!M.in_chart(x0)) throw PointOutsideChart("initial point outside the chart of " + M.name());
    const int m = M.dim();
    ode::Rhs rhs = [&M, m](double, const Vec& y, Vec& dy) {
        dy.resize(2 * m);
        dy.head(m) = y.tail(m);
        dy.tail(m) = -M.christoffel_at(y.head(m)).contract(y.tail(m));
    };
    Vec y0(2 * m);
    y0 << x0, xdot0;
    ode::Options opt;
    opt.rtol = tol;
    opt.atol = tol;
    opt.max_steps = max_steps;
    Trajectory tr = ode::integrate(rhs, t0, y0, t1, opt, m, Layout::Spatial);
    const double s0 = M.inner(x0, xdot0, xdot0);
    double drift = 0.0;
    for (const Vec& y : tr.states()) {
        drift = std::max(drift, std::abs(M.inner(y.head(m), y.tail(m), y.tail(m)) - s0));
    }
    tr.diagnostics.energy_drift = drift;
    return tr;
}

}  // namespace npw
