#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace npw::quad {

struct Result {
    double value = 0.0;
    double error = 0.0;
    int evaluations = 0;
};

namespace detail {

// Gauss-Kronrod 7/15 abscissae and weights on [-1, 1].
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class F>
Result gk15(F& f, double a, double b) {
    const double centre = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(centre);
    double kronrod = fc * kWgk[7];
    double gauss = fc * kWg[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kXgk[j];
        const double fsum = f(centre - dx) + f(centre + dx);
        kronrod += kWgk[j] * fsum;
        if (j % 2 == 1) gauss += kWg[j / 2] * fsum;
    }
    return {kronrod * half, std::abs((kronrod - gauss) * half), 15};
}

template <class F>
Result adapt(F& f, double a, double b, double abs_tol, const Result& whole, int depth) {
    if (whole.error <= abs_tol || depth <= 0 || b - a <= 64.0 * 2.2e-16 * std::abs(a)) {
        return whole;
    }
    const double mid = 0.5 * (a + b);
    const Result left = gk15(f, a, mid);
    const Result right = gk15(f, mid, b);
    const Result l = adapt(f, a, mid, 0.5 * abs_tol, left, depth - 1);
    const Result r = adapt(f, mid, b, 0.5 * abs_tol, right, depth - 1);
    return {l.value + r.value, l.error + r.error,
            whole.evaluations + l.evaluations + r.evaluations};
}

}  // namespace detail

/// Adaptive Gauss-Kronrod (7/15) quadrature with recursive bisection.
template <class F>
Result integrate(F&& f, double a, double b, double abs_tol = 1e-13, int max_depth = 48) {
    if (a == b) return {};
    if (b < a) {
        Result r = integrate(f, b, a, abs_tol, max_depth);
        r.value = -r.value;
        return r;
    }
    auto& fn = f;
    const Result whole = detail::gk15(fn, a, b);
    return detail::adapt(fn, a, b, abs_tol, whole, max_depth);
}

/// Integrates over consecutive pieces [p0,p1], [p1,p2], ...; the integrand is treated
/// independently on each piece so kinks at the breakpoints cost nothing.
template <class F>
Result integrate_pieces(F&& f, std::span<const double> breakpoints, double abs_tol = 1e-13) {
    Result total;
    if (breakpoints.size() < 2) return total;
    const double per_piece = abs_tol / static_cast<double>(breakpoints.size() - 1);
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        const Result r = integrate(f, breakpoints[i], breakpoints[i + 1], per_piece);
        total.value += r.value;
        total.error += r.error;
        total.evaluations += r.evaluations;
    }
    return total;
}

}  // namespace npw::quad
