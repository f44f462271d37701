#include "npw/picard.hpp"
#include "npw/solver.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace npw;

namespace {

constexpr double kRho0 = 0.828568839869105151664;
constexpr double kCosh1 = 1.54308063481524377848;
constexpr double kCos1 = 0.54030230586813971740;

GeodesicProblem stock(double eps = 0.1) {
    GeodesicProblem p(SpatialManifold::flat(2), WaveProfile::impulsive(fields::harmonic_poly(2), DeltaNet::model()));
    p.eps = eps;
    p.x0 = make_vec({1, 0});
    p.xdot0 = make_vec({0, 0});
    return p;
}

GeodesicProblem zero_flat(double eps = 0.1) {
    GeodesicProblem p(SpatialManifold::flat(2), WaveProfile::impulsive(fields::zero(), DeltaNet::model()));
    p.eps = eps;
    p.x0 = make_vec({-1, 0});
    p.xdot0 = make_vec({1, 0});
    return p;
}

double sup_diff(const Trajectory& a, const Trajectory& b, double lo, double hi) {
    double d = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        const double u = b.param(i);
        if (u < lo || u > hi) continue;
        const Vec ya = a.dense_eval(u), yb = b.state(i);
        if (b.layout() == Layout::Spatial) {
            const int m = b.dim();
            d = std::max(d, sup_abs(ya.segment(1, m) - yb.head(m)));
            d = std::max(d, sup_abs(ya.segment(m + 2, m) - yb.tail(m)));
        } else {
            d = std::max(d, sup_abs(ya - yb));
        }
    }
    return d;
}

}  // namespace

TEST(Solver, RhsTrivialProfile) {
    auto p = zero_flat();
    const Vec y = detail::full_state(0.3, make_vec({0.5, 1}), -0.2, make_vec({2, -1}));
    const Vec d = rhs(p, 0.0, y);
    EXPECT_DOUBLE_EQ(d(0), -0.2);
    EXPECT_EQ(d.segment(1, 2), make_vec({2, -1}));
    EXPECT_EQ(d(3), 0.0);
    EXPECT_EQ(d.segment(4, 2), Vec::Zero(2));
}

TEST(Solver, RhsOutsideSupportIsBackground) {
    GeodesicProblem p(SpatialManifold::half_plane(),
                      WaveProfile::impulsive(fields::harmonic_poly(2), DeltaNet::model()));
    p.eps = 0.2;
    const Vec x = make_vec({0.3, 1.4}), xd = make_vec({0.5, -0.7});
    const Vec y = detail::full_state(0.0, x, 1.0, xd);
    const Vec d = rhs(p, 0.2, y);
    const Vec bg = -p.manifold.christoffel_at(x).contract(xd);
    EXPECT_EQ(d(3), 0.0);
    EXPECT_EQ(d.segment(4, 2), bg);
}

TEST(Solver, RhsAtPulseCentre) {
    auto p = stock(0.5);
    const Vec y = detail::full_state(0.0, make_vec({1, 0}), 0.0, make_vec({0, 0}));
    const Vec d = rhs(p, 0.0, y);
    EXPECT_NEAR(d(4), 0.5 * (kRho0 / 0.5) * 2.0, 1e-13);
    EXPECT_EQ(d(5), 0.0);
    EXPECT_EQ(d(3), 0.0);  // both v'' terms vanish: xdot = 0 and the even kernel has zero slope
}

TEST(Solver, FlatZeroIsStraightLine) {
    GeodesicProblem p(SpatialManifold::flat(2), WaveProfile::autonomous(fields::zero()));
    p.start_u = 0.0;
    p.x0 = make_vec({0, 0});
    p.xdot0 = make_vec({1, 0});
    const Trajectory tr = integrate_adaptive(p, 5.0, 1e-10);
    ASSERT_TRUE(tr.status.completed());
    EXPECT_EQ(tr.status.at, 5.0);
    const Vec e = tr.state(tr.size() - 1);
    EXPECT_LT(std::abs(e(1) - 5.0) + std::abs(e(2)), 1e-10);
}

TEST(Solver, SmoothPlaneWaveMatchesCoshCos) {
    GeodesicProblem p(SpatialManifold::flat(2), WaveProfile::plane_wave((Mat(2, 2) << 1, 0, 0, -1).finished()));
    p.start_u = 0.0;
    p.x0 = make_vec({1, 1});
    p.xdot0 = make_vec({0, 0});
    const Trajectory tr = integrate_adaptive(p, 1.0, 1e-11);
    ASSERT_TRUE(tr.status.completed());
    const Vec e = tr.state(tr.size() - 1);
    EXPECT_NEAR(e(1), kCosh1, 1e-8);
    EXPECT_NEAR(e(2), kCos1, 1e-8);
}

TEST(Solver, SmoothCubicBlowsUp) {
    GeodesicProblem p(SpatialManifold::flat(2), WaveProfile::autonomous(fields::homogeneous(3)));
    p.x0 = make_vec({1, 0});
    p.xdot0 = make_vec({0, 0});
    const Trajectory tr = integrate_adaptive(p, 10.0, 1e-9);
    ASSERT_EQ(tr.status.kind, Termination::BlowUp);
    // independent quadrature value of the escape time for rho'' = 3 rho^2, rho(0) = 1
    const double T = 1.7173153422544112;
    EXPECT_LT(std::abs((tr.status.at - p.start_u) - T) / T, 0.01);
    EXPECT_GT(tr.status.norm, kDefaultBlowupThreshold);
}

TEST(Solver, LeftChartAndMaxSteps) {
    SpatialManifold::Definition d;
    d.name = "strip";
    d.dim = 1;
    d.in_chart = [](const Vec& x) { return x.allFinite() && x(0) < 1.0; };
    d.metric = [](const Vec&) { return Mat(Mat::Identity(1, 1)); };
    d.inverse_metric = d.metric;
    d.christoffel = [](const Vec&) { return Christoffel(1); };
    GeodesicProblem p(SpatialManifold(d), WaveProfile::impulsive(fields::zero(), DeltaNet::model()));
    p.x0 = make_vec({0});
    p.xdot0 = make_vec({1});
    const Trajectory tr = integrate_adaptive(p, 5.0, 1e-9);
    EXPECT_EQ(tr.status.kind, Termination::LeftChart);
    EXPECT_NEAR(tr.status.at, 0.0, 1e-6);
    const Trajectory short_run = integrate_adaptive(stock(), 10.0, 1e-9, kDefaultBlowupThreshold, 5);
    EXPECT_EQ(short_run.status.kind, Termination::MaxSteps);
}

TEST(Solver, ValidateRejectsDataInsideZone) {
    auto p = stock(0.5);
    p.start_u = -0.25;
    EXPECT_THROW(integrate_adaptive(p, 1.0, 1e-9), InvalidParams);
    p = stock(0.0);
    EXPECT_THROW(integrate_adaptive(p, 1.0, 1e-9), InvalidEpsilon);
    p = stock();
    p.x0 = make_vec({1, 0, 0});
    EXPECT_THROW(integrate_adaptive(p, 1.0, 1e-9), InvalidParams);
    EXPECT_THROW(integrate_adaptive(stock(), -2.0, 1e-9), InvalidParams);
    EXPECT_THROW(integrate_adaptive(stock(), 1.0, 0.0), InvalidParams);
}

TEST(Solver, SamplesIncreaseAndDenseEvalIsExactAtNodes) {
    const Trajectory tr = integrate_adaptive(stock(), 3.0, 1e-9);
    for (std::size_t i = 1; i < tr.size(); ++i) EXPECT_LT(tr.param(i - 1), tr.param(i));
    for (std::size_t i = 0; i < tr.size(); ++i) EXPECT_EQ(tr.dense_eval(tr.param(i)), tr.state(i));
}

TEST(Solver, ZoneStepCapAndNodes) {
    const auto p = stock(0.1);
    const Trajectory tr = integrate_adaptive(p, 1.0, 1e-6);
    bool hit_lo = false, hit_hi = false;
    for (std::size_t i = 1; i < tr.size(); ++i) {
        const double a = tr.param(i - 1), b = tr.param(i);
        hit_lo = hit_lo || b == -0.1;
        hit_hi = hit_hi || b == 0.1;
        if (a >= -0.1 && b <= 0.1) {
            EXPECT_LE(b - a, 0.1 / 50 * (1 + 1e-12));
        }
    }
    EXPECT_TRUE(hit_lo);
    EXPECT_TRUE(hit_hi);
}

TEST(Solver, Energy) {
    auto p = zero_flat();
    p.a = 0.0;
    const Vec y = detail::full_state(0.0, make_vec({0, 0}), 5.0, make_vec({3, 4}));
    EXPECT_DOUBLE_EQ(energy(p, 0.1, 0.0, y), 25.0);
    p.a = 1.0;
    const Vec null = detail::full_state(0.0, make_vec({0, 0}), -12.5, make_vec({3, 4}));
    EXPECT_DOUBLE_EQ(energy(p, 0.1, 0.0, null), 0.0);
}

TEST(Solver, EnergyConservedAlongImpulsiveRuns) {
    prop::Gen g(31);
    for (int n = 0; n < 8; ++n) {
        auto p = stock(0.1);
        p.x0 = g.box(2, -1, 1);
        p.xdot0 = g.box(2, -0.5, 0.5);
        p.vdot0 = g.uniform(-1, 1);
        const Trajectory tr = integrate_adaptive(p, 5.0, 1e-9);
        ASSERT_TRUE(tr.status.completed());
        EXPECT_LT(tr.diagnostics.energy_drift, 1e-7);
    }
}

TEST(Solver, AZeroKeepsUFixed) {
    GeodesicProblem p(SpatialManifold::half_plane(),
                      WaveProfile::impulsive(fields::harmonic_poly(2), DeltaNet::model()));
    p.a = 0.0;
    p.v0 = 0.5;
    p.vdot0 = 2.0;
    p.x0 = make_vec({0, 1});
    p.xdot0 = make_vec({0, 1});
    const Trajectory tr = integrate_adaptive(p, 1.0, 1e-10);
    ASSERT_TRUE(tr.status.completed());
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const double s = tr.param(i) - p.start_u;
        EXPECT_NEAR(tr.state(i)(0), 0.5 + 2.0 * s, 1e-14);
        EXPECT_EQ(tr.state(i)(3), 2.0);
        EXPECT_NEAR(tr.state(i)(2), std::exp(s), 1e-8 * std::exp(s));
    }
    EXPECT_LT(tr.diagnostics.energy_drift, 1e-8);
}

TEST(Solver, ThreePhaseAgreesWithAdaptive) {
    const auto p = stock(0.1);
    const double tol = 1e-9;
    const Trajectory a = integrate_adaptive(p, 10.0, tol);
    const Trajectory t = solve_three_phase(p, 10.0, tol);
    ASSERT_TRUE(a.status.completed());
    ASSERT_TRUE(t.status.completed());
    EXPECT_LT(sup_diff(a, t, p.start_u, 10.0), 1e-6);
    EXPECT_LT(sup_diff(a, t, p.start_u, 10.0), 10 * (tol + tol));
}

TEST(Solver, ThreePhaseZeroProfileIsOneLine) {
    const auto p = zero_flat(0.2);
    const Trajectory t = solve_three_phase(p, 4.0, 1e-10);
    ASSERT_TRUE(t.status.completed());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double u = t.param(i);
        EXPECT_NEAR(t.state(i)(1), u, 1e-10);
        EXPECT_EQ(t.state(i)(2), 0.0);
        EXPECT_NEAR(t.state(i)(4), 1.0, 1e-12);
    }
    // dense output across the joins
    for (double u : {-0.2001, -0.1999, 0.0, 0.1999, 0.2001, 3.3}) EXPECT_NEAR(t.dense_eval(u)(1), u, 1e-10);
}

TEST(Solver, PhaseOneIndependentOfEps) {
    const Trajectory ref = phase_one(stock(0.5), 1e-9);
    for (double eps : {0.25, 0.1, 0.01}) {
        const Trajectory p1 = phase_one(stock(eps), 1e-9);
        for (std::size_t i = 0; i < p1.size(); ++i) {
            if (p1.param(i) >= -0.5) break;
            ASSERT_EQ(p1.param(i), ref.param(i));
            EXPECT_EQ(p1.state(i), ref.state(i));
        }
    }
}

TEST(Solver, OutsideSupportReduction) {
    const double tol = 1e-10;
    GeodesicProblem p(SpatialManifold::half_plane(),
                      WaveProfile::impulsive(fields::harmonic_poly(1), DeltaNet::model()));
    p.eps = 0.1;
    p.x0 = make_vec({0, 2});
    p.xdot0 = make_vec({0, 0});
    const Trajectory tr = integrate_adaptive(p, 2.0, tol);
    ASSERT_TRUE(tr.status.completed());
    const Vec yr = tr.dense_eval(0.1);
    const Trajectory bg = background_geodesic(p.manifold, yr.segment(1, 2), yr.segment(4, 2), 0.1, 2.0, tol * 1e-2);
    double d = 0.0;
    for (std::size_t i = 0; i < bg.size(); ++i) {
        d = std::max(d, sup_abs(tr.dense_eval(bg.param(i)).segment(1, 2) - bg.state(i).head(2)));
    }
    EXPECT_LE(d, 10 * tol);
}

TEST(Solver, TimeReversal) {
    const double tol = 1e-10;
    prop::Gen g(32);
    for (int n = 0; n < 4; ++n) {
        auto p = stock(0.1);
        p.x0 = g.box(2, -1, 1);
        p.xdot0 = g.box(2, -0.5, 0.5);
        IntegrateOptions io;
        io.tol = tol;
        const Vec y0 = detail::full_state(p.v0, p.x0, p.vdot0, p.xdot0);
        const Trajectory fw = integrate_between(p, -1.0, y0, 1.0, io);
        const Trajectory bw = integrate_between(p, 1.0, fw.final_state(), -1.0, io);
        EXPECT_TRUE(bw.recorded_backward);
        EXPECT_LT(sup_abs(bw.final_state() - y0), 100 * tol);
    }
}

TEST(Solver, UniformExistenceOnRandomData) {
    prop::Gen g(33);
    for (int n = 0; n < 3; ++n) {
        auto p = stock(0.1);
        p.x0 = g.box(2, -1, 1);
        p.xdot0 = g.box(2, -0.3, 0.3);
        const double eps0 = existence_alpha(p).eps0();
        for (int k = 1; k <= 8; ++k) {
            p.eps = std::ldexp(1.0, -k);
            if (p.eps > eps0) continue;
            EXPECT_TRUE(integrate_adaptive(p, 10.0, 1e-9).status.completed()) << "eps " << p.eps;
        }
    }
}

TEST(Alpha, StockCase) {
    const AlphaResult a = existence_alpha(stock());
    // grid sup of |(x, -y)| over the unit ball about (1, 0) is 2, times the 1.05 safety factor
    EXPECT_NEAR(a.bounds.F2_sup, 2.0 * 1.05, 1e-12);
    EXPECT_EQ(a.bounds.F1_sup, 0.0);
    EXPECT_EQ(a.bounds.K, 1.0);
    EXPECT_LT(std::abs(a.alpha - 0.5) / 0.5, 0.05);
    EXPECT_DOUBLE_EQ(a.eps0(), a.alpha / 2);
}

TEST(Alpha, ZeroProfileGivesOne) {
    auto p = zero_flat();
    p.xdot0 = make_vec({0, 0});
    EXPECT_EQ(existence_alpha(p).alpha, 1.0);
}

TEST(Alpha, AnalyticBoundsAndMonotoneInK) {
    const auto p = stock();
    const AlphaResult a = existence_alpha(p, 1.0, 1.0, AlphaBounds{0.0, 2.0, 1.0});
    EXPECT_DOUBLE_EQ(a.alpha, 0.5);
    const AlphaResult b = existence_alpha(p, 1.0, 1.0, AlphaBounds{0.0, 2.0, 2.0});
    EXPECT_DOUBLE_EQ(b.alpha, 0.25);
    const AlphaResult c = existence_alpha(p, 1.0, 1.0, AlphaBounds{4.0, 1.0, 1.0});
    EXPECT_DOUBLE_EQ(c.alpha, 0.2);
    EXPECT_THROW(existence_alpha(p, 0.0, 1.0), InvalidParams);
    EXPECT_THROW(existence_alpha(p, 1.0, -1.0), InvalidParams);
}

TEST(Alpha, HalfPlaneHasChristoffelTerm) {
    GeodesicProblem p(SpatialManifold::half_plane(),
                      WaveProfile::impulsive(fields::harmonic_poly(1), DeltaNet::model()));
    p.x0 = make_vec({0, 2});
    p.xdot0 = make_vec({0, 0});
    const AlphaResult a = existence_alpha(p);
    EXPECT_GT(a.bounds.F1_sup, 0.0);
    EXPECT_GT(a.alpha, 0.0);
    EXPECT_LE(a.alpha, 1.0);
}

TEST(Picard, ZeroProfileConvergesImmediately) {
    const auto p = zero_flat(0.1);
    const Trajectory t = picard_solve(p, -0.1, 0.5, 1e-10);
    EXPECT_EQ(t.diagnostics.iterations, 1);
    EXPECT_LT(t.diagnostics.iterate_distances.front(), 1e-14);  // seed is exact up to rounding
}

TEST(Picard, AgreesWithAdaptive) {
    const auto p = stock(0.1);
    const double tol = 1e-9;
    const Trajectory pic = picard_solve(p, -0.1, 0.3, tol);
    const Trajectory ad = integrate_adaptive(p, 1.0, tol);
    EXPECT_LT(sup_diff(ad, pic, -0.1, 0.3), 1e-6);
    EXPECT_LT(sup_diff(ad, pic, -0.1, 0.3), 10 * (tol + tol));
    EXPECT_LT(pic.diagnostics.residual, 10 * tol);
}

TEST(Picard, IterateDistancesDecaySummably) {
    const auto p = stock(0.1);
    const double alpha = existence_alpha(p).alpha;
    const Trajectory pic = picard_solve(p, -0.1, alpha - 0.1, 1e-10);
    const auto& d = pic.diagnostics.iterate_distances;
    ASSERT_GE(d.size(), 3u);
    for (std::size_t i = 2; i < d.size(); ++i) EXPECT_LT(d[i] / d[i - 1], 1.0);
    double tail = 0.0;
    for (double x : d) tail += x;
    EXPECT_TRUE(std::isfinite(tail));
}

TEST(Picard, NoConvergenceReportsIterations) {
    const auto p = stock(0.1);
    try {
        picard_solve(p, -0.1, 0.3, 1e-12, 2);
        FAIL() << "expected NoConvergence";
    } catch (const NoConvergence& e) {
        EXPECT_EQ(e.iterations(), 2);
    }
}

TEST(Picard, RejectsBadIntervals) {
    const auto p = stock(0.1);
    EXPECT_THROW(picard_solve(p, 0.3, -0.1, 1e-9), InvalidParams);
    EXPECT_THROW(picard_solve(p, -0.05, 0.3, 1e-9), InvalidParams);
    EXPECT_THROW(picard_solve(p, -0.1, 0.3, 0.0), InvalidParams);
}

TEST(Solver, ThreePhaseConservesEnergy) {
    prop::Gen g(34);
    const double tol = 1e-9;
    for (int n = 0; n < 6; ++n) {
        auto p = stock(g.uniform(0.01, 0.3));
        p.x0 = g.box(2, -1, 1);
        p.xdot0 = g.box(2, -0.5, 0.5);
        p.vdot0 = g.uniform(-1, 1);
        const Trajectory tr = solve_three_phase(p, 5.0, tol);
        ASSERT_TRUE(tr.status.completed());
        EXPECT_LE(tr.diagnostics.energy_drift, 100 * tol);
    }
}
