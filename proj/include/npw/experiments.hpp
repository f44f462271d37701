#pragma once

#include "npw/config.hpp"
#include "npw/core.hpp"
#include "npw/deltanets.hpp"
#include "npw/oracles.hpp"
#include "npw/picard.hpp"
#include "npw/solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace npw {

enum class Verdict { Pass, Fail, Info };

inline std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "PASS";
        case Verdict::Fail: return "FAIL";
        case Verdict::Info: return "INFO";
    }
    return "UNKNOWN";
}

/// One declared tolerance test. `guards_completeness` marks checks whose failure means a
/// run that should have completed did not.
struct Check {
    std::string name;
    bool passed = false;
    double value = 0.0;
    double bound = 0.0;
    std::string note;
    bool guards_completeness = false;
};

struct Cell {
    std::size_t index = 0;
    json params = json::object();
    json result = json::object();
};

struct StudyReport {
    std::string study;
    std::string config_hash;
    std::vector<Cell> cells;
    json derived = json::object();
    std::vector<Check> checks;
    /// Trajectories worth persisting as CSV, keyed by a file stem.
    std::vector<std::pair<std::string, Trajectory>> trajectories;

    Verdict verdict() const {
        if (checks.empty()) return Verdict::Info;
        for (const auto& c : checks) {
            if (!c.passed) return Verdict::Fail;
        }
        return Verdict::Pass;
    }

    /// 0 on PASS/INFO, 4 if a completeness guard failed, 3 for any other failure.
    int exit_code() const {
        bool failed = false;
        for (const auto& c : checks) {
            if (c.passed) continue;
            if (c.guards_completeness) return 4;
            failed = true;
        }
        return failed ? 3 : 0;
    }

    json to_json() const {
        json j;
        j["study"] = study;
        j["config_hash"] = config_hash;
        j["verdict"] = to_string(verdict());
        j["exit_code"] = exit_code();
        j["derived"] = derived;
        j["checks"] = json::array();
        for (const auto& c : checks) {
            j["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"value", c.value},
                                   {"bound", c.bound}, {"note", c.note},
                                   {"guards_completeness", c.guards_completeness}});
        }
        j["cells"] = json::array();
        for (const auto& c : cells) {
            j["cells"].push_back({{"index", c.index}, {"params", c.params}, {"result", c.result}});
        }
        return j;
    }
};

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; results are returned in index order
/// so the outcome does not depend on scheduling. The first exception by index is rethrown.
template <class R, class Fn>
std::vector<R> parallel_map(std::size_t n, int jobs, Fn&& fn) {
    std::vector<std::optional<R>> slots(n);
    std::vector<std::exception_ptr> errors(n);
    auto work = [&](std::size_t i) {
        try {
            slots[i].emplace(fn(i));
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    const auto workers = static_cast<std::size_t>(std::max(1, jobs));
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) work(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < std::min(workers, n); ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) work(i);
            });
        }
        for (auto& t : pool) t.join();
    }
    std::vector<R> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (errors[i]) std::rethrow_exception(errors[i]);
        out.push_back(std::move(*slots[i]));
    }
    return out;
}

namespace detail {

inline json status_json(const Status& s) {
    return {{"status", to_string(s.kind)}, {"at", s.at}, {"norm", s.norm}};
}

inline json diagnostics_json(const Diagnostics& d) {
    json j = {{"accepted_steps", d.accepted_steps}, {"rejected_steps", d.rejected_steps},
              {"rhs_evaluations", d.rhs_evaluations}, {"energy_drift", d.energy_drift}};
    j["min_step"] = std::isfinite(d.min_step) ? json(d.min_step) : json(nullptr);
    j["max_step"] = d.max_step;
    if (d.iterations > 0) {
        j["iterations"] = d.iterations;
        j["residual"] = d.residual;
        j["iterate_distances"] = d.iterate_distances;
    }
    return j;
}

inline json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline json alpha_json(const AlphaResult& a) {
    auto num = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
    return {{"alpha", a.alpha}, {"eps0", a.eps0()}, {"b", a.b}, {"c", a.c},
            {"F1_sup", num(a.bounds.F1_sup)}, {"F2_sup", num(a.bounds.F2_sup)}, {"K", a.bounds.K},
            {"velocity_radius", num(a.velocity_radius)}};
}

inline StudyReport new_report(const std::string& name, const ExperimentConfig& cfg) {
    StudyReport r;
    r.study = name;
    r.config_hash = config_hash(cfg);
    return r;
}

inline bool profile_order(const ExperimentConfig& cfg, int& n) {
    if ((cfg.profile == "homogeneous" || cfg.profile == "harmonic_poly") &&
        cfg.profile_params.contains("n") && cfg.profile_params["n"].is_number_integer()) {
        n = cfg.profile_params["n"].get<int>();
        return true;
    }
    return false;
}

}  // namespace detail

/// Blow-up prediction for the smooth realisation: homogeneous(n) or harmonic_poly(n),
/// n >= 3, flat two-dimensional chart, radial data on theta = 0. Returns the blow-up u.
inline std::optional<double> smooth_blowup_prediction(const ExperimentConfig& cfg, const DataSpec& d) {
    int n = 0;
    if (!detail::profile_order(cfg, n) || n < 3) return std::nullopt;
    if (cfg.manifold != "flat2" || d.a == 0.0 || d.x0.size() != 2) return std::nullopt;
    if (!(d.x0[0] > 0.0) || d.x0[1] != 0.0 || d.xdot0[1] != 0.0) return std::nullopt;
    const double rhodot = d.xdot0[0];
    try {
        if (cfg.profile == "harmonic_poly") {
            // rho'' = (n/2) rho^(n-1); with t = sqrt(2) tau this is the homogeneous equation
            // in tau with initial velocity sqrt(2) rhodot.
            const double s = std::sqrt(2.0);
            return d.start_u + s * homogeneous_blowup_reference(n, d.x0[0], s * rhodot);
        }
        return d.start_u + homogeneous_blowup_reference(n, d.x0[0], rhodot);
    } catch (const InvalidParams&) {
        return std::nullopt;  // inward data reaching the origin
    }
}

/// True when the smooth realisation is known to be complete (sub-quadratic or quadratic
/// growth): zero, constant, gaussian_bump, plane_wave, and polynomial profiles with n <= 2.
inline bool smooth_expected_complete(const ExperimentConfig& cfg) {
    if (cfg.profile == "zero" || cfg.profile == "constant" || cfg.profile == "gaussian_bump" ||
        cfg.profile == "plane_wave") {
        return true;
    }
    int n = 0;
    return detail::profile_order(cfg, n) && n <= 2;
}

inline AlphaResult config_alpha(const ExperimentConfig& cfg, const DataSpec& d) {
    const GeodesicProblem p = make_problem(cfg, d, true, cfg.eps_list.empty() ? cfg.eps : cfg.eps_list.front());
    return existence_alpha(p, cfg.alpha_b, cfg.alpha_c);
}

namespace detail {

/// Impulsive runs over eps_list with completeness asserted for eps <= eps0.
inline void impulsive_cells(const ExperimentConfig& cfg, const AlphaResult& al, StudyReport& rep,
                            const std::string& prefix) {
    const double eps0 = al.eps0();
    struct Out {
        json result;
        Trajectory tr;
    };
    auto outs = parallel_map<Out>(cfg.eps_list.size(), cfg.jobs, [&](std::size_t i) {
        const double eps = cfg.eps_list[i];
        const GeodesicProblem p = make_problem(cfg, cfg.data, true, eps);
        Trajectory tr = integrate_adaptive(p, cfg.horizon, cfg.tol, cfg.blowup_threshold);
        json r = status_json(tr.status);
        r["diagnostics"] = diagnostics_json(tr.diagnostics);
        r["asserted"] = eps <= eps0;
        return Out{r, std::move(tr)};
    });
    std::size_t asserted = 0, failed = 0, blowups = 0;
    double drift = 0.0;
    for (std::size_t i = 0; i < outs.size(); ++i) {
        Cell c;
        c.index = rep.cells.size();
        c.params = {{"leg", prefix}, {"eps", cfg.eps_list[i]}};
        c.result = outs[i].result;
        const auto& tr = outs[i].tr;
        if (cfg.eps_list[i] <= eps0) {
            ++asserted;
            if (!tr.status.completed()) {
                ++failed;
                if (tr.status.kind == Termination::BlowUp) ++blowups;
            }
        }
        if (tr.status.completed()) drift = std::max(drift, tr.diagnostics.energy_drift);
        rep.cells.push_back(std::move(c));
        char stem[64];
        std::snprintf(stem, sizeof stem, "%s_%03zu", prefix.c_str(), i);
        rep.trajectories.emplace_back(stem, std::move(outs[i].tr));
    }
    Check done;
    done.name = prefix + "_completed_below_eps0";
    done.value = static_cast<double>(failed);
    done.bound = 0.0;
    done.passed = asserted > 0 && failed == 0;
    done.guards_completeness = blowups > 0;
    done.note = asserted == 0 ? "no eps in eps_list is <= eps0"
                              : std::to_string(asserted) + " asserted cells, " +
                                    std::to_string(failed) + " not completed";
    rep.checks.push_back(done);
    Check en;
    en.name = prefix + "_energy_drift";
    en.value = drift;
    en.bound = 100.0 * cfg.tol;
    en.passed = drift <= en.bound;
    en.note = "max |lambda(u) - lambda(start)| over completed runs";
    rep.checks.push_back(en);
    rep.derived[prefix + "_asserted_cells"] = asserted;
}

}  // namespace detail

/// Existence sweep: alpha with the configured b, c; eps0 = alpha / 2; one adaptive run per
/// eps to the horizon. PASS iff every eps <= eps0 completes (and energy is conserved).
/// Smooth realisations run once and report without asserting completeness.
inline StudyReport epsilon_sweep(const ExperimentConfig& cfg) {
    StudyReport rep = detail::new_report("sweep", cfg);
    if (cfg.realisation == "smooth") {
        const GeodesicProblem p = make_problem(cfg, cfg.data, false, cfg.eps);
        Trajectory tr = integrate_adaptive(p, cfg.horizon, cfg.tol, cfg.blowup_threshold);
        Cell c;
        c.params = {{"leg", "smooth"}};
        c.result = detail::status_json(tr.status);
        c.result["diagnostics"] = detail::diagnostics_json(tr.diagnostics);
        rep.cells.push_back(c);
        rep.derived["completeness_asserted"] = false;
        if (auto pred = smooth_blowup_prediction(cfg, cfg.data)) rep.derived["predicted_blowup_u"] = *pred;
        rep.trajectories.emplace_back("smooth", std::move(tr));
        return rep;
    }
    const AlphaResult al = config_alpha(cfg, cfg.data);
    rep.derived["alpha"] = detail::alpha_json(al);
    rep.derived["completeness_asserted"] = true;
    detail::impulsive_cells(cfg, al, rep, "impulsive");
    return rep;
}

/// Lipschitz estimates of the two force terms on the study boxes.
struct LipschitzEstimates {
    double L1 = 0.0;  ///< F1(x, p) = -Gamma(x)(p, p), jointly in (x, p)
    double L2 = 0.0;  ///< F2(x) = h^kl d_l f / 2
};

inline constexpr double kLipschitzSafety = 1.1;

namespace detail {

inline double spectral_norm(const Mat& J) {
    if (J.size() == 0) return 0.0;
    Eigen::JacobiSVD<Mat> svd(J);
    return svd.singularValues()(0);
}

/// Max Jacobian norm of F2 on a grid over the b-ball about x0.
inline double lipschitz_F2(const GeodesicProblem& p, double b, int n) {
    const auto& f = p.profile.impulsive().f;
    const int m = p.dim();
    auto F2 = [&](const Vec& x) { return Vec(0.5 * (p.manifold.inverse_metric_at(x) * f.partials(x))); };
    double L = 0.0;
    const double h = 1e-6;
    for_ball_grid(p.x0, b, n, [&](const Vec& x) {
        Mat J(m, m);
        for (int k = 0; k < m; ++k) {
            Vec xp = x, xm = x;
            xp(k) += h;
            xm(k) -= h;
            if (!p.manifold.in_chart(xp) || !p.manifold.in_chart(xm)) return;
            J.col(k) = (F2(xp) - F2(xm)) / (2.0 * h);
        }
        L = std::max(L, spectral_norm(J));
    });
    return L;
}

/// Max Jacobian norm of F1 on a grid over the box lo..hi in (x, p).
inline double lipschitz_F1(const SpatialManifold& M, const Vec& lo, const Vec& hi, int n) {
    const auto D = lo.size();
    const int m = M.dim();
    std::vector<int> idx(static_cast<std::size_t>(D), 0);
    Vec z(D);
    double L = 0.0;
    const double h = 1e-6;
    auto F1 = [&](const Vec& zz) { return Vec(-M.christoffel_at(zz.head(m)).contract(zz.tail(m))); };
    while (true) {
        for (Eigen::Index k = 0; k < D; ++k) {
            z(k) = lo(k) + (hi(k) - lo(k)) * idx[static_cast<std::size_t>(k)] / (n - 1);
        }
        bool ok = M.in_chart(Vec(z.head(m)));
        if (ok && !M.christoffel_at(z.head(m)).is_zero()) {
            Mat J(m, D);
            for (Eigen::Index k = 0; k < D && ok; ++k) {
                Vec zp = z, zm = z;
                zp(k) += h;
                zm(k) -= h;
                if (!M.in_chart(Vec(zp.head(m))) || !M.in_chart(Vec(zm.head(m)))) {
                    ok = false;
                    break;
                }
                J.col(k) = (F1(zp) - F1(zm)) / (2.0 * h);
            }
            if (ok) L = std::max(L, spectral_norm(J));
        }
        Eigen::Index k = 0;
        for (; k < D; ++k) {
            auto& i = idx[static_cast<std::size_t>(k)];
            if (++i < n) break;
            i = 0;
        }
        if (k == D) break;
    }
    return L;
}

}  // namespace detail

/// Paired perturbed/unperturbed runs over [-T, T]. The perturbation of size eta shifts
/// x0 and xdot0 by eta e and adds the constant acceleration eta e (e a seeded unit vector).
/// psi = sup |x - x~| + sup |xdot - xdot~|; the bound is K3 eta with
/// K3 = (K1 + K2) exp((T+1) L1 + K L2 + (T+1)^2 L1 + (T+1) K L2),
/// K1 = 1 + (T+1) + (T+1)^2 / 2 and K2 = 1 + (T+1) bounding the perturbation terms per unit eta.
inline StudyReport stability_study(const ExperimentConfig& cfg) {
    StudyReport rep = detail::new_report("stability", cfg);
    const GeodesicProblem base = make_problem(cfg, cfg.data, true, cfg.eps);
    base.validate();
    const int m = base.dim();
    const double T = cfg.stability_T;

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec e(m);
    do {
        for (int k = 0; k < m; ++k) e(k) = normal(rng);
    } while (e.norm() == 0.0);
    e /= e.norm();

    constexpr int kGrid = 4001;
    struct Paired {
        Trajectory fwd, bwd;
    };
    auto run = [&](const GeodesicProblem& p) {
        IntegrateOptions io;
        io.tol = cfg.tol;
        io.blowup_threshold = cfg.blowup_threshold;
        const Vec y0 = detail::full_state(p.v0, p.x0, p.vdot0, p.xdot0);
        Paired r;
        if (T > p.start_u) r.fwd = integrate_between(p, p.start_u, y0, T, io);
        if (-T < p.start_u) r.bwd = integrate_between(p, p.start_u, y0, -T, io);
        return r;
    };
    auto sample = [&](const Paired& r, double u, bool& ok) -> Vec {
        const Trajectory& tr = u >= base.start_u ? r.fwd : r.bwd;
        if (tr.empty() || u < tr.front_param() || u > tr.back_param()) {
            ok = false;
            return Vec::Zero(2 * m + 2);
        }
        return tr.dense_eval(u);
    };

    const Paired ref = run(base);
    const bool ref_ok = (ref.fwd.empty() || ref.fwd.status.completed()) &&
                        (ref.bwd.empty() || ref.bwd.status.completed());

    // Lipschitz constants: F2 on I1, F1 on the box spanned by the reference run and I1 x I2.
    const AlphaResult al = existence_alpha(base, cfg.alpha_b, cfg.alpha_c);
    LipschitzEstimates lip;
    lip.L2 = kLipschitzSafety * detail::lipschitz_F2(base, cfg.alpha_b, 101);
    {
        Vec lo(2 * m), hi(2 * m);
        lo << (base.x0.array() - cfg.alpha_b).matrix(), (base.xdot0.array() - al.velocity_radius).matrix();
        hi << (base.x0.array() + cfg.alpha_b).matrix(), (base.xdot0.array() + al.velocity_radius).matrix();
        for (const Trajectory* tr : {&ref.fwd, &ref.bwd}) {
            for (const Vec& y : tr->states()) {
                for (int k = 0; k < m; ++k) {
                    lo(k) = std::min(lo(k), y(1 + k));
                    hi(k) = std::max(hi(k), y(1 + k));
                    lo(m + k) = std::min(lo(m + k), y(m + 2 + k));
                    hi(m + k) = std::max(hi(m + k), y(m + 2 + k));
                }
            }
        }
        const int n = m <= 2 ? 9 : (m == 3 ? 5 : 3);
        lip.L1 = kLipschitzSafety * detail::lipschitz_F1(base.manifold, lo, hi, n);
    }
    const double K = base.profile.impulsive().net.l1_bound();
    const double T1 = T + 1.0;
    const double K1 = 1.0 + T1 + 0.5 * T1 * T1;
    const double K2 = 1.0 + T1;
    const double K3 = (K1 + K2) * std::exp(T1 * lip.L1 + K * lip.L2 + T1 * T1 * lip.L1 + T1 * K * lip.L2);
    rep.derived["L1"] = lip.L1;
    rep.derived["L2"] = lip.L2;
    rep.derived["K"] = K;
    rep.derived["K1"] = K1;
    rep.derived["K2"] = K2;
    rep.derived["K3"] = K3;
    rep.derived["T"] = T;
    rep.derived["direction"] = detail::vec_json(e);
    rep.derived["reference_completed"] = ref_ok;

    struct Out {
        double psi = 0.0;
        bool ok = true;
    };
    auto outs = parallel_map<Out>(cfg.eta_list.size(), cfg.jobs, [&](std::size_t i) {
        const double eta = cfg.eta_list[i];
        GeodesicProblem q = base;
        q.x0 = base.x0 + eta * e;
        q.xdot0 = base.xdot0 + eta * e;
        q.forcing = Vec(eta * e);
        const Paired per = run(q);
        Out o;
        o.ok = (per.fwd.empty() || per.fwd.status.completed()) &&
               (per.bwd.empty() || per.bwd.status.completed());
        double dx = 0.0, dv = 0.0;
        for (int g = 0; g < kGrid; ++g) {
            const double u = -T + 2.0 * T * g / (kGrid - 1);
            bool ok = true;
            const Vec a = sample(ref, u, ok);
            const Vec b = sample(per, u, ok);
            if (!ok) {
                o.ok = false;
                continue;
            }
            dx = std::max(dx, (a.segment(1, m) - b.segment(1, m)).norm());
            dv = std::max(dv, (a.segment(m + 2, m) - b.segment(m + 2, m)).norm());
        }
        o.psi = dx + dv;
        return o;
    });

    double rmin = kInf, rmax = 0.0;
    bool all_ok = ref_ok;
    for (std::size_t i = 0; i < outs.size(); ++i) {
        const double eta = cfg.eta_list[i];
        Cell c;
        c.index = i;
        c.params = {{"eta", eta}};
        c.result = {{"psi", outs[i].psi}, {"bound", K3 * eta}, {"completed", outs[i].ok}};
        if (eta > 0.0) {
            const double ratio = outs[i].psi / eta;
            c.result["psi_over_eta"] = ratio;
            rmin = std::min(rmin, ratio);
            rmax = std::max(rmax, ratio);
        }
        all_ok = all_ok && outs[i].ok;
        Check b;
        b.name = "psi_below_K3_eta[" + std::to_string(i) + "]";
        b.value = outs[i].psi;
        b.bound = K3 * eta;
        b.passed = outs[i].ok && outs[i].psi <= K3 * eta;
        rep.checks.push_back(b);
        rep.cells.push_back(std::move(c));
    }
    Check lin;
    lin.name = "linear_response";
    lin.value = rmin > 0.0 && std::isfinite(rmin) ? rmax / rmin : kInf;
    lin.bound = 2.0;
    lin.passed = std::isfinite(lin.value) ? lin.value < 2.0 : false;
    lin.note = "max/min of psi/eta over eta > 0";
    if (rmax == 0.0) {
        lin.value = 1.0;
        lin.passed = true;
        lin.note = "psi vanishes for every eta";
    }
    rep.checks.push_back(lin);
    Check runs;
    runs.name = "runs_completed";
    runs.passed = all_ok;
    runs.value = all_ok ? 0.0 : 1.0;
    rep.checks.push_back(runs);
    return rep;
}

inline double relative_error(double est, double pred) {
    return std::abs(est - pred) / std::max(1.0, std::abs(pred));
}

inline double relative_error(const Vec& est, const Vec& pred) {
    return sup_abs(est - pred) / std::max(1.0, sup_abs(pred));
}

inline constexpr double kLimitTolerance = 1e-3;

/// Impulsive-limit study over the configured data sets: extrapolated post-velocity and
/// v-jump against the formal jump prediction at the extrapolated crossing point.
inline StudyReport convergence_study(const ExperimentConfig& cfg) {
    StudyReport rep = detail::new_report("limit", cfg);
    std::vector<DataSpec> sets = cfg.datasets.empty() ? std::vector<DataSpec>{cfg.data} : cfg.datasets;
    auto outs = parallel_map<LimitEstimate>(sets.size(), cfg.jobs, [&](std::size_t i) {
        const GeodesicProblem p = make_problem(cfg, sets[i], true, cfg.limit_eps.front());
        return impulsive_limit(p, cfg.limit_eps, cfg.tol);
    });
    const SpatialManifold M = config_manifold(cfg);
    const ScalarField f = builtin_field(cfg.profile, cfg.profile_params);
    for (std::size_t i = 0; i < outs.size(); ++i) {
        const auto& L = outs[i];
        const double a = sets[i].a;
        const JumpPrediction jp = jump_prediction(M, f, L.crossing_point, a);
        // Estimates are u-velocities; the prediction is the jump of dx/ds = a dx/du.
        const Vec pred_post = L.pre_velocity + jp.delta_xdot / a;
        const double e_post = relative_error(L.post_velocity, pred_post);
        const double e_v = relative_error(L.v_jump, jp.v_jump);
        Cell c;
        c.index = i;
        c.params = {{"data", detail::data_to_json(sets[i])}, {"eps_sequence", L.eps_sequence}};
        json samples = json::array();
        for (const auto& s : L.samples) {
            samples.push_back({{"eps", s.eps}, {"crossing_point", detail::vec_json(s.crossing_point)},
                               {"pre_velocity", detail::vec_json(s.pre_velocity)},
                               {"post_velocity", detail::vec_json(s.post_velocity)},
                               {"v_jump", s.v_jump}});
        }
        c.result = {{"crossing_point", detail::vec_json(L.crossing_point)},
                    {"pre_velocity", detail::vec_json(L.pre_velocity)},
                    {"post_velocity", detail::vec_json(L.post_velocity)},
                    {"v_jump", L.v_jump},
                    {"observed_order", std::isfinite(L.observed_order) ? json(L.observed_order) : json(nullptr)},
                    {"error_estimate", L.error_estimate},
                    {"successive_differences", L.successive_differences},
                    {"predicted_delta_xdot", detail::vec_json(jp.delta_xdot)},
                    {"predicted_post_velocity", detail::vec_json(pred_post)},
                    {"predicted_v_jump", jp.v_jump},
                    {"post_velocity_rel_error", e_post},
                    {"v_jump_rel_error", e_v},
                    {"samples", samples}};
        const std::string tag = "[" + std::to_string(i) + "]";
        rep.checks.push_back({"post_velocity" + tag, e_post < kLimitTolerance, e_post, kLimitTolerance,
                              "relative to max(1, |prediction|)", false});
        rep.checks.push_back({"v_jump" + tag, e_v < kLimitTolerance, e_v, kLimitTolerance,
                              "relative to max(1, |prediction|)", false});
        bool decreasing = true;
        for (std::size_t k = 1; k < L.successive_differences.size(); ++k) {
            decreasing = decreasing && L.successive_differences[k] <= L.successive_differences[k - 1];
        }
        rep.checks.push_back({"differences_decrease" + tag, decreasing,
                              L.successive_differences.empty() ? 0.0 : L.successive_differences.back(),
                              0.0, "successive-eps sup distances are non-increasing", false});
        rep.cells.push_back(std::move(c));
    }
    return rep;
}

/// Same f as a smooth everywhere-on profile and as an impulsive profile. PASS iff the smooth
/// leg behaves as predicted (blow-up at the quadrature time within 1%, or completion for
/// complete classes) and every impulsive run with eps <= eps0 completes.
inline StudyReport completeness_contrast(const ExperimentConfig& cfg) {
    StudyReport rep = detail::new_report("contrast", cfg);
    const GeodesicProblem ps = make_problem(cfg, cfg.data, false, cfg.eps);
    Trajectory smooth = integrate_adaptive(ps, cfg.horizon, cfg.tol, cfg.blowup_threshold);
    Cell sc;
    sc.index = 0;
    sc.params = {{"leg", "smooth"}};
    sc.result = detail::status_json(smooth.status);
    sc.result["diagnostics"] = detail::diagnostics_json(smooth.diagnostics);
    rep.cells.push_back(sc);
    if (auto pred = smooth_blowup_prediction(cfg, cfg.data)) {
        const double dur = *pred - cfg.data.start_u;
        const double err = smooth.status.kind == Termination::BlowUp
                               ? std::abs(smooth.status.at - *pred) / dur
                               : kInf;
        rep.derived["predicted_blowup_u"] = *pred;
        rep.checks.push_back({"smooth_blowup_matches_oracle",
                              smooth.status.kind == Termination::BlowUp && err <= 0.01, err, 0.01,
                              "relative error of the blow-up time measured from start_u", false});
    } else if (smooth_expected_complete(cfg)) {
        rep.checks.push_back({"smooth_completed", smooth.status.completed(),
                              smooth.status.completed() ? 0.0 : 1.0, 0.0,
                              "profile class is complete", smooth.status.kind == Termination::BlowUp});
    }
    if (smooth.status.completed()) {
        rep.checks.push_back({"smooth_energy_drift", smooth.diagnostics.energy_drift <= 100.0 * cfg.tol,
                              smooth.diagnostics.energy_drift, 100.0 * cfg.tol, "", false});
    }
    rep.derived["smooth_survival_u"] = smooth.status.at;
    rep.trajectories.emplace_back("smooth", std::move(smooth));
    const AlphaResult al = config_alpha(cfg, cfg.data);
    rep.derived["alpha"] = detail::alpha_json(al);
    detail::impulsive_cells(cfg, al, rep, "impulsive");
    return rep;
}

/// Max |Laplace-Beltrami H| over an n^dim grid (and the configured u values for smooth
/// profiles). An audit: the report flags harmonicity but never fails.
inline StudyReport vacuum_audit(const ExperimentConfig& cfg) {
    StudyReport rep = detail::new_report("vacuum", cfg);
    const SpatialManifold M = config_manifold(cfg);
    const bool impulsive = cfg.realisation == "impulsive";
    const WaveProfile prof = config_profile(cfg, impulsive);
    const int m = M.dim();
    std::vector<std::pair<double, double>> box = cfg.vacuum.box;
    if (box.empty()) {
        for (int k = 0; k < m; ++k) box.emplace_back(-2.0, 2.0);
        if (M.name() == "half_plane") box[1] = {0.5, 2.5};
    }
    const int n = cfg.vacuum.n;
    std::vector<double> us = impulsive ? std::vector<double>{0.0} : cfg.vacuum.u;
    double worst = 0.0;
    std::size_t points = 0, skipped = 0;
    std::vector<int> idx(static_cast<std::size_t>(m), 0);
    Vec x(m);
    while (true) {
        for (int k = 0; k < m; ++k) {
            const auto [lo, hi] = box[static_cast<std::size_t>(k)];
            x(k) = lo + (hi - lo) * idx[static_cast<std::size_t>(k)] / (n - 1);
        }
        if (M.in_chart(x)) {
            for (double u : us) {
                const double r = impulsive ? vacuum_residual(M, prof, x) : vacuum_residual(M, prof, x, u);
                worst = std::max(worst, std::abs(r));
                ++points;
            }
        } else {
            ++skipped;
        }
        int k = 0;
        for (; k < m; ++k) {
            auto& i = idx[static_cast<std::size_t>(k)];
            if (++i < n) break;
            i = 0;
        }
        if (k == m) break;
    }
    constexpr double kHarmonic = 1e-8;
    rep.derived["max_residual"] = worst;
    rep.derived["harmonic"] = worst < kHarmonic;
    rep.derived["threshold"] = kHarmonic;
    rep.derived["points"] = points;
    rep.derived["skipped_outside_chart"] = skipped;
    Cell c;
    c.params = {{"n", n}, {"u", us}};
    c.result = {{"max_residual", worst}, {"harmonic", worst < kHarmonic}};
    rep.cells.push_back(c);
    return rep;
}

/// Existence interval for the configured data.
inline StudyReport alpha_study(const ExperimentConfig& cfg) {
    StudyReport rep = detail::new_report("alpha", cfg);
    rep.derived["alpha"] = detail::alpha_json(config_alpha(cfg, cfg.data));
    return rep;
}

/// Delta-net axioms for the configured kernel over eps_list (sorted decreasing).
inline StudyReport net_study(const ExperimentConfig& cfg) {
    StudyReport rep = detail::new_report("verify-net", cfg);
    const DeltaNet net = builtin_net(cfg.kernel, cfg.net_params);
    std::vector<double> eps = cfg.eps_list;
    std::sort(eps.begin(), eps.end(), std::greater<>());
    eps.erase(std::unique(eps.begin(), eps.end()), eps.end());
    const AxiomReport ar = verify_axioms(net, eps);
    for (std::size_t i = 0; i < ar.rows.size(); ++i) {
        Cell c;
        c.index = i;
        c.params = {{"eps", ar.rows[i].eps}};
        c.result = {{"support_radius", ar.rows[i].support_radius}, {"mass", ar.rows[i].mass},
                    {"l1", ar.rows[i].l1}};
        rep.cells.push_back(c);
    }
    rep.derived = {{"kernel", net.name()}, {"kind", to_string(net.kind())},
                   {"kernel_mass", ar.kernel_mass}, {"declared_k", ar.declared_k},
                   {"observed_k", ar.observed_k}};
    rep.checks.push_back({"support_shrinks", ar.support_shrinks, 0.0, 0.0, "", false});
    rep.checks.push_back({"mass_to_one", ar.mass_to_one,
                          ar.rows.empty() ? 0.0 : std::abs(ar.rows.back().mass - 1.0), kMassTolerance, "", false});
    rep.checks.push_back({"l1_bounded", ar.l1_bounded, ar.observed_k, ar.declared_k + kL1Tolerance, "", false});
    return rep;
}

/// Single run with the configured solver. Impulsive runs with eps <= eps0 assert completion.
inline StudyReport integrate_study(const ExperimentConfig& cfg) {
    StudyReport rep = detail::new_report("integrate", cfg);
    const bool impulsive = cfg.realisation == "impulsive";
    const GeodesicProblem p = make_problem(cfg, cfg.data, impulsive, cfg.eps);
    Trajectory tr;
    std::optional<AlphaResult> al;
    if (impulsive) al = existence_alpha(p, cfg.alpha_b, cfg.alpha_c);
    if (cfg.solver == "picard") {
        if (!impulsive) throw ConfigError("the picard solver needs the impulsive realisation");
        tr = picard_solve(p, -p.support_radius(), al->alpha - p.support_radius(), cfg.tol);
    } else if (cfg.solver == "three_phase") {
        if (!impulsive) throw ConfigError("the three_phase solver needs the impulsive realisation");
        tr = solve_three_phase(p, cfg.horizon, cfg.tol, cfg.blowup_threshold);
    } else {
        tr = integrate_adaptive(p, cfg.horizon, cfg.tol, cfg.blowup_threshold);
    }
    Cell c;
    c.params = {{"solver", cfg.solver}, {"eps", cfg.eps}};
    c.result = detail::status_json(tr.status);
    c.result["diagnostics"] = detail::diagnostics_json(tr.diagnostics);
    c.result["samples"] = tr.size();
    rep.cells.push_back(c);
    if (al) {
        rep.derived["alpha"] = detail::alpha_json(*al);
        if (cfg.eps <= al->eps0() && cfg.solver != "picard") {
            rep.checks.push_back({"completed_below_eps0", tr.status.completed(),
                                  tr.status.completed() ? 0.0 : 1.0, 0.0, "",
                                  tr.status.kind == Termination::BlowUp});
        }
    }
    rep.derived["eps"] = cfg.eps;
    rep.trajectories.emplace_back("trajectory", std::move(tr));
    return rep;
}

}  // namespace npw
