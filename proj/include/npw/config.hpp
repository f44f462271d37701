#pragma once

#include "npw/core.hpp"
#include "npw/deltanets.hpp"
#include "npw/manifold.hpp"
#include "npw/profiles.hpp"
#include "npw/solver.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

namespace npw {

using json = nlohmann::json;

/// Initial data of one geodesic (u-derivatives, posed at start_u).
struct DataSpec {
    double a = 1.0;
    double v0 = 0.0;
    double vdot0 = 0.0;
    std::vector<double> x0;
    std::vector<double> xdot0;
    double start_u = -1.0;
};

struct VacuumSpec {
    std::vector<std::pair<double, double>> box;  ///< one range per coordinate
    int n = 101;
    std::vector<double> u = {-1.0, 0.0, 1.0};
};

/// Experiment description; every name resolves to a built-in.
struct ExperimentConfig {
    int schema = 1;
    std::string manifold = "flat2";
    std::optional<double> fd_step;
    std::string profile = "zero";
    json profile_params = json::object();
    std::string kernel = "bump";
    json net_params = json::object();
    std::string realisation = "impulsive";
    std::string solver = "adaptive";
    DataSpec data;
    std::vector<DataSpec> datasets;  ///< limit studies; defaults to {data}
    double eps = 0.1;
    std::vector<double> eps_list;
    std::vector<double> limit_eps = {1.0 / 128, 1.0 / 256, 1.0 / 512, 1.0 / 1024};
    double horizon = 10.0;
    double tol = 1e-9;
    double blowup_threshold = kDefaultBlowupThreshold;
    double alpha_b = 1.0;
    double alpha_c = 1.0;
    std::vector<double> eta_list = {1e-3, 1e-5, 1e-7};
    double stability_T = 2.0;
    VacuumSpec vacuum;
    std::uint64_t seed = 0;
    int jobs = 1;

    ExperimentConfig() {
        for (int k = 1; k <= 12; ++k) eps_list.push_back(std::ldexp(1.0, -k));
    }
};

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
}

inline double number(const json& j, const std::string& key) {
    if (!j.is_number()) throw ConfigError("'" + key + "' must be a number");
    return j.get<double>();
}

inline std::vector<double> number_list(const json& j, const std::string& key) {
    if (!j.is_array()) throw ConfigError("'" + key + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : j) out.push_back(number(e, key));
    return out;
}

inline DataSpec parse_data(const json& j) {
    reject_unknown(j, {"a", "v0", "vdot0", "x0", "xdot0", "start_u"}, "data");
    DataSpec d;
    if (j.contains("a")) d.a = number(j["a"], "a");
    if (j.contains("v0")) d.v0 = number(j["v0"], "v0");
    if (j.contains("vdot0")) d.vdot0 = number(j["vdot0"], "vdot0");
    if (j.contains("start_u")) d.start_u = number(j["start_u"], "start_u");
    if (!j.contains("x0")) throw ConfigError("data needs 'x0'");
    d.x0 = number_list(j["x0"], "x0");
    d.xdot0 = j.contains("xdot0") ? number_list(j["xdot0"], "xdot0")
                                  : std::vector<double>(d.x0.size(), 0.0);
    return d;
}

inline json data_to_json(const DataSpec& d) {
    return json{{"a", d.a}, {"v0", d.v0}, {"vdot0", d.vdot0}, {"x0", d.x0}, {"xdot0", d.xdot0},
                {"start_u", d.start_u}};
}

inline Vec to_vec(const std::vector<double>& v) {
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

/// Resolves "flat2", "flatN(m)" or "half_plane".
inline SpatialManifold builtin_manifold(const std::string& name) {
    if (name == "flat2") return SpatialManifold::flat(2);
    if (name == "half_plane") return SpatialManifold::half_plane();
    static const std::regex flatn(R"(flatN\((\d+)\))");
    std::smatch m;
    if (std::regex_match(name, m, flatn)) {
        const int d = std::stoi(m[1].str());
        if (d < 1) throw ConfigError("flatN needs m >= 1");
        return SpatialManifold::flat(d);
    }
    throw ConfigError("unknown manifold '" + name + "'");
}

/// Resolves "bump", "shifted" {offset}, "signed" or "scaled" {mass}.
inline DeltaNet builtin_net(const std::string& kernel, const json& params) {
    const json p = params.is_null() ? json::object() : params;
    if (kernel == "bump") {
        detail::reject_unknown(p, {}, "net.params");
        return DeltaNet::model();
    }
    if (kernel == "shifted") {
        detail::reject_unknown(p, {"offset"}, "net.params");
        return DeltaNet::shifted(p.contains("offset") ? detail::number(p["offset"], "offset") : 0.25);
    }
    if (kernel == "signed") {
        detail::reject_unknown(p, {}, "net.params");
        return DeltaNet::signed_kernel();
    }
    if (kernel == "scaled") {
        detail::reject_unknown(p, {"mass"}, "net.params");
        return DeltaNet::scaled(p.contains("mass") ? detail::number(p["mass"], "mass") : 0.5);
    }
    throw ConfigError("unknown net kernel '" + kernel + "'");
}

inline ExperimentConfig parse_config(const json& j) {
    using namespace detail;
    reject_unknown(j, {"schema", "manifold", "fd_step", "profile", "net", "realisation", "solver",
                       "data", "datasets", "eps", "eps_list", "limit", "horizon", "tol",
                       "blowup_threshold", "alpha", "stability", "vacuum", "seed", "jobs"},
                   "config");
    ExperimentConfig c;
    if (!j.contains("schema") || !j["schema"].is_number_integer() || j["schema"].get<int>() != 1) {
        throw ConfigError("config needs \"schema\": 1");
    }
    if (j.contains("manifold")) {
        if (!j["manifold"].is_string()) throw ConfigError("'manifold' must be a string");
        c.manifold = j["manifold"].get<std::string>();
    }
    if (j.contains("fd_step")) c.fd_step = number(j["fd_step"], "fd_step");
    if (!j.contains("profile")) throw ConfigError("config needs 'profile'");
    {
        const json& p = j["profile"];
        reject_unknown(p, {"name", "params"}, "profile");
        if (!p.contains("name") || !p["name"].is_string()) throw ConfigError("profile needs 'name'");
        c.profile = p["name"].get<std::string>();
        if (p.contains("params")) c.profile_params = p["params"];
    }
    if (j.contains("net")) {
        const json& n = j["net"];
        reject_unknown(n, {"kernel", "params"}, "net");
        if (n.contains("kernel")) {
            if (!n["kernel"].is_string()) throw ConfigError("'net.kernel' must be a string");
            c.kernel = n["kernel"].get<std::string>();
        }
        if (n.contains("params")) c.net_params = n["params"];
    }
    if (j.contains("realisation")) {
        c.realisation = j["realisation"].is_string() ? j["realisation"].get<std::string>() : "";
        if (c.realisation != "impulsive" && c.realisation != "smooth") {
            throw ConfigError("'realisation' must be \"impulsive\" or \"smooth\"");
        }
    }
    if (j.contains("solver")) {
        c.solver = j["solver"].is_string() ? j["solver"].get<std::string>() : "";
        if (c.solver != "adaptive" && c.solver != "three_phase" && c.solver != "picard") {
            throw ConfigError("'solver' must be adaptive, three_phase or picard");
        }
    }
    if (!j.contains("data")) throw ConfigError("config needs 'data'");
    c.data = parse_data(j["data"]);
    if (j.contains("datasets")) {
        if (!j["datasets"].is_array()) throw ConfigError("'datasets' must be an array");
        for (const auto& d : j["datasets"]) c.datasets.push_back(parse_data(d));
    }
    if (j.contains("eps")) c.eps = number(j["eps"], "eps");
    if (j.contains("eps_list")) c.eps_list = number_list(j["eps_list"], "eps_list");
    if (j.contains("limit")) {
        reject_unknown(j["limit"], {"eps_list"}, "limit");
        if (j["limit"].contains("eps_list")) c.limit_eps = number_list(j["limit"]["eps_list"], "limit.eps_list");
    }
    if (j.contains("horizon")) c.horizon = number(j["horizon"], "horizon");
    if (j.contains("tol")) c.tol = number(j["tol"], "tol");
    if (j.contains("blowup_threshold")) c.blowup_threshold = number(j["blowup_threshold"], "blowup_threshold");
    if (j.contains("alpha")) {
        reject_unknown(j["alpha"], {"b", "c"}, "alpha");
        if (j["alpha"].contains("b")) c.alpha_b = number(j["alpha"]["b"], "alpha.b");
        if (j["alpha"].contains("c")) c.alpha_c = number(j["alpha"]["c"], "alpha.c");
    }
    if (j.contains("stability")) {
        reject_unknown(j["stability"], {"eta_list", "T"}, "stability");
        if (j["stability"].contains("eta_list")) c.eta_list = number_list(j["stability"]["eta_list"], "stability.eta_list");
        if (j["stability"].contains("T")) c.stability_T = number(j["stability"]["T"], "stability.T");
    }
    if (j.contains("vacuum")) {
        const json& v = j["vacuum"];
        reject_unknown(v, {"box", "n", "u"}, "vacuum");
        if (v.contains("box")) {
            if (!v["box"].is_array()) throw ConfigError("'vacuum.box' must be an array of [lo, hi]");
            for (const auto& r : v["box"]) {
                const auto lh = number_list(r, "vacuum.box");
                if (lh.size() != 2 || !(lh[0] <= lh[1])) throw ConfigError("vacuum.box ranges must be [lo, hi]");
                c.vacuum.box.emplace_back(lh[0], lh[1]);
            }
        }
        if (v.contains("n")) {
            if (!v["n"].is_number_integer() || v["n"].get<int>() < 2) throw ConfigError("'vacuum.n' must be an integer >= 2");
            c.vacuum.n = v["n"].get<int>();
        }
        if (v.contains("u")) c.vacuum.u = number_list(v["u"], "vacuum.u");
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) throw ConfigError("'seed' must be a nonnegative integer");
        c.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("jobs")) {
        if (!j["jobs"].is_number_integer() || j["jobs"].get<int>() < 1) throw ConfigError("'jobs' must be a positive integer");
        c.jobs = j["jobs"].get<int>();
    }
    return c;
}

/// Semantic checks that need the built-ins; raises ConfigError.
inline void check_config(const ExperimentConfig& c) {
    const SpatialManifold M = builtin_manifold(c.manifold);
    auto check_data = [&](const DataSpec& d) {
        if (static_cast<int>(d.x0.size()) != M.dim() || static_cast<int>(d.xdot0.size()) != M.dim()) {
            throw ConfigError("data dimension does not match manifold " + c.manifold);
        }
    };
    check_data(c.data);
    for (const auto& d : c.datasets) check_data(d);
    auto in_unit = [](double e) { return e > 0.0 && e <= 1.0; };
    if (!in_unit(c.eps)) throw ConfigError("'eps' must lie in (0, 1]");
    for (double e : c.eps_list) {
        if (!in_unit(e)) throw ConfigError("eps_list entries must lie in (0, 1]");
    }
    for (double e : c.limit_eps) {
        if (!in_unit(e)) throw ConfigError("limit.eps_list entries must lie in (0, 1]");
    }
    if (!(c.tol > 0.0)) throw ConfigError("'tol' must be positive");
    if (!(c.blowup_threshold > 0.0)) throw ConfigError("'blowup_threshold' must be positive");
    if (!(c.alpha_b > 0.0) || !(c.alpha_c > 0.0)) throw ConfigError("alpha b and c must be positive");
    if (!(c.stability_T > 0.0)) throw ConfigError("stability.T must be positive");
    for (double e : c.eta_list) {
        if (!(e >= 0.0)) throw ConfigError("stability.eta_list entries must be nonnegative");
    }
    if (!c.vacuum.box.empty() && static_cast<int>(c.vacuum.box.size()) != M.dim()) {
        throw ConfigError("vacuum.box needs one range per coordinate");
    }
    if (c.fd_step && !(*c.fd_step > 0.0)) throw ConfigError("'fd_step' must be positive");
    // Resolve names now so a bad profile or net is a config error, not a late failure.
    try {
        builtin_profile(c.profile, c.profile_params);
        builtin_net(c.kernel, c.net_params);
    } catch (const UnknownProfile& e) {
        throw ConfigError(e.what());
    } catch (const InvalidParams& e) {
        throw ConfigError(e.what());
    }
}

inline json config_to_json(const ExperimentConfig& c) {
    json j;
    j["schema"] = c.schema;
    j["manifold"] = c.manifold;
    if (c.fd_step) j["fd_step"] = *c.fd_step;
    j["profile"] = {{"name", c.profile}, {"params", c.profile_params}};
    j["net"] = {{"kernel", c.kernel}, {"params", c.net_params}};
    j["realisation"] = c.realisation;
    j["solver"] = c.solver;
    j["data"] = detail::data_to_json(c.data);
    if (!c.datasets.empty()) {
        j["datasets"] = json::array();
        for (const auto& d : c.datasets) j["datasets"].push_back(detail::data_to_json(d));
    }
    j["eps"] = c.eps;
    j["eps_list"] = c.eps_list;
    j["limit"] = {{"eps_list", c.limit_eps}};
    j["horizon"] = c.horizon;
    j["tol"] = c.tol;
    j["blowup_threshold"] = c.blowup_threshold;
    j["alpha"] = {{"b", c.alpha_b}, {"c", c.alpha_c}};
    j["stability"] = {{"eta_list", c.eta_list}, {"T", c.stability_T}};
    json box = json::array();
    for (const auto& [lo, hi] : c.vacuum.box) box.push_back({lo, hi});
    j["vacuum"] = {{"box", box}, {"n", c.vacuum.n}, {"u", c.vacuum.u}};
    j["seed"] = c.seed;
    j["jobs"] = c.jobs;
    return j;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

/// Hex FNV-1a of the canonical (sorted-key, compact) dump of a config document.
inline std::string config_hash(const json& cfg) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(cfg.dump())));
    return buf;
}

inline std::string config_hash(const ExperimentConfig& c) { return config_hash(config_to_json(c)); }

inline SpatialManifold config_manifold(const ExperimentConfig& c) {
    SpatialManifold M = builtin_manifold(c.manifold);
    if (c.fd_step) M = M.with_finite_differences(*c.fd_step);
    return M;
}

/// Profile of the configured realisation; "smooth" ignores the net.
inline WaveProfile config_profile(const ExperimentConfig& c, bool impulsive) {
    if (impulsive) return builtin_profile(c.profile, c.profile_params, builtin_net(c.kernel, c.net_params));
    return builtin_profile(c.profile, c.profile_params);
}

inline GeodesicProblem make_problem(const ExperimentConfig& c, const DataSpec& d, bool impulsive,
                                    double eps) {
    GeodesicProblem p(config_manifold(c), config_profile(c, impulsive));
    p.eps = eps;
    p.a = d.a;
    p.v0 = d.v0;
    p.vdot0 = d.vdot0;
    p.x0 = detail::to_vec(d.x0);
    p.xdot0 = detail::to_vec(d.xdot0);
    p.start_u = d.start_u;
    return p;
}

inline GeodesicProblem make_problem(const ExperimentConfig& c) {
    return make_problem(c, c.data, c.realisation == "impulsive", c.eps);
}

}  // namespace npw
