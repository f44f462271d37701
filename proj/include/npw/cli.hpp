#pragma once

#include "npw/config.hpp"
#include "npw/experiments.hpp"
#include "npw/io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace npw::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kInternal = 1, kUsage = 2, kFail = 3, kBlowUp = 4 };

struct Options {
    std::string config;
    std::string out = "npw_out";
    std::string eps;
    std::optional<double> horizon;
    std::optional<double> tol;
    std::optional<int> jobs;
    std::optional<std::uint64_t> seed;
    bool plot = false;
    // plot subcommand
    std::string input;
    std::optional<double> band;
};

namespace detail {

inline std::vector<double> parse_eps_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) throw ConfigError("empty entry in --eps");
        try {
            out.push_back(io::parse_double(std::string_view(item).substr(b, e - b + 1)));
        } catch (const Error&) {
            throw ConfigError("--eps entries must be numbers");
        }
    }
    if (out.empty()) throw ConfigError("--eps needs at least one value");
    return out;
}

inline ExperimentConfig load_config(const Options& o, const std::string& command) {
    if (o.config.empty()) throw ConfigError("--config is required");
    json j;
    try {
        j = json::parse(io::read_file(o.config));
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    ExperimentConfig c = parse_config(j);
    if (!o.eps.empty()) {
        const auto list = parse_eps_list(o.eps);
        if (command == "integrate") {
            if (list.size() != 1) throw ConfigError("integrate takes a single --eps value");
            c.eps = list.front();
        } else if (command == "limit") {
            c.limit_eps = list;
        } else {
            c.eps_list = list;
        }
    }
    if (o.horizon) c.horizon = *o.horizon;
    if (o.tol) c.tol = *o.tol;
    if (o.jobs) c.jobs = *o.jobs;
    if (o.seed) c.seed = *o.seed;
    if (c.jobs < 1) throw ConfigError("--jobs must be positive");
    check_config(c);
    return c;
}

/// Records files written under the output directory, in write order.
class OutputSet {
public:
    explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }
    const std::filesystem::path& dir() const { return dir_; }

    void write(const std::string& name, const std::string& content) {
        io::write_file(dir_ / name, content);
        files_.emplace_back(name, static_cast<std::uintmax_t>(content.size()));
    }
    const std::vector<std::pair<std::string, std::uintmax_t>>& files() const { return files_; }

private:
    std::filesystem::path dir_;
    std::vector<std::pair<std::string, std::uintmax_t>> files_;
};

inline std::string join_args(int argc, const char* const* argv) {
    std::string s;
    for (int i = 0; i < argc; ++i) {
        if (i) s += ' ';
        s += argv[i];
    }
    return s;
}

inline double band_for(const ExperimentConfig& cfg, double eps) {
    if (cfg.realisation != "impulsive") return 0.0;
    return builtin_net(cfg.kernel, cfg.net_params).support_radius(eps);
}

/// Study-specific summary plots.
inline void write_plots(const ExperimentConfig& cfg, const StudyReport& rep, OutputSet& out) {
    for (std::size_t i = 0; i < rep.trajectories.size(); ++i) {
        const auto& [stem, tr] = rep.trajectories[i];
        if (tr.empty()) continue;
        io::PlotOptions po;
        po.title = rep.study + " " + stem;
        po.x_label = "u";
        po.y_label = "x";
        double eps = cfg.eps;
        if (stem.rfind("impulsive_", 0) == 0) eps = cfg.eps_list.at(std::stoul(stem.substr(10)));
        if (stem != "smooth" && cfg.realisation == "impulsive") po.band_half_width = band_for(cfg, eps);
        if (stem == "smooth") po.band_half_width.reset();
        out.write(stem + ".svg", io::plot_svg(io::trajectory_series(tr), io::PlotKind::Trajectory, po));
    }
    if (rep.study == "sweep" || rep.study == "contrast") {
        io::Series s{"horizon reached", {}, {}};
        for (const auto& c : rep.cells) {
            if (!c.params.contains("eps") || c.params.value("leg", "") != "impulsive") continue;
            s.x.push_back(c.params["eps"].get<double>());
            s.y.push_back(c.result["at"].get<double>());
        }
        io::PlotOptions po;
        po.title = rep.study + ": horizon vs eps";
        po.x_label = "log10 eps";
        po.y_label = "u reached";
        po.log_x = true;
        out.write("horizon_vs_eps.svg", io::plot_svg({s}, io::PlotKind::HorizonVsEps, po));
    }
    if (rep.study == "limit") {
        std::vector<io::Series> ser;
        for (const auto& c : rep.cells) {
            io::Series s{"data " + std::to_string(c.index), {}, {}};
            const auto eps = c.params["eps_sequence"].get<std::vector<double>>();
            const auto d = c.result["successive_differences"].get<std::vector<double>>();
            for (std::size_t k = 0; k < d.size(); ++k) {
                s.x.push_back(eps[k + 1]);
                s.y.push_back(d[k]);
            }
            ser.push_back(std::move(s));
        }
        io::PlotOptions po;
        po.title = "successive differences";
        po.x_label = "log10 eps";
        po.y_label = "log10 sup difference";
        po.log_x = true;
        po.log_y = true;
        out.write("convergence.svg", io::plot_svg(ser, io::PlotKind::Convergence, po));
    }
}

inline StudyReport run_study(const std::string& command, const ExperimentConfig& cfg) {
    static const std::map<std::string, std::function<StudyReport(const ExperimentConfig&)>> table = {
        {"integrate", integrate_study},   {"sweep", epsilon_sweep},
        {"limit", convergence_study},     {"alpha", alpha_study},
        {"stability", stability_study},   {"contrast", completeness_contrast},
        {"vacuum", vacuum_audit},         {"verify-net", net_study},
    };
    return table.at(command)(cfg);
}

inline int run_experiment(const std::string& command, const Options& o, const std::string& cmdline,
                          std::ostream& os) {
    const ExperimentConfig cfg = load_config(o, command);
    StudyReport rep;
    try {
        rep = run_study(command, cfg);
    } catch (const ConfigError&) {
        throw;
    } catch (const InvalidParams& e) {
        // Problem-level preconditions (e.g. a smooth profile asked for alpha) are usage errors.
        throw ConfigError(e.what());
    }
    OutputSet out(o.out);
    out.write("report.json", rep.to_json().dump(2) + "\n");
    for (const auto& [stem, tr] : rep.trajectories) {
        if (!tr.empty()) out.write(stem + ".csv", io::trajectory_csv(tr));
    }
    if (o.plot) write_plots(cfg, rep, out);
    io::RunManifest man;
    man.config = config_to_json(cfg);
    man.config_hash = config_hash(man.config);
    man.version = kVersion;
    man.timestamp = io::utc_timestamp();
    man.command = cmdline;
    man.files = out.files();
    io::write_file(out.dir() / "manifest.json", man.to_json().dump(2) + "\n");

    std::size_t passed = 0;
    for (const auto& c : rep.checks) passed += c.passed ? 1 : 0;
    os << rep.study << ": " << to_string(rep.verdict()) << " (" << passed << "/" << rep.checks.size()
       << " checks, config " << rep.config_hash << ", output " << out.dir().string() << ")\n";
    return rep.exit_code();
}

/// Re-renders a trajectory CSV or a study report as SVG.
inline int run_plot(const Options& o, std::ostream& os) {
    if (o.input.empty()) throw ConfigError("plot needs --input");
    const std::filesystem::path in(o.input);
    OutputSet out(o.out);
    const std::string stem = in.stem().string();
    if (in.extension() == ".csv") {
        const io::CsvTable t = io::parse_trajectory_csv(io::read_file(in));
        std::vector<io::Series> ser;
        for (int k = 0; k < t.dim; ++k) {
            io::Series s{"x" + std::to_string(k + 1), t.u, {}};
            for (const auto& r : t.rows) s.y.push_back(r(1 + k));
            ser.push_back(std::move(s));
        }
        io::PlotOptions po;
        po.title = stem;
        po.x_label = "u";
        po.y_label = "x";
        po.band_half_width = o.band;
        out.write(stem + ".svg", io::plot_svg(ser, io::PlotKind::Trajectory, po));
    } else {
        json r;
        try {
            r = json::parse(io::read_file(in));
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("plot input is neither CSV nor JSON: ") + e.what());
        }
        const std::string study = r.value("study", "");
        io::Series s{study, {}, {}};
        io::PlotKind kind;
        io::PlotOptions po;
        po.log_x = true;
        po.x_label = "log10 eps";
        if (study == "sweep" || study == "contrast") {
            kind = io::PlotKind::HorizonVsEps;
            po.y_label = "u reached";
            for (const auto& c : r["cells"]) {
                if (c["params"].value("leg", "") != "impulsive") continue;
                s.x.push_back(c["params"]["eps"].get<double>());
                s.y.push_back(c["result"]["at"].get<double>());
            }
        } else if (study == "limit") {
            kind = io::PlotKind::Convergence;
            po.log_y = true;
            po.y_label = "log10 sup difference";
            for (const auto& c : r["cells"]) {
                const auto eps = c["params"]["eps_sequence"].get<std::vector<double>>();
                const auto d = c["result"]["successive_differences"].get<std::vector<double>>();
                for (std::size_t k = 0; k < d.size(); ++k) {
                    s.x.push_back(eps[k + 1]);
                    s.y.push_back(d[k]);
                }
            }
        } else {
            throw ConfigError("plot supports sweep, contrast and limit reports");
        }
        po.title = study;
        out.write(stem + ".svg", io::plot_svg({s}, kind, po));
    }
    os << "plot: written to " << out.dir().string() << "\n";
    return kOk;
}

}  // namespace detail

/// Entry point; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& os = std::cout, std::ostream& es = std::cerr) {
    CLI::App app{"Geodesics of regularised impulsive pp-waves"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "experiment config JSON")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--eps", o.eps, "comma-separated eps override");
        sub->add_option("--horizon", o.horizon, "integration horizon");
        sub->add_option("--tol", o.tol, "solver tolerance");
        sub->add_option("--jobs", o.jobs, "worker threads");
        sub->add_option("--seed", o.seed, "random seed");
        sub->add_flag("--plot", o.plot, "also write SVG plots");
    };
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"integrate", "single geodesic run"},
        {"sweep", "existence sweep over eps"},
        {"limit", "impulsive limit and jump comparison"},
        {"alpha", "existence interval for the data"},
        {"stability", "perturbation stability study"},
        {"contrast", "smooth against impulsive realisation"},
        {"vacuum", "vacuum residual audit"},
        {"verify-net", "delta-net axioms"},
    };
    for (const auto& [name, help] : commands) common(app.add_subcommand(name, help));
    CLI::App* plot = app.add_subcommand("plot", "render a CSV or report as SVG");
    plot->add_option("--input", o.input, "trajectory CSV or report JSON")->required()->check(CLI::ExistingFile);
    plot->add_option("--out", o.out, "output directory");
    plot->add_option("--band", o.band, "half-width of the shaded impulse band");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, os, es);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, os, es);
    } catch (const CLI::ParseError& e) {
        app.exit(e, os, es);
        es << app.help();
        return kUsage;
    }

    const std::string cmdline = detail::join_args(argc, argv);
    try {
        for (const auto& [name, help] : commands) {
            if (app.got_subcommand(name)) return detail::run_experiment(name, o, cmdline, os);
        }
        return detail::run_plot(o, os);
    } catch (const ConfigError& e) {
        es << "config error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        es << "internal error: " << e.what() << "\n";
        return kInternal;
    }
}

}  // namespace npw::cli
