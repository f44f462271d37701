#pragma once

#include "npw/core.hpp"
#include "npw/trajectory.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

namespace npw::io {

/// Shortest-form-free decimal with 17 significant digits; locale independent.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw Error("malformed number '" + std::string(s) + "'");
    }
    return v;
}

inline std::string csv_header(int dim) {
    std::string h = "u,v";
    for (int k = 1; k <= dim; ++k) h += ",x" + std::to_string(k);
    h += ",vdot";
    for (int k = 1; k <= dim; ++k) h += ",xdot" + std::to_string(k);
    return h;
}

/// Rows u,v,x1..xm,vdot,xdot1..xdotm. Spatial trajectories carry no v: those columns are nan.
inline std::string trajectory_csv(const Trajectory& tr) {
    if (tr.empty()) throw Error("cannot emit an empty trajectory");
    const int m = tr.dim();
    std::string out = csv_header(m) + "\n";
    const bool full = tr.layout() == Layout::Full;
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const Vec& y = tr.state(i);
        out += format_double(tr.param(i));
        out += ',';
        out += full ? format_double(tr.v(y)) : "nan";
        for (int k = 0; k < m; ++k) out += ',' + format_double(y(tr.x_offset() + k));
        out += ',';
        out += full ? format_double(tr.vdot(y)) : "nan";
        for (int k = 0; k < m; ++k) out += ',' + format_double(y(tr.xdot_offset() + k));
        out += '\n';
    }
    return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string() + " for writing");
    f << content;
    if (!f) throw Error("failed writing " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline void emit_trajectory_csv(const Trajectory& tr, const std::filesystem::path& path) {
    write_file(path, trajectory_csv(tr));
}

/// Parsed CSV: the u column plus one full-layout row per sample.
struct CsvTable {
    int dim = 0;
    std::vector<double> u;
    std::vector<Vec> rows;  ///< (v, x, vdot, xdot)
};

inline CsvTable parse_trajectory_csv(const std::string& text) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw Error("empty csv");
    const auto cols = static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
    if (cols < 5 || (cols - 3) % 2 != 0) throw Error("unexpected csv header");
    t.dim = (cols - 3) / 2;
    if (line != csv_header(t.dim)) throw Error("unexpected csv header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> vals;
        std::size_t start = 0;
        while (true) {
            const auto pos = line.find(',', start);
            vals.push_back(parse_double(std::string_view(line).substr(start, pos - start)));
            if (pos == std::string::npos) break;
            start = pos + 1;
        }
        if (static_cast<int>(vals.size()) != cols) throw Error("csv row has wrong column count");
        t.u.push_back(vals[0]);
        Vec y(cols - 1);
        for (int k = 1; k < cols; ++k) y(k - 1) = vals[static_cast<std::size_t>(k)];
        t.rows.push_back(std::move(y));
    }
    return t;
}

enum class PlotKind { Trajectory, HorizonVsEps, Convergence };

inline std::string to_string(PlotKind k) {
    switch (k) {
        case PlotKind::Trajectory: return "trajectory";
        case PlotKind::HorizonVsEps: return "horizon_vs_eps";
        case PlotKind::Convergence: return "convergence";
    }
    return "unknown";
}

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotOptions {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::optional<double> band_half_width;  ///< gray band over [-w, w] (trajectory plots)
    bool log_x = false;
    bool log_y = false;
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
    std::string o;
    for (char c : s) {
        switch (c) {
            case '&': o += "&amp;"; break;
            case '<': o += "&lt;"; break;
            case '>': o += "&gt;"; break;
            case '"': o += "&quot;"; break;
            default: o += c;
        }
    }
    return o;
}

inline std::string fmt(double v, int digits = 6) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, digits);
    return std::string(buf, res.ptr);
}

}  // namespace detail

/// Standalone SVG line chart. Non-finite points are dropped; an empty series set gives
/// axes only.
inline std::string plot_svg(const std::vector<Series>& series, PlotKind kind, const PlotOptions& opt = {}) {
    using detail::fmt;
    constexpr double W = 640, H = 420, L = 70, R = 20, T = 40, B = 50;
    static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};
    auto tx = [&](double v) { return opt.log_x ? std::log10(v) : v; };
    auto ty = [&](double v) { return opt.log_y ? std::log10(v) : v; };
    double x0 = kInf, x1 = -kInf, y0 = kInf, y1 = -kInf;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            const double a = tx(s.x[i]), b = ty(s.y[i]);
            if (!std::isfinite(a) || !std::isfinite(b)) continue;
            x0 = std::min(x0, a);
            x1 = std::max(x1, a);
            y0 = std::min(y0, b);
            y1 = std::max(y1, b);
        }
    }
    if (!(x0 <= x1)) {
        x0 = 0.0;
        x1 = 1.0;
    }
    if (!(y0 <= y1)) {
        y0 = 0.0;
        y1 = 1.0;
    }
    if (x1 - x0 == 0.0) {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if (y1 - y0 == 0.0) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    auto px = [&](double a) { return L + (a - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double b) { return H - B - (b - y0) / (y1 - y0) * (H - T - B); };

    std::ostringstream o;
    o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << ' ' << H << "\" data-kind=\"" << to_string(kind) << "\">\n";
    o << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    if (opt.band_half_width && kind == PlotKind::Trajectory) {
        const double w = *opt.band_half_width;
        const double a = std::clamp(px(-w), L, W - R), b = std::clamp(px(w), L, W - R);
        o << "<rect class=\"impulse-band\" x=\"" << fmt(a) << "\" y=\"" << T << "\" width=\""
          << fmt(std::max(b - a, 1.0)) << "\" height=\"" << H - T - B
          << "\" fill=\"#bbbbbb\" fill-opacity=\"0.6\"/>\n";
    }
    o << "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n";
    o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\"/>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\"/>\n";
    o << "</g>\n<g class=\"ticks\" font-family=\"sans-serif\" font-size=\"11\">\n";
    for (int k = 0; k <= 5; ++k) {
        const double a = x0 + (x1 - x0) * k / 5.0, b = y0 + (y1 - y0) * k / 5.0;
        const std::string la = opt.log_x ? "1e" + fmt(a, 3) : fmt(a, 4);
        const std::string lb = opt.log_y ? "1e" + fmt(b, 3) : fmt(b, 4);
        o << "<line x1=\"" << fmt(px(a)) << "\" y1=\"" << H - B << "\" x2=\"" << fmt(px(a)) << "\" y2=\""
          << H - B + 5 << "\" stroke=\"black\"/>\n";
        o << "<text x=\"" << fmt(px(a)) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << la
          << "</text>\n";
        o << "<line x1=\"" << L - 5 << "\" y1=\"" << fmt(py(b)) << "\" x2=\"" << L << "\" y2=\"" << fmt(py(b))
          << "\" stroke=\"black\"/>\n";
        o << "<text x=\"" << L - 8 << "\" y=\"" << fmt(py(b) + 4) << "\" text-anchor=\"end\">" << lb
          << "</text>\n";
    }
    o << "</g>\n";
    o << "<text x=\"" << W / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"13\">" << detail::xml_escape(opt.x_label) << "</text>\n";
    o << "<text x=\"16\" y=\"" << H / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
      << "transform=\"rotate(-90 16 " << H / 2 << ")\">" << detail::xml_escape(opt.y_label) << "</text>\n";
    o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"15\">" << detail::xml_escape(opt.title) << "</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const auto& ser = series[s];
        o << "<polyline class=\"series\" fill=\"none\" stroke=\"" << colours[s % 6]
          << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (std::size_t i = 0; i < std::min(ser.x.size(), ser.y.size()); ++i) {
            const double a = tx(ser.x[i]), b = ty(ser.y[i]);
            if (!std::isfinite(a) || !std::isfinite(b)) continue;
            if (!first) o << ' ';
            o << fmt(px(a)) << ',' << fmt(py(b));
            first = false;
        }
        o << "\"/>\n";
        o << "<text x=\"" << W - R - 4 << "\" y=\"" << T + 14 + 14 * s << "\" text-anchor=\"end\" "
          << "font-family=\"sans-serif\" font-size=\"11\" fill=\"" << colours[s % 6] << "\">"
          << detail::xml_escape(ser.name) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

inline void emit_plot_svg(const std::vector<Series>& series, const std::filesystem::path& path,
                          PlotKind kind, const PlotOptions& opt = {}) {
    write_file(path, plot_svg(series, kind, opt));
}

/// x-components against u, sampled densely so the pulse shows.
inline std::vector<Series> trajectory_series(const Trajectory& tr) {
    std::vector<Series> out;
    if (tr.empty()) return out;
    const int m = tr.dim();
    for (int k = 0; k < m; ++k) out.push_back({"x" + std::to_string(k + 1), {}, {}});
    for (std::size_t i = 0; i < tr.size(); ++i) {
        for (int k = 0; k < m; ++k) {
            out[static_cast<std::size_t>(k)].x.push_back(tr.param(i));
            out[static_cast<std::size_t>(k)].y.push_back(tr.state(i)(tr.x_offset() + k));
        }
    }
    return out;
}

/// Run record written next to every output set.
struct RunManifest {
    std::string config_hash;
    std::string version;
    std::string timestamp;
    std::string command;
    nlohmann::json config;
    std::vector<std::pair<std::string, std::uintmax_t>> files;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["config_hash"] = config_hash;
        j["version"] = version;
        j["timestamp"] = timestamp;
        j["command"] = command;
        j["config"] = config;
        j["files"] = nlohmann::json::array();
        for (const auto& [p, n] : files) j["files"].push_back({{"path", p}, {"bytes", n}});
        return j;
    }
};

inline std::string utc_timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace npw::io
