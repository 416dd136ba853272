#pragma once

#include "rkit/comparison.hpp"
#include "rkit/error.hpp"
#include "rkit/manifold.hpp"
#include "rkit/surfrev.hpp"
#include "rkit/transport.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace rkit {

using Json = nlohmann::ordered_json;

inline constexpr const char* kSchema = "riemann-kit/1";

// ---------------------------------------------------------------------------
// Small parsers for flag values.

/// "n=2,R=1" -> {n: 2, R: 1}
inline ParamMap parse_params(const std::string& text) {
    ParamMap out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0)
            throw Error(ErrorKind::BadParam, "parameter '" + item + "' is not of the form key=value");
        try {
            std::size_t used = 0;
            const std::string val = item.substr(eq + 1);
            out[item.substr(0, eq)] = std::stod(val, &used);
            if (used != val.size()) throw std::invalid_argument(val);
        } catch (const std::logic_error&) {
            throw Error(ErrorKind::BadParam, "parameter '" + item + "' has a non-numeric value");
        }
    }
    return out;
}

/// "0.3,0.1" -> Vec
inline Vec parse_vec(const std::string& text) {
    std::vector<double> xs;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            xs.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::logic_error&) {
            throw Error(ErrorKind::BadParam, "'" + text + "' is not a comma-separated list of numbers");
        }
    }
    if (xs.empty() || static_cast<int>(xs.size()) > kMaxDim)
        throw Error(ErrorKind::BadParam, "'" + text + "' must hold 1 to " + std::to_string(kMaxDim) + " numbers");
    return to_vec(xs);
}

// ---------------------------------------------------------------------------
// JSON documents.

namespace detail {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// 1-based line and column of a byte offset.
inline std::pair<int, int> line_col(const std::string& text, std::size_t offset) {
    int line = 1, col = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

/// Re-raises an expression parse error with the JSON field it came from. Line and
/// column stay relative to the expression text.
template <typename F>
auto with_field(const std::string& field, F&& fn) {
    try {
        return fn();
    } catch (const ParseError& e) {
        throw ParseError(e.line(), e.column(), e.expected(), field + ": " + e.message());
    }
}

inline std::string expr_source(const Json& j, const std::string& where) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number()) return fmt17(j.get<double>());
    throw Error(ErrorKind::BadParam, where + " must be an expression string or a number");
}

}  // namespace detail

inline Json parse_json_text(const std::string& text) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
        const auto [line, col] = detail::line_col(text, at);
        throw ParseError(line, col, {}, "malformed JSON");
    }
}

inline Json load_json(const std::string& path) { return parse_json_text(detail::read_file(path)); }

/// {"builtin": name, "params": {...}} or {"label", "dim", "coords", "metric", "domain"?}.
inline MetricChart chart_from_json(const Json& j) {
    if (!j.is_object()) throw Error(ErrorKind::BadParam, "manifold definition must be a JSON object");
    if (j.contains("builtin")) {
        ParamMap params;
        if (j.contains("params")) {
            if (!j["params"].is_object()) throw Error(ErrorKind::BadParam, "'params' must be an object");
            for (const auto& [k, v] : j["params"].items()) {
                if (!v.is_number()) throw Error(ErrorKind::BadParam, "parameter '" + k + "' must be a number");
                params[k] = v.get<double>();
            }
        }
        return builtin(j["builtin"].get<std::string>(), params);
    }
    for (const char* key : {"coords", "metric"})
        if (!j.contains(key)) throw Error(ErrorKind::BadParam, std::string("manifold definition lacks '") + key + "'");
    const auto coords = j["coords"].get<std::vector<std::string>>();
    if (j.contains("dim") && j["dim"].get<int>() != static_cast<int>(coords.size()))
        throw Error(ErrorKind::BadDimension, "'dim' does not match the number of coordinates");
    const int n = static_cast<int>(coords.size());
    if (!j["metric"].is_array() || static_cast<int>(j["metric"].size()) != n)
        throw Error(ErrorKind::BadParam, "metric must have " + std::to_string(n) + " rows");
    std::vector<std::vector<std::string>> metric;
    for (const auto& row : j["metric"]) {
        if (!row.is_array() || static_cast<int>(row.size()) != n)
            throw Error(ErrorKind::BadParam, "metric row must have " + std::to_string(n) + " entries");
        std::vector<std::string> r;
        for (const auto& e : row) r.push_back(detail::expr_source(e, "metric entry"));
        metric.push_back(std::move(r));
    }
    // parse each entry once up front so a failure names its field
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const std::string field = "metric[" + std::to_string(a) + "][" + std::to_string(b) + "]";
            detail::with_field(field, [&] { return Expression::parse(metric[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)], coords); });
        }
    std::optional<std::string> domain;
    if (j.contains("domain") && !j["domain"].is_null()) {
        domain = detail::expr_source(j["domain"], "domain");
        detail::with_field("domain", [&] { return Expression::parse(*domain, coords); });
    }
    return make_chart(j.value("label", std::string("chart")), coords, metric, domain);
}

struct LoadedManifold {
    MetricChart chart;
    Json definition;  // the document as parsed, echoed under --print-manifold
};

inline LoadedManifold load_manifold(const std::string& path) {
    Json def = load_json(path);
    MetricChart chart = chart_from_json(def);
    return {std::move(chart), std::move(def)};
}

/// {"f": expr in u, "h": expr in u, "u_range": [a, b], "arclength": bool, "periodic": bool?}
inline Profile profile_from_json(const Json& j) {
    for (const char* key : {"f", "h", "u_range"})
        if (!j.contains(key)) throw Error(ErrorKind::BadProfile, std::string("profile lacks '") + key + "'");
    const auto range = j["u_range"].get<std::vector<double>>();
    if (range.size() != 2) throw Error(ErrorKind::BadProfile, "u_range must be [a, b]");
    const std::string f = detail::expr_source(j["f"], "f"), h = detail::expr_source(j["h"], "h");
    detail::with_field("f", [&] { return Expression::parse(f, {"u"}); });
    detail::with_field("h", [&] { return Expression::parse(h, {"u"}); });
    return make_profile(f, h, range[0], range[1], j.value("arclength", false), j.value("periodic", false));
}

inline Json chart_to_json(const MetricChart& chart) {
    Json j;
    j["label"] = chart.label;
    j["dim"] = chart.dim;
    j["coords"] = chart.coords;
    Json rows = Json::array();
    for (int i = 0; i < chart.dim; ++i) {
        Json row = Json::array();
        for (int k = 0; k < chart.dim; ++k) row.push_back(chart.entry(i, k).print());
        rows.push_back(row);
    }
    j["metric"] = rows;
    j["domain"] = chart.domain ? Json(chart.domain->print()) : Json(nullptr);
    return j;
}

// ---------------------------------------------------------------------------
// Report values. Non-finite doubles have no JSON form; they are written as strings.

inline Json num(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return "nan";
    return x > 0 ? "inf" : "-inf";
}

inline Json to_json(const Vec& v) {
    Json a = Json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
    return a;
}

inline Json to_json(const Mat& m) {
    Json a = Json::array();
    for (int i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (int k = 0; k < m.cols(); ++k) row.push_back(num(m(i, k)));
        a.push_back(row);
    }
    return a;
}

inline Json to_json(const std::vector<double>& xs) {
    Json a = Json::array();
    for (double x : xs) a.push_back(num(x));
    return a;
}

inline Json to_json(const OdeSettings& s) {
    return Json{{"method", to_string(s.method)}, {"step", s.step}, {"rtol", s.rtol}, {"atol", s.atol},
                {"max_steps", s.max_steps}};
}

inline Json report_header(const std::string& version, const std::string& command, std::uint64_t seed,
                          const Json& settings) {
    Json j;
    j["schema"] = kSchema;
    j["version"] = version;
    j["command"] = command;
    j["seed"] = seed;
    j["settings"] = settings;
    return j;
}

inline Json error_json(const std::exception& e) {
    Json j;
    const auto* err = dynamic_cast<const Error*>(&e);
    j["kind"] = err ? to_string(err->kind()) : "Internal";
    j["message"] = e.what();
    if (const auto* pe = dynamic_cast<const ParseError*>(&e)) {
        j["line"] = pe->line();
        j["col"] = pe->column();
        if (!pe->expected().empty()) j["expected"] = pe->expected();
    }
    if (const auto* de = dynamic_cast<const DomainExit*>(&e)) j["t_exit"] = num(de->t_exit());
    if (const auto* nc = dynamic_cast<const NoConvergence*>(&e)) j["best_residual"] = num(nc->best_residual());
    return j;
}

// ---------------------------------------------------------------------------
// CSV, 17 significant digits. Columns in the curve reader count cells, not characters.

namespace detail {

inline void csv_row(std::ostream& os, const std::vector<double>& xs) {
    for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? "," : "") << fmt17(xs[i]);
    os << '\n';
}

}  // namespace detail

/// t,x1..xn,v1..vn[,e11,e21,...] with the frame column-major (E_1 first).
inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr, bool frame = false) {
    const int n = tr.dim;
    os << "t";
    for (int i = 1; i <= n; ++i) os << ",x" << i;
    for (int i = 1; i <= n; ++i) os << ",v" << i;
    const bool with_frame = frame && !tr.frame.empty();
    if (with_frame)
        for (int j = 1; j <= n; ++j)
            for (int i = 1; i <= n; ++i) os << ",e" << j << "_" << i;
    os << '\n';
    for (std::size_t k = 0; k < tr.size(); ++k) {
        std::vector<double> row{tr.t[k]};
        for (int i = 0; i < n; ++i) row.push_back(tr.x[k](i));
        for (int i = 0; i < n; ++i) row.push_back(tr.v[k](i));
        if (with_frame)
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i) row.push_back(tr.frame[k](i, j));
        detail::csv_row(os, row);
    }
}

inline void write_riccati_csv(std::ostream& os, const RiccatiTrace& tr) {
    os << "t,f,segment_id\n";
    for (const auto& [t, f, seg] : tr.rows()) os << fmt17(t) << ',' << fmt17(f) << ',' << seg << '\n';
}

/// Generic columns: header names plus equally long value columns.
inline void write_columns_csv(std::ostream& os, const std::vector<std::string>& names,
                              const std::vector<std::vector<double>>& cols) {
    for (std::size_t i = 0; i < names.size(); ++i) os << (i ? "," : "") << names[i];
    os << '\n';
    const std::size_t rows = cols.empty() ? 0 : cols.front().size();
    for (std::size_t r = 0; r < rows; ++r) {
        std::vector<double> row;
        for (const auto& c : cols) row.push_back(c[r]);
        detail::csv_row(os, row);
    }
}

/// Reads `t,x1..xn[,v1..vn]`. Velocity columns are used when present.
inline SampledCurve load_curve_csv(const std::string& path) {
    std::stringstream in(detail::read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::Io, "'" + path + "' is empty");
    std::vector<std::string> head;
    {
        std::stringstream hs(line);
        std::string h;
        while (std::getline(hs, h, ',')) head.push_back(h);
    }
    int nx = 0, nv = 0;
    for (const auto& h : head) {
        if (!h.empty() && h[0] == 'x') ++nx;
        if (!h.empty() && h[0] == 'v') ++nv;
    }
    if (head.empty() || head[0] != "t" || nx < 1 || (nv != 0 && nv != nx) ||
        static_cast<int>(head.size()) != 1 + nx + nv)
        throw Error(ErrorKind::BadParam, "curve CSV header must be t,x1..xn[,v1..vn]");
    SampledCurve c;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> xs;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                xs.push_back(std::stod(cell));
            } catch (const std::logic_error&) {
                throw ParseError(lineno, static_cast<int>(xs.size()) + 1, {"number"}, "bad CSV cell '" + cell + "'");
            }
        }
        if (xs.size() != head.size())
            throw Error(ErrorKind::BadParam, "CSV line " + std::to_string(lineno) + " has the wrong number of cells");
        c.t.push_back(xs[0]);
        c.points.push_back(to_vec({xs.begin() + 1, xs.begin() + 1 + nx}));
        if (nv) c.velocities.push_back(to_vec({xs.begin() + 1 + nx, xs.end()}));
    }
    return c;
}

}  // namespace rkit
