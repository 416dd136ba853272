#pragma once

#include "rkit/rkit.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rkit::cli {

struct Common {
    std::string builtin_name;
    std::string params;
    std::string manifold;
    std::string point;
    std::string out;
    std::string csv;
    std::string method = "rk4_fixed";
    std::uint64_t seed = 1;
    int jobs = 1;
    bool print_manifold = false;
    double step = 1e-3;
    double rtol = 1e-9;
    double atol = 1e-11;
};

struct Loaded {
    MetricChart chart;
    Json definition;
};

inline OdeSettings ode_settings(const Common& c) {
    OdeSettings s;
    if (c.method == "rk4_fixed")
        s.method = OdeMethod::Rk4Fixed;
    else if (c.method == "rkf45_adaptive")
        s.method = OdeMethod::Rkf45Adaptive;
    else
        throw Error(ErrorKind::BadParam, "unknown method '" + c.method + "'");
    s.step = c.step;
    s.rtol = c.rtol;
    s.atol = c.atol;
    s.validate();
    return s;
}

inline Loaded load_chart(const std::string& builtin_name, const std::string& params, const std::string& path) {
    if (!path.empty()) {
        auto lm = load_manifold(path);
        return {std::move(lm.chart), std::move(lm.definition)};
    }
    if (builtin_name.empty()) throw Error(ErrorKind::BadParam, "one of --builtin or --manifold is required");
    const ParamMap pm = parse_params(params);
    Json def;
    def["builtin"] = builtin_name;
    def["params"] = Json::object();
    for (const auto& [k, v] : pm) def["params"][k] = v;
    return {builtin(builtin_name, pm), def};
}

inline Vec point_or_origin(const Common& c, const MetricChart& chart) {
    if (c.point.empty()) return Vec::Zero(chart.dim);
    const Vec p = parse_vec(c.point);
    if (p.size() != chart.dim) throw Error(ErrorKind::BadDimension, "--point needs " + std::to_string(chart.dim) + " components");
    return p;
}

inline Vec vec_arg(const std::string& text, int n, const std::string& flag) {
    if (text.empty()) throw Error(ErrorKind::BadParam, flag + " is required");
    const Vec v = parse_vec(text);
    if (v.size() != n) throw Error(ErrorKind::BadDimension, flag + " needs " + std::to_string(n) + " components");
    return v;
}

inline Vec unit(const MetricChart& chart, const Vec& p, const Vec& v) {
    const double s = std::sqrt(v.dot(metric_value(chart, p) * v));
    if (!(s > 0.0)) throw Error(ErrorKind::BadParam, "velocity must be nonzero");
    return v / s;
}

inline CurvatureProfile expr_profile(const std::string& src) {
    const Expression e = Expression::parse(src, {"t"});
    return {[e](double t) { return e.eval(Vec::Constant(1, t)); }, src};
}

inline double parse_double(const std::string& s, const std::string& flag) {
    try {
        std::size_t used = 0;
        const double x = std::stod(s, &used);
        if (used == s.size()) return x;
    } catch (const std::logic_error&) {
    }
    throw Error(ErrorKind::BadParam, flag + " must be a number (inf allowed)");
}

inline void write_csv_file(const std::string& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
    body(f);
}

inline Json csv_ref(const std::string& path) { return path.empty() ? Json(nullptr) : Json(path); }

/// Resolved option values of the app and the chosen subcommand, in declaration order.
inline Json resolved_settings(const CLI::App& app, const CLI::App& sub) {
    Json s = Json::object();
    auto add = [&](const CLI::App& a) {
        for (const CLI::Option* o : a.get_options()) {
            const std::string name = o->get_name(false, true);
            if (!o->get_lnames().empty() && (o->get_lnames().front() == "help" || o->get_lnames().front() == "version"))
                continue;
            const std::string key = o->get_lnames().empty() ? name : o->get_lnames().front();
            if (o->get_expected_max() == 0) {
                s[key] = o->count() > 0;
                continue;
            }
            const std::string val = o->count() > 0 ? o->as<std::string>() : o->get_default_str();
            try {
                std::size_t used = 0;
                const double x = std::stod(val, &used);
                if (used == val.size() && std::isfinite(x)) {
                    if (x == std::floor(x) && std::abs(x) < 9e15)
                        s[key] = static_cast<long long>(x);
                    else
                        s[key] = x;
                    continue;
                }
            } catch (const std::logic_error&) {
            }
            s[key] = val;
        }
    };
    add(app);
    add(sub);
    return s;
}

// ---------------------------------------------------------------------------
// Subcommand bodies. Each fills `r` and may write a CSV.

struct Ctx {
    Common c;
    // per-command options
    std::string velocity, vector, target, curve, j0, j0p, field, H = "1", K = "0", f0 = "inf", g0 = "inf";
    std::string mode = "witness", kind = "driving", profile, builtin_n, params_n, manifold_n, berger;
    double tmax = 1.0, tmax_conj = 10.0, tmax_var = M_PI + 0.3, tmax_ric = 10.0, tmax_cmp = 3.0, tmax_sr = 50.0;
    double eps = 0.3, radius = 1.0, kref = 0.0, c_myers = 1.0, j0p_len = 1.0;
    double u0 = 0.0, theta0 = 0.0, phi0 = 0.0;
    int tries = 1, directions = 0, samples = 20;
    bool frame = false, taylor = false, expansion = false, along_geodesic = false, fixed_ends = false;
};

inline void cmd_curvature(Ctx& x, const Loaded& m, Json& r) {
    const MetricChart& chart = m.chart;
    const int n = chart.dim;
    const Vec p = point_or_origin(x.c, chart);
    const auto pg = point_geometry(chart, p, true);
    r["point"] = to_json(p);
    r["metric"] = to_json(pg.jet.g);
    if (n >= 2) {
        Mat K = Mat::Zero(n, n);
        const Mat I = Mat::Identity(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) K(i, j) = K(j, i) = sectional(pg.R.low, pg.jet.g, I.col(i), I.col(j));
        if (n == 2)
            r["sectional"] = num(K(0, 1));
        else
            r["sectional"] = to_json(K);
    }
    const RicciData rd = ricci(pg.R, pg.jet.g);
    r["ricci"] = to_json(rd.ric);
    r["scalar"] = num(rd.scalar);
    const SymmetryResiduals sr = check_symmetries(pg.R);
    r["symmetry_residuals"] = {{"skew", num(sr.r1)}, {"skew_adjoint", num(sr.r2)}, {"cyclic", num(sr.r3)},
                               {"pair", num(sr.r4)}};
    r["bianchi_residual"] = num(bianchi_residual(chart, p));
    if (n >= 3) {
        const WeylDecomposition w = weyl_decompose(pg.R.low, pg.jet.g);
        r["weyl"] = {{"weyl_norm", num(w.weyl_norm)}, {"traceless_ricci_norm", num(w.traceless_norm)},
                     {"scalar_norm", num(w.scalar_norm)}, {"reassembly", num(w.reassembly)}};
    }
    if (x.taylor) {
        const NormalTaylorReport t = normal_taylor_check(chart, p, std::nullopt, 0.05, ode_settings(x.c));
        Json tj = {{"max_deviation", num(t.max_deviation)}, {"christoffel_origin", num(t.christoffel_origin)},
                   {"log_roundtrip", num(t.log_roundtrip)}};
        if (n == 2) {
            tj["E_yy"] = num(t.E_yy);
            tj["K_fit"] = num(t.K_fit);
            tj["K_point"] = num(t.K_point);
        }
        r["normal_taylor"] = tj;
    }
}

inline void cmd_geodesic(Ctx& x, const Loaded& m, Json& r) {
    const Vec p = point_or_origin(x.c, m.chart);
    const Vec v = vec_arg(x.velocity, m.chart.dim, "--velocity");
    const Trajectory tr = integrate_geodesic(m.chart, p, v, x.tmax, ode_settings(x.c));
    r["samples"] = tr.size();
    r["endpoint"] = to_json(tr.x.back());
    r["end_velocity"] = to_json(tr.v.back());
    r["initial_speed"] = num(tr.initial_speed);
    r["length"] = num(tr.initial_speed * x.tmax);
    r["speed_drift"] = num(tr.speed_drift);
    r["frame_defect"] = num(tr.frame_defect);
    if (!x.c.csv.empty()) write_csv_file(x.c.csv, [&](std::ostream& os) { write_trajectory_csv(os, tr, x.frame); });
    r["trajectory_csv"] = csv_ref(x.c.csv);
}

inline void cmd_transport(Ctx& x, const Loaded& m, Json& r) {
    const MetricChart& chart = m.chart;
    const Vec w = vec_arg(x.vector, chart.dim, "--vector");
    Trajectory tr;
    if (!x.curve.empty()) {
        tr = trajectory_from_curve(chart, load_curve_csv(x.curve));
    } else {
        const Vec p = point_or_origin(x.c, chart);
        tr = integrate_geodesic(chart, p, vec_arg(x.velocity, chart.dim, "--velocity"), x.tmax, ode_settings(x.c));
    }
    const std::vector<Vec> ws = parallel_transport(chart, tr, w);
    std::vector<double> norms;
    for (std::size_t i = 0; i < ws.size(); ++i) norms.push_back(std::sqrt(ws[i].dot(metric_value(chart, tr.x[i]) * ws[i])));
    double drift = 0.0;
    for (double nn : norms) drift = std::max(drift, std::abs(nn - norms.front()));
    r["start"] = to_json(tr.x.front());
    r["end"] = to_json(tr.x.back());
    r["vector_start"] = to_json(ws.front());
    r["vector_end"] = to_json(ws.back());
    r["norm_drift"] = num(drift);
    if (!x.c.csv.empty()) {
        std::vector<std::string> names{"t"};
        std::vector<std::vector<double>> cols{tr.t};
        for (int i = 0; i < chart.dim; ++i) {
            names.push_back("w" + std::to_string(i + 1));
            std::vector<double> col;
            for (const Vec& wi : ws) col.push_back(wi(i));
            cols.push_back(col);
        }
        write_csv_file(x.c.csv, [&](std::ostream& os) { write_columns_csv(os, names, cols); });
    }
    r["transport_csv"] = csv_ref(x.c.csv);
}

inline void cmd_exp(Ctx& x, const Loaded& m, Json& r) {
    const Vec p = point_or_origin(x.c, m.chart);
    const Vec v = vec_arg(x.velocity, m.chart.dim, "--velocity");
    r["point"] = to_json(p);
    r["velocity"] = to_json(v);
    r["exp"] = to_json(exp_map(m.chart, p, v, ode_settings(x.c)));
}

inline void cmd_log(Ctx& x, const Loaded& m, Json& r) {
    const Vec p = point_or_origin(x.c, m.chart);
    const Vec q = vec_arg(x.target, m.chart.dim, "--target");
    r["point"] = to_json(p);
    r["target"] = to_json(q);
    if (x.tries <= 1) {
        const Mat E = orthonormalize(metric_value(m.chart, p), Mat::Identity(m.chart.dim, m.chart.dim));
        const LogResult lr = log_map(m.chart, p, E, q, ode_settings(x.c));
        r["normal_coordinates"] = to_json(lr.y);
        r["velocity"] = to_json(lr.v);
        r["distance_candidate"] = num(lr.y.norm());
        r["residual"] = num(lr.residual);
        r["iterations"] = lr.iterations;
    } else {
        const ShortestResult sr = shortest_geodesic(m.chart, p, q, x.tries, x.c.seed, ode_settings(x.c));
        r["normal_coordinates"] = to_json(sr.y);
        r["velocity"] = to_json(sr.trajectory.v.front());
        r["distance_candidate"] = num(sr.length);
        r["converged"] = sr.converged;
        r["tries"] = sr.tries;
        r["candidate_only"] = sr.candidate_only;
    }
}

inline void cmd_develop(Ctx& x, const Loaded& m, Json& r) {
    if (x.curve.empty()) throw Error(ErrorKind::BadParam, "--curve is required");
    const Development d = develop(m.chart, load_curve_csv(x.curve));
    r["samples"] = d.sigma.size();
    r["endpoint"] = to_json(d.sigma.points.back());
    if (!x.c.csv.empty()) {
        Trajectory tr;
        tr.dim = m.chart.dim;
        tr.t = d.sigma.t;
        tr.x = d.sigma.points;
        tr.v = d.sigma.velocities;
        write_csv_file(x.c.csv, [&](std::ostream& os) { write_trajectory_csv(os, tr, false); });
    }
    r["development_csv"] = csv_ref(x.c.csv);
}

inline void cmd_jacobi(Ctx& x, const Loaded& m, Json& r) {
    const MetricChart& chart = m.chart;
    const int n = chart.dim;
    const Vec p = point_or_origin(x.c, chart);
    const Vec v = vec_arg(x.velocity, n, "--velocity");
    const Vec J0 = x.j0.empty() ? Vec(Vec::Zero(n)) : vec_arg(x.j0, n, "--j0");
    const Vec J0p = vec_arg(x.j0p, n, "--j0p");
    const OdeSettings s = ode_settings(x.c);
    const Trajectory geo = integrate_geodesic(chart, p, v, x.tmax, s);
    const JacobiSolution js = jacobi_solve(chart, geo, J0, J0p);
    r["samples"] = js.t.size();
    r["J_end_frame"] = to_json(Vec(js.f.back().col(0)));
    r["Jp_end_frame"] = to_json(Vec(js.fp.back().col(0)));
    r["J_end_norm"] = num(js.f.back().col(0).norm());
    r["M_asymmetry"] = num(js.M_asymmetry);
    r["tangential_residual"] = num(js.tangential_residual);
    if (!x.c.csv.empty()) {
        std::vector<std::string> names{"t"};
        std::vector<std::vector<double>> cols{js.t};
        for (int i = 0; i < n; ++i) {
            names.push_back("J" + std::to_string(i + 1));
            std::vector<double> col;
            for (const Mat& f : js.f) col.push_back(f(i, 0));
            cols.push_back(col);
        }
        names.push_back("norm");
        std::vector<double> nc;
        for (const Mat& f : js.f) nc.push_back(f.col(0).norm());
        cols.push_back(nc);
        write_csv_file(x.c.csv, [&](std::ostream& os) { write_columns_csv(os, names, cols); });
    }
    r["jacobi_csv"] = csv_ref(x.c.csv);
}

inline void cmd_conjugate(Ctx& x, const Loaded& m, Json& r) {
    const Vec p = point_or_origin(x.c, m.chart);
    const Vec v = unit(m.chart, p, vec_arg(x.velocity, m.chart.dim, "--velocity"));
    const ConjugateReport cr = conjugate_points(m.chart, p, v, x.tmax_conj, ode_settings(x.c));
    r["geodesic"] = {{"point", to_json(p)}, {"unit_velocity", to_json(v)}, {"tmax", x.tmax_conj}};
    r["t_conjugate"] = to_json(cr.t_conjugate);
    r["multiplicities"] = cr.multiplicity;
    r["bracket_width"] = to_json(cr.bracket_width);
    if (!x.c.csv.empty())
        write_csv_file(x.c.csv, [&](std::ostream& os) {
            write_columns_csv(os, {"t", "det", "sigma_min"}, {cr.det_t, cr.det_samples, cr.sigma_min});
        });
    r["det_samples"] = csv_ref(x.c.csv);
}

inline void cmd_variation(Ctx& x, const Loaded& m, Json& r) {
    const MetricChart& chart = m.chart;
    const int n = chart.dim;
    const OdeSettings s = ode_settings(x.c);
    r["mode"] = x.mode;
    if (x.mode == "energy") {
        if (x.curve.empty()) throw Error(ErrorKind::BadParam, "--curve is required for mode energy");
        const SampledCurve c = load_curve_csv(x.curve);
        r["energy"] = num(energy(chart, c));
        r["length"] = num(curve_length(chart, c));
        return;
    }
    const Vec p = point_or_origin(x.c, chart);
    const Vec v = unit(chart, p, vec_arg(x.velocity, n, "--velocity"));
    const Trajectory geo = integrate_geodesic(chart, p, v, x.tmax_var, s);
    const double L = x.tmax_var;
    auto field_dir = [&] {
        if (x.field.empty()) {
            if (n < 2) throw Error(ErrorKind::BadParam, "--field is required in dimension 1");
            Vec e = Vec::Zero(n);
            e(1) = 1.0;
            return e;
        }
        return vec_arg(x.field, n, "--field");
    };
    if (x.mode == "first") {
        const Vec c = field_dir();
        RectangleSpec rect;
        rect.base = geo.curve();
        rect.end = x.fixed_ends ? EndCondition::FixedEnds : EndCondition::GeodesicTransversals;
        for (std::size_t i = 0; i < geo.size(); ++i) {
            const double w = x.fixed_ends ? std::sin(M_PI * geo.t[i] / L) : 1.0;
            rect.V.push_back(w * (geo.frame[i] * c));
        }
        const FirstVariation fv = first_variation(chart, rect);
        r["analytic"] = num(fv.analytic);
        r["fd"] = num(fv.fd);
        r["mismatch"] = num(fv.mismatch);
    } else if (x.mode == "index") {
        const Vec c = field_dir();
        const FrameField V = scaled_field([L](double t) { return std::sin(M_PI * t / L); },
                                          [L](double t) { return M_PI / L * std::cos(M_PI * t / L); }, c);
        r["field"] = "sin(pi s / L) E";
        r["index"] = num(index_form(chart, geo, V, V));
    } else if (x.mode == "basic") {
        const Vec c = field_dir();
        const FrameField V = scaled_field([L](double t) { return t / L; }, [L](double) { return 1.0 / L; }, c);
        const BasicInequality b = basic_inequality_check(chart, geo, V, s);
        r["field"] = "(s / L) E";
        r["IV"] = num(b.IV);
        r["IY"] = num(b.IY);
        r["gap"] = num(b.gap);
        r["IY_boundary"] = num(b.IY_boundary);
        r["lemma1_residual"] = num(b.lemma1_residual);
    } else if (x.mode == "witness") {
        const NonminimalityWitness w = nonminimality_witness(chart, geo, x.eps, s);
        r["s1"] = num(w.s1);
        r["s2"] = num(w.s2);
        r["L"] = num(w.L);
        r["index"] = num(w.index_value);
        r["index_boundary"] = num(w.index_boundary);
    } else {
        throw Error(ErrorKind::BadParam, "unknown variation mode '" + x.mode + "'");
    }
}

inline Json trace_json(const RiccatiTrace& tr) {
    Json j;
    j["f0"] = num(tr.f0);
    j["tmax"] = num(tr.tmax);
    j["poles"] = to_json(tr.poles);
    j["segments"] = tr.segments.size();
    return j;
}

inline void cmd_riccati(Ctx& x, const std::optional<Loaded>& m, Json& r) {
    const double f0 = parse_double(x.f0, "--f0");
    std::optional<Trajectory> geo;
    CurvatureProfile H;
    if (x.along_geodesic) {
        if (!m) throw Error(ErrorKind::BadParam, "--along-geodesic needs --builtin or --manifold");
        const Vec p = point_or_origin(x.c, m->chart);
        const Vec v = unit(m->chart, p, vec_arg(x.velocity, m->chart.dim, "--velocity"));
        geo = integrate_geodesic(m->chart, p, v, x.tmax_ric + 0.01, ode_settings(x.c));
        H = sectional_profile(m->chart, *geo);
    } else {
        H = expr_profile(x.H);
    }
    check_profile_continuity(H, x.tmax_ric);
    const RiccatiTrace tr = riccati_solve(H, f0, x.tmax_ric, x.c.step);
    r["profile"] = H.label;
    r["trace"] = trace_json(tr);
    if (!tr.poles.empty() && tr.poles.size() >= 2) r["pole_gap"] = num(tr.poles[1] - tr.poles[0]);
    if (!x.c.csv.empty()) write_csv_file(x.c.csv, [&](std::ostream& os) { write_riccati_csv(os, tr); });
    r["riccati_csv"] = csv_ref(x.c.csv);
}

inline void cmd_compare(Ctx& x, const std::optional<Loaded>& m, Json& r) {
    r["kind"] = x.kind;
    if (x.kind == "driving") {
        const DrivingComparison d = compare_driving(expr_profile(x.H), expr_profile(x.K), parse_double(x.f0, "--f0"), x.tmax_cmp);
        r["verified"] = d.verified;
        r["max_violation"] = num(d.max_violation);
        r["joint_end"] = num(d.joint_end);
        r["pole_order_ok"] = d.pole_order_ok;
        r["f"] = trace_json(d.f);
        r["g"] = trace_json(d.g);
        if (!x.c.csv.empty()) write_csv_file(x.c.csv, [&](std::ostream& os) { write_riccati_csv(os, d.f); });
        r["riccati_csv"] = csv_ref(x.c.csv);
    } else if (x.kind == "value") {
        const ValueComparison v =
            value_compare(expr_profile(x.H), parse_double(x.f0, "--f0"), parse_double(x.g0, "--g0"), x.tmax_cmp);
        r["verified"] = v.verified;
        r["max_violation"] = num(v.max_violation);
        r["joint_end"] = num(v.joint_end);
    } else if (x.kind == "sturm") {
        const SturmResult s = sturm_check(expr_profile(x.H), expr_profile(x.K), x.tmax_cmp);
        r["zero_j"] = s.zero_j ? num(*s.zero_j) : Json(nullptr);
        r["zero_k"] = s.zero_k ? num(*s.zero_k) : Json(nullptr);
        r["ordered"] = s.ordered;
    } else if (x.kind == "rauch") {
        if (!m) throw Error(ErrorKind::BadParam, "rauch needs the manifold M via --builtin or --manifold");
        const Loaded N = load_chart(x.builtin_n, x.params_n, x.manifold_n);
        const OdeSettings s = ode_settings(x.c);
        const Vec p = point_or_origin(x.c, m->chart);
        const Vec v = unit(m->chart, p, vec_arg(x.velocity, m->chart.dim, "--velocity"));
        const Vec pN = Vec::Zero(N.chart.dim);
        Vec vN = Vec::Zero(N.chart.dim);
        vN(0) = 1.0;
        vN = unit(N.chart, pN, vN);
        const Trajectory gM = integrate_geodesic(m->chart, p, v, x.tmax_cmp, s);
        const Trajectory gN = integrate_geodesic(N.chart, pN, vN, x.tmax_cmp, s);
        const RauchResult rr = rauch_ratio(m->chart, gM, N.chart, gN, x.j0p_len, x.tmax_cmp, s);
        r["N"] = N.definition;
        r["monotone"] = rr.monotone;
        r["max_decrease"] = num(rr.max_decrease);
        r["ratio_end"] = rr.ratio.empty() ? Json(nullptr) : num(rr.ratio.back());
        if (!x.c.csv.empty())
            write_csv_file(x.c.csv, [&](std::ostream& os) { write_columns_csv(os, {"t", "ratio"}, {rr.t, rr.ratio}); });
        r["ratio_csv"] = csv_ref(x.c.csv);
    } else if (x.kind == "myers") {
        if (!m) throw Error(ErrorKind::BadParam, "myers needs --builtin or --manifold");
        const Vec p = point_or_origin(x.c, m->chart);
        const Vec v = unit(m->chart, p, vec_arg(x.velocity, m->chart.dim, "--velocity"));
        const MyersResult my = myers_check(m->chart, p, v, x.c_myers, ode_settings(x.c));
        r["ric_min"] = num(my.ric_min);
        r["bound"] = num(my.bound);
        r["conjugate_distance"] = my.conjugate_distance ? num(*my.conjugate_distance) : Json(nullptr);
        r["satisfied"] = my.satisfied;
    } else {
        throw Error(ErrorKind::BadParam, "unknown comparison kind '" + x.kind + "'");
    }
}

inline void cmd_volume(Ctx& x, const Loaded& m, Json& r) {
    const Vec p = point_or_origin(x.c, m.chart);
    r["point"] = to_json(p);
    if (x.expansion) {
        const ExpansionFit f = scalar_expansion_fit(m.chart, p, x.directions, x.c.jobs);
        r["fitted"] = num(f.fitted);
        r["scalar"] = num(f.scalar);
        r["c_n"] = f.c_n ? num(*f.c_n) : Json(nullptr);
        r["radii"] = to_json(f.radii);
        r["coefficients"] = to_json(f.coefficients);
        return;
    }
    const VolumeReport v = volume_compare(m.chart, p, x.radius, x.kref, x.directions, x.c.jobs);
    r["r"] = num(v.r);
    r["Kref"] = num(v.Kref);
    r["area"] = num(v.area);
    r["reference"] = num(v.reference);
    r["ratio"] = num(v.ratio);
    r["ratio_ok"] = v.ratio_ok;
    r["pointwise_ok"] = v.pointwise_ok;
    r["pointwise_violations"] = v.pointwise_violations;
    r["ric_min"] = num(v.ric_min);
    if (!x.c.csv.empty()) {
        std::vector<double> idx;
        for (std::size_t i = 0; i < v.jacobian.size(); ++i) idx.push_back(static_cast<double>(i));
        write_csv_file(x.c.csv, [&](std::ostream& os) { write_columns_csv(os, {"direction", "det_J"}, {idx, v.jacobian}); });
    }
    r["jacobian_csv"] = csv_ref(x.c.csv);
}

inline void cmd_surfrev(Ctx& x, Json& r) {
    Profile p;
    if (!x.profile.empty()) {
        p = profile_from_json(load_json(x.profile));
    } else if (x.c.builtin_name == "torus") {
        const ParamMap pm = parse_params(x.c.params);
        p = torus_profile(detail::param(pm, "R", 2.0), detail::param(pm, "r", 1.0));
    } else {
        throw Error(ErrorKind::BadParam, "surfrev needs --profile or --builtin torus");
    }
    const Classification cl = classify_geodesic(p, x.u0, x.theta0, x.phi0, ode_settings(x.c));
    r["c"] = num(cl.c);
    Json bs = Json::array();
    for (const Barrier& b : cl.barriers) bs.push_back({{"u", num(b.u)}, {"tag", to_string(b.kind)}});
    r["barriers"] = bs;
    r["class"] = to_string(cl.tag);
    r["confirmed"] = cl.confirmed;
    r["u_visited"] = {num(cl.u_low), num(cl.u_high)};
    try {
        const DeltaTheta d = delta_theta(p, cl.c, x.u0);
        r["delta_theta"] = {{"value", num(d.value)}, {"u_minus", num(d.u_minus)}, {"u_plus", num(d.u_plus)},
                            {"per_period", d.per_period}, {"turns", num(d.turns)},
                            {"near_rational", d.near_rational}, {"p", d.p}, {"q", d.q}};
    } catch (const Error& e) {
        r["delta_theta"] = nullptr;
        r["delta_theta_error"] = error_json(e);
    }
    const MetricChart chart = surface_of_revolution(p);
    const Trajectory tr = integrate_geodesic(chart, to_vec({x.u0, x.theta0}), surfrev_velocity(p, x.u0, x.phi0),
                                             x.tmax_sr, ode_settings(x.c));
    r["clairaut_drift"] = num(clairaut_constant(chart, tr).drift);
    if (!x.c.csv.empty()) write_csv_file(x.c.csv, [&](std::ostream& os) { write_trajectory_csv(os, tr, false); });
    r["trajectory_csv"] = csv_ref(x.c.csv);
}

inline void cmd_check(Ctx& x, const Loaded& m, Json& r) {
    const MetricChart& chart = m.chart;
    const int n = chart.dim;
    Rng rng(x.c.seed);
    double sym = 0.0, bianchi = 0.0;
    int used = 0, attempts = 0;
    while (used < x.samples && attempts < 100 * x.samples) {
        ++attempts;
        const Vec q = rng.uniform_vec(n, -0.5, 0.5);
        if (!in_domain(chart, q)) continue;
        const SymmetryResiduals s = check_symmetries(curvature(chart, q));
        sym = std::max({sym, s.r1, s.r2, s.r3, s.r4});
        bianchi = std::max(bianchi, bianchi_residual(chart, q));
        ++used;
    }
    r["points"] = used;
    r["symmetry_residual"] = num(sym);
    r["bianchi_residual"] = num(bianchi);

    const Vec p = point_or_origin(x.c, chart);
    const FinslerNorm L = riemannian_norm(chart, p);
    const ParallelogramReport pr = parallelogram_check(L, 1000, x.c.seed);
    const Mat g = metric_value(chart, p);
    double pol = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const Mat I = Mat::Identity(n, n);
            pol = std::max(pol, std::abs(polarize(L, {p, I.col(i)}, {p, I.col(j)}) - g(i, j)));
        }
    r["parallelogram_violation"] = num(pr.max_violation);
    r["polarization_residual"] = num(pol);
    r["curvature_space_dim"] = curvature_space_dim(n);
    if (!x.berger.empty()) {
        const Vec abc = parse_vec(x.berger);
        if (abc.size() != 3) throw Error(ErrorKind::BadParam, "--berger needs a,b,c");
        const BergerCurvatures b = berger_curvatures(abc(0), abc(1), abc(2));
        r["berger"] = {{"K12", num(b.K12)}, {"K23", num(b.K23)}, {"K31", num(b.K31)},
                       {"cross_check", num(b.cross_check)}, {"discrepancy", b.cross_check > 1e-12}};
    }
}

// ---------------------------------------------------------------------------

/// Runs one invocation. Returns 0 on success, 1 on engine error, 2 on usage error.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Riemannian geometry engine: geodesics, curvature, Jacobi fields and comparison checks", "rkit"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1, 1);
    app.fallthrough();
    app.set_version_flag("--version", std::string(kVersion));

    Ctx x;
    Common& c = x.c;
    auto* src = app.add_option("--builtin", c.builtin_name, "builtin chart: euclidean, sphere_stereo, hyperbolic_ball, torus");
    app.add_option("--param", c.params, "builtin parameters, e.g. n=2,R=1");
    app.add_option("--manifold", c.manifold, "manifold definition JSON file")->excludes(src);
    app.add_option("--point", c.point, "base point x1,...,xn (default: chart origin)");
    app.add_option("--seed", c.seed, "seed for sampled quantities");
    app.add_option("--out", c.out, "write the JSON report here instead of stdout");
    app.add_option("--csv", c.csv, "write the command's CSV table here");
    app.add_option("--jobs", c.jobs, "worker threads for direction sweeps")->check(CLI::PositiveNumber);
    app.add_flag("--print-manifold", c.print_manifold, "echo the parsed manifold definition in the report");
    app.add_option("--step", c.step, "ODE step (fixed RK4) or initial step (adaptive)");
    app.add_option("--method", c.method, "ODE method")->check(CLI::IsMember({"rk4_fixed", "rkf45_adaptive"}));
    app.add_option("--rtol", c.rtol, "adaptive relative tolerance");
    app.add_option("--atol", c.atol, "adaptive absolute tolerance");

    auto* curv = app.add_subcommand("curvature", "metric, sectional, Ricci and scalar curvature at a point");
    curv->add_flag("--taylor", x.taylor, "also fit the metric in normal coordinates");

    auto* geod = app.add_subcommand("geodesic", "integrate a geodesic with a parallel frame");
    geod->add_option("--velocity", x.velocity, "initial velocity")->required();
    geod->add_option("--tmax", x.tmax, "parameter length");
    geod->add_flag("--frame", x.frame, "include frame columns in the CSV");

    auto* trans = app.add_subcommand("transport", "parallel transport along a geodesic or a sampled curve");
    trans->add_option("--vector", x.vector, "vector to transport")->required();
    trans->add_option("--velocity", x.velocity, "geodesic initial velocity");
    trans->add_option("--curve", x.curve, "curve CSV t,x1..xn[,v1..vn] instead of a geodesic");
    trans->add_option("--tmax", x.tmax, "parameter length");

    auto* expc = app.add_subcommand("exp", "exponential map");
    expc->add_option("--velocity", x.velocity, "tangent vector")->required();

    auto* logc = app.add_subcommand("log", "inverse exponential map by shooting");
    logc->add_option("--target", x.target, "target point")->required();
    logc->add_option("--tries", x.tries, "random restarts; above 1 keeps the shortest geodesic found");

    auto* dev = app.add_subcommand("develop", "development of a sampled curve into the tangent space");
    dev->add_option("--curve", x.curve, "curve CSV t,x1..xn[,v1..vn]")->required();

    auto* jac = app.add_subcommand("jacobi", "Jacobi field along a geodesic (frame components)");
    jac->add_option("--velocity", x.velocity, "geodesic initial velocity")->required();
    jac->add_option("--tmax", x.tmax, "parameter length");
    jac->add_option("--j0", x.j0, "J(0) in coordinates (default 0)");
    jac->add_option("--j0p", x.j0p, "J'(0) in coordinates")->required();

    auto* conj = app.add_subcommand("conjugate", "conjugate points along a geodesic");
    conj->add_option("--velocity", x.velocity, "initial direction (normalized)")->required();
    conj->add_option("--tmax", x.tmax_conj, "arclength searched");

    auto* var = app.add_subcommand("variation", "energy, first variation, index form and minimality");
    var->add_option("--mode", x.mode, "energy | first | index | basic | witness")
        ->check(CLI::IsMember({"energy", "first", "index", "basic", "witness"}));
    var->add_option("--curve", x.curve, "curve CSV for mode energy");
    var->add_option("--velocity", x.velocity, "geodesic direction (normalized)");
    var->add_option("--tmax", x.tmax_var, "geodesic length");
    var->add_option("--field", x.field, "field direction in the parallel frame (default E_2)");
    var->add_option("--eps", x.eps, "witness corner offset before the conjugate point");
    var->add_flag("--fixed-ends", x.fixed_ends, "mode first: taper the field to vanish at the ends");

    auto* ric = app.add_subcommand("riccati", "scalar Riccati equation f' = -f^2 - H");
    ric->add_option("--H", x.H, "driving function of t");
    ric->add_option("--f0", x.f0, "f(0+), inf allowed");
    ric->add_option("--tmax", x.tmax_ric, "end time");
    ric->add_flag("--along-geodesic", x.along_geodesic, "drive with the sectional curvature along a geodesic");
    ric->add_option("--velocity", x.velocity, "geodesic direction for --along-geodesic");

    auto* cmp = app.add_subcommand("compare", "Riccati, Sturm, Rauch and Myers comparisons");
    cmp->add_option("--kind", x.kind, "driving | value | sturm | rauch | myers")
        ->check(CLI::IsMember({"driving", "value", "sturm", "rauch", "myers"}));
    cmp->add_option("--H", x.H, "larger driving function of t");
    cmp->add_option("--K", x.K, "smaller driving function of t");
    cmp->add_option("--f0", x.f0, "f(0+), inf allowed");
    cmp->add_option("--g0", x.g0, "g(0+) for kind value");
    cmp->add_option("--tmax", x.tmax_cmp, "end time");
    cmp->add_option("--velocity", x.velocity, "geodesic direction on M (rauch, myers)");
    cmp->add_option("--builtin-n", x.builtin_n, "comparison manifold N (rauch)");
    cmp->add_option("--param-n", x.params_n, "parameters of N");
    cmp->add_option("--manifold-n", x.manifold_n, "comparison manifold N from JSON");
    cmp->add_option("--j0p-len", x.j0p_len, "|J'(0)| for rauch");
    cmp->add_option("--c", x.c_myers, "Ricci lower bound c for myers");

    auto* vol = app.add_subcommand("volume", "geodesic sphere area against a constant-curvature model");
    vol->add_option("--radius", x.radius, "geodesic radius");
    vol->add_option("--kref", x.kref, "reference curvature");
    vol->add_option("--directions", x.directions, "direction samples (0: 512 for n = 2, 2048 for n = 3)");
    vol->add_flag("--expansion", x.expansion, "fit the r^2 area deficit instead");

    auto* sr = app.add_subcommand("surfrev", "Clairaut analysis on a surface of revolution");
    sr->add_option("--profile", x.profile, "profile JSON {f, h, u_range, arclength, periodic}");
    sr->add_option("--u0", x.u0, "start u");
    sr->add_option("--theta0", x.theta0, "start theta");
    sr->add_option("--phi0", x.phi0, "angle from the meridian");
    sr->add_option("--tmax", x.tmax_sr, "length integrated for the Clairaut drift");

    auto* chk = app.add_subcommand("check", "identity residuals, Finsler checks and Berger curvatures");
    chk->add_option("--samples", x.samples, "seeded points for the curvature identities");
    chk->add_option("--berger", x.berger, "a,b,c lengths for the left-invariant metric on S^3");

    std::vector<std::string> argv_store{"rkit"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : argv_store) argv.push_back(s.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    const std::string cmd = sub->get_name();
    Json rep = report_header(kVersion, cmd, c.seed, resolved_settings(app, *sub));
    int code = 0;
    try {
        std::optional<Loaded> m;
        const bool optional_chart = cmd == "riccati" || cmd == "compare" || cmd == "surfrev";
        if (!(optional_chart && c.builtin_name.empty() && c.manifold.empty()) &&
            !(cmd == "surfrev" && c.builtin_name == "torus"))
            m = load_chart(c.builtin_name, c.params, c.manifold);
        if (m) {
            rep["chart"] = m->chart.label;
            rep["dim"] = m->chart.dim;
            if (c.print_manifold) rep["manifold"] = m->definition;
        }
        Json result = Json::object();
        if (cmd == "curvature") cmd_curvature(x, *m, result);
        else if (cmd == "geodesic") cmd_geodesic(x, *m, result);
        else if (cmd == "transport") cmd_transport(x, *m, result);
        else if (cmd == "exp") cmd_exp(x, *m, result);
        else if (cmd == "log") cmd_log(x, *m, result);
        else if (cmd == "develop") cmd_develop(x, *m, result);
        else if (cmd == "jacobi") cmd_jacobi(x, *m, result);
        else if (cmd == "conjugate") cmd_conjugate(x, *m, result);
        else if (cmd == "variation") cmd_variation(x, *m, result);
        else if (cmd == "riccati") cmd_riccati(x, m, result);
        else if (cmd == "compare") cmd_compare(x, m, result);
        else if (cmd == "volume") cmd_volume(x, *m, result);
        else if (cmd == "surfrev") cmd_surfrev(x, result);
        else if (cmd == "check") cmd_check(x, *m, result);
        rep["result"] = result;
    } catch (const std::exception& e) {
        rep["error"] = error_json(e);
        err << "error: " << e.what() << '\n';
        code = 1;
    }

    const std::string text = rep.dump(2) + "\n";
    if (c.out.empty()) {
        out << text;
    } else {
        std::ofstream f(c.out, std::ios::binary);
        if (!f) {
            err << "error: cannot write '" << c.out << "'\n";
            return 1;
        }
        f << text;
    }
    return code;
}

}  // namespace rkit::cli
