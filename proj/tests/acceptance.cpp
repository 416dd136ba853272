// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "rkit/rkit.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

using namespace rkit;

namespace {

struct Verdict {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... xs) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, xs...);
    return buf;
}

Vec pt(std::initializer_list<double> xs) { return to_vec(std::vector<double>(xs)); }

MetricChart sphere(int n) { return builtin("sphere_stereo", {{"n", static_cast<double>(n)}, {"R", 1}}); }
MetricChart hyper(int n) { return builtin("hyperbolic_ball", {{"n", static_cast<double>(n)}}); }
MetricChart flat(int n) { return builtin("euclidean", {{"n", static_cast<double>(n)}}); }
MetricChart torus21() { return builtin("torus", {{"R", 2}, {"r", 1}}); }

Vec unit(const MetricChart& c, const Vec& p, const Vec& v) { return v / std::sqrt(v.dot(metric_value(c, p) * v)); }

Vec random_point(const MetricChart& c, Rng& rng, double box) {
    for (;;) {
        const Vec p = rng.uniform_vec(c.dim, -box, box);
        if (in_domain(c, p)) return p;
    }
}

Trajectory sphere_geo(double L, int n = 2) {
    const auto s = sphere(n);
    const Vec p = n == 2 ? pt({0.3, 0.2}) : pt({0.3, 0.2, 0.1});
    const Vec v = n == 2 ? pt({0.2, 1.0}) : pt({0.2, 1.0, -0.3});
    return integrate_geodesic(s, p, unit(s, p, v), L);
}

FrameField scalar_field(std::function<double(double)> f, std::function<double(double)> df, int n = 2) {
    Vec e = Vec::Zero(n);
    e(1) = 1.0;
    return scaled_field(std::move(f), std::move(df), e);
}

// ---------------------------------------------------------------------------

Verdict constant_curvature() {
    Rng rng(1);
    double worst = 0.0;
    for (const auto& [c, K, box] : {std::tuple{sphere(2), 1.0, 3.0}, std::tuple{hyper(2), -1.0, 0.95}}) {
        for (int s = 0; s < 50; ++s) {
            const Vec p = random_point(c, rng, box);
            const double k = sectional(curvature(c, p).low, metric_value(c, p), pt({1, 0}), pt({0, 1}));
            worst = std::max(worst, std::abs(k - K));
        }
    }
    return {worst <= 1e-8, fmt("max |K - K_model| = %.3g over 2 x 50 points", worst)};
}

Verdict conjugate_point() {
    const auto s = sphere(2);
    const Vec p = pt({0.3, 0.2});
    const auto rep = conjugate_points(s, p, unit(s, p, pt({0.2, 1.0})), 4.0);
    const double first = rep.t_conjugate.empty() ? NAN : rep.t_conjugate.front();
    std::size_t none = 0;
    for (const auto& c : {hyper(2), flat(2), hyper(3), flat(3)}) {
        const Vec q = Vec::Constant(c.dim, 0.1);
        Vec v = Vec::Ones(c.dim);
        v(0) = 0.3;
        none += conjugate_points(c, q, unit(c, q, v), 10.0).t_conjugate.empty() ? 1 : 0;
    }
    return {std::abs(first - M_PI) <= 1e-4 && none == 4,
            fmt("sphere first conjugate %.10f (|err| %.2g); %zu/4 nonpositive charts report none to t = 10", first,
                std::abs(first - M_PI), none)};
}

Verdict jacobi_accuracy() {
    const auto s = sphere(2);
    const Trajectory geo = sphere_geo(M_PI);
    const JacobiSolution js = jacobi_solve(s, geo, Vec::Zero(2), geo.frame.front().col(1));
    double es = 0.0;
    for (std::size_t i = 0; i < js.t.size(); ++i) es = std::max(es, std::abs(js.f[i](1, 0) - std::sin(js.t[i])));
    const auto h = hyper(2);
    const Vec p = Vec::Zero(2);
    const Trajectory gh = integrate_geodesic(h, p, unit(h, p, pt({1, 0.4})), 5.0);
    const JacobiSolution jh = jacobi_solve(h, gh, Vec::Zero(2), gh.frame.front().col(1));
    double eh = 0.0;
    for (std::size_t i = 1; i < jh.t.size(); ++i) eh = std::max(eh, std::abs(jh.f[i](1, 0) / std::sinh(jh.t[i]) - 1.0));
    return {es <= 1e-6 && eh <= 1e-5, fmt("sphere max |J - sin t| = %.3g; hyperbolic max rel err vs sinh t = %.3g", es, eh)};
}

Verdict riemann_expansion() {
    const auto rep = normal_taylor_check(sphere(2), pt({0.3, -0.2}));
    const double K = -1.5 * rep.E_yy;
    return {std::abs(K - 1.0) <= 1e-3 && rep.christoffel_origin <= 1e-6,
            fmt("E_yy = %.8f so K = -3E_yy/2 = %.8f; max |Christoffel(0)| = %.3g", rep.E_yy, K, rep.christoffel_origin)};
}

Verdict symmetries() {
    Rng rng(5);
    double sym = 0.0, bianchi = 0.0;
    const std::vector<MetricChart> charts = {flat(3), sphere(2), sphere(3), hyper(2), hyper(3), torus21()};
    for (const auto& c : charts)
        for (int s = 0; s < 20; ++s) {
            const Vec p = random_point(c, rng, c.domain ? 0.9 : 2.0);
            const auto r = check_symmetries(curvature(c, p));
            sym = std::max({sym, r.r1, r.r2, r.r3, r.r4});
            bianchi = std::max(bianchi, bianchi_residual(c, p));
        }
    return {sym <= 1e-8 && bianchi <= 1e-5,
            fmt("max identity residual %.3g, max Bianchi residual %.3g over %zu charts x 20 points", sym, bianchi,
                charts.size())};
}

Verdict weyl() {
    Rng rng(34);
    double contraction = 0.0, w3 = 0.0;
    for (int n : {3, 4}) {
        const Mat g = Mat::Identity(n, n);
        for (int s = 0; s < 100; ++s) {
            Mat A(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = i; j < n; ++j) A(i, j) = A(j, i) = rng.uniform(-1, 1);
            const Mat lhs = ricci_contraction(wedge_sym(A, g), g);
            contraction = std::max(contraction, (lhs - ((n - 2) * A + A.trace() * g)).cwiseAbs().maxCoeff());
        }
    }
    for (int s = 0; s < 50; ++s) {
        Mat B(3, 3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) B(i, j) = rng.uniform(-1, 1);
        const Mat g = B * B.transpose() + Mat::Identity(3, 3);
        Tensor4 T(3);
        for (double& x : T.data()) x = rng.uniform(-1, 1);
        w3 = std::max(w3, weyl_decompose(project_curvature_type(T, true), g).weyl.max_abs());
    }
    const auto t = sphere(3);
    const Vec p = pt({0.2, 0.4, 0.1});
    w3 = std::max(w3, weyl_decompose(curvature(t, p).low, metric_value(t, p)).weyl.max_abs());
    const bool dims = curvature_space_dim(2) == 1 && curvature_space_dim(3) == 6 && curvature_space_dim(4) == 20;
    return {contraction <= 1e-10 && w3 <= 1e-10 && dims,
            fmt("contraction identity residual %.3g; max n = 3 Weyl part %.3g; dims %lld, %lld, %lld", contraction, w3,
                curvature_space_dim(2), curvature_space_dim(3), curvature_space_dim(4))};
}

Verdict riccati() {
    const auto tr = riccati_solve(constant_profile(1), std::numeric_limits<double>::infinity(), 10.0);
    const double gap = tr.poles.size() >= 2 ? tr.poles[1] - tr.poles[0] : NAN;
    double err = 0.0;
    for (const auto& [t, f, seg] : tr.rows()) {
        const double d = std::abs(t - M_PI * std::round(t / M_PI));
        if (d >= 0.1) err = std::max(err, std::abs(f - 1.0 / std::tan(t)));
    }
    const auto st = sturm_check(constant_profile(1), constant_profile(0.25), 7.0);
    const bool zeros = st.zero_j && st.zero_k && std::abs(*st.zero_j - M_PI) <= 1e-4 &&
                       std::abs(*st.zero_k - 2 * M_PI) <= 1e-4;
    return {std::abs(gap - M_PI) <= 1e-4 && err <= 1e-6 && st.ordered && zeros,
            fmt("pole gap %.10f; max |f - cot t| %.3g at distance >= 0.1 from poles; Sturm zeros %.8f <= %.8f", gap, err,
                st.zero_j.value_or(NAN), st.zero_k.value_or(NAN))};
}

Verdict rauch() {
    const auto e = flat(2), s = sphere(2);
    const double T = M_PI - 0.05;
    const Vec pe = pt({0.1, 0.2}), ps = pt({0.3, 0.2});
    const auto gM = integrate_geodesic(e, pe, unit(e, pe, pt({1, 0.3})), T);
    const auto gN = integrate_geodesic(s, ps, unit(s, ps, pt({0.2, 1.0})), T);
    const auto r = rauch_ratio(e, gM, s, gN, 1.0, T);
    double model = 0.0;
    for (std::size_t i = 0; i < r.t.size(); ++i) {
        const double t = r.t[i];
        model = std::max(model, std::abs(r.ratio[i] / (t * t / (std::sin(t) * std::sin(t))) - 1.0));
    }
    return {r.monotone && r.max_decrease <= 1e-8,
            fmt("max relative decrease %.3g over %zu samples on (0, pi - 0.05); max rel. deviation from t^2/sin^2 t %.3g",
                r.max_decrease, r.t.size(), model)};
}

Verdict myers() {
    const auto s = sphere(3);
    const Vec p = pt({0.3, 0.2, 0.1});
    const auto m = myers_check(s, p, unit(s, p, pt({0.2, 1.0, -0.3})), 1.0);
    const double d = m.conjugate_distance.value_or(NAN);
    return {m.satisfied && std::abs(d - M_PI) <= 1e-4,
            fmt("Ric >= %.6f, conjugate distance %.10f vs pi/sqrt(c) = %.10f", m.ric_min, d, m.bound)};
}

Verdict bishop() {
    const auto s = sphere(2);
    const Vec p = pt({0.3, 0.2});
    double worst = 0.0, eq = 0.0;
    bool strict = true;
    for (double r : {0.5, 1.0, 1.5}) {
        const auto v0 = volume_compare(s, p, r, 0.0);
        const auto v1 = volume_compare(s, p, r, 1.0);
        worst = std::max(worst, std::abs(v0.area - 2 * M_PI * std::sin(r)));
        strict = strict && v0.area < 2 * M_PI * r && v0.ratio_ok;
        eq = std::max(eq, std::abs(v1.area - v1.reference));
    }
    return {worst <= 1e-4 && strict && eq <= 1e-4,
            fmt("max |L(r) - 2 pi sin r| %.3g; strict vs Kref = 0: %s; max |L - ref| at Kref = 1: %.3g", worst,
                strict ? "yes" : "no", eq)};
}

Verdict scalar_expansion() {
    const double fs = scalar_expansion_fit(sphere(2), pt({0.3, 0.2})).fitted;
    const double fe = scalar_expansion_fit(flat(2), pt({0.3, 0.2})).fitted;
    const double fh = scalar_expansion_fit(hyper(2), pt({0.1, 0.2})).fitted;
    const double err = std::max({std::abs(fs - 1.0 / 6), std::abs(fe), std::abs(fh + 1.0 / 6)});
    return {err <= 1e-4, fmt("fitted coefficients S^2 %.8f, E^2 %.3g, H^2 %.8f", fs, fe, fh)};
}

std::vector<double> turning_thetas(const Trajectory& tr) {
    const CurveInterpolant ci = tr.interpolant();
    std::vector<double> out;
    for (std::size_t i = 1; i < tr.size(); ++i) {
        if ((tr.v[i - 1](0) > 0) == (tr.v[i](0) > 0)) continue;
        double a = tr.t[i - 1], b = tr.t[i];
        const bool up = tr.v[i - 1](0) > 0;
        for (int k = 0; k < 60; ++k) {
            const double m = 0.5 * (a + b);
            ((ci(m).second(0) > 0) == up ? a : b) = m;
        }
        out.push_back(ci(0.5 * (a + b)).first(1));
    }
    return out;
}

Verdict clairaut() {
    const Profile p = torus_profile(2, 1);
    const auto chart = surface_of_revolution(p);
    const double u0 = 0.4, phi = 1.1;
    const auto tr = integrate_geodesic(chart, pt({u0, 0}), surfrev_velocity(p, u0, phi), 50.0);
    const double drift = clairaut_constant(chart, tr).drift;

    const double c = 2.5;
    const auto d = delta_theta(p, c);
    const auto th = turning_thetas(integrate_geodesic(chart, pt({0, 0}), surfrev_velocity(p, 0, std::asin(c / 3)), 40.0));
    double dth = th.size() >= 2 ? 0.0 : INFINITY;
    for (std::size_t i = 1; i < th.size(); ++i) dth = std::max(dth, std::abs(th[i] - th[i - 1] - d.value));

    struct Case {
        double u0, phi;
        GeodesicClass want;
    };
    const std::vector<Case> cases = {
        {0.7, 0.0, GeodesicClass::Meridian},
        {-2.0, 0.0, GeodesicClass::Meridian},
        {0.0, M_PI / 2, GeodesicClass::ParallelGeodesic},
        {M_PI, M_PI / 2, GeodesicClass::ParallelGeodesic},
        {0.5, M_PI / 2, GeodesicClass::Oscillating},
        {0.0, 0.9, GeodesicClass::Oscillating},
        {-0.9, M_PI / 2, GeodesicClass::Oscillating},
        {0.0, std::asin(1.0 / 3.0), GeodesicClass::AsymptoticToParallel},
    };
    int ok = 0;
    for (const Case& k : cases) {
        const auto cl = classify_geodesic(p, k.u0, 0.0, k.phi);
        const bool confirm = k.want == GeodesicClass::AsymptoticToParallel || cl.confirmed;
        ok += cl.tag == k.want && confirm ? 1 : 0;
    }
    return {drift <= 1e-6 && dth <= 1e-4 && ok == static_cast<int>(cases.size()),
            fmt("f^2 theta' drift %.3g on [0, 50]; max |dtheta_direct - dtheta_integral| %.3g over %zu turns; "
                "classification %d/%zu",
                drift, dth, th.size() ? th.size() - 1 : 0, ok, cases.size())};
}

Verdict berger() {
    const auto k = berger_curvatures(1, 1, 1);
    const double e1 = std::max({std::abs(k.K12 - 0.25), std::abs(k.K23 - 0.25), std::abs(k.K31 - 0.25)});
    Rng rng(13);
    double cross = 0.0;
    for (int s = 0; s < 100; ++s)
        cross = std::max(cross, berger_curvatures(rng.uniform(0.5, 2), rng.uniform(0.5, 2), rng.uniform(0.5, 2)).cross_check);
    return {e1 <= 1e-12 && cross <= 1e-12,
            fmt("(1,1,1) max |K - 1/4| %.3g; max route disagreement over 100 triples %.3g", e1, cross)};
}

RectangleSpec rectangle(std::function<Vec(double)> x, std::function<Vec(double)> dx, std::function<Vec(double)> V,
                        double t1, int m, EndCondition end) {
    RectangleSpec r;
    r.end = end;
    for (int i = 0; i <= m; ++i) {
        const double t = t1 * i / m;
        r.base.t.push_back(t);
        r.base.points.push_back(x(t));
        r.base.velocities.push_back(dx(t));
        r.V.push_back(V(t));
    }
    if (end == EndCondition::FixedEnds) {
        r.V.front().setZero();
        r.V.back().setZero();
    }
    return r;
}

RectangleSpec geodesic_rectangle(const MetricChart& c, const Vec& p, const Vec& v, double L, const Vec& coef,
                                 EndCondition end) {
    const auto geo = integrate_geodesic(c, p, v, L);
    RectangleSpec r;
    r.end = end;
    for (std::size_t i = 0; i < geo.size(); i += 5) {
        const double w = end == EndCondition::FixedEnds ? std::sin(M_PI * geo.t[i] / L) : 1.0 + geo.t[i];
        r.base.t.push_back(geo.t[i]);
        r.base.points.push_back(geo.x[i]);
        r.base.velocities.push_back(geo.v[i]);
        r.base.accelerations.push_back(geo.a[i]);
        r.V.push_back(w * (geo.frame[i] * coef));
    }
    if (end == EndCondition::FixedEnds) r.V.back().setZero();
    return r;
}

Verdict variation() {
    const auto s2 = sphere(2), s3 = sphere(3), h2 = hyper(2), e2 = flat(2), t = torus21();
    const auto FE = EndCondition::FixedEnds, GT = EndCondition::GeodesicTransversals;
    std::vector<std::pair<const MetricChart*, RectangleSpec>> rects;
    rects.emplace_back(&s2, geodesic_rectangle(s2, pt({0.3, 0.2}), pt({0.2, 0.5}), 1.0, pt({0.3, 1}), FE));
    rects.emplace_back(&s2, geodesic_rectangle(s2, pt({0.3, 0.2}), pt({0.2, 0.5}), 1.0, pt({0.5, -0.4}), GT));
    rects.emplace_back(&t, geodesic_rectangle(t, pt({0.4, 0.1}), pt({0.3, 0.2}), 1.5, pt({0.2, 1}), GT));
    rects.emplace_back(&h2, geodesic_rectangle(h2, pt({0.1, -0.2}), pt({0.4, 0.3}), 1.2, pt({-0.3, 0.8}), GT));
    rects.emplace_back(&s3, geodesic_rectangle(s3, pt({0.3, 0.2, 0.1}), pt({0.2, 0.4, -0.3}), 1.0, pt({0.1, 0.5, 0.6}), FE));
    // non-geodesic bases
    rects.emplace_back(&t, rectangle([](double s) { return pt({1.0, 2 * s}); }, [](double) { return pt({0, 2}); },
                                     [](double s) { return pt({std::sin(M_PI * s), 0}); }, 1.0, 200, FE));
    rects.emplace_back(&e2, rectangle([](double s) { return pt({s, s * s}); }, [](double s) { return pt({1, 2 * s}); },
                                      [](double s) { return pt({s, 1 - s}); }, 1.0, 200, GT));
    rects.emplace_back(&e2, rectangle([](double s) { return pt({std::cos(s), std::sin(s)}); },
                                      [](double s) { return pt({-std::sin(s), std::cos(s)}); },
                                      [](double s) { return std::sin(M_PI * s / 1.5) * pt({std::cos(s), std::sin(s)}); }, 1.5,
                                      300, FE));
    rects.emplace_back(&s2, rectangle([](double s) { return pt({0.5 * std::cos(s), 0.5 * std::sin(s)}); },
                                      [](double s) { return pt({-0.5 * std::sin(s), 0.5 * std::cos(s)}); },
                                      [](double s) { return pt({0.2 * std::cos(s), 0.3}); }, 2.0, 400, GT));
    rects.emplace_back(&h2, rectangle([](double s) { return pt({0.3 * s, 0.2 * std::sin(3 * s)}); },
                                      [](double s) { return pt({0.3, 0.6 * std::cos(3 * s)}); },
                                      [](double s) { return pt({0.1, 0.2 * s}); }, 1.0, 200, GT));
    double fv = 0.0;
    std::size_t worst = 0;
    for (std::size_t k = 0; k < rects.size(); ++k) {
        const double mm = first_variation(*rects[k].first, rects[k].second).mismatch;
        if (mm > fv) fv = mm, worst = k + 1;
    }

    const auto geo = sphere_geo(M_PI);
    const FrameField Y = scalar_field([](double x) { return std::sin(x); }, [](double x) { return std::cos(x); });
    const double iy = std::abs(index_form(s2, geo, Y, Y));

    const double L = M_PI / 2;
    const auto short_geo = sphere_geo(L);
    const double eq = basic_inequality_check(s2, short_geo, Y).gap;
    double gap_min = INFINITY;
    for (const FrameField& V : {scalar_field([L](double x) { return std::sin(M_PI * x / L); },
                                             [L](double x) { return M_PI / L * std::cos(M_PI * x / L); }),
                                scalar_field([L](double x) { return x / L; }, [L](double) { return 1 / L; }),
                                scalar_field([](double x) { return x * x; }, [](double x) { return 2 * x; })})
        gap_min = std::min(gap_min, basic_inequality_check(s2, short_geo, V).gap);

    const auto w = nonminimality_witness(s2, sphere_geo(M_PI + 0.3));
    return {fv <= 1e-5 && iy <= 1e-4 && std::abs(eq) <= 1e-8 && gap_min > 1e-6 && w.index_value < -1e-4,
            fmt("first variation max mismatch %.3g (rectangle %zu of %zu); |I(Y,Y)| %.3g; Jacobi gap %.3g, min other gap "
                "%.3g; witness I = %.6f",
                fv, worst, rects.size(), iy, eq, gap_min, w.index_value)};
}

Verdict finsler() {
    double par = 0.0, pol = 0.0;
    const std::vector<std::pair<MetricChart, Vec>> at = {
        {sphere(2), pt({0.3, 0.2})}, {torus21(), pt({0.4, 1.0})}, {hyper(3), pt({0.1, -0.3, 0.2})}};
    std::uint64_t seed = 1;
    for (const auto& [c, p] : at) {
        const FinslerNorm L = riemannian_norm(c, p);
        par = std::max(par, parallelogram_check(L, 1000, seed++).max_violation);
        const Mat g = metric_value(c, p);
        const Mat I = Mat::Identity(c.dim, c.dim);
        for (int i = 0; i < c.dim; ++i)
            for (int j = 0; j < c.dim; ++j)
                pol = std::max(pol, std::abs(polarize(L, {p, I.col(i)}, {p, I.col(j)}) - g(i, j)));
    }
    const double mx = parallelogram_check(max_norm(2), 1000, 3).max_violation;
    return {par <= 1e-9 && mx >= 1.0 && pol <= 1e-12,
            fmt("Riemannian norms max violation %.3g; max-norm violation %.4f; polarization residual %.3g", par, mx, pol)};
}

Verdict order_of_accuracy() {
    auto err = [](double h) {
        const auto s = sphere(2);
        const Vec p = pt({0.3, 0.2});
        OdeSettings set;
        set.step = h;
        return (integrate_geodesic(s, p, unit(s, p, pt({0.2, 1.0})), 2 * M_PI, set).x.back() - p).norm();
    };
    const double e1 = err(0.04), e2 = err(0.02);
    const double ratio = e1 / e2;
    return {ratio >= 12 && ratio <= 20, fmt("endpoint errors %.3g -> %.3g, ratio %.3f", e1, e2, ratio)};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
        {"constant curvature", constant_curvature},
        {"conjugate point", conjugate_point},
        {"Jacobi accuracy", jacobi_accuracy},
        {"Riemann expansion", riemann_expansion},
        {"curvature symmetries", symmetries},
        {"Weyl decomposition", weyl},
        {"Riccati and Sturm", riccati},
        {"Rauch", rauch},
        {"Myers", myers},
        {"Bishop volume", bishop},
        {"scalar expansion", scalar_expansion},
        {"Clairaut", clairaut},
        {"Berger", berger},
        {"variation", variation},
        {"Finsler", finsler},
        {"RK4 order", order_of_accuracy},
    };
    int failed = 0, k = 0;
    for (const auto& [name, fn] : criteria) {
        ++k;
        Verdict v{false, ""};
        try {
            v = fn();
        } catch (const std::exception& e) {
            v = {false, std::string("threw ") + e.what()};
        }
        failed += v.pass ? 0 : 1;
        std::printf("%s [%02d] %s: %s\n", v.pass ? "PASS" : "FAIL", k, name, v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%d criteria passed\n", k - failed, k);
    return failed == 0 ? 0 : 1;
}
