#include "rkit/normal.hpp"
#include "rkit/transport.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rkit;

namespace {

Vec pt(std::initializer_list<double> xs) { return to_vec(std::vector<double>(xs)); }

MetricChart sphere2() { return builtin("sphere_stereo", {{"n", 2}, {"R", 1}}); }
MetricChart torus21() { return builtin("torus", {{"R", 2}, {"r", 1}}); }

Vec unit(const MetricChart& c, const Vec& p, const Vec& v) {
    const Mat g = metric_value(c, p);
    return v / std::sqrt(v.dot(g * v));
}

// Latitude circle at polar angle alpha from the chart origin, s in [0, 2pi].
SampledCurve latitude(double alpha, int m) {
    const double rho = std::tan(alpha / 2);
    SampledCurve c;
    for (int i = 0; i <= m; ++i) {
        const double s = 2 * M_PI * i / m;
        c.t.push_back(s);
        c.points.push_back(pt({rho * std::cos(s), rho * std::sin(s)}));
        c.velocities.push_back(pt({-rho * std::sin(s), rho * std::cos(s)}));
        c.accelerations.push_back(pt({-rho * std::cos(s), -rho * std::sin(s)}));
    }
    return c;
}

double sphere_return_error(double step) {
    const auto s = sphere2();
    const Vec p = pt({0.3, 0.2});
    const Vec v = unit(s, p, pt({0.2, 1.0}));
    OdeSettings set;
    set.step = step;
    const auto tr = integrate_geodesic(s, p, v, 2 * M_PI, set);
    return (tr.x.back() - p).norm();
}

}  // namespace

TEST(Geodesic, EuclideanStraightLine) {
    const auto e = builtin("euclidean", {{"n", 3}});
    const Vec p = pt({1, -2, 0.5}), v = pt({0.3, 0.7, -1.1});
    const auto tr = integrate_geodesic(e, p, v, 3.0);
    for (std::size_t i = 0; i < tr.size(); ++i) EXPECT_LE((tr.x[i] - (p + tr.t[i] * v)).norm(), 1e-12);
}

TEST(Geodesic, SphereGreatCircleCloses) { EXPECT_LE(sphere_return_error(1e-3), 1e-6); }

TEST(Geodesic, TorusInnerEquatorStays) {
    const auto t = torus21();
    const auto tr = integrate_geodesic(t, pt({M_PI, 0}), pt({0, 1}), 2 * M_PI);
    for (const Vec& x : tr.x) EXPECT_NEAR(x(0), M_PI, 1e-7);
}

TEST(Geodesic, SpeedDriftAllBuiltins) {
    const std::vector<std::pair<MetricChart, Vec>> cases = {
        {builtin("euclidean", {{"n", 2}}), pt({0, 0})},
        {sphere2(), pt({0.3, 0.2})},
        {builtin("sphere_stereo", {{"n", 3}, {"R", 1}}), pt({0.1, 0.2, -0.1})},
        {builtin("hyperbolic_ball", {{"n", 2}}), pt({0.1, 0.0})},
        {torus21(), pt({0.4, 1.0})}};
    for (const auto& [c, p] : cases) {
        Vec d = Vec::Ones(c.dim);
        d(0) = 0.3;
        const auto tr = integrate_geodesic(c, p, unit(c, p, d), 10.0);
        EXPECT_LE(tr.speed_drift, 1e-8) << c.label;
        EXPECT_LE(tr.frame_defect, 1e-7) << c.label;
    }
}

TEST(Geodesic, Rk4OrderOfAccuracy) {
    const double e1 = sphere_return_error(0.04), e2 = sphere_return_error(0.02);
    const double ratio = e1 / e2;
    EXPECT_GE(ratio, 12.0);
    EXPECT_LE(ratio, 20.0);
}

TEST(Geodesic, AdaptiveMatchesFixed) {
    OdeSettings a;
    a.method = OdeMethod::Rkf45Adaptive;
    a.step = 0.01;
    const auto s = sphere2();
    const Vec p = pt({0.3, 0.2});
    const Vec v = unit(s, p, pt({0.2, 1.0}));
    const auto tr = integrate_geodesic(s, p, v, 2 * M_PI, a);
    EXPECT_LE((tr.x.back() - p).norm(), 1e-6);
    EXPECT_LT(tr.size(), 6000u);
}

TEST(Geodesic, HyperbolicLeavingRaisesNothingButBadStartDoes) {
    const auto h = builtin("hyperbolic_ball", {{"n", 2}});
    const auto tr = integrate_geodesic(h, pt({0, 0}), pt({0.5, 0}), 10.0);
    EXPECT_NEAR(tr.x.back()(0), std::tanh(5.0), 1e-9);
    try {
        (void)integrate_geodesic(h, pt({1.2, 0}), pt({1, 0}), 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DomainExit);
    }
}

TEST(Geodesic, DomainExitCarriesLastState) {
    // flat half-plane chart x < 1; the straight line hits the edge at t = 1
    const auto c = make_chart("halfplane", {"x", "y"}, {{"1", "0"}, {"0", "1"}}, "1 - x");
    try {
        (void)integrate_geodesic(c, pt({0, 0}), pt({1, 0}), 2.0);
        FAIL();
    } catch (const DomainExit& e) {
        EXPECT_NEAR(e.t_exit(), 1.0, 2e-3);
        ASSERT_EQ(e.last_state().size(), 4u);
        EXPECT_LT(e.last_state()[0], 1.0);
    }
}

TEST(Transport, EuclideanConstant) {
    const auto e = builtin("euclidean", {{"n", 2}});
    const auto tr = integrate_geodesic(e, pt({0, 0}), pt({1, 1}), 2.0);
    for (const Vec& w : parallel_transport(e, tr, pt({0.3, -2}))) EXPECT_LE((w - pt({0.3, -2})).norm(), 1e-14);
}

TEST(Transport, SphereLatitudeHolonomy) {
    const auto s = sphere2();
    const auto curve = latitude(M_PI / 3, 400);
    const auto tr = trajectory_from_curve(s, curve);
    const Vec w0 = unit(s, curve.points.front(), pt({1, 0.3}));
    const auto ws = parallel_transport(s, tr, w0);
    // rotation by 2*pi*cos(alpha) = pi
    EXPECT_LE((ws.back() + w0).norm(), 1e-5);
}

TEST(Transport, LengthPreserved) {
    const auto t = torus21();
    const Vec p = pt({0.4, 1.0});
    const auto tr = integrate_geodesic(t, p, unit(t, p, pt({0.3, 0.4})), 10.0);
    const Vec w0 = pt({0.7, -0.2}), z0 = pt({-0.1, 0.5});
    const auto ws = parallel_transport(t, tr, w0);
    const auto zs = parallel_transport(t, tr, z0);
    const Mat g0 = metric_value(t, p);
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const Mat g = metric_value(t, tr.x[i]);
        EXPECT_NEAR(ws[i].dot(g * ws[i]), w0.dot(g0 * w0), 1e-8);
        EXPECT_NEAR(ws[i].dot(g * zs[i]), w0.dot(g0 * z0), 1e-8);
    }
}

TEST(Transport, ParametrizationIndependent) {
    const auto t = torus21();
    auto path = [](double s) { return pt({0.3 + std::sin(2 * s), 1.7 * s}); };
    auto dpath = [](double s) { return pt({2 * std::cos(2 * s), 1.7}); };
    SampledCurve a, b;
    for (int i = 0; i <= 400; ++i) {
        const double u = i / 400.0;
        a.t.push_back(u);
        a.points.push_back(path(u));
        a.velocities.push_back(dpath(u));
        b.t.push_back(u);
        b.points.push_back(path(u * u));
        b.velocities.push_back(2 * u * dpath(u * u));
    }
    const Vec w0 = pt({0.2, 0.1});
    const Vec wa = parallel_transport(t, trajectory_from_curve(t, a), w0).back();
    const Vec wb = parallel_transport(t, trajectory_from_curve(t, b), w0).back();
    EXPECT_LE((wa - wb).norm(), 1e-8);
}

TEST(ExpMap, Basics) {
    const auto t = torus21();
    EXPECT_EQ(exp_map(t, pt({0.2, 0.3}), pt({0, 0})), pt({0.2, 0.3}));
    const auto e = builtin("euclidean", {{"n", 2}});
    EXPECT_LE((exp_map(e, pt({1, 2}), pt({-0.5, 4})) - pt({0.5, 6})).norm(), 1e-12);
}

TEST(ExpMap, SphereAntipodeLeavesChartOrGoesFar) {
    const auto s = sphere2();
    // |v| = pi in the metric (g = 4I at the origin)
    try {
        const Vec q = exp_map(s, pt({0, 0}), pt({M_PI / 2, 0}));
        EXPECT_GT(q.norm(), 100.0);
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DomainExit);
    }
}

TEST(LogMap, Basics) {
    const auto t = torus21();
    const Vec p = pt({0.4, 1.0});
    const Mat E = orthonormalize(metric_value(t, p), Mat::Identity(2, 2));
    const auto z = log_map(t, p, E, p);
    EXPECT_EQ(z.y.norm(), 0.0);

    Rng rng(31);
    for (int k = 0; k < 10; ++k) {
        const double ang = rng.uniform(0, 2 * M_PI);
        const Vec y = 0.1 * pt({std::cos(ang), std::sin(ang)});
        const Vec q = exp_map(t, p, E * y);
        const auto lr = log_map(t, p, E, q);
        EXPECT_LE((lr.y - y).norm(), 1e-9);
        EXPECT_LE((exp_map(t, p, E * lr.y) - q).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(LogMap, SphereRadialDistance) {
    const auto s = sphere2();
    const Vec p = pt({0.2, -0.1});
    const Mat E = orthonormalize(metric_value(s, p), Mat::Identity(2, 2));
    const Vec q = exp_map(s, p, E * pt({0.5 * std::cos(1.0), 0.5 * std::sin(1.0)}));
    EXPECT_NEAR(log_map(s, p, E, q).y.norm(), 0.5, 1e-8);
}

TEST(LogMap, NoConvergenceReported) {
    const auto s = sphere2();
    const Vec p = pt({0, 0});
    const Mat E = orthonormalize(metric_value(s, p), Mat::Identity(2, 2));
    try {
        (void)log_map(s, p, E, pt({0.5, 0}), {}, 0);
        FAIL();
    } catch (const NoConvergence& e) {
        EXPECT_GT(e.best_residual(), 0.0);
    }
}

TEST(Develop, GeodesicIsRay) {
    const auto t = torus21();
    const Vec p = pt({0.4, 1.0});
    const Vec v = unit(t, p, pt({0.3, 0.4}));
    const auto tr = integrate_geodesic(t, p, v, 5.0);
    const auto dev = develop(t, tr.curve());
    // adapted frame: sigma(t) = (t, 0)
    for (std::size_t i = 0; i < tr.size(); ++i) {
        EXPECT_NEAR(dev.sigma.points[i](0), tr.t[i], 1e-8);
        EXPECT_NEAR(dev.sigma.points[i](1), 0.0, 1e-8);
    }
}

TEST(Develop, EuclideanIsTranslation) {
    const auto e = builtin("euclidean", {{"n", 2}});
    SampledCurve c;
    for (int i = 0; i <= 100; ++i) {
        const double s = i / 100.0;
        c.t.push_back(s);
        c.points.push_back(pt({1 + s * s, 2 + std::sin(3 * s)}));
        c.velocities.push_back(pt({2 * s, 3 * std::cos(3 * s)}));
    }
    const auto dev = develop(e, c, Mat::Identity(2, 2));
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_LE((dev.sigma.points[i] - (c.points[i] - c.points[0])).norm(), 1e-9);
}

TEST(Develop, SphereLatitudeRadius) {
    const double alpha = M_PI / 3;
    const auto dev = develop(sphere2(), latitude(alpha, 400));
    const auto& P = dev.sigma.points;
    // circumcenter of three samples
    const Vec a = P[0], b = P[100], c = P[200];
    Mat A(2, 2);
    A << 2 * (b - a)(0), 2 * (b - a)(1), 2 * (c - a)(0), 2 * (c - a)(1);
    Vec rhs(2);
    rhs << b.squaredNorm() - a.squaredNorm(), c.squaredNorm() - a.squaredNorm();
    const Vec center = A.partialPivLu().solve(rhs);
    for (const Vec& x : P) EXPECT_NEAR((x - center).norm(), std::tan(alpha), 1e-5);
}

TEST(Develop, FrameChoiceIsAnIsometry) {
    const auto t = torus21();
    SampledCurve c;
    for (int i = 0; i <= 200; ++i) {
        const double s = i / 100.0;
        c.t.push_back(s);
        c.points.push_back(pt({0.3 + std::sin(2 * s), 1.7 * s}));
        c.velocities.push_back(pt({2 * std::cos(2 * s), 1.7}));
    }
    const Vec p = c.points[0];
    const Mat g = metric_value(t, p);
    const Mat E1 = orthonormalize(g, Mat::Identity(2, 2));
    Mat seed(2, 1);
    seed << 1, -1;
    const Mat E2 = orthonormalize(g, seed);
    const auto d1 = develop(t, c, E1), d2 = develop(t, c, E2);
    const Mat Q = E2.partialPivLu().solve(E1);  // components in E1 -> components in E2
    EXPECT_LE((Q.transpose() * Q - Mat::Identity(2, 2)).norm(), 1e-12);
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_LE((Q * d1.sigma.points[i] - d2.sigma.points[i]).norm(), 1e-9);
}

TEST(ReverseDevelop, RayGivesGeodesic) {
    const auto t = torus21();
    const Vec p = pt({0.4, 1.0});
    const Mat E = orthonormalize(metric_value(t, p), Mat::Identity(2, 2));
    const Vec dir = pt({0.6, 0.8});
    SampledCurve ray;
    for (int i = 0; i <= 300; ++i) {
        const double s = i / 100.0;
        ray.t.push_back(s);
        ray.points.push_back(s * dir);
        ray.velocities.push_back(dir);
    }
    const auto gam = reverse_develop(t, ray, p, E);
    const auto tr = integrate_geodesic(t, p, E * dir, 3.0);
    const auto ci = tr.interpolant();
    for (std::size_t i = 0; i < gam.size(); ++i) EXPECT_LE((gam.points[i] - ci(gam.t[i]).first).norm(), 1e-7);
}

TEST(ReverseDevelop, RoundTripOnTorusCurve) {
    const auto t = torus21();
    SampledCurve c;
    for (int i = 0; i <= 300; ++i) {
        const double s = i / 100.0;
        c.t.push_back(s);
        c.points.push_back(pt({0.3 + std::sin(2 * s), 1.7 * s - 0.2 * s * s}));
        c.velocities.push_back(pt({2 * std::cos(2 * s), 1.7 - 0.4 * s}));
        c.accelerations.push_back(pt({-4 * std::sin(2 * s), -0.4}));
    }
    const Mat E = orthonormalize(metric_value(t, c.points[0]), Mat::Identity(2, 2));
    const auto dev = develop(t, c, E);
    const auto back = reverse_develop(t, dev.sigma, c.points[0], E);
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_LE((back.points[i] - c.points[i]).norm(), 1e-5);
}

TEST(ReverseDevelop, HyperbolicLongRayStaysInside) {
    const auto h = builtin("hyperbolic_ball", {{"n", 2}});
    SampledCurve ray;
    for (int i = 0; i <= 1000; ++i) {
        const double s = i / 100.0;
        ray.t.push_back(s);
        ray.points.push_back(pt({s, 0}));
        ray.velocities.push_back(pt({1, 0}));
    }
    const auto gam = reverse_develop(h, ray, pt({0, 0}), 0.5 * Mat::Identity(2, 2));
    EXPECT_LT(gam.points.back().norm(), 1.0);
    EXPECT_NEAR(gam.points.back()(0), std::tanh(5.0), 1e-7);
}

TEST(Shortest, Examples) {
    const auto e = builtin("euclidean", {{"n", 2}});
    const auto r = shortest_geodesic(e, pt({0, 0}), pt({3, 4}), 4, 7);
    EXPECT_NEAR(r.length, 5.0, 1e-9);

    const auto s = sphere2();
    // point at distance pi - 0.05 from the origin along the x1 axis
    const Vec q = pt({std::tan((M_PI - 0.05) / 2), 0});
    const auto rs = shortest_geodesic(s, pt({0, 0}), q, 6, 11);
    EXPECT_LE(rs.length, M_PI + 1e-6);
    EXPECT_NEAR(rs.length, M_PI - 0.05, 1e-6);

    const auto t = torus21();
    const auto rt = shortest_geodesic(t, pt({0.3, 0.3}), pt({0.3, 0.3}), 3, 1);
    EXPECT_EQ(rt.length, 0.0);
}

TEST(Invariants, GaussLemma) {
    Rng rng(77);
    for (const auto& c : {sphere2(), torus21()}) {
        for (int k = 0; k < 10; ++k) {
            const Vec p = rng.uniform_vec(2, -0.8, 0.8);
            const Mat g = metric_value(c, p);
            const Mat E = orthonormalize(g, Mat::Identity(2, 2));
            const double ang = rng.uniform(0, 2 * M_PI);
            const Vec yv = pt({std::cos(ang), std::sin(ang)});
            const Vec yw = pt({-std::sin(ang), std::cos(ang)});  // orthogonal in the frame
            const FlowLayout L{2, 1, true};
            Mat F0 = Mat::Zero(2, 1), Fp0(2, 1);
            Fp0.col(0) = yw;
            const auto fs = integrate_flow(c, L, L.pack(p, E * yv, E, F0, Fp0), 2.0, {});
            for (std::size_t i = 0; i < fs.t.size(); i += 50) {
                const Vec x = L.get_vec(fs.y[i], L.x()), v = L.get_vec(fs.y[i], L.v());
                const Mat Et = L.get_mat(fs.y[i], L.E(), 2);
                const Vec J = Et * L.get_mat(fs.y[i], L.F(), 1).col(0);
                EXPECT_NEAR(v.dot(metric_value(c, x) * J), 0.0, 1e-6);
            }
        }
    }
}

TEST(Invariants, Pregeodesic) {
    const auto s = sphere2();
    const Vec p = pt({0.3, 0.2});
    const auto tr = integrate_geodesic(s, p, unit(s, p, pt({0.2, 1.0})), 4.0);
    const auto ci = tr.interpolant();
    auto cvel = [&](double t) { return Vec(2 * t * ci(t * t).second); };
    for (double t = 0.2; t < 1.95; t += 0.1) {
        const Vec x = ci(t * t).first;
        const Vec cp = cvel(t);
        const double h = 1e-5;
        const Vec cpp = (cvel(t + h) - cvel(t - h)) / (2 * h);
        const Vec acc = cpp + christoffel(s, x).contract(cp, cp);
        const Mat g = metric_value(s, x);
        const double cos2 = std::pow(acc.dot(g * cp), 2) / (acc.dot(g * acc) * cp.dot(g * cp));
        EXPECT_LE(1.0 - cos2, 1e-6);
    }
}

TEST(NormalCoords, SphereEyy) {
    const auto rep = normal_taylor_check(sphere2(), pt({0.3, -0.2}));
    EXPECT_NEAR(rep.E_yy, -2.0 / 3.0, 1e-3);
    EXPECT_NEAR(rep.K_fit, 1.0, 1e-3);
    EXPECT_LE(rep.christoffel_origin, 1e-6);
    EXPECT_LE(rep.max_deviation, 1e-3);
    EXPECT_LE(rep.log_roundtrip, 1e-9);
}

TEST(NormalCoords, EuclideanAndHyperbolic) {
    const auto re = normal_taylor_check(builtin("euclidean", {{"n", 3}}), pt({1, 2, 3}));
    EXPECT_LE(re.fitted.max_abs(), 1e-9);
    const auto rh = normal_taylor_check(builtin("hyperbolic_ball", {{"n", 2}}), pt({0.2, 0.1}));
    EXPECT_NEAR(rh.K_fit, -1.0, 1e-3);
    const auto rt = normal_taylor_check(torus21(), pt({0.5, 0.1}));
    EXPECT_LE(rt.max_deviation, 1e-3);
    EXPECT_NEAR(rt.K_fit, rt.K_point, 1e-3);
}
