#include "rkit/comparison.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rkit;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vec pt(std::initializer_list<double> xs) { return to_vec(std::vector<double>(xs)); }

MetricChart sphere(int n, double R = 1) {
    return builtin("sphere_stereo", {{"n", static_cast<double>(n)}, {"R", R}});
}
MetricChart hyper(int n) { return builtin("hyperbolic_ball", {{"n", static_cast<double>(n)}}); }
MetricChart flat(int n) { return builtin("euclidean", {{"n", static_cast<double>(n)}}); }

Vec unit(const MetricChart& c, const Vec& p, const Vec& v) {
    return v / std::sqrt(v.dot(metric_value(c, p) * v));
}

Trajectory unit_geo(const MetricChart& c, const Vec& p, const Vec& v, double L) {
    return integrate_geodesic(c, p, unit(c, p, v), L);
}

}  // namespace

TEST(Riccati, CotangentWithPoleAtPi) {
    const auto tr = riccati_solve(constant_profile(1), kInf, 4.0);
    ASSERT_EQ(tr.poles.size(), 1u);
    EXPECT_NEAR(tr.poles[0], M_PI, 1e-4);
    double err = 0.0;
    for (const auto& [t, f, seg] : tr.rows())
        if (std::abs(t - M_PI) > 0.01) err = std::max(err, std::abs(f - 1 / std::tan(t)) / std::max(1.0, std::abs(f)));
    EXPECT_LE(err, 1e-8);
    EXPECT_EQ(tr.segments.size(), 2u);
}

TEST(Riccati, FlatAndHyperbolic) {
    const auto flat_tr = riccati_solve(constant_profile(0), kInf, 10.0);
    EXPECT_TRUE(flat_tr.poles.empty());
    double err = 0.0;
    for (const auto& [t, f, seg] : flat_tr.rows()) err = std::max(err, std::abs(f * t - 1.0));
    EXPECT_LE(err, 1e-9);

    const auto hyp = riccati_solve(constant_profile(-1), kInf, 10.0);
    EXPECT_TRUE(hyp.poles.empty());
    err = 0.0;
    for (const auto& [t, f, seg] : hyp.rows()) err = std::max(err, std::abs(f * std::tanh(t) - 1.0));
    EXPECT_LE(err, 1e-9);
    EXPECT_NEAR(hyp.segments.back().f.back(), 1.0, 1e-8);
}

TEST(Riccati, PoleAsymptoticsFromTheLeft) {
    const auto tr = riccati_solve(constant_profile(2.5), 0.3, 5.0);
    ASSERT_FALSE(tr.poles.empty());
    for (std::size_t k = 0; k < tr.poles.size(); ++k) {
        const auto& s = tr.segments[k];
        for (std::size_t i = s.t.size() - 10; i < s.t.size(); ++i)
            EXPECT_NEAR((tr.poles[k] - s.t[i]) * s.f[i], -1.0, 0.05);
        for (double f : s.f) EXPECT_LE(std::abs(f), tr.pole_threshold * 1.01);
    }
}

TEST(Riccati, LogDerivativeOfLinearSolution) {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const double H = rng.uniform(-2, 3), f0 = rng.uniform(-2, 2);
        const auto tr = riccati_solve(constant_profile(H), f0, 4.0);
        // j'' = -H j, j(0) = 1, j'(0) = f0
        auto j = [&](double t) {
            if (H > 0) return std::cos(std::sqrt(H) * t) + f0 / std::sqrt(H) * std::sin(std::sqrt(H) * t);
            if (H < 0) return std::cosh(std::sqrt(-H) * t) + f0 / std::sqrt(-H) * std::sinh(std::sqrt(-H) * t);
            return 1 + f0 * t;
        };
        auto jp = [&](double t) {
            if (H > 0) return -std::sqrt(H) * std::sin(std::sqrt(H) * t) + f0 * std::cos(std::sqrt(H) * t);
            if (H < 0) return std::sqrt(-H) * std::sinh(std::sqrt(-H) * t) + f0 * std::cosh(std::sqrt(-H) * t);
            return f0;
        };
        double err = 0.0;
        for (const auto& [t, f, seg] : tr.rows())
            if (std::abs(j(t)) > 0.05) err = std::max(err, std::abs(f - jp(t) / j(t)));
        EXPECT_LE(err, 1e-6) << "H = " << H << " f0 = " << f0;
    }
}

TEST(Riccati, PoleGapIsConjugateDistance) {
    for (double K : {0.5, 1.0, 2.0, 4.0}) {
        const auto tr = riccati_solve(constant_profile(K), kInf, 2.5 * M_PI / std::sqrt(K));
        ASSERT_GE(tr.poles.size(), 2u);
        EXPECT_NEAR(tr.poles[1] - tr.poles[0], M_PI / std::sqrt(K), 1e-4);
        EXPECT_NEAR(tr.poles[0], M_PI / std::sqrt(K), 1e-4);
    }
}

TEST(Riccati, SectionalProfileMatchesConjugatePoints) {
    for (double R : {1.0, 1.5}) {
        const auto s = sphere(2, R);
        const Vec p = pt({0.3, 0.2}), v = unit(s, p, pt({0.2, 1.0}));
        const double T = M_PI * R + 0.2;
        const Trajectory geo = integrate_geodesic(s, p, v, T);
        const auto prof = sectional_profile(s, geo);
        check_profile_continuity(prof, T, 200);
        const auto tr = riccati_solve(prof, kInf, T);
        const auto cr = conjugate_points(s, p, v, T);
        ASSERT_FALSE(tr.poles.empty());
        ASSERT_FALSE(cr.t_conjugate.empty());
        EXPECT_NEAR(tr.poles[0], cr.t_conjugate[0], 1e-3);
    }
}

TEST(Riccati, DiscontinuousProfileRejected) {
    const CurvatureProfile step{[](double t) { return t < 1.0 ? 0.0 : 1.0; }, "step"};
    EXPECT_THROW(check_profile_continuity(step, 2.0), Error);
    EXPECT_NO_THROW(check_profile_continuity(constant_profile(3), 2.0));
}

TEST(Comparison, DrivingCotBelowInverse) {
    const auto r = compare_driving(constant_profile(1), constant_profile(0), kInf, M_PI - 1e-3);
    EXPECT_TRUE(r.verified);
    EXPECT_LE(r.max_violation, 1e-8);
}

TEST(Comparison, DrivingEqualProfiles) {
    for (double f0 : {kInf, 0.5, -1.0}) {
        const auto r = compare_driving(constant_profile(0.7), constant_profile(0.7), f0, 3.0);
        EXPECT_TRUE(r.verified);
        EXPECT_LE(std::abs(r.max_violation), 1e-9);
    }
}

TEST(Comparison, DrivingPoleOrder) {
    const auto r = compare_driving(constant_profile(1), constant_profile(-1), kInf, 4.0);
    EXPECT_TRUE(r.verified);
    ASSERT_TRUE(r.f.first_pole());
    EXPECT_NEAR(*r.f.first_pole(), M_PI, 1e-4);
    EXPECT_FALSE(r.g.first_pole());
}

TEST(Comparison, DrivingOrderViolated) {
    try {
        compare_driving(constant_profile(0), constant_profile(1), kInf, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InputOrderViolated);
    }
}

TEST(Comparison, Sturm) {
    const auto a = sturm_check(constant_profile(1), constant_profile(0.25), 7.0);
    ASSERT_TRUE(a.zero_j && a.zero_k);
    EXPECT_NEAR(*a.zero_j, M_PI, 1e-4);
    EXPECT_NEAR(*a.zero_k, 2 * M_PI, 1e-4);
    EXPECT_TRUE(a.ordered);

    const auto b = sturm_check(constant_profile(1), constant_profile(1), 4.0);
    ASSERT_TRUE(b.zero_j && b.zero_k);
    EXPECT_EQ(*b.zero_j, *b.zero_k);
    EXPECT_TRUE(b.ordered);

    const auto c = sturm_check(constant_profile(1), constant_profile(0), 4.0);
    EXPECT_FALSE(c.zero_k);
    EXPECT_TRUE(c.ordered);

    EXPECT_THROW(sturm_check(constant_profile(0), constant_profile(1), 4.0), Error);
}

TEST(Comparison, Value) {
    EXPECT_TRUE(value_compare(constant_profile(1), 0.0, 1.0, 4.0).verified);
    const auto eq = value_compare(constant_profile(1), 0.4, 0.4, 2.0);
    EXPECT_TRUE(eq.verified);
    EXPECT_LE(std::abs(eq.max_violation), 1e-12);
    const auto h = value_compare(constant_profile(-1), -2.0, 0.0, 5.0);
    EXPECT_TRUE(h.verified);
    EXPECT_THROW(value_compare(constant_profile(1), 1.0, 0.0, 1.0), Error);
}

TEST(Rauch, EuclideanAgainstSphere) {
    const auto e = flat(2), s = sphere(2);
    const double T = M_PI - 0.05;
    const auto gM = unit_geo(e, pt({0.1, 0.2}), pt({1, 0.3}), T);
    const auto gN = unit_geo(s, pt({0.3, 0.2}), pt({0.2, 1.0}), T);
    const auto r = rauch_ratio(e, gM, s, gN, 1.0, T);
    EXPECT_TRUE(r.monotone);
    double err = 0.0;
    for (std::size_t i = 0; i < r.t.size(); ++i) {
        const double t = r.t[i];
        err = std::max(err, std::abs(r.ratio[i] / (t * t / (std::sin(t) * std::sin(t))) - 1.0));
    }
    EXPECT_LE(err, 1e-6);
}

TEST(Rauch, SameGeodesicRatioOne) {
    const auto t = builtin("torus", {{"R", 2}, {"r", 1}});
    const auto g = unit_geo(t, pt({0.4, 0.1}), pt({0.3, 0.2}), 3.0);
    const auto r = rauch_ratio(t, g, t, g, 0.7, 3.0);
    for (double x : r.ratio) EXPECT_NEAR(x, 1.0, 1e-12);
    EXPECT_TRUE(r.monotone);
}

TEST(Rauch, HyperbolicAgainstEuclidean) {
    const auto h = hyper(2), e = flat(2);
    const auto gM = unit_geo(h, pt({0.0, 0.0}), pt({1, 0.4}), 4.0);
    const auto gN = unit_geo(e, pt({0.0, 0.0}), pt({1, 0}), 4.0);
    const auto r = rauch_ratio(h, gM, e, gN, 1.0, 4.0);
    EXPECT_TRUE(r.monotone);
    const double t = r.t.back();
    EXPECT_NEAR(r.ratio.back() / (std::sinh(t) * std::sinh(t) / (t * t)), 1.0, 1e-6);
}

TEST(Rauch, OrderViolated) {
    const auto e = flat(2), s = sphere(2);
    const auto gS = unit_geo(s, pt({0.3, 0.2}), pt({0.2, 1.0}), 2.0);
    const auto gE = unit_geo(e, pt({0.1, 0.2}), pt({1, 0.3}), 2.0);
    EXPECT_THROW(rauch_ratio(s, gS, e, gE, 1.0, 2.0), Error);
}

TEST(Myers, UnitS3) {
    const auto s = sphere(3);
    const Vec p = pt({0.3, 0.2, 0.1});
    const auto r = myers_check(s, p, unit(s, p, pt({0.2, 1.0, -0.3})), 1.0);
    EXPECT_TRUE(r.satisfied);
    ASSERT_TRUE(r.conjugate_distance);
    EXPECT_NEAR(*r.conjugate_distance, M_PI, 1e-4);
    EXPECT_NEAR(r.ric_min, 2.0, 1e-8);
}

TEST(Myers, RadiusTwoSphere) {
    const auto s = sphere(2, 2.0);
    const Vec p = pt({0.6, 0.4});
    const auto r = myers_check(s, p, unit(s, p, pt({0.2, 1.0})), 0.25);
    EXPECT_TRUE(r.satisfied);
    ASSERT_TRUE(r.conjugate_distance);
    EXPECT_NEAR(*r.conjugate_distance, 2 * M_PI, 1e-4);
}

TEST(Myers, TorusViolates) {
    const auto t = builtin("torus", {{"R", 2}, {"r", 1}});
    const Vec p = pt({M_PI, 0.0});
    try {
        myers_check(t, p, unit(t, p, pt({0.0, 1.0})), 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InputOrderViolated);
    }
}

TEST(Volume, SphereMatchesReference) {
    const auto s = sphere(2);
    const auto r = volume_compare(s, pt({0.3, 0.2}), 1.0, 1.0, 0, 4);
    EXPECT_NEAR(r.area, 2 * M_PI * std::sin(1.0), 1e-6);
    EXPECT_NEAR(r.ratio, 1.0, 1e-4);
    EXPECT_TRUE(r.ratio_ok);
}

TEST(Volume, EuclideanEquality) {
    const auto r = volume_compare(flat(2), pt({1, 2}), 0.7, 0.0);
    EXPECT_NEAR(r.area, 2 * M_PI * 0.7, 1e-10);
    EXPECT_NEAR(r.ratio, 1.0, 1e-10);
}

TEST(Volume, SphereBelowFlatReference) {
    const auto s = sphere(2);
    double prev = 2.0;
    for (double rad : {0.3, 0.6, 1.0, 1.5, 2.2}) {
        const auto r = volume_compare(s, pt({0.3, 0.2}), rad, 0.0, 128, 4);
        EXPECT_TRUE(r.ratio_ok);
        EXPECT_TRUE(r.pointwise_ok);
        EXPECT_LT(r.ratio, 1.0);
        EXPECT_NEAR(r.area, 2 * M_PI * std::sin(rad), 1e-6);
        EXPECT_LE(r.ratio, prev);
        prev = r.ratio;
    }
}

TEST(Volume, ThreeSphereFibonacci) {
    const auto s = sphere(3);
    const auto r = volume_compare(s, pt({0.3, 0.2, 0.1}), 1.0, 1.0, 2048, 4);
    EXPECT_NEAR(r.area, 4 * M_PI * std::sin(1.0) * std::sin(1.0), 1e-5);
    EXPECT_NEAR(r.ratio, 1.0, 1e-4);
}

TEST(Volume, JobsDoNotChangeResult) {
    const auto t = builtin("torus", {{"R", 2}, {"r", 1}});
    const auto a = volume_compare(t, pt({0.3, 0.1}), 0.5, -1.0, 64, 1);
    const auto b = volume_compare(t, pt({0.3, 0.1}), 0.5, -1.0, 64, 3);
    EXPECT_EQ(a.area, b.area);
    EXPECT_EQ(a.jacobian, b.jacobian);
}

TEST(Volume, RicciBelowReferenceRejected) {
    const auto t = builtin("torus", {{"R", 2}, {"r", 1}});
    try {
        volume_compare(t, pt({M_PI, 0.0}), 0.3, 0.0, 32);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InputOrderViolated);
    }
}

TEST(ScalarExpansion, ModelSpaces) {
    const auto fs = scalar_expansion_fit(sphere(2), pt({0.3, 0.2}), 0, 4);
    EXPECT_NEAR(fs.fitted, 1.0 / 6, 1e-6);
    EXPECT_NEAR(fs.scalar, 2.0, 1e-9);
    ASSERT_TRUE(fs.c_n);
    EXPECT_NEAR(*fs.c_n, 1.0 / 12, 1e-6);

    const auto fe = scalar_expansion_fit(flat(2), pt({0.3, 0.2}), 0, 4);
    EXPECT_NEAR(fe.fitted, 0.0, 1e-6);

    const auto fh = scalar_expansion_fit(hyper(2), pt({0.1, -0.2}), 0, 4);
    EXPECT_NEAR(fh.fitted, -1.0 / 6, 1e-6);
}

TEST(ScalarExpansion, ProportionalToScalarCurvature) {
    // same c_2 on a chart with non-constant curvature
    const auto t = builtin("torus", {{"R", 2}, {"r", 1}});
    for (double u : {0.0, 1.0, 2.5}) {
        const auto f = scalar_expansion_fit(t, pt({u, 0.3}), 0, 4);
        ASSERT_TRUE(f.c_n);
        EXPECT_NEAR(*f.c_n, 1.0 / 12, 1e-4) << "u = " << u;
    }
}
