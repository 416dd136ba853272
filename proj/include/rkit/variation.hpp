#pragma once

// Jacobi fields, conjugate points, energy and first variation, index form.
//
// Second-variation quantities use arclength on [0, L] along a unit-speed geodesic
// and drop the overall factor 2: I(V, Z) = ∫ g(V', Z') - g(R_{XV}X, Z) ds.
// Fields are given by their components in the parallel frame of the geodesic.

#include "rkit/error.hpp"
#include "rkit/linalg.hpp"
#include "rkit/manifold.hpp"
#include "rkit/tensor.hpp"
#include "rkit/transport.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace rkit {

// ---------------------------------------------------------------------------
// Jacobi solutions.

struct JacobiSolution {
    FlowSamples flow;
    std::vector<double> t;
    std::vector<Mat> f;   // frame components, n x k
    std::vector<Mat> fp;  // derivatives
    std::vector<Mat> M;   // driving matrices
    double M_asymmetry = 0.0;
    double tangential_residual = 0.0;  // max |f_tan(t) - (a t + b)| over columns

    [[nodiscard]] int columns() const { return flow.layout.k; }
};

namespace detail {

inline JacobiSolution finish_jacobi(const MetricChart& chart, FlowSamples fs) {
    const FlowLayout& L = fs.layout;
    JacobiSolution js;
    js.t = fs.t;
    const Vec v0 = L.get_vec(fs.y.front(), L.v());
    const Mat E0 = L.get_mat(fs.y.front(), L.E(), L.n);
    const Vec u = E0.partialPivLu().solve(v0);  // velocity in the frame (constant)
    const double speed = u.norm();
    const Mat F0 = L.get_mat(fs.y.front(), L.F(), L.k);
    const Mat Fp0 = L.get_mat(fs.y.front(), L.Fp(), L.k);
    for (std::size_t i = 0; i < fs.t.size(); ++i) {
        const State& y = fs.y[i];
        const Vec x = L.get_vec(y, L.x()), v = L.get_vec(y, L.v());
        const Mat E = L.get_mat(y, L.E(), L.n);
        const Mat F = L.get_mat(y, L.F(), L.k), Fp = L.get_mat(y, L.Fp(), L.k);
        const Mat M = driving_matrix(curvature(chart, x).low, v, E);
        js.M_asymmetry = std::max(js.M_asymmetry, (M - M.transpose()).cwiseAbs().maxCoeff());
        if (speed > 0.0) {
            for (int c = 0; c < L.k; ++c) {
                const double tan = u.dot(F.col(c)) / speed;
                const double lin = u.dot(Fp0.col(c)) / speed * fs.t[i] + u.dot(F0.col(c)) / speed;
                js.tangential_residual = std::max(js.tangential_residual, std::abs(tan - lin));
            }
        }
        js.f.push_back(F);
        js.fp.push_back(Fp);
        js.M.push_back(M);
    }
    js.flow = std::move(fs);
    return js;
}

}  // namespace detail

/// Jacobi fields along the geodesic from (p, v) with frame E0; F0, Fp0 hold frame
/// components of J(0), J'(0) column by column.
inline JacobiSolution jacobi_fundamental(const MetricChart& chart, const Vec& p, const Vec& v, const Mat& E0,
                                         const Mat& F0, const Mat& Fp0, double tmax, const OdeSettings& s = {}) {
    if (F0.rows() != chart.dim || Fp0.rows() != chart.dim || F0.cols() != Fp0.cols() || F0.cols() < 1)
        throw Error(ErrorKind::BadParam, "Jacobi initial data must be n x k with k >= 1");
    const FlowLayout L{chart.dim, static_cast<int>(F0.cols()), true};
    return detail::finish_jacobi(chart, integrate_flow(chart, L, L.pack(p, v, E0, F0, Fp0), tmax, s));
}

/// Jacobi field along a trajectory with J(0) = J0, J'(0) = J0p (coordinate components).
/// Re-integrates the geodesic, frame and field jointly with the trajectory's settings.
inline JacobiSolution jacobi_solve(const MetricChart& chart, const Trajectory& geo, const Vec& J0, const Vec& J0p) {
    if (geo.frame.empty()) throw Error(ErrorKind::BadParam, "geodesic has no frame attached");
    if (J0.size() != chart.dim || J0p.size() != chart.dim) throw Error(ErrorKind::BadParam, "wrong vector size");
    const Mat& E0 = geo.frame.front();
    const auto lu = E0.partialPivLu();
    Mat F0(chart.dim, 1), Fp0(chart.dim, 1);
    F0.col(0) = lu.solve(J0);
    Fp0.col(0) = lu.solve(J0p);
    return jacobi_fundamental(chart, geo.x.front(), geo.v.front(), E0, F0, Fp0, geo.t.back(), geo.settings);
}

/// Full state (x, v, frame) of a trajectory at arbitrary t.
struct GeodesicPoint {
    Vec x, v;
    Mat E;
};

inline GeodesicPoint geodesic_state_at(const MetricChart& chart, const Trajectory& geo, double t) {
    if (geo.frame.empty()) throw Error(ErrorKind::BadParam, "geodesic has no frame attached");
    const FlowLayout L{geo.dim, 0, true};
    FlowSamples fs{L, {}, {}};
    // only the bracketing sample is needed
    const auto it = std::upper_bound(geo.t.begin(), geo.t.end(), t);
    std::size_t i = it == geo.t.begin() ? 0 : static_cast<std::size_t>(it - geo.t.begin()) - 1;
    i = std::min(i, geo.t.size() - 1);
    fs.t = {geo.t[i]};
    fs.y = {L.pack(geo.x[i], geo.v[i], geo.frame[i], Mat(), Mat())};
    State y = fs.y[0];
    if (t != geo.t[i]) y = ode::rk4_step(GeodesicFlow(chart, L), geo.t[i], y, t - geo.t[i]);
    return {L.get_vec(y, L.x()), L.get_vec(y, L.v()), L.get_mat(y, L.E(), geo.dim)};
}

// ---------------------------------------------------------------------------
// Conjugate points.

struct ConjugateReport {
    std::vector<double> t_conjugate;
    std::vector<int> multiplicity;
    std::vector<double> bracket_width;
    std::vector<double> det_t;
    std::vector<double> det_samples;   // det of the normal block of [J_2 ... J_n]
    std::vector<double> sigma_min;     // smallest singular value per sample
    double tmax = 0.0;
};

namespace detail {

inline void require_unit(const MetricChart& chart, const Vec& p, const Vec& v) {
    const double s = std::sqrt(v.dot(metric_value(chart, p) * v));
    if (std::abs(s - 1.0) > 1e-8) throw Error(ErrorKind::BadParam, "expected a unit-speed direction (|v| = " + fmt17(s) + ")");
}

}  // namespace detail

/// Zeros on (0, tmax] of the Jacobi fields J(0) = 0, J'(0) ⊥ v: local minima of the
/// smallest singular value of [J_2 ... J_n], refined by golden section.
inline ConjugateReport conjugate_points(const MetricChart& chart, const Vec& p, const Vec& v_unit, double tmax,
                                        const OdeSettings& s = {}) {
    require_domain(chart, p);
    detail::require_unit(chart, p, v_unit);
    if (!(tmax > 0.0)) throw Error(ErrorKind::BadParam, "tmax must be positive");
    const int n = chart.dim;
    ConjugateReport rep;
    rep.tmax = tmax;
    if (n < 2) return rep;
    const Mat E0 = adapted_frame(metric_value(chart, p), v_unit);
    Mat F0 = Mat::Zero(n, n - 1), Fp0 = Mat::Zero(n, n - 1);
    for (int j = 1; j < n; ++j) Fp0(j, j - 1) = 1.0;
    const FlowLayout L{n, n - 1, true};
    const FlowSamples fs = integrate_flow(chart, L, L.pack(p, v_unit, E0, F0, Fp0), tmax, s);

    auto svals = [&](const State& y) {
        const Mat F = L.get_mat(y, L.F(), n - 1);
        return Vec(Eigen::JacobiSVD<Mat>(F).singularValues());
    };
    double scale = 0.0;
    std::vector<double> smin(fs.t.size());
    for (std::size_t i = 0; i < fs.t.size(); ++i) {
        const Vec sv = svals(fs.y[i]);
        scale = std::max(scale, sv(0));
        smin[i] = sv(sv.size() - 1);
        const Mat F = L.get_mat(fs.y[i], L.F(), n - 1);
        rep.det_t.push_back(fs.t[i]);
        rep.det_samples.push_back(F.bottomRows(n - 1).determinant());
        rep.sigma_min.push_back(smin[i]);
    }
    const double width = 1e-9 * tmax;
    auto sigma_at = [&](double t) {
        const Vec sv = svals(flow_state_at(chart, fs, t));
        return sv(sv.size() - 1);
    };
    for (std::size_t i = 1; i < fs.t.size(); ++i) {
        const bool last = i + 1 == fs.t.size();
        if (!(smin[i] <= smin[i - 1] && (last || smin[i] <= smin[i + 1]))) continue;
        double a = fs.t[i - 1], b = last ? fs.t[i] : fs.t[i + 1];
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        double c = b - gr * (b - a), d = a + gr * (b - a);
        double fc = sigma_at(c), fd = sigma_at(d);
        while (b - a > width) {
            if (fc <= fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - gr * (b - a);
                fc = sigma_at(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + gr * (b - a);
                fd = sigma_at(d);
            }
        }
        const double tstar = 0.5 * (a + b);
        const Vec sv = svals(flow_state_at(chart, fs, tstar));
        const double thresh = 1e-7 * scale;
        if (sv(sv.size() - 1) >= thresh) continue;
        if (!rep.t_conjugate.empty() && tstar - rep.t_conjugate.back() < 10 * width) continue;
        int mult = 0;
        for (int k = 0; k < sv.size(); ++k) mult += sv(k) < thresh ? 1 : 0;
        rep.t_conjugate.push_back(tstar);
        rep.multiplicity.push_back(mult);
        rep.bracket_width.push_back(b - a);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Energy and first variation.

/// E(γ) = ∫ g(γ', γ') ds.
inline double energy(const MetricChart& chart, const SampledCurve& curve, double rtol = 1e-8) {
    validate_curve(chart, curve);
    const CurveInterpolant ci(curve);
    return integrate_along(ci, [&](const Vec& x, const Vec& v) { return v.dot(metric_value(chart, x) * v); }, rtol);
}

enum class EndCondition { FixedEnds, GeodesicTransversals };

struct RectangleSpec {
    SampledCurve base;        // needs velocities; accelerations are derived when absent
    std::vector<Vec> V;       // variation field, coordinate components per sample
    EndCondition end = EndCondition::GeodesicTransversals;
};

struct FirstVariation {
    double analytic = 0.0;
    double fd = 0.0;
    double mismatch = 0.0;
    double t_step = 1e-4;
};

namespace detail {

inline std::vector<Vec> derive(const std::vector<double>& t, const std::vector<Vec>& vals) {
    std::vector<Vec> out;
    for (std::size_t i = 0; i < t.size(); ++i)
        out.push_back(lagrange_derivative(t, i, [&](std::size_t j) -> const Vec& { return vals[j]; }));
    return out;
}

/// Energy of a sampled curve on its own grid (5-point velocities, Simpson).
inline double grid_energy(const MetricChart& chart, const std::vector<double>& t, const std::vector<Vec>& pts) {
    const auto vel = derive(t, pts);
    std::vector<double> e;
    for (std::size_t i = 0; i < t.size(); ++i) e.push_back(vel[i].dot(metric_value(chart, pts[i]) * vel[i]));
    return simpson(t, e);
}

}  // namespace detail

/// dE/dt at t = 0 for Q(s, t) = exp_{γ(s)}(t V(s)): the closed form against central
/// differences of the energy at t = ±1e-4.
inline FirstVariation first_variation(const MetricChart& chart, const RectangleSpec& rect) {
    const SampledCurve base = with_velocities(rect.base);
    validate_curve(chart, base);
    const std::size_t m = base.size();
    if (rect.V.size() != m) throw Error(ErrorKind::BadParam, "variation field needs one vector per sample");
    if (rect.end == EndCondition::FixedEnds && (rect.V.front().norm() > 1e-14 || rect.V.back().norm() > 1e-14))
        throw Error(ErrorKind::BadParam, "fixed ends require V to vanish at both ends");
    const std::vector<Vec> acc = base.accelerations.size() == m ? base.accelerations : detail::derive(base.t, base.velocities);

    FirstVariation out;
    std::vector<double> integrand;
    for (std::size_t i = 0; i < m; ++i) {
        const Vec& x = base.points[i];
        const Vec& v = base.velocities[i];
        const Vec cov = acc[i] + christoffel(chart, x).contract(v, v);
        integrand.push_back(rect.V[i].dot(metric_value(chart, x) * cov));
    }
    const Mat ga = metric_value(chart, base.points.front()), gb = metric_value(chart, base.points.back());
    out.analytic = 2.0 * (rect.V.back().dot(gb * base.velocities.back()) - rect.V.front().dot(ga * base.velocities.front()) -
                          simpson(base.t, integrand));

    OdeSettings coarse;
    coarse.step = 0.05;  // |tV| is tiny; the exp flow is nearly linear
    auto energy_at = [&](double tt) {
        std::vector<Vec> pts;
        for (std::size_t i = 0; i < m; ++i) pts.push_back(exp_map(chart, base.points[i], tt * rect.V[i], coarse));
        return detail::grid_energy(chart, base.t, pts);
    };
    out.fd = (energy_at(out.t_step) - energy_at(-out.t_step)) / (2.0 * out.t_step);
    out.mismatch = std::abs(out.analytic - out.fd);
    return out;
}

// ---------------------------------------------------------------------------
// Index form.

/// A field along a unit-speed geodesic given by frame components and their
/// derivatives as functions of arclength; breakpoints mark corners.
struct FrameField {
    std::function<Vec(double)> value;
    std::function<Vec(double)> deriv;
    std::vector<double> breakpoints;
};

/// phi(s) * dir, with dir fixed in the parallel frame.
inline FrameField scaled_field(std::function<double(double)> phi, std::function<double(double)> dphi, const Vec& dir) {
    return FrameField{[phi, dir](double s) { return Vec(phi(s) * dir); },
                      [dphi, dir](double s) { return Vec(dphi(s) * dir); }, {}};
}

namespace detail {

inline void require_unit_geodesic(const Trajectory& geo) {
    if (!geo.geodesic || geo.frame.empty()) throw Error(ErrorKind::BadParam, "expected a geodesic with a frame");
    if (std::abs(geo.initial_speed - 1.0) > 1e-8)
        throw Error(ErrorKind::BadParam, "index form expects a unit-speed geodesic");
}

/// Gauss-Legendre panels of length <= 0.05 between sorted breakpoints.
template <typename F>
double panel_integrate(double a, double b, std::vector<double> breaks, F&& f) {
    static const Quadrature q = gauss_legendre(8);
    breaks.push_back(a);
    breaks.push_back(b);
    std::sort(breaks.begin(), breaks.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        const double lo = std::max(a, breaks[i]), hi = std::min(b, breaks[i + 1]);
        if (!(hi > lo)) continue;
        const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / 0.05)));
        const double w = (hi - lo) / panels;
        for (int k = 0; k < panels; ++k) {
            const double c = lo + (k + 0.5) * w;
            for (std::size_t j = 0; j < q.nodes.size(); ++j) total += 0.5 * w * q.weights[j] * f(c + 0.5 * w * q.nodes[j]);
        }
    }
    return total;
}

inline Mat driving_at(const MetricChart& chart, const Trajectory& geo, double s) {
    const GeodesicPoint gp = geodesic_state_at(chart, geo, s);
    return driving_matrix(curvature(chart, gp.x).low, gp.v, gp.E);
}

}  // namespace detail

/// I(V, Z) = ∫_0^L [V'·Z' - V·M Z] ds in the parallel frame.
inline double index_form(const MetricChart& chart, const Trajectory& geo, const FrameField& V, const FrameField& Z) {
    detail::require_unit_geodesic(geo);
    std::vector<double> br = V.breakpoints;
    br.insert(br.end(), Z.breakpoints.begin(), Z.breakpoints.end());
    return detail::panel_integrate(0.0, geo.t.back(), br, [&](double s) {
        const Mat M = detail::driving_at(chart, geo, s);
        const Vec v = V.value(s), z = Z.value(s);
        return V.deriv(s).dot(Z.deriv(s)) - v.dot(M * z);
    });
}

/// Field from a Jacobi solution column (unit-speed geodesic).
inline FrameField jacobi_field(const MetricChart& chart, const JacobiSolution& js, int column = 0) {
    auto state = [&chart, &js](double s) { return flow_state_at(chart, js.flow, s); };
    const FlowLayout L = js.flow.layout;
    return FrameField{[state, L, column](double s) { return Vec(L.get_mat(state(s), L.F(), L.k).col(column)); },
                      [state, L, column](double s) { return Vec(L.get_mat(state(s), L.Fp(), L.k).col(column)); }, {}};
}

struct BasicInequality {
    double IV = 0.0;
    double IY = 0.0;
    double gap = 0.0;
    double IY_boundary = 0.0;    // Y(L)·Y'(L), equal to IY for a Jacobi field
    double lemma1_residual = 0.0;  // max |g(Y',Z) - g(Y,Z')| over pairs of fundamental fields
};

/// Compares I(V) with I(Y) for the Jacobi field Y matching V at both ends (V(0) = 0).
inline BasicInequality basic_inequality_check(const MetricChart& chart, const Trajectory& geo, const FrameField& V,
                                              const OdeSettings& s = {}) {
    detail::require_unit_geodesic(geo);
    const int n = chart.dim;
    const double L = geo.t.back();
    if (V.value(0.0).norm() > 1e-12) throw Error(ErrorKind::BadParam, "V must vanish at s = 0");
    const ConjugateReport cr = conjugate_points(chart, geo.x.front(), geo.v.front(), L, s);
    if (!cr.t_conjugate.empty())
        throw Error(ErrorKind::ConjugatePresent, "conjugate point at s = " + fmt17(cr.t_conjugate.front()) +
                                                     " within (0, " + fmt17(L) + "]");
    const JacobiSolution fund = jacobi_fundamental(chart, geo.x.front(), geo.v.front(), geo.frame.front(),
                                                   Mat::Zero(n, n), Mat::Identity(n, n), L, s);
    BasicInequality out;
    for (std::size_t i = 0; i < fund.t.size(); ++i) {
        const Mat W = fund.fp[i].transpose() * fund.f[i] - fund.f[i].transpose() * fund.fp[i];
        out.lemma1_residual = std::max(out.lemma1_residual, W.cwiseAbs().maxCoeff());
    }
    const Vec coef = fund.f.back().fullPivLu().solve(V.value(L));
    auto state = [&](double ss) { return flow_state_at(chart, fund.flow, ss); };
    const FlowLayout FL = fund.flow.layout;
    FrameField Y{[&](double ss) { return Vec(FL.get_mat(state(ss), FL.F(), n) * coef); },
                 [&](double ss) { return Vec(FL.get_mat(state(ss), FL.Fp(), n) * coef); }, {}};
    out.IV = index_form(chart, geo, V, V);
    out.IY = index_form(chart, geo, Y, Y);
    out.IY_boundary = Y.value(L).dot(Y.deriv(L));
    out.gap = out.IV - out.IY;
    return out;
}

struct NonminimalityWitness {
    double s1 = 0.0;  // corner
    double s2 = 0.0;  // conjugate point
    double L = 0.0;
    double index_value = 0.0;     // by quadrature
    double index_boundary = 0.0;  // Y(s1)·(Y'(s1) - W'(s1))
    FrameField field;             // (Y on [0, s1], W on [s1, L])
};

/// Past an interior conjugate point s2 the geodesic is not minimal: the field that
/// follows Y (Y(0) = Y(s2) = 0) up to s1 = s2 - eps and then the Jacobi field W with
/// W(s1) = Y(s1), W(L) = 0 has negative index.
inline NonminimalityWitness nonminimality_witness(const MetricChart& chart, const Trajectory& geo, double eps = 0.3,
                                                  const OdeSettings& s = {}) {
    detail::require_unit_geodesic(geo);
    const int n = chart.dim;
    const double L = geo.t.back();
    const ConjugateReport cr = conjugate_points(chart, geo.x.front(), geo.v.front(), L, s);
    double s2 = -1.0;
    for (double t : cr.t_conjugate)
        if (t < L - 1e-6) {
            s2 = t;
            break;
        }
    if (s2 < 0.0) throw Error(ErrorKind::ConjugateNotFound, "no interior conjugate point on (0, " + fmt17(L) + ")");
    NonminimalityWitness w;
    w.s2 = s2;
    w.L = L;
    w.s1 = s2 - std::min(eps, 0.5 * s2);

    // Y: combination of the fundamental fields vanishing at s2.
    auto fund = std::make_shared<JacobiSolution>(jacobi_fundamental(chart, geo.x.front(), geo.v.front(),
                                                                    geo.frame.front(), Mat::Zero(n, n),
                                                                    Mat::Identity(n, n), L, s));
    const FlowLayout FL = fund->flow.layout;
    const Mat F2 = FL.get_mat(flow_state_at(chart, fund->flow, s2), FL.F(), n);
    Eigen::JacobiSVD<Mat> svd(F2, Eigen::ComputeFullV);
    const Vec c = svd.matrixV().col(n - 1);

    // W from the fundamental system at s1: H(s1) = I, H' = 0; G(s1) = 0, G' = I.
    const GeodesicPoint g1 = geodesic_state_at(chart, geo, w.s1);
    const Mat I = Mat::Identity(n, n), O = Mat::Zero(n, n);
    auto tailH = std::make_shared<JacobiSolution>(jacobi_fundamental(chart, g1.x, g1.v, g1.E, I, O, L - w.s1, s));
    auto tailG = std::make_shared<JacobiSolution>(jacobi_fundamental(chart, g1.x, g1.v, g1.E, O, I, L - w.s1, s));
    const MetricChart* cp = &chart;
    auto Yv = [fund, FL, c, cp](double ss) { return Vec(FL.get_mat(flow_state_at(*cp, fund->flow, ss), FL.F(), FL.n) * c); };
    auto Yd = [fund, FL, c, cp](double ss) { return Vec(FL.get_mat(flow_state_at(*cp, fund->flow, ss), FL.Fp(), FL.n) * c); };
    const Vec a = Yv(w.s1);
    const Mat H_L = tailH->f.back(), G_L = tailG->f.back();
    const Vec b = G_L.fullPivLu().solve(Vec(-H_L * a));
    const double s1 = w.s1;
    auto comb = [tailH, tailG, a, b, s1, cp](double ss, bool deriv) {
        const FlowLayout& TL = tailH->flow.layout;
        const auto off = deriv ? TL.Fp() : TL.F();
        const Mat H = TL.get_mat(flow_state_at(*cp, tailH->flow, ss - s1), off, TL.k);
        const Mat G = TL.get_mat(flow_state_at(*cp, tailG->flow, ss - s1), off, TL.k);
        return Vec(H * a + G * b);
    };
    auto Wv = [comb](double ss) { return comb(ss, false); };
    auto Wd = [comb](double ss) { return comb(ss, true); };
    w.field = FrameField{[=](double ss) { return ss <= s1 ? Yv(ss) : Wv(ss); },
                         [=](double ss) { return ss < s1 ? Yd(ss) : Wd(ss); }, {s1}};
    w.index_value = index_form(chart, geo, w.field, w.field);
    w.index_boundary = a.dot(Yd(s1) - Wd(s1));
    return w;
}

}  // namespace rkit
