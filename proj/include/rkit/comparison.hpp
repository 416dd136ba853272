#pragma once

// Scalar Riccati equation with pole continuation and the comparison checks built on
// it: driving/value/Sturm comparison, Rauch ratios, Myers' bound, Bishop volumes.

#include "rkit/error.hpp"
#include "rkit/linalg.hpp"
#include "rkit/manifold.hpp"
#include "rkit/tensor.hpp"
#include "rkit/transport.hpp"
#include "rkit/variation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace rkit {

struct CurvatureProfile {
    std::function<double(double)> H;
    std::string label;

    double operator()(double t) const { return H(t); }
};

inline CurvatureProfile constant_profile(double K) {
    return {[K](double) { return K; }, "constant(" + fmt17(K) + ")"};
}

/// Sectional curvature of the plane (γ', E_2) along a unit-speed geodesic with frame.
inline CurvatureProfile sectional_profile(const MetricChart& chart, const Trajectory& geo) {
    detail::require_unit_geodesic(geo);
    if (geo.dim < 2) throw Error(ErrorKind::BadParam, "sectional profile needs dimension >= 2");
    return {[&chart, &geo](double t) { return detail::driving_at(chart, geo, t)(1, 1); }, "sectional along geodesic"};
}

/// Samples H on [0, tmax] at spacing h and h/2; a jump that does not shrink under
/// refinement is reported as a discontinuity.
inline void check_profile_continuity(const CurvatureProfile& H, double tmax, int samples = 1000) {
    auto max_jump = [&](int m) {
        double j = 0.0, prev = H(0.0);
        if (!std::isfinite(prev)) throw Error(ErrorKind::BadParam, "profile is not finite at t = 0");
        for (int i = 1; i <= m; ++i) {
            const double cur = H(tmax * i / m);
            if (!std::isfinite(cur)) throw Error(ErrorKind::BadParam, "profile is not finite at t = " + fmt17(tmax * i / m));
            j = std::max(j, std::abs(cur - prev));
            prev = cur;
        }
        return j;
    };
    const double j1 = max_jump(samples), j2 = max_jump(2 * samples);
    if (j2 > 1e-6 && j2 > 0.75 * j1) throw Error(ErrorKind::BadParam, "profile '" + H.label + "' looks discontinuous");
}

// ---------------------------------------------------------------------------
// Riccati.

struct RiccatiSegment {
    std::vector<double> t, f, fp;
};

struct RiccatiTrace {
    std::vector<RiccatiSegment> segments;
    std::vector<double> poles;
    double f0 = 0.0;  // +inf for the singular start
    double tmax = 0.0;
    double pole_threshold = 1e8;

    [[nodiscard]] std::optional<double> first_pole() const {
        if (poles.empty()) return std::nullopt;
        return poles.front();
    }

    /// Cubic Hermite value on the segment containing t.
    [[nodiscard]] double value_at(double t) const {
        for (const RiccatiSegment& s : segments) {
            if (t < s.t.front() || t > s.t.back()) continue;
            const auto it = std::upper_bound(s.t.begin(), s.t.end(), t);
            std::size_t i = static_cast<std::size_t>(it - s.t.begin());
            if (i == s.t.size()) return s.f.back();
            --i;
            const double h = s.t[i + 1] - s.t[i], u = (t - s.t[i]) / h;
            const double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
            const double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
            return h00 * s.f[i] + h10 * h * s.fp[i] + h01 * s.f[i + 1] + h11 * h * s.fp[i + 1];
        }
        throw Error(ErrorKind::BadParam, "t = " + fmt17(t) + " is not covered by the trace");
    }

    /// Row-wise samples (t, f, segment id).
    [[nodiscard]] std::vector<std::tuple<double, double, int>> rows() const {
        std::vector<std::tuple<double, double, int>> out;
        for (std::size_t k = 0; k < segments.size(); ++k)
            for (std::size_t i = 0; i < segments[k].t.size(); ++i)
                out.emplace_back(segments[k].t[i], segments[k].f[i], static_cast<int>(k));
        return out;
    }
};

/// f' = -f^2 - H from f(0+) = f0 (f0 = +inf allowed) to tmax. Steps shrink like
/// 0.002/|f|; past |f| = 1e8 the pole a = t - 1/f is recorded and integration restarts
/// at a + 1e-8 with f = 1e8.
inline RiccatiTrace riccati_solve(const CurvatureProfile& H, double f0, double tmax, double base_step = 1e-3) {
    if (!(tmax > 0.0)) throw Error(ErrorKind::BadParam, "tmax must be positive");
    if (std::isnan(f0) || f0 == -std::numeric_limits<double>::infinity())
        throw Error(ErrorKind::BadParam, "f(0+) must be real or +inf");
    constexpr double eps = 1e-8;
    RiccatiTrace tr;
    tr.f0 = f0;
    tr.tmax = tmax;
    tr.pole_threshold = 1.0 / eps;
    auto rhs = [&](double t, double f) {
        const double h = H(t);
        if (!std::isfinite(h)) throw Error(ErrorKind::StepFault, "curvature profile not finite at t = " + fmt17(t));
        return -f * f - h;
    };
    double t = 0.0, f = f0;
    if (std::isinf(f0)) {
        t = 1e-6;
        f = 1.0 / t - H(0.0) * t / 3.0;
    }
    RiccatiSegment seg;
    auto push = [&](double tt, double ff) {
        seg.t.push_back(tt);
        seg.f.push_back(ff);
        seg.fp.push_back(rhs(tt, ff));
    };
    push(t, f);
    while (t < tmax) {
        double h = std::min({base_step, 0.002 / std::max(std::abs(f), 1e-300), tmax - t});
        if (h < 1e-15 * std::max(1.0, t)) throw Error(ErrorKind::StepFault, "Riccati step underflow at t = " + fmt17(t));
        const double k1 = rhs(t, f), k2 = rhs(t + h / 2, f + h / 2 * k1), k3 = rhs(t + h / 2, f + h / 2 * k2),
                     k4 = rhs(t + h, f + h * k3);
        f += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        t = (tmax - t - h <= 0.0) ? tmax : t + h;
        if (!std::isfinite(f)) throw Error(ErrorKind::StepFault, "Riccati solution not finite at t = " + fmt17(t));
        push(t, f);
        if (f < -tr.pole_threshold) {
            const double a = t - 1.0 / f;
            tr.poles.push_back(a);
            tr.segments.push_back(std::move(seg));
            seg = RiccatiSegment{};
            t = a + eps;
            f = tr.pole_threshold;
            if (t >= tmax) break;
            push(t, f);
        }
    }
    if (!seg.t.empty()) tr.segments.push_back(std::move(seg));
    return tr;
}

namespace detail {

inline void require_order(const CurvatureProfile& H, const CurvatureProfile& K, double tmax, int samples = 2000) {
    for (int i = 0; i <= samples; ++i) {
        const double t = tmax * i / samples;
        if (H(t) < K(t) - 1e-12 * std::max(1.0, std::abs(K(t))))
            throw Error(ErrorKind::InputOrderViolated, "H < K at t = " + fmt17(t) + " (" + fmt17(H(t)) + " < " +
                                                           fmt17(K(t)) + ")");
    }
}

/// max over the shared interval of (f - g) / max(1, |g|), at the samples of both traces.
inline double max_excess(const RiccatiTrace& f, const RiccatiTrace& g, double end) {
    double worst = -std::numeric_limits<double>::infinity();
    auto scan = [&](const RiccatiTrace& a, const RiccatiTrace& b, double sign) {
        for (const auto& s : a.segments)
            for (std::size_t i = 0; i < s.t.size(); ++i) {
                const double t = s.t[i];
                if (t >= end || t < b.segments.front().t.front()) continue;
                double other;
                try {
                    other = b.value_at(t);
                } catch (const Error&) {
                    continue;
                }
                const double fv = sign > 0 ? s.f[i] : other, gv = sign > 0 ? other : s.f[i];
                worst = std::max(worst, (fv - gv) / std::max(1.0, std::abs(gv)));
            }
    };
    scan(f, g, 1.0);
    scan(g, f, -1.0);
    return worst;
}

inline double joint_end(const RiccatiTrace& f, const RiccatiTrace& g, double tmax) {
    double end = tmax;
    if (f.first_pole()) end = std::min(end, *f.first_pole());
    if (g.first_pole()) end = std::min(end, *g.first_pole());
    return end;
}

}  // namespace detail

struct DrivingComparison {
    bool verified = false;
    double max_violation = 0.0;  // max relative excess of f over g (negative when strictly below)
    double joint_end = 0.0;
    bool pole_order_ok = false;
    RiccatiTrace f, g;
};

/// f' = -f^2 - H, g' = -g^2 - K with H >= K and the same start: f <= g, and g lives
/// at least as long as f.
inline DrivingComparison compare_driving(const CurvatureProfile& H, const CurvatureProfile& K, double f0, double tmax) {
    detail::require_order(H, K, tmax);
    DrivingComparison out;
    out.f = riccati_solve(H, f0, tmax);
    out.g = riccati_solve(K, f0, tmax);
    out.joint_end = detail::joint_end(out.f, out.g, tmax);
    out.max_violation = detail::max_excess(out.f, out.g, out.joint_end);
    const auto pf = out.f.first_pole(), pg = out.g.first_pole();
    out.pole_order_ok = !pg || (pf && *pg >= *pf - 1e-8);
    out.verified = out.max_violation <= 1e-8 && out.pole_order_ok;
    return out;
}

struct ValueComparison {
    bool verified = false;
    double max_violation = 0.0;
    double joint_end = 0.0;
};

/// Same driving function, f(0) <= g(0): f <= g on the joint interval.
inline ValueComparison value_compare(const CurvatureProfile& H, double f0, double g0, double tmax) {
    if (!(f0 <= g0)) throw Error(ErrorKind::BadParam, "value comparison needs f0 <= g0");
    const RiccatiTrace f = riccati_solve(H, f0, tmax), g = riccati_solve(H, g0, tmax);
    ValueComparison out;
    out.joint_end = detail::joint_end(f, g, tmax);
    out.max_violation = detail::max_excess(f, g, out.joint_end);
    out.verified = out.max_violation <= 1e-8;
    return out;
}

struct SturmResult {
    std::optional<double> zero_j, zero_k;
    bool ordered = false;
};

/// First positive zero of y'' = -H y, y(0) = 0, y'(0) = 1 on (0, tmax].
inline std::optional<double> first_zero(const CurvatureProfile& H, double tmax, double step = 1e-3) {
    auto rhs = [&](double t, const State& y, State& dy) {
        dy.resize(2);
        dy[0] = y[1];
        dy[1] = -H(t) * y[0];
    };
    State y{0.0, 1.0};
    double t = 0.0;
    const int N = static_cast<int>(std::ceil(tmax / step));
    for (int i = 0; i < N; ++i) {
        const double t1 = std::min(tmax, (i + 1) * (tmax / N));
        const State y1 = ode::rk4_step(rhs, t, y, t1 - t);
        if (y1[0] <= 0.0) {
            double a = t, b = t1;
            while (b - a > 1e-13 * std::max(1.0, b)) {
                const double m = 0.5 * (a + b);
                (ode::rk4_step(rhs, t, y, m - t)[0] > 0.0 ? a : b) = m;
            }
            return 0.5 * (a + b);
        }
        t = t1;
        y = y1;
    }
    return std::nullopt;
}

inline SturmResult sturm_check(const CurvatureProfile& H, const CurvatureProfile& K, double tmax) {
    detail::require_order(H, K, tmax);
    SturmResult out;
    out.zero_j = first_zero(H, tmax);
    out.zero_k = first_zero(K, tmax);
    if (out.zero_k)
        out.ordered = out.zero_j && *out.zero_j <= *out.zero_k + 1e-8;
    else
        out.ordered = true;
    return out;
}

// ---------------------------------------------------------------------------
// Rauch, Myers.

struct RauchResult {
    std::vector<double> t;
    std::vector<double> ratio;  // g_M(J,J) / g_N(L,L), t > 0
    bool monotone = false;
    double max_decrease = 0.0;
};

namespace detail {

/// Range of sectional curvatures of planes containing γ' (normal block of M, unit speed).
inline std::pair<double, double> sectional_range(const Mat& M) {
    const int n = static_cast<int>(M.rows());
    const Mat N = M.bottomRightCorner(n - 1, n - 1);
    const Vec ev = Eigen::SelfAdjointEigenSolver<Mat>(Mat(0.5 * (N + N.transpose()))).eigenvalues();
    return {ev.minCoeff(), ev.maxCoeff()};
}

}  // namespace detail

/// J on M and L on N with J(0) = L(0) = 0, J'(0), L'(0) of length J0p_len along E_2.
inline RauchResult rauch_ratio(const MetricChart& chartM, const Trajectory& geoM, const MetricChart& chartN,
                               const Trajectory& geoN, double J0p_len, double tmax, const OdeSettings& s = {}) {
    detail::require_unit_geodesic(geoM);
    detail::require_unit_geodesic(geoN);
    if (chartM.dim != chartN.dim || chartM.dim < 2) throw Error(ErrorKind::BadParam, "Rauch needs equal dimensions >= 2");
    const int n = chartM.dim;
    Mat F0 = Mat::Zero(n, 1), Fp0 = Mat::Zero(n, 1);
    Fp0(1, 0) = J0p_len;
    const auto JM = jacobi_fundamental(chartM, geoM.x.front(), geoM.v.front(), geoM.frame.front(), F0, Fp0, tmax, s);
    const auto JN = jacobi_fundamental(chartN, geoN.x.front(), geoN.v.front(), geoN.frame.front(), F0, Fp0, tmax, s);
    if (JM.t.size() != JN.t.size()) throw Error(ErrorKind::BadParam, "sample grids differ");
    RauchResult out;
    for (std::size_t i = 0; i < JM.t.size(); ++i) {
        const auto [mlo, mhi] = detail::sectional_range(JM.M[i]);
        const auto [nlo, nhi] = detail::sectional_range(JN.M[i]);
        (void)mlo;
        (void)nhi;
        if (mhi > nlo + 1e-10 * std::max(1.0, std::abs(nlo)))
            throw Error(ErrorKind::InputOrderViolated, "curvature of M exceeds that of N at t = " + fmt17(JM.t[i]));
        if (i == 0) continue;
        out.t.push_back(JM.t[i]);
        out.ratio.push_back(JM.f[i].col(0).squaredNorm() / JN.f[i].col(0).squaredNorm());
    }
    for (std::size_t i = 1; i < out.ratio.size(); ++i)
        out.max_decrease = std::max(out.max_decrease, (out.ratio[i - 1] - out.ratio[i]) / std::max(1.0, out.ratio[i - 1]));
    out.monotone = out.max_decrease <= 1e-8;
    return out;
}

struct MyersResult {
    double ric_min = 0.0;
    std::optional<double> conjugate_distance;
    double bound = 0.0;
    bool satisfied = false;
};

/// Ric(γ', γ') >= (n-1)c along the geodesic forces a conjugate point by π/√c.
inline MyersResult myers_check(const MetricChart& chart, const Vec& p, const Vec& v_unit, double c,
                               const OdeSettings& s = {}) {
    if (!(c > 0.0)) throw Error(ErrorKind::BadParam, "Myers needs c > 0");
    const int n = chart.dim;
    MyersResult out;
    out.bound = M_PI / std::sqrt(c);
    const double T = out.bound + 0.1;
    const Trajectory geo = integrate_geodesic(chart, p, v_unit, T, s);
    out.ric_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < geo.size(); i += 10) {
        const Mat M = driving_matrix(curvature(chart, geo.x[i]).low, geo.v[i], geo.frame[i]);
        const double ric = M.trace() - M(0, 0);
        out.ric_min = std::min(out.ric_min, ric);
        if (ric < (n - 1) * c - 1e-9 * std::max(1.0, (n - 1) * c))
            throw Error(ErrorKind::InputOrderViolated, "Ric(γ',γ') = " + fmt17(ric) + " < (n-1)c at t = " + fmt17(geo.t[i]));
    }
    const ConjugateReport cr = conjugate_points(chart, p, v_unit, T, s);
    if (!cr.t_conjugate.empty()) out.conjugate_distance = cr.t_conjugate.front();
    out.satisfied = out.conjugate_distance && *out.conjugate_distance <= out.bound + 1e-4;
    return out;
}

// ---------------------------------------------------------------------------
// Bishop volume comparison.

/// s_K(r) = sin(√K r)/√K, r, sinh(√-K r)/√-K.
inline double s_K(double K, double r) {
    if (K > 0) return std::sin(std::sqrt(K) * r) / std::sqrt(K);
    if (K < 0) return std::sinh(std::sqrt(-K) * r) / std::sqrt(-K);
    return r;
}

/// Area of the unit sphere S^{n-1}.
inline double sphere_area(int n) { return 2.0 * std::pow(M_PI, n / 2.0) / std::tgamma(n / 2.0); }

/// Unit directions with equal weights: uniform angles (n = 2), Fibonacci sphere (n = 3).
inline std::vector<Vec> direction_set(int n, int count) {
    std::vector<Vec> out;
    if (n == 2) {
        for (int k = 0; k < count; ++k) {
            const double a = 2 * M_PI * k / count;
            out.push_back(to_vec({std::cos(a), std::sin(a)}));
        }
    } else if (n == 3) {
        const double ga = M_PI * (3.0 - std::sqrt(5.0));
        for (int k = 0; k < count; ++k) {
            const double z = 1.0 - (2.0 * k + 1.0) / count, rho = std::sqrt(1.0 - z * z);
            out.push_back(to_vec({rho * std::cos(ga * k), rho * std::sin(ga * k), z}));
        }
    } else {
        throw Error(ErrorKind::BadParam, "direction quadrature is implemented for n = 2 and n = 3");
    }
    return out;
}

struct VolumeReport {
    double r = 0.0;
    double Kref = 0.0;
    double area = 0.0;
    double reference = 0.0;
    double ratio = 0.0;
    bool ratio_ok = false;        // area <= reference (relative 1e-9)
    bool pointwise_ok = false;    // det J <= s_K^{n-1} in every direction
    int pointwise_violations = 0;
    double ric_min = 0.0;         // min Ric(γ', γ') sampled along the radial geodesics
    std::vector<double> jacobian;  // det J(r, u) per direction
};

namespace detail {

struct RadialSample {
    double jac = 0.0;
    double ric_min = std::numeric_limits<double>::infinity();
    bool folded = false;
};

inline RadialSample radial_jacobian(const MetricChart& chart, const Vec& p, const Mat& E, const Vec& w, double r,
                                    const OdeSettings& s) {
    const int n = chart.dim;
    const Vec v = E * w;
    const Mat Ea = adapted_frame(metric_value(chart, p), v);
    Mat F0 = Mat::Zero(n, n - 1), Fp0 = Mat::Zero(n, n - 1);
    for (int j = 1; j < n; ++j) Fp0(j, j - 1) = 1.0;
    const FlowLayout L{n, n - 1, true};
    RadialSample out;
    int count = 0;
    State last;
    run_flow(chart, L, L.pack(p, v, Ea, F0, Fp0), r, s, [&](double t, const State& y) {
        last = y;
        const Mat F = L.get_mat(y, L.F(), n - 1);
        if (t > 0.0 && F.bottomRows(n - 1).determinant() <= 0.0) out.folded = true;
        if (count++ % 8 == 0) {
            const Mat M = driving_matrix(curvature(chart, L.get_vec(y, L.x())).low, L.get_vec(y, L.v()),
                                         L.get_mat(y, L.E(), n));
            out.ric_min = std::min(out.ric_min, M.trace() - M(0, 0));
        }
    });
    out.jac = L.get_mat(last, L.F(), n - 1).bottomRows(n - 1).determinant();
    return out;
}

inline std::vector<RadialSample> radial_sweep(const MetricChart& chart, const Vec& p, double r, int directions, int jobs) {
    require_domain(chart, p);
    if (!(r > 0.0)) throw Error(ErrorKind::BadParam, "radius must be positive");
    if (jobs < 1) throw Error(ErrorKind::BadParam, "jobs must be >= 1");
    const int n = chart.dim;
    const Mat E = orthonormalize(metric_value(chart, p), Mat::Identity(n, n));
    const std::vector<Vec> dirs = direction_set(n, directions);
    OdeSettings s;
    s.step = std::min(1e-2, r / 16);
    std::vector<RadialSample> out(dirs.size());
    std::vector<std::exception_ptr> errs(static_cast<std::size_t>(jobs));
    auto work = [&](int id) {
        try {
            for (std::size_t k = static_cast<std::size_t>(id); k < dirs.size(); k += static_cast<std::size_t>(jobs))
                out[k] = radial_jacobian(chart, p, E, dirs[k], r, s);
        } catch (...) {
            errs[static_cast<std::size_t>(id)] = std::current_exception();
        }
    };
    if (jobs == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int id = 0; id < jobs; ++id) pool.emplace_back(work, id);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errs)
        if (e) std::rethrow_exception(e);
    return out;
}

inline int default_directions(int n) { return n == 2 ? 512 : 2048; }

}  // namespace detail

/// Area of the geodesic sphere S_p(r) by direction quadrature of det J(r, u), against
/// the constant-curvature reference s_K(r)^{n-1} Ω_{n-1}.
inline VolumeReport volume_compare(const MetricChart& chart, const Vec& p, double r, double Kref, int directions = 0,
                                   int jobs = 1) {
    const int n = chart.dim;
    if (directions <= 0) directions = detail::default_directions(n);
    const auto samples = detail::radial_sweep(chart, p, r, directions, jobs);
    VolumeReport rep;
    rep.r = r;
    rep.Kref = Kref;
    rep.ric_min = std::numeric_limits<double>::infinity();
    const double need = (n - 1) * Kref;
    for (const auto& s : samples) {
        rep.ric_min = std::min(rep.ric_min, s.ric_min);
        if (s.folded) throw Error(ErrorKind::BadParam, "radius reaches a conjugate point in a sampled direction");
    }
    if (rep.ric_min < need - 1e-9 * std::max(1.0, std::abs(need)))
        throw Error(ErrorKind::InputOrderViolated, "Ric = " + fmt17(rep.ric_min) + " < (n-1)K = " + fmt17(need));
    const double ref1 = std::pow(s_K(Kref, r), n - 1);
    const double omega = sphere_area(n);
    double sum = 0.0;
    for (const auto& s : samples) {
        rep.jacobian.push_back(s.jac);
        sum += s.jac;
        if (s.jac > ref1 * (1.0 + 1e-9)) ++rep.pointwise_violations;
    }
    rep.area = omega * sum / static_cast<double>(samples.size());
    rep.reference = omega * ref1;
    rep.ratio = rep.area / rep.reference;
    rep.ratio_ok = rep.ratio <= 1.0 + 1e-9;
    rep.pointwise_ok = rep.pointwise_violations == 0;
    return rep;
}

struct ExpansionFit {
    double fitted = 0.0;  // c_n S(p)
    double scalar = 0.0;  // S(p)
    std::optional<double> c_n;
    std::vector<double> radii;
    std::vector<double> coefficients;  // (1 - area / (r^{n-1} Ω)) / r^2 per radius
};

/// r^2 coefficient of area(S_p(r)) / (r^{n-1} Ω_{n-1}), Richardson-extrapolated over
/// r = 0.05, 0.1, 0.2.
inline ExpansionFit scalar_expansion_fit(const MetricChart& chart, const Vec& p, int directions = 0, int jobs = 1) {
    const int n = chart.dim;
    if (directions <= 0) directions = detail::default_directions(n);
    ExpansionFit out;
    out.radii = {0.05, 0.1, 0.2};
    const double omega = sphere_area(n);
    for (double r : out.radii) {
        const auto samples = detail::radial_sweep(chart, p, r, directions, jobs);
        double sum = 0.0;
        for (const auto& s : samples) sum += s.jac;
        const double area = omega * sum / static_cast<double>(samples.size());
        out.coefficients.push_back((1.0 - area / (std::pow(r, n - 1) * omega)) / (r * r));
    }
    const auto& q = out.coefficients;
    const double q1 = (4 * q[0] - q[1]) / 3, q2 = (4 * q[1] - q[2]) / 3;
    out.fitted = (16 * q1 - q2) / 15;
    const PointGeometry pg = point_geometry(chart, p, true);
    out.scalar = ricci(pg.R, pg.jet.g).scalar;
    if (std::abs(out.scalar) > 1e-9) out.c_n = out.fitted / out.scalar;
    return out;
}

}  // namespace rkit
