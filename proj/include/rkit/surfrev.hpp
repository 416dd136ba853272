#pragma once

// Surfaces of revolution r = f(u), z = h(u): chart, Clairaut constant, barriers,
// geodesic classification and the angular change between barriers.
//
// The direction of a geodesic at (u0, θ0) is the angle φ0 from the meridian, so the
// Clairaut constant is c = f(u0) sin φ0 = f² θ' at unit speed.

#include "rkit/error.hpp"
#include "rkit/expr.hpp"
#include "rkit/linalg.hpp"
#include "rkit/manifold.hpp"
#include "rkit/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace rkit {

struct Profile {
    Expression f;  // distance from the axis
    Expression h;  // height
    double u_min = 0.0;
    double u_max = 0.0;
    bool arclength = false;
    bool periodic = false;  // f, h periodic with period u_max - u_min

    [[nodiscard]] double F(double u) const { return f.eval(Vec::Constant(1, u)); }
    [[nodiscard]] double dF(double u) const { return f.eval2(Vec::Constant(1, u)).grad(0); }
    [[nodiscard]] double dH(double u) const { return h.eval2(Vec::Constant(1, u)).grad(0); }
    /// |(f', h')|, the speed of the profile curve.
    [[nodiscard]] double speed(double u) const {
        const double a = dF(u), b = dH(u);
        return std::sqrt(a * a + b * b);
    }
    [[nodiscard]] double period() const { return u_max - u_min; }
};

/// Parses and validates a profile: f > 0 and, with the arclength flag, f'^2 + h'^2 = 1
/// on 2048 samples.
inline Profile make_profile(const std::string& f, const std::string& h, double u_min, double u_max,
                            bool arclength, bool periodic = false) {
    if (!(u_min < u_max) || !std::isfinite(u_min) || !std::isfinite(u_max))
        throw Error(ErrorKind::BadProfile, "u_range must be a finite interval [a, b] with a < b");
    Profile p;
    p.f = Expression::parse(f, {"u"});
    p.h = Expression::parse(h, {"u"});
    p.u_min = u_min;
    p.u_max = u_max;
    p.arclength = arclength;
    p.periodic = periodic;
    constexpr int m = 2048;
    for (int i = 0; i <= m; ++i) {
        const double u = u_min + (u_max - u_min) * i / m;
        double fu = 0.0, s = 0.0;
        try {
            fu = p.F(u);
            s = p.speed(u);
        } catch (const Error& e) {
            throw Error(ErrorKind::BadProfile, "profile cannot be evaluated at u = " + fmt17(u) + " (" + e.what() + ")");
        }
        if (!(fu > 0.0)) throw Error(ErrorKind::BadProfile, "f(u) <= 0 at u = " + fmt17(u));
        if (arclength && std::abs(s * s - 1.0) > 1e-9)
            throw Error(ErrorKind::BadProfile, "f'^2 + h'^2 = " + fmt17(s * s) + " != 1 at u = " + fmt17(u) +
                                                   " although the profile is flagged arclength");
        if (!arclength && !(s > 0.0)) throw Error(ErrorKind::BadProfile, "profile is singular at u = " + fmt17(u));
    }
    return p;
}

/// Arclength torus profile f = R + r cos(u/r), h = r sin(u/r), one period about u = 0.
inline Profile torus_profile(double R, double r) {
    const std::string a = fmt17(R), b = fmt17(r);
    return make_profile(a + " + " + b + "*cos(u/" + b + ")", b + "*sin(u/" + b + ")", -M_PI * r, M_PI * r, true, true);
}

/// Chart (u, θ) with ds² = (f'² + h'²) du² + f² dθ²; the first entry is 1 for arclength profiles.
inline MetricChart surface_of_revolution(const Profile& p) {
    const std::string f = "(" + p.f.print() + ")";
    std::string guu = "1";
    if (!p.arclength) {
        const std::string df = "(" + p.f.derivative(0).print() + ")", dh = "(" + p.h.derivative(0).print() + ")";
        guu = df + "^2 + " + dh + "^2";
    }
    std::optional<std::string> domain;
    if (!p.periodic) domain = "(u - (" + fmt17(p.u_min) + "))*((" + fmt17(p.u_max) + ") - u)";
    return make_chart("surfrev(f=" + p.f.print() + ",h=" + p.h.print() + ")", {"u", "theta"},
                      {{guu, "0"}, {"0", f + "^2"}}, domain);
}

// ---------------------------------------------------------------------------
// Clairaut.

struct ClairautRecord {
    std::vector<double> c;
    double c0 = 0.0;
    double drift = 0.0;
};

inline ClairautRecord clairaut_constant(const MetricChart& chart, const Trajectory& traj) {
    if (chart.dim != 2) throw Error(ErrorKind::BadParam, "Clairaut constant needs a (u, theta) chart");
    ClairautRecord out;
    for (std::size_t i = 0; i < traj.size(); ++i) out.c.push_back((metric_value(chart, traj.x[i]) * traj.v[i])(1));
    out.c0 = out.c.front();
    for (double c : out.c) out.drift = std::max(out.drift, std::abs(c - out.c0));
    return out;
}

// ---------------------------------------------------------------------------
// Barriers.

enum class BarrierKind { ParallelGeodesic, Transversal };

inline const char* to_string(BarrierKind k) {
    return k == BarrierKind::ParallelGeodesic ? "parallel_geodesic" : "transversal";
}

struct Barrier {
    double u = 0.0;
    BarrierKind kind = BarrierKind::Transversal;
    double fprime = 0.0;
};

/// Roots of f(u) = |c| on the u range: sign changes on a 2048-cell grid refined by
/// bisection, plus tangential roots at critical points of f. Periodic profiles report
/// roots in [u_min, u_max).
inline std::vector<Barrier> barriers(const Profile& p, double c, int grid = 2048, double tol = 1e-10) {
    if (!std::isfinite(c)) throw Error(ErrorKind::BadParam, "c must be finite");
    const double ac = std::abs(c);
    auto g = [&](double u) { return p.F(u) - ac; };
    auto bisect = [&](auto&& fn, double a, double b) {
        double fa = fn(a);
        while (b - a > tol) {
            const double m = 0.5 * (a + b), fm = fn(m);
            if ((fm > 0) == (fa > 0)) {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        return 0.5 * (a + b);
    };
    std::vector<double> us, gs, ds;
    for (int i = 0; i <= grid; ++i) {
        const double u = p.u_min + (p.u_max - p.u_min) * i / grid;
        us.push_back(u);
        gs.push_back(g(u));
        ds.push_back(p.dF(u));
    }
    std::vector<double> roots;
    const double vtol = 1e-10 * std::max(1.0, ac);
    for (int i = 0; i < grid; ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (std::abs(gs[k]) <= vtol) roots.push_back(us[k]);
        else if (std::abs(gs[k + 1]) > vtol && (gs[k] > 0) != (gs[k + 1] > 0)) roots.push_back(bisect(g, us[k], us[k + 1]));
        // tangential contact: f' changes sign and f touches |c|
        if (ds[k] != 0.0 && ds[k + 1] != 0.0 && (ds[k] > 0) != (ds[k + 1] > 0)) {
            const double uc = bisect([&](double u) { return p.dF(u); }, us[k], us[k + 1]);
            if (std::abs(g(uc)) <= vtol) roots.push_back(uc);
        }
    }
    if (std::abs(gs.back()) <= vtol) roots.push_back(us.back());
    if (p.periodic)
        for (double& r : roots)
            if (r >= p.u_max - 1e-9) r -= p.period();
    std::sort(roots.begin(), roots.end());
    std::vector<Barrier> out;
    for (double r : roots) {
        if (!out.empty() && r - out.back().u < 1e-8) continue;
        double d = p.dF(r);
        if (std::abs(d) > 1e-7)
            for (int it = 0; it < 3; ++it) {
                r -= g(r) / d;
                d = p.dF(r);
            }
        out.push_back({r, std::abs(d) <= 1e-7 ? BarrierKind::ParallelGeodesic : BarrierKind::Transversal, d});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Classification.

enum class GeodesicClass { Meridian, ParallelGeodesic, Oscillating, AsymptoticToParallel, Unbounded, Circulating };

inline const char* to_string(GeodesicClass k) {
    switch (k) {
        case GeodesicClass::Meridian: return "meridian";
        case GeodesicClass::ParallelGeodesic: return "parallel_geodesic";
        case GeodesicClass::Oscillating: return "oscillating";
        case GeodesicClass::AsymptoticToParallel: return "asymptotic_to_parallel";
        case GeodesicClass::Unbounded: return "unbounded";
        case GeodesicClass::Circulating: return "circulating";
    }
    return "unknown";
}

struct Classification {
    GeodesicClass tag = GeodesicClass::Meridian;
    double c = 0.0;
    std::vector<Barrier> barriers;
    std::optional<Barrier> lower, upper;  // barriers bounding the strip containing u0
    bool confirmed = false;               // the confirming integration agrees
    double u_low = 0.0, u_high = 0.0;     // u range visited by the confirming integration
    double confirm_length = 100.0;
};

/// Unit initial velocity at u0 making angle φ0 with the meridian.
inline Vec surfrev_velocity(const Profile& p, double u0, double phi0) {
    return to_vec({std::cos(phi0) / p.speed(u0), std::sin(phi0) / p.F(u0)});
}

namespace detail {

/// Nearest barriers below and above u0 (periodic profiles: over neighbouring periods).
inline std::pair<std::optional<Barrier>, std::optional<Barrier>> bracket(const Profile& p, const std::vector<Barrier>& bs,
                                                                         double u0, double dir) {
    std::vector<Barrier> cand;
    for (const Barrier& b : bs) {
        if (p.periodic)
            for (int k = -2; k <= 2; ++k) cand.push_back({b.u + k * p.period(), b.kind, b.fprime});
        else
            cand.push_back(b);
    }
    std::optional<Barrier> lo, hi;
    const double eps = 1e-8;
    for (const Barrier& b : cand) {
        // a barrier at u0 itself bounds the side the geodesic cannot cross
        const bool at = std::abs(b.u - u0) <= eps;
        if ((b.u < u0 - eps || (at && dir > 0)) && (!lo || b.u > lo->u)) lo = b;
        if ((b.u > u0 + eps || (at && dir < 0)) && (!hi || b.u < hi->u)) hi = b;
    }
    return {lo, hi};
}

}  // namespace detail

/// Classifies the geodesic from (u0, θ0) at angle φ0 from the meridian: decided from the
/// barrier tags, then checked by integrating to length 100.
inline Classification classify_geodesic(const Profile& p, double u0, double theta0, double phi0,
                                        const OdeSettings& s = {}) {
    const MetricChart chart = surface_of_revolution(p);
    Classification out;
    const double f0 = p.F(u0), d0 = p.dF(u0);
    out.c = f0 * std::sin(phi0);
    const Vec x0 = to_vec({u0, theta0}), v0 = surfrev_velocity(p, u0, phi0);
    const bool tangent = std::abs(std::cos(phi0)) <= 1e-12;

    if (std::abs(out.c) <= 1e-12 * f0) {
        out.tag = GeodesicClass::Meridian;
    } else if (tangent && std::abs(d0) <= 1e-9) {
        out.tag = GeodesicClass::ParallelGeodesic;
    } else {
        out.barriers = barriers(p, out.c);
        // at a tangency the strip lies on the side where f grows
        const double dir = tangent ? (d0 > 0 ? 1.0 : -1.0) : 0.0;
        std::tie(out.lower, out.upper) = detail::bracket(p, out.barriers, u0, dir);
        if (!out.lower && !out.upper && p.periodic) out.tag = GeodesicClass::Circulating;
        else if (!out.lower || !out.upper) out.tag = GeodesicClass::Unbounded;
        else if (out.lower->kind == BarrierKind::ParallelGeodesic || out.upper->kind == BarrierKind::ParallelGeodesic)
            out.tag = GeodesicClass::AsymptoticToParallel;
        else out.tag = GeodesicClass::Oscillating;
    }

    // confirming integration
    out.u_low = out.u_high = u0;
    bool exited = false;
    Trajectory tr;
    std::vector<double> exit_state;
    try {
        tr = integrate_geodesic(chart, x0, v0, out.confirm_length, s);
    } catch (const DomainExit& e) {
        exited = true;
        exit_state = e.last_state();
    }
    for (const Vec& x : tr.x) {
        out.u_low = std::min(out.u_low, x(0));
        out.u_high = std::max(out.u_high, x(0));
    }
    if (exited && !exit_state.empty()) {
        out.u_low = std::min(out.u_low, exit_state[0]);
        out.u_high = std::max(out.u_high, exit_state[0]);
    }
    const double slack = 1e-7;
    switch (out.tag) {
        case GeodesicClass::Meridian:
            out.confirmed = true;
            for (const Vec& v : tr.v) out.confirmed = out.confirmed && std::abs(v(1)) <= 1e-9;
            if (exited) out.confirmed = exit_state.size() == 4 && std::abs(exit_state[3]) <= 1e-9;
            break;
        case GeodesicClass::ParallelGeodesic:
            out.confirmed = !exited && out.u_high - out.u_low <= 1e-6;
            break;
        case GeodesicClass::Oscillating: {
            int turns = 0;
            for (std::size_t i = 1; i < tr.v.size(); ++i) turns += (tr.v[i](0) > 0) != (tr.v[i - 1](0) > 0) ? 1 : 0;
            out.confirmed = !exited && out.u_low >= out.lower->u - slack && out.u_high <= out.upper->u + slack && turns >= 1;
            break;
        }
        case GeodesicClass::AsymptoticToParallel:
            out.confirmed = !exited && out.u_low >= out.lower->u - slack && out.u_high <= out.upper->u + slack;
            break;
        case GeodesicClass::Unbounded: out.confirmed = exited; break;
        case GeodesicClass::Circulating: out.confirmed = !exited && out.u_high - out.u_low >= p.period(); break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Angular change between barriers.

struct DeltaTheta {
    double value = 0.0;
    double lower_half = 0.0;  // u_- to the midpoint
    double upper_half = 0.0;  // midpoint to u_+
    double u_minus = 0.0, u_plus = 0.0;
    bool per_period = false;  // no barriers: change over one period of a periodic profile
    double turns = 0.0;       // value / 2π
    bool near_rational = false;
    long long p = 0, q = 1;   // best rational approximation of turns with q <= 100
};

namespace detail {

/// ∫ over ξ in [0, X] of the panel-wise Gauss-Legendre rule, doubling panels until the
/// change is below tol.
template <typename F>
double gl_adaptive(F&& fn, double X, double tol) {
    static const Quadrature q = gauss_legendre(16);
    auto rule = [&](int panels) {
        double s = 0.0;
        const double w = X / panels;
        for (int k = 0; k < panels; ++k)
            for (std::size_t j = 0; j < q.nodes.size(); ++j) s += 0.5 * w * q.weights[j] * fn(w * (k + 0.5 + 0.5 * q.nodes[j]));
        return s;
    };
    double prev = rule(1), change = std::numeric_limits<double>::infinity();
    for (int panels = 2; panels <= 4096; panels *= 2) {
        const double cur = rule(panels);
        change = std::abs(cur - prev);
        if (change <= tol) return cur;
        prev = cur;
    }
    throw NoConvergence("angular integral did not settle", change);
}

inline void rational_flag(DeltaTheta& d) {
    d.turns = d.value / (2 * M_PI);
    double best = std::numeric_limits<double>::infinity();
    for (long long q = 1; q <= 100; ++q) {
        const long long p = std::llround(d.turns * static_cast<double>(q));
        const double err = std::abs(d.turns - static_cast<double>(p) / static_cast<double>(q));
        if (err < best - 1e-15) {
            best = err;
            d.p = p;
            d.q = q;
        }
    }
    d.near_rational = best <= 1e-9;
}

}  // namespace detail

/// Δθ = ∫ c |(f', h')| / (f sqrt(f² - c²)) du between the transversal barriers that bound
/// the strip containing u_hint (default: the first strip where f > |c|). The endpoint
/// singularities are removed by u = u_∓ ± ξ².
inline DeltaTheta delta_theta(const Profile& p, double c, std::optional<double> u_hint = std::nullopt,
                              double tol = 1e-10) {
    DeltaTheta out;
    auto integrand = [&](double u) {
        const double f = p.F(u), d = f * f - c * c;
        return c * p.speed(u) / (f * std::sqrt(std::max(d, 0.0)));
    };
    const std::vector<Barrier> bs = barriers(p, c);
    if (bs.empty()) {
        if (!p.periodic) throw Error(ErrorKind::BadParam, "no barriers for c = " + fmt17(c));
        out.per_period = true;
        out.u_minus = p.u_min;
        out.u_plus = p.u_max;
        out.value = detail::gl_adaptive([&](double x) { return integrand(p.u_min + x); }, p.period(), tol);
        out.lower_half = out.upper_half = 0.5 * out.value;
        detail::rational_flag(out);
        return out;
    }
    std::optional<Barrier> lo, hi;
    if (u_hint) {
        // a hint on a barrier (tangential start) means the strip on the side where f grows
        double dir = 0.0;
        for (const Barrier& b : bs)
            if (std::abs(b.u - *u_hint) <= 1e-8) dir = p.dF(*u_hint) > 0 ? 1.0 : -1.0;
        std::tie(lo, hi) = detail::bracket(p, bs, *u_hint, dir);
    } else {
        std::vector<Barrier> ext = bs;
        if (p.periodic) ext.push_back({bs.front().u + p.period(), bs.front().kind, bs.front().fprime});
        for (std::size_t i = 0; i + 1 < ext.size(); ++i)
            if (p.F(0.5 * (ext[i].u + ext[i + 1].u)) > std::abs(c)) {
                lo = ext[i];
                hi = ext[i + 1];
                break;
            }
    }
    if (!lo || !hi) throw Error(ErrorKind::BadParam, "no strip bounded by two barriers for c = " + fmt17(c));
    if (lo->kind != BarrierKind::Transversal || hi->kind != BarrierKind::Transversal)
        throw Error(ErrorKind::BarrierNotTransversal, "barrier at u = " +
                                                          fmt17(lo->kind != BarrierKind::Transversal ? lo->u : hi->u) +
                                                          " is a geodesic parallel; Δθ diverges");
    out.u_minus = lo->u;
    out.u_plus = hi->u;
    const double mid = 0.5 * (lo->u + hi->u), X = std::sqrt(mid - lo->u);
    // f - |c| measured from the barrier value keeps the endpoint behaviour exact
    auto half = [&](double ub, double sign) {
        const double fb = p.F(ub);
        return detail::gl_adaptive([&](double x) {
            const double u = ub + sign * x * x, f = p.F(u);
            return 2 * x * c * p.speed(u) / (f * std::sqrt(std::max((f - fb) * (f + std::abs(c)), 0.0)));
        }, X, tol);
    };
    out.lower_half = half(lo->u, 1.0);
    out.upper_half = half(hi->u, -1.0);
    out.value = out.lower_half + out.upper_half;
    detail::rational_flag(out);
    return out;
}

}  // namespace rkit
