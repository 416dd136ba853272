#pragma once

#include "rkit/error.hpp"
#include "rkit/expr.hpp"
#include "rkit/linalg.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rkit {

/// A single coordinate chart carrying metric coefficients g_ij(x).
struct MetricChart {
    std::string label;
    int dim = 0;
    std::vector<std::string> coords;
    std::vector<Expression> g;  // row-major n x n
    std::optional<Expression> domain;  // chart domain is {domain > 0}
    double coordinate_bound = 1e8;     // |x_i| beyond this counts as leaving the chart

    [[nodiscard]] const Expression& entry(int i, int j) const {
        return g[static_cast<std::size_t>(i * dim + j)];
    }
};

/// Point-evaluated metric with inverse and first and second partials.
struct MetricJet {
    Mat g;
    Mat ginv;
    std::array<Mat, kMaxDim> dg;                          // dg[k](i,j) = d_k g_ij
    std::array<std::array<Mat, kMaxDim>, kMaxDim> ddg;    // ddg[k][l](i,j) = d_k d_l g_ij
};

struct TangentVector {
    Vec base;
    Vec components;
};

/// Time-stamped samples of a curve. Velocities and accelerations are optional;
/// when present they upgrade the interpolant to cubic or quintic Hermite.
struct SampledCurve {
    std::vector<double> t;
    std::vector<Vec> points;
    std::vector<Vec> velocities;
    std::vector<Vec> accelerations;

    [[nodiscard]] std::size_t size() const { return t.size(); }
    [[nodiscard]] int dim() const { return points.empty() ? 0 : static_cast<int>(points.front().size()); }
};

namespace detail {

inline bool point_ok(const MetricChart& chart, const Vec& p) {
    for (int i = 0; i < p.size(); ++i)
        if (!std::isfinite(p(i)) || std::abs(p(i)) > chart.coordinate_bound) return false;
    if (!chart.domain) return true;
    try {
        return chart.domain->eval(p) > 0.0;
    } catch (const Error&) {
        return false;
    }
}

}  // namespace detail

inline bool in_domain(const MetricChart& chart, const Vec& p) {
    return p.size() == chart.dim && detail::point_ok(chart, p);
}

inline void require_domain(const MetricChart& chart, const Vec& p) {
    if (p.size() != chart.dim)
        throw Error(ErrorKind::BadParam, "point dimension " + std::to_string(p.size()) + " != chart dimension " +
                                             std::to_string(chart.dim));
    if (!detail::point_ok(chart, p)) {
        std::string s = "(";
        for (int i = 0; i < p.size(); ++i) s += (i ? ", " : "") + fmt17(p(i));
        throw DomainExit("point " + s + ") outside chart '" + chart.label + "'", 0.0, to_std(p));
    }
}

/// Metric matrix only (no derivatives).
inline Mat metric_value(const MetricChart& chart, const Vec& p) {
    require_domain(chart, p);
    const int n = chart.dim;
    Mat g(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) g(i, j) = g(j, i) = chart.entry(i, j).eval(p);
    return g;
}

inline MetricJet metric_at(const MetricChart& chart, const Vec& p) {
    require_domain(chart, p);
    const int n = chart.dim;
    MetricJet jet;
    jet.g.resize(n, n);
    for (int k = 0; k < n; ++k) {
        jet.dg[static_cast<std::size_t>(k)].resize(n, n);
        for (int l = 0; l < n; ++l) jet.ddg[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)].resize(n, n);
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            const Dual2 d = chart.entry(i, j).eval2(p);
            jet.g(i, j) = jet.g(j, i) = d.value();
            for (int k = 0; k < n; ++k) {
                auto& dk = jet.dg[static_cast<std::size_t>(k)];
                dk(i, j) = dk(j, i) = d.grad(k);
                for (int l = 0; l < n; ++l) {
                    auto& dkl = jet.ddg[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)];
                    dkl(i, j) = dkl(j, i) = d.hess(k, l);
                }
            }
        }
    }
    Eigen::LLT<Mat> llt(jet.g);
    if (llt.info() != Eigen::Success || !jet.g.allFinite())
        throw Error(ErrorKind::SingularMetric, "metric is not positive definite in chart '" + chart.label + "'");
    jet.ginv = llt.solve(Mat::Identity(n, n));
    return jet;
}

/// Builds a chart from expression strings and verifies symmetry of the supplied
/// array at seeded sample points.
inline MetricChart make_chart(std::string label, std::vector<std::string> coords,
                              const std::vector<std::vector<std::string>>& metric,
                              const std::optional<std::string>& domain = std::nullopt,
                              std::uint64_t seed = 0x5eed) {
    const int n = static_cast<int>(coords.size());
    if (n < 1 || n > kMaxDim)
        throw Error(ErrorKind::BadDimension, "dimension must be in [1, " + std::to_string(kMaxDim) + "]");
    if (static_cast<int>(metric.size()) != n)
        throw Error(ErrorKind::BadParam, "metric must have " + std::to_string(n) + " rows");
    MetricChart chart;
    chart.label = std::move(label);
    chart.dim = n;
    chart.coords = coords;
    for (const auto& row : metric) {
        if (static_cast<int>(row.size()) != n)
            throw Error(ErrorKind::BadParam, "metric row must have " + std::to_string(n) + " entries");
        for (const auto& src : row) chart.g.push_back(Expression::parse(src, coords));
    }
    if (domain) chart.domain = Expression::parse(*domain, coords);

    Rng rng(seed);
    for (int s = 0; s < 100; ++s) {
        const Vec p = rng.uniform_vec(n, -1.0, 1.0);
        if (!detail::point_ok(chart, p)) continue;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                double a = 0.0, b = 0.0;
                try {
                    a = chart.entry(i, j).eval(p);
                    b = chart.entry(j, i).eval(p);
                } catch (const Error&) {
                    continue;
                }
                if (std::abs(a - b) > 1e-12 * std::max(1.0, std::abs(a)))
                    throw Error(ErrorKind::BadParam, "metric entries (" + std::to_string(i + 1) + "," +
                                                         std::to_string(j + 1) + ") and transpose differ");
            }
        }
    }
    return chart;
}

// ---------------------------------------------------------------------------
// Builtin catalog.

using ParamMap = std::map<std::string, double>;

namespace detail {

inline double param(const ParamMap& params, const std::string& key, double fallback) {
    const auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

inline int dim_param(const ParamMap& params, int fallback) {
    const double n = param(params, "n", fallback);
    if (n != std::floor(n) || n < 1 || n > kMaxDim)
        throw Error(ErrorKind::BadParam, "n must be an integer in [1, " + std::to_string(kMaxDim) + "]");
    return static_cast<int>(n);
}

inline std::vector<std::string> xcoords(int n) {
    std::vector<std::string> c;
    for (int i = 1; i <= n; ++i) c.push_back("x" + std::to_string(i));
    return c;
}

inline std::string radius2(int n) {
    std::string s;
    for (int i = 1; i <= n; ++i) s += (i > 1 ? " + " : "") + std::string("x") + std::to_string(i) + "^2";
    return s;
}

inline std::vector<std::vector<std::string>> conformal(int n, const std::string& factor) {
    std::vector<std::vector<std::string>> m(static_cast<std::size_t>(n), std::vector<std::string>(static_cast<std::size_t>(n), "0"));
    for (int i = 0; i < n; ++i) m[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = factor;
    return m;
}

}  // namespace detail

/// Torus of revolution with arclength profile f(u) = R + r cos(u/r), h(u) = r sin(u/r).
inline MetricChart torus_chart(double R, double r) {
    if (!(r > 0.0) || !(R > r))
        throw Error(ErrorKind::BadParam, "torus requires R > r > 0");
    const std::string f = "(" + fmt17(R) + " + " + fmt17(r) + "*cos(u/" + fmt17(r) + "))";
    return make_chart("torus(R=" + fmt17(R) + ",r=" + fmt17(r) + ")", {"u", "theta"},
                      {{"1", "0"}, {"0", f + "^2"}});
}

inline MetricChart builtin(const std::string& name, const ParamMap& params = {}) {
    using detail::param;
    if (name == "euclidean") {
        const int n = detail::dim_param(params, 2);
        return make_chart("euclidean(n=" + std::to_string(n) + ")", detail::xcoords(n), detail::conformal(n, "1"));
    }
    if (name == "sphere_stereo") {
        const int n = detail::dim_param(params, 2);
        const double R = param(params, "R", 1.0);
        if (!(R > 0.0)) throw Error(ErrorKind::BadParam, "sphere radius R must be positive");
        const std::string R2 = fmt17(R * R);
        const std::string factor = "(2*" + R2 + "/(" + R2 + " + " + detail::radius2(n) + "))^2";
        return make_chart("sphere_stereo(n=" + std::to_string(n) + ",R=" + fmt17(R) + ")", detail::xcoords(n),
                          detail::conformal(n, factor));
    }
    if (name == "hyperbolic_ball") {
        const int n = detail::dim_param(params, 2);
        const std::string factor = "(2/(1 - (" + detail::radius2(n) + ")))^2";
        return make_chart("hyperbolic_ball(n=" + std::to_string(n) + ")", detail::xcoords(n),
                          detail::conformal(n, factor), "1 - (" + detail::radius2(n) + ")");
    }
    if (name == "torus") return torus_chart(param(params, "R", 2.0), param(params, "r", 1.0));
    throw Error(ErrorKind::UnknownBuiltin, "'" + name + "'");
}

// ---------------------------------------------------------------------------
// Curves.

namespace detail {

/// Derivative at t[i] of the Lagrange interpolant through up to 5 nearest samples.
template <typename Get>
Vec lagrange_derivative(const std::vector<double>& t, std::size_t i, Get&& get) {
    const std::size_t m = t.size();
    const std::size_t width = std::min<std::size_t>(5, m);
    std::size_t lo = i >= width / 2 ? i - width / 2 : 0;
    if (lo + width > m) lo = m - width;
    Vec d = Vec::Zero(get(0).size());
    for (std::size_t j = lo; j < lo + width; ++j) {
        // l_j'(t_i) for the Lagrange basis polynomial l_j
        double w = 0.0;
        if (j == i) {
            for (std::size_t k = lo; k < lo + width; ++k)
                if (k != j) w += 1.0 / (t[j] - t[k]);
        } else {
            double num = 1.0, den = 1.0;
            for (std::size_t k = lo; k < lo + width; ++k) {
                if (k == j) continue;
                den *= t[j] - t[k];
                if (k != i) num *= t[i] - t[k];
            }
            w = num / den;
        }
        d += w * get(j);
    }
    return d;
}

}  // namespace detail

inline void validate_curve(const MetricChart& chart, const SampledCurve& c) {
    if (c.t.size() < 2 || c.points.size() != c.t.size())
        throw Error(ErrorKind::BadParam, "curve needs at least two samples with matching points");
    for (std::size_t i = 1; i < c.t.size(); ++i)
        if (!(c.t[i] > c.t[i - 1])) throw Error(ErrorKind::BadParam, "curve grid must be strictly increasing");
    if (!c.velocities.empty() && c.velocities.size() != c.t.size())
        throw Error(ErrorKind::BadParam, "velocity count does not match grid");
    for (const Vec& p : c.points) require_domain(chart, p);
}

/// Fills missing velocities by 5-point Lagrange differentiation on the grid.
inline SampledCurve with_velocities(SampledCurve c) {
    if (!c.velocities.empty()) return c;
    c.velocities.reserve(c.t.size());
    for (std::size_t i = 0; i < c.t.size(); ++i)
        c.velocities.push_back(detail::lagrange_derivative(c.t, i, [&](std::size_t j) -> const Vec& { return c.points[j]; }));
    return c;
}

/// Piecewise Hermite interpolant of a sampled curve: cubic from (x, x'),
/// quintic when accelerations are available.
class CurveInterpolant {
public:
    explicit CurveInterpolant(SampledCurve c) : c_(with_velocities(std::move(c))) {}

    [[nodiscard]] const SampledCurve& curve() const { return c_; }
    [[nodiscard]] double t0() const { return c_.t.front(); }
    [[nodiscard]] double t1() const { return c_.t.back(); }

    [[nodiscard]] std::size_t segment(double t) const {
        const auto it = std::upper_bound(c_.t.begin(), c_.t.end(), t);
        std::size_t i = it == c_.t.begin() ? 0 : static_cast<std::size_t>(it - c_.t.begin()) - 1;
        return std::min(i, c_.t.size() - 2);
    }

    /// Position and velocity at t.
    [[nodiscard]] std::pair<Vec, Vec> operator()(double t) const {
        const std::size_t i = segment(t);
        const double h = c_.t[i + 1] - c_.t[i];
        const double s = (t - c_.t[i]) / h;
        const Vec& p0 = c_.points[i];
        const Vec& p1 = c_.points[i + 1];
        const Vec m0 = c_.velocities[i] * h;
        const Vec m1 = c_.velocities[i + 1] * h;
        if (c_.accelerations.size() == c_.t.size()) {
            const Vec a0 = c_.accelerations[i] * h * h;
            const Vec a1 = c_.accelerations[i + 1] * h * h;
            const double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
            const double h0 = 1 - 10 * s3 + 15 * s4 - 6 * s5, h1 = s - 6 * s3 + 8 * s4 - 3 * s5,
                         h2 = 0.5 * (s2 - 3 * s3 + 3 * s4 - s5), h3 = 0.5 * (s3 - 2 * s4 + s5),
                         h4 = -4 * s3 + 7 * s4 - 3 * s5, h5 = 10 * s3 - 15 * s4 + 6 * s5;
            const double d0 = -30 * s2 + 60 * s3 - 30 * s4, d1 = 1 - 18 * s2 + 32 * s3 - 15 * s4,
                         d2 = 0.5 * (2 * s - 9 * s2 + 12 * s3 - 5 * s4), d3 = 0.5 * (3 * s2 - 8 * s3 + 5 * s4),
                         d4 = -12 * s2 + 28 * s3 - 15 * s4, d5 = 30 * s2 - 60 * s3 + 30 * s4;
            Vec x = h0 * p0 + h1 * m0 + h2 * a0 + h3 * a1 + h4 * m1 + h5 * p1;
            Vec v = (d0 * p0 + d1 * m0 + d2 * a0 + d3 * a1 + d4 * m1 + d5 * p1) / h;
            return {x, v};
        }
        const double s2 = s * s, s3 = s2 * s;
        const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s, h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
        const double d00 = 6 * s2 - 6 * s, d10 = 3 * s2 - 4 * s + 1, d01 = -6 * s2 + 6 * s, d11 = 3 * s2 - 2 * s;
        Vec x = h00 * p0 + h10 * m0 + h01 * p1 + h11 * m1;
        Vec v = (d00 * p0 + d10 * m0 + d01 * p1 + d11 * m1) / h;
        return {x, v};
    }

private:
    SampledCurve c_;
};

/// Integral of integrand(x, x') along the interpolated curve with composite Simpson
/// refinement; stops when successive levels agree to `rtol`.
template <typename F>
double integrate_along(const CurveInterpolant& ci, F&& integrand, double rtol = 1e-8, int max_level = 10) {
    const auto& t = ci.curve().t;
    auto level_sum = [&](int level) {
        const int sub = 1 << level;
        double total = 0.0;
        for (std::size_t i = 0; i + 1 < t.size(); ++i) {
            const double h = (t[i + 1] - t[i]) / sub;
            double s = 0.0;
            for (int k = 0; k <= 2 * sub; ++k) {
                const double tau = t[i] + 0.5 * h * k;
                const auto [x, v] = ci(std::min(tau, t[i + 1]));
                const double w = (k == 0 || k == 2 * sub) ? 1.0 : (k % 2 ? 4.0 : 2.0);
                s += w * integrand(x, v);
            }
            total += s * h / 6.0;
        }
        return total;
    };
    double prev = level_sum(0);
    for (int level = 1; level <= max_level; ++level) {
        const double cur = level_sum(level);
        if (std::abs(cur - prev) <= rtol * std::max(std::abs(cur), 1e-300)) return cur + (cur - prev) / 15.0;
        prev = cur;
    }
    return prev;
}

/// Riemannian length: integral of sqrt(g(c', c')).
inline double curve_length(const MetricChart& chart, const SampledCurve& curve, double rtol = 1e-8) {
    validate_curve(chart, curve);
    const CurveInterpolant ci(curve);
    return integrate_along(ci, [&](const Vec& x, const Vec& v) {
        const Mat g = metric_value(chart, x);
        return std::sqrt(std::max(0.0, v.dot(g * v)));
    }, rtol);
}

/// Inscribed-polygon lengths under nested refinement of the sample partition;
/// entry k uses up to 2^k intervals. Nested partitions make the sequence nondecreasing.
inline std::vector<double> rectifiable_length(const std::function<double(const Vec&, const Vec&)>& distance,
                                              const SampledCurve& curve, int depth) {
    if (curve.points.size() < 2) throw Error(ErrorKind::BadParam, "curve needs at least two samples");
    std::vector<std::size_t> idx = {0, curve.points.size() - 1};
    std::vector<double> out;
    for (int level = 0; level <= depth; ++level) {
        if (level > 0) {
            std::vector<std::size_t> next;
            for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
                next.push_back(idx[k]);
                if (idx[k + 1] - idx[k] >= 2) next.push_back((idx[k] + idx[k + 1]) / 2);
            }
            next.push_back(idx.back());
            idx = std::move(next);
        }
        double s = 0.0;
        for (std::size_t k = 0; k + 1 < idx.size(); ++k) s += distance(curve.points[idx[k]], curve.points[idx[k + 1]]);
        out.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Finsler norms on a single tangent space.

struct FinslerNorm {
    int dim = 0;
    Vec base;
    std::function<double(const Vec&)> L;
    bool homogeneity_checked = false;

    double operator()(const Vec& v) const { return L(v); }
};

inline FinslerNorm riemannian_norm(const MetricChart& chart, const Vec& p) {
    const Mat g = metric_value(chart, p);
    return FinslerNorm{chart.dim, p, [g](const Vec& v) { return std::sqrt(std::max(0.0, v.dot(g * v))); }};
}

inline FinslerNorm euclidean_norm(int n) {
    return FinslerNorm{n, Vec::Zero(n), [](const Vec& v) { return v.norm(); }};
}

inline FinslerNorm max_norm(int n) {
    return FinslerNorm{n, Vec::Zero(n), [](const Vec& v) { return v.cwiseAbs().maxCoeff(); }};
}

/// Checks L(av) = |a| L(v) and positivity on seeded samples; sets the flag on success.
inline double check_homogeneity(FinslerNorm& norm, int samples, std::uint64_t seed) {
    Rng rng(seed);
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const Vec v = rng.uniform_vec(norm.dim, -1.0, 1.0);
        const double a = rng.uniform(-3.0, 3.0);
        const double lv = norm(v);
        if (!(lv > 0.0) && v.norm() > 0.0) throw Error(ErrorKind::BadParam, "norm vanishes on a nonzero vector");
        worst = std::max(worst, std::abs(norm(a * v) - std::abs(a) * lv));
    }
    norm.homogeneity_checked = worst <= 1e-9;
    return worst;
}

struct ParallelogramReport {
    double max_violation = 0.0;
    Vec witness_v;
    Vec witness_w;
    int samples = 0;
    std::uint64_t seed = 0;
};

/// Max of |L^2(v+w) + L^2(v-w) - 2L^2(v) - 2L^2(w)| over seeded pairs in [-1,1]^n.
inline ParallelogramReport parallelogram_check(const FinslerNorm& norm, int samples, std::uint64_t seed) {
    if (samples < 1) throw Error(ErrorKind::BadParam, "samples must be >= 1");
    Rng rng(seed);
    ParallelogramReport rep;
    rep.samples = samples;
    rep.seed = seed;
    auto sq = [&](const Vec& x) {
        const double l = norm(x);
        return l * l;
    };
    for (int s = 0; s < samples; ++s) {
        const Vec v = rng.uniform_vec(norm.dim, -1.0, 1.0);
        const Vec w = rng.uniform_vec(norm.dim, -1.0, 1.0);
        const double viol = std::abs(sq(v + w) + sq(v - w) - 2.0 * sq(v) - 2.0 * sq(w));
        if (s == 0 || viol > rep.max_violation) {
            rep.max_violation = viol;
            rep.witness_v = v;
            rep.witness_w = w;
        }
    }
    return rep;
}

/// Candidate inner product from the norm: (L^2(v+w) - L^2(v) - L^2(w)) / 2.
inline double polarize(const FinslerNorm& norm, const TangentVector& v, const TangentVector& w) {
    if (v.base.size() != w.base.size() || (v.base - w.base).norm() > 0.0)
        throw Error(ErrorKind::BadParam, "polarize needs vectors at the same base point");
    auto sq = [&](const Vec& x) {
        const double l = norm(x);
        return l * l;
    };
    return 0.5 * (sq(v.components + w.components) - sq(v.components) - sq(w.components));
}

}  // namespace rkit
