#pragma once

// Geodesic flow with an attached parallel frame and optional Jacobi columns,
// plus exp/log, parallel transport along sampled curves, and development.

#include "rkit/error.hpp"
#include "rkit/linalg.hpp"
#include "rkit/manifold.hpp"
#include "rkit/ode.hpp"
#include "rkit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rkit {

/// Flat layout of the joint state: x, v, frame E (n x n, column j = E_j),
/// Jacobi components F (n x k, in the frame), F'.
struct FlowLayout {
    int n = 0;
    int k = 0;
    bool frame = true;

    [[nodiscard]] std::size_t size() const {
        return static_cast<std::size_t>(2 * n + (frame ? n * n : 0) + 2 * n * k);
    }
    [[nodiscard]] std::size_t x() const { return 0; }
    [[nodiscard]] std::size_t v() const { return static_cast<std::size_t>(n); }
    [[nodiscard]] std::size_t E() const { return static_cast<std::size_t>(2 * n); }
    [[nodiscard]] std::size_t F() const { return E() + static_cast<std::size_t>(frame ? n * n : 0); }
    [[nodiscard]] std::size_t Fp() const { return F() + static_cast<std::size_t>(n * k); }

    [[nodiscard]] Vec get_vec(const State& y, std::size_t off) const {
        Vec out(n);
        for (int i = 0; i < n; ++i) out(i) = y[off + static_cast<std::size_t>(i)];
        return out;
    }
    [[nodiscard]] Mat get_mat(const State& y, std::size_t off, int cols) const {
        Mat out(n, cols);
        for (int j = 0; j < cols; ++j)
            for (int i = 0; i < n; ++i) out(i, j) = y[off + static_cast<std::size_t>(j * n + i)];
        return out;
    }
    void put_vec(State& y, std::size_t off, const Vec& a) const {
        for (int i = 0; i < n; ++i) y[off + static_cast<std::size_t>(i)] = a(i);
    }
    void put_mat(State& y, std::size_t off, const Mat& a) const {
        for (int j = 0; j < a.cols(); ++j)
            for (int i = 0; i < n; ++i) y[off + static_cast<std::size_t>(j * n + i)] = a(i, j);
    }

    [[nodiscard]] State pack(const Vec& x0, const Vec& v0, const Mat& E0, const Mat& F0, const Mat& Fp0) const {
        State y(size(), 0.0);
        put_vec(y, this->x(), x0);
        put_vec(y, this->v(), v0);
        if (frame) put_mat(y, E(), E0);
        if (k > 0) {
            put_mat(y, F(), F0);
            put_mat(y, Fp(), Fp0);
        }
        return y;
    }
};

/// Driving matrix M_ij = g(R_{v E_j} v, E_i) of the Jacobi equation in the frame E.
inline Mat driving_matrix(const Tensor4& low, const Vec& v, const Mat& E) {
    const int n = low.dim();
    Mat Rv = Mat::Zero(n, n);  // Rv(b, d) = low(v, b, v, d)
    for (int a = 0; a < n; ++a) {
        if (v(a) == 0.0) continue;
        for (int c = 0; c < n; ++c) {
            if (v(c) == 0.0) continue;
            const double w = v(a) * v(c);
            for (int b = 0; b < n; ++b)
                for (int d = 0; d < n; ++d) Rv(b, d) += w * low(a, b, c, d);
        }
    }
    return E.transpose() * Rv.transpose() * E;
}

/// Right-hand side of the joint geodesic / frame / Jacobi system.
class GeodesicFlow {
public:
    GeodesicFlow(const MetricChart& chart, FlowLayout layout) : chart_(chart), L_(layout) {}

    [[nodiscard]] const FlowLayout& layout() const { return L_; }

    void operator()(double /*t*/, const State& y, State& dy) const {
        const int n = L_.n;
        const Vec x = L_.get_vec(y, L_.x());
        const Vec v = L_.get_vec(y, L_.v());
        const PointGeometry pg = point_geometry(chart_, x, L_.k > 0);
        dy.assign(y.size(), 0.0);
        L_.put_vec(dy, L_.x(), v);
        L_.put_vec(dy, L_.v(), -pg.gamma.contract(v, v));
        if (L_.frame) {
            const Mat E = L_.get_mat(y, L_.E(), n);
            Mat dE(n, n);
            for (int j = 0; j < n; ++j) dE.col(j) = -pg.gamma.contract(v, E.col(j));
            L_.put_mat(dy, L_.E(), dE);
            if (L_.k > 0) {
                const Mat M = driving_matrix(pg.R.low, v, E);
                const Mat F = L_.get_mat(y, L_.F(), L_.k);
                const Mat Fp = L_.get_mat(y, L_.Fp(), L_.k);
                L_.put_mat(dy, L_.F(), Fp);
                L_.put_mat(dy, L_.Fp(), -M * F);
            }
        }
    }

private:
    const MetricChart& chart_;
    FlowLayout L_;
};

/// Accepted states of a flow integration, in order.
struct FlowSamples {
    FlowLayout layout;
    std::vector<double> t;
    std::vector<State> y;
};

namespace detail {

inline bool state_finite(const State& y) {
    return std::all_of(y.begin(), y.end(), [](double a) { return std::isfinite(a); });
}

/// Runs the flow, converting chart failures inside a step into DomainExit carrying
/// the last accepted state.
template <typename Observe>
void run_flow(const MetricChart& chart, const FlowLayout& L, const State& y0, double t1, const OdeSettings& s,
              Observe&& observe) {
    const GeodesicFlow flow(chart, L);
    double t_last = 0.0;
    State y_last = y0;
    auto exit = [&](const std::string& why) {
        return DomainExit("trajectory leaves chart '" + chart.label + "' after t = " + fmt17(t_last) + " (" + why + ")",
                          t_last, std::vector<double>(y_last.begin(), y_last.begin() + 2 * L.n));
    };
    require_domain(chart, L.get_vec(y0, L.x()));
    try {
        ode::integrate(
            flow, y0, 0.0, t1, s,
            [&](double t, const State& y) {
                t_last = t;
                y_last = y;
                observe(t, y);
            },
            [&](double, const State& y) {
                if (!state_finite(y)) throw exit("non-finite state");
                if (!detail::point_ok(chart, L.get_vec(y, L.x()))) throw exit("point outside domain");
            });
    } catch (const DomainExit& e) {
        if (e.last_state().size() == static_cast<std::size_t>(2 * L.n) && e.t_exit() == t_last) throw;
        throw exit(e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::DomainFault || e.kind() == ErrorKind::SingularMetric) throw exit(e.what());
        throw;
    }
}

}  // namespace detail

/// Integrates the joint system on [0, t1] and keeps every accepted state.
inline FlowSamples integrate_flow(const MetricChart& chart, const FlowLayout& L, const State& y0, double t1,
                                  const OdeSettings& s) {
    if (!(t1 >= 0.0)) throw Error(ErrorKind::BadParam, "tmax must be >= 0");
    FlowSamples out{L, {}, {}};
    detail::run_flow(chart, L, y0, t1, s, [&](double t, const State& y) {
        out.t.push_back(t);
        out.y.push_back(y);
    });
    return out;
}

/// State at an arbitrary time: one RK4 step from the nearest earlier sample.
inline State flow_state_at(const MetricChart& chart, const FlowSamples& fs, double t) {
    if (fs.t.empty()) throw Error(ErrorKind::BadParam, "empty flow");
    if (t <= fs.t.front()) return fs.y.front();
    if (t >= fs.t.back()) return fs.y.back();
    const auto it = std::upper_bound(fs.t.begin(), fs.t.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - fs.t.begin()) - 1;
    if (t == fs.t[i]) return fs.y[i];
    const GeodesicFlow flow(chart, fs.layout);
    return ode::rk4_step(flow, fs.t[i], fs.y[i], t - fs.t[i]);
}

// ---------------------------------------------------------------------------

struct Trajectory {
    std::string chart_label;
    int dim = 0;
    std::vector<double> t;
    std::vector<Vec> x;
    std::vector<Vec> v;
    std::vector<Vec> a;      // accelerations (geodesics: -Γ(v, v))
    std::vector<Mat> frame;  // parallel orthonormal frame per sample; may be empty
    double initial_speed = 0.0;
    double speed_drift = 0.0;
    double frame_defect = 0.0;  // max |E^T g E - I| over samples
    OdeSettings settings;
    bool geodesic = true;

    [[nodiscard]] std::size_t size() const { return t.size(); }

    [[nodiscard]] SampledCurve curve() const { return SampledCurve{t, x, v, a}; }

    /// Cubic (quintic with accelerations) Hermite dense output.
    [[nodiscard]] CurveInterpolant interpolant() const { return CurveInterpolant(curve()); }
};

namespace detail {

inline void finish_metrics(const MetricChart& chart, Trajectory& tr) {
    tr.speed_drift = 0.0;
    tr.frame_defect = 0.0;
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const Mat g = metric_value(chart, tr.x[i]);
        const double speed = std::sqrt(std::max(0.0, tr.v[i].dot(g * tr.v[i])));
        if (i == 0) tr.initial_speed = speed;
        tr.speed_drift = std::max(tr.speed_drift, std::abs(speed - tr.initial_speed));
        if (!tr.frame.empty()) {
            const Mat& E = tr.frame[i];
            const Mat gram = E.transpose() * g * E;
            tr.frame_defect = std::max(tr.frame_defect, (gram - Mat::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff());
        }
    }
}

inline Mat initial_frame(const MetricChart& chart, const Vec& p, const Vec& v, const std::optional<Mat>& frame0) {
    const Mat g = metric_value(chart, p);
    if (!frame0) return adapted_frame(g, v);
    const Mat& E = *frame0;
    if (E.rows() != chart.dim || E.cols() != chart.dim)
        throw Error(ErrorKind::BadParam, "frame must be n x n");
    if ((E.transpose() * g * E - Mat::Identity(chart.dim, chart.dim)).cwiseAbs().maxCoeff() > 1e-9)
        throw Error(ErrorKind::BadParam, "frame is not orthonormal at the base point");
    return E;
}

inline void check_point_vector(const MetricChart& chart, const Vec& p, const Vec& v) {
    if (v.size() != chart.dim) throw Error(ErrorKind::BadParam, "tangent vector has wrong dimension");
    if (!v.allFinite()) throw Error(ErrorKind::BadParam, "tangent vector is not finite");
    require_domain(chart, p);
}

}  // namespace detail

/// Geodesic with initial point p and velocity v on [0, tmax], with a parallel
/// orthonormal frame (first member along v unless a frame is supplied).
inline Trajectory integrate_geodesic(const MetricChart& chart, const Vec& p, const Vec& v, double tmax,
                                     const OdeSettings& settings = {}, const std::optional<Mat>& frame0 = std::nullopt) {
    detail::check_point_vector(chart, p, v);
    const FlowLayout L{chart.dim, 0, true};
    const Mat E0 = detail::initial_frame(chart, p, v, frame0);
    const FlowSamples fs = integrate_flow(chart, L, L.pack(p, v, E0, Mat(), Mat()), tmax, settings);
    Trajectory tr;
    tr.chart_label = chart.label;
    tr.dim = chart.dim;
    tr.settings = settings;
    tr.t = fs.t;
    const GeodesicFlow flow(chart, L);
    State dy;
    for (const State& y : fs.y) {
        tr.x.push_back(L.get_vec(y, L.x()));
        tr.v.push_back(L.get_vec(y, L.v()));
        tr.frame.push_back(L.get_mat(y, L.E(), chart.dim));
        flow(0.0, y, dy);
        tr.a.push_back(L.get_vec(dy, L.v()));
    }
    detail::finish_metrics(chart, tr);
    return tr;
}

/// exp_p(v): endpoint at t = 1 of the geodesic with initial velocity v.
inline Vec exp_map(const MetricChart& chart, const Vec& p, const Vec& v, const OdeSettings& settings = {}) {
    detail::check_point_vector(chart, p, v);
    if (v.norm() == 0.0) return p;
    const FlowLayout L{chart.dim, 0, false};
    Vec end = p;
    detail::run_flow(chart, L, L.pack(p, v, Mat(), Mat(), Mat()), 1.0, settings,
                     [&](double, const State& y) { end = L.get_vec(y, L.x()); });
    return end;
}

// ---------------------------------------------------------------------------
// Transport along sampled curves.

/// Parallel transport of the columns of W0 along the interpolated curve; returns the
/// transported matrix at every sample time. RK4 with at most `max_step` per substep.
inline std::vector<Mat> transport_columns(const MetricChart& chart, const CurveInterpolant& ci, const Mat& W0,
                                          double max_step = 1e-3) {
    const int n = chart.dim;
    const int m = static_cast<int>(W0.cols());
    const auto& grid = ci.curve().t;
    auto rhs = [&](double t, const State& y, State& dy) {
        const auto [x, xd] = ci(t);
        const ChristoffelField G = christoffel(chart, x);
        dy.assign(y.size(), 0.0);
        for (int j = 0; j < m; ++j) {
            Vec w(n);
            for (int i = 0; i < n; ++i) w(i) = y[static_cast<std::size_t>(j * n + i)];
            const Vec d = -G.contract(xd, w);
            for (int i = 0; i < n; ++i) dy[static_cast<std::size_t>(j * n + i)] = d(i);
        }
    };
    State y(static_cast<std::size_t>(n * m));
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(j * n + i)] = W0(i, j);
    auto unpack = [&](const State& s) {
        Mat W(n, m);
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < n; ++i) W(i, j) = s[static_cast<std::size_t>(j * n + i)];
        return W;
    };
    std::vector<Mat> out{W0};
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double h = grid[i + 1] - grid[i];
        const int sub = std::max(1, static_cast<int>(std::ceil(h / max_step - 1e-9)));
        for (int s = 0; s < sub; ++s) y = ode::rk4_step(rhs, grid[i] + h * s / sub, y, h / sub);
        out.push_back(unpack(y));
    }
    return out;
}

/// Transports w0 along the trajectory; works for geodesics and for general curves
/// wrapped as trajectories.
inline std::vector<Vec> parallel_transport(const MetricChart& chart, const Trajectory& traj, const Vec& w0) {
    if (traj.size() < 2) throw Error(ErrorKind::BadParam, "trajectory needs at least two samples");
    if (w0.size() != chart.dim) throw Error(ErrorKind::BadParam, "vector has wrong dimension");
    Mat W0(chart.dim, 1);
    W0.col(0) = w0;
    const auto Ws = transport_columns(chart, traj.interpolant(), W0, traj.settings.step);
    std::vector<Vec> out;
    for (const Mat& W : Ws) out.push_back(W.col(0));
    return out;
}

/// Wraps a sampled curve as a (non-geodesic) trajectory; velocities are derived if absent.
inline Trajectory trajectory_from_curve(const MetricChart& chart, const SampledCurve& curve) {
    validate_curve(chart, curve);
    const SampledCurve c = with_velocities(curve);
    Trajectory tr;
    tr.chart_label = chart.label;
    tr.dim = chart.dim;
    tr.t = c.t;
    tr.x = c.points;
    tr.v = c.velocities;
    tr.a = c.accelerations;
    tr.geodesic = false;
    detail::finish_metrics(chart, tr);
    return tr;
}

// ---------------------------------------------------------------------------
// Development.

struct Development {
    SampledCurve sigma;          // points and velocities in frame components of E(0)
    std::vector<Mat> frames;     // transported frame along the curve
};

/// Development of a curve into the tangent space at its start, expressed in the
/// orthonormal basis frame0 (default: adapted to the initial velocity).
inline Development develop(const MetricChart& chart, const SampledCurve& curve,
                           const std::optional<Mat>& frame0 = std::nullopt, double max_step = 1e-3) {
    validate_curve(chart, curve);
    const CurveInterpolant ci(curve);
    const int n = chart.dim;
    const Mat E0 = detail::initial_frame(chart, curve.points.front(), ci.curve().velocities.front(), frame0);
    // state: E (n*n), sigma (n)
    auto rhs = [&](double t, const State& y, State& dy) {
        const auto [x, xd] = ci(t);
        const ChristoffelField G = christoffel(chart, x);
        Mat E(n, n);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) E(i, j) = y[static_cast<std::size_t>(j * n + i)];
        dy.assign(y.size(), 0.0);
        for (int j = 0; j < n; ++j) {
            const Vec d = -G.contract(xd, E.col(j));
            for (int i = 0; i < n; ++i) dy[static_cast<std::size_t>(j * n + i)] = d(i);
        }
        const Vec beta = E.partialPivLu().solve(xd);
        for (int i = 0; i < n; ++i) dy[static_cast<std::size_t>(n * n + i)] = beta(i);
    };
    State y(static_cast<std::size_t>(n * n + n), 0.0);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(j * n + i)] = E0(i, j);
    Development dev;
    auto record = [&](double t, const State& s) {
        Mat E(n, n);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) E(i, j) = s[static_cast<std::size_t>(j * n + i)];
        Vec sig(n);
        for (int i = 0; i < n; ++i) sig(i) = s[static_cast<std::size_t>(n * n + i)];
        dev.frames.push_back(E);
        dev.sigma.t.push_back(t);
        dev.sigma.points.push_back(sig);
        dev.sigma.velocities.push_back(E.partialPivLu().solve(ci(t).second));
    };
    const auto& grid = ci.curve().t;
    record(grid.front(), y);
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double h = grid[i + 1] - grid[i];
        const int sub = std::max(1, static_cast<int>(std::ceil(h / max_step - 1e-9)));
        for (int s = 0; s < sub; ++s) y = ode::rk4_step(rhs, grid[i] + h * s / sub, y, h / sub);
        record(grid[i + 1], y);
    }
    return dev;
}

/// Reverse development: the curve in M whose development (in the frame E0 at p) is
/// sigma. sigma must start at 0. Integrates x' = sum beta^i E_i with E parallel.
inline SampledCurve reverse_develop(const MetricChart& chart, const SampledCurve& sigma, const Vec& p,
                                    const std::optional<Mat>& frame0 = std::nullopt, double max_step = 1e-3) {
    const int n = chart.dim;
    if (sigma.size() < 2 || sigma.dim() != n) throw Error(ErrorKind::BadParam, "sigma needs >= 2 samples in R^n");
    if (sigma.points.front().norm() > 1e-12) throw Error(ErrorKind::BadParam, "sigma must start at the origin");
    require_domain(chart, p);
    const CurveInterpolant si(sigma);
    const Mat E0 = detail::initial_frame(chart, p, si.curve().velocities.front(), frame0);
    // state: x (n), E (n*n)
    auto unpackE = [&](const State& y) {
        Mat E(n, n);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) E(i, j) = y[static_cast<std::size_t>(n + j * n + i)];
        return E;
    };
    auto rhs = [&](double t, const State& y, State& dy) {
        Vec x(n);
        for (int i = 0; i < n; ++i) x(i) = y[static_cast<std::size_t>(i)];
        const Mat E = unpackE(y);
        const Vec xd = E * si(t).second;
        const ChristoffelField G = christoffel(chart, x);
        dy.assign(y.size(), 0.0);
        for (int i = 0; i < n; ++i) dy[static_cast<std::size_t>(i)] = xd(i);
        for (int j = 0; j < n; ++j) {
            const Vec d = -G.contract(xd, E.col(j));
            for (int i = 0; i < n; ++i) dy[static_cast<std::size_t>(n + j * n + i)] = d(i);
        }
    };
    State y(static_cast<std::size_t>(n + n * n));
    for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = p(i);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(n + j * n + i)] = E0(i, j);
    SampledCurve out;
    auto record = [&](double t, const State& s) {
        Vec x(n);
        for (int i = 0; i < n; ++i) x(i) = s[static_cast<std::size_t>(i)];
        out.t.push_back(t);
        out.points.push_back(x);
        out.velocities.push_back(unpackE(s) * si(t).second);
    };
    const auto& grid = si.curve().t;
    record(grid.front(), y);
    double t_last = grid.front();
    auto fail = [&](const std::string& why) {
        return DomainExit("reverse development leaves chart '" + chart.label + "' after t = " + fmt17(t_last) + " (" +
                              why + ")",
                          t_last, to_std(out.points.back()));
    };
    try {
        for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
            const double h = grid[i + 1] - grid[i];
            const int sub = std::max(1, static_cast<int>(std::ceil(h / max_step - 1e-9)));
            for (int s = 0; s < sub; ++s) {
                y = ode::rk4_step(rhs, grid[i] + h * s / sub, y, h / sub);
                Vec x(n);
                for (int k = 0; k < n; ++k) x(k) = y[static_cast<std::size_t>(k)];
                if (!detail::state_finite(y) || !detail::point_ok(chart, x)) throw fail("point outside domain");
            }
            record(grid[i + 1], y);
            t_last = grid[i + 1];
        }
    } catch (const DomainExit&) {
        throw;
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::DomainFault || e.kind() == ErrorKind::SingularMetric) throw fail(e.what());
        throw;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Log map and two-point geodesics.

struct LogResult {
    Vec y;          // normal coordinates (components in the frame)
    Vec v;          // coordinate components of the initial velocity
    double residual = 0.0;
    int iterations = 0;
};

namespace detail {

inline double inf_norm(const Vec& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

/// Newton on exp_p(E y) = q from the initial guess y0.
inline LogResult log_newton(const MetricChart& chart, const Vec& p, const Mat& E, const Vec& q, Vec y,
                            const OdeSettings& s, int max_iter) {
    const int n = chart.dim;
    const double tol = 1e-10 * std::max(1.0, inf_norm(q));
    auto resid = [&](const Vec& yy) -> std::optional<Vec> {
        try {
            return Vec(exp_map(chart, p, E * yy, s) - q);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::DomainExit || e.kind() == ErrorKind::StepFault) return std::nullopt;
            throw;
        }
    };
    std::optional<Vec> r = resid(y);
    double best = r ? inf_norm(*r) : std::numeric_limits<double>::infinity();
    Vec best_y = y;
    if (!r) throw NoConvergence("initial guess leaves the chart", best);
    int it = 0;
    for (; it < max_iter && best > tol; ++it) {
        Mat J(n, n);
        const double h = 1e-6 * std::max(1.0, y.norm());
        bool ok = true;
        for (int k = 0; k < n && ok; ++k) {
            Vec yp = y, ym = y;
            yp(k) += h;
            ym(k) -= h;
            const auto rp = resid(yp), rm = resid(ym);
            if (!rp || !rm) {
                ok = false;
                break;
            }
            J.col(k) = (*rp - *rm) / (2.0 * h);
        }
        if (!ok) break;
        const auto lu = J.fullPivLu();
        if (!lu.isInvertible()) break;
        const Vec step = lu.solve(-*r);
        double lambda = 1.0;
        bool improved = false;
        for (int ls = 0; ls < 30; ++ls, lambda *= 0.5) {
            const Vec cand = y + lambda * step;
            const auto rc = resid(cand);
            if (rc && inf_norm(*rc) < best) {
                y = cand;
                r = rc;
                best = inf_norm(*rc);
                best_y = y;
                improved = true;
                break;
            }
        }
        if (!improved) break;
    }
    if (!(best <= tol))
        throw NoConvergence("log map did not converge after " + std::to_string(it) + " iterations", best);
    return LogResult{best_y, E * best_y, best, it};
}

}  // namespace detail

/// Normal coordinates of q with respect to (p, frame): v with exp_p(v) = q.
inline LogResult log_map(const MetricChart& chart, const Vec& p, const Mat& frame, const Vec& q,
                         const OdeSettings& settings = {}, int max_iter = 50) {
    require_domain(chart, p);
    require_domain(chart, q);
    const Mat E = detail::initial_frame(chart, p, Vec::Zero(chart.dim), frame);
    const Vec y0 = E.partialPivLu().solve(Vec(q - p));
    return detail::log_newton(chart, p, E, q, y0, settings, max_iter);
}

struct ShortestResult {
    Trajectory trajectory;  // on [0, 1], initial velocity E y
    Vec y;                  // normal coordinates of q
    double length = 0.0;
    int converged = 0;
    int tries = 0;
    std::uint64_t seed = 0;
    bool candidate_only = true;  // shooting gives a connecting geodesic, not a proof of minimality
};

/// Multi-start shooting for a short connecting geodesic; keeps the shortest converged one.
inline ShortestResult shortest_geodesic(const MetricChart& chart, const Vec& p, const Vec& q, int tries,
                                        std::uint64_t seed = 1, const OdeSettings& settings = {}) {
    if (tries < 1) throw Error(ErrorKind::BadParam, "tries must be >= 1");
    require_domain(chart, p);
    require_domain(chart, q);
    const int n = chart.dim;
    const Mat E = orthonormalize(metric_value(chart, p), Mat::Identity(n, n));
    const Vec dir0 = E.partialPivLu().solve(Vec(q - p));
    // Length of the coordinate segment is a natural scale for the initial speed.
    double scale = dir0.norm();
    if (scale > 0.0) {
        SampledCurve seg;
        for (int i = 0; i <= 16; ++i) {
            seg.t.push_back(i / 16.0);
            seg.points.push_back(p + (q - p) * (i / 16.0));
            seg.velocities.push_back(q - p);
        }
        try {
            scale = curve_length(chart, seg, 1e-6);
        } catch (const Error&) {
        }
    }
    ShortestResult best;
    best.tries = tries;
    best.seed = seed;
    best.length = std::numeric_limits<double>::infinity();
    Rng rng(seed);
    for (int k = 0; k < tries; ++k) {
        Vec y0 = dir0.norm() > 0.0 ? Vec(dir0.normalized() * scale) : Vec::Zero(n);
        if (k > 0) {
            Vec noise(n);
            for (int i = 0; i < n; ++i) noise(i) = rng.normal();
            Vec d = dir0.norm() > 0.0 ? Vec(dir0.normalized() + 0.4 * noise) : noise;
            if (d.norm() == 0.0) continue;
            y0 = d.normalized() * (std::max(scale, 1e-3) * rng.uniform(0.5, 1.3));
        }
        try {
            const LogResult lr = detail::log_newton(chart, p, E, q, y0, settings, 50);
            ++best.converged;
            const double len = lr.y.norm();
            if (len < best.length - 1e-12) {
                best.length = len;
                best.y = lr.y;
            }
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NoConvergence) throw;
        }
    }
    if (best.converged == 0)
        throw NoConvergence("no shooting start converged out of " + std::to_string(tries), 0.0);
    best.trajectory = integrate_geodesic(chart, p, E * best.y, 1.0, settings);
    return best;
}

}  // namespace rkit
