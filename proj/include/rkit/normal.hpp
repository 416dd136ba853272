#pragma once

// Metric Taylor expansion in normal coordinates.

#include "rkit/tensor.hpp"
#include "rkit/transport.hpp"

#include <cmath>
#include <limits>
#include <optional>

namespace rkit {

/// Metric in normal coordinates at y: g~_ij(y) = g(d exp_p(Ey)[E e_i], d exp_p(Ey)[E e_j]),
/// evaluated through Jacobi fields J(0) = 0, J'(0) = E e_i along t -> exp_p(tEy).
inline Mat normal_metric(const MetricChart& chart, const Vec& p, const Mat& E, const Vec& y,
                         const OdeSettings& s = {}) {
    const int n = chart.dim;
    const FlowLayout L{n, n, true};
    const State y0 = L.pack(p, E * y, E, Mat::Zero(n, n), Mat::Identity(n, n));
    State last = y0;
    detail::run_flow(chart, L, y0, 1.0, s, [&](double, const State& st) { last = st; });
    const Mat F = L.get_mat(last, L.F(), n);
    return F.transpose() * F;
}

struct NormalTaylorReport {
    Tensor4 fitted;     // fitted(i, j, h, k) = d_h d_k g~_ij(0)
    Tensor4 predicted;  // -(1/3)(R_ihjk + R_ikjh) in the frame
    double max_deviation = 0.0;
    double christoffel_origin = 0.0;  // max |Γ~(0)|
    double log_roundtrip = 0.0;       // max |log(exp(Ey)) - y| over the axis stencil
    double epsilon = 0.0;
    // 2-D only
    double E_yy = std::numeric_limits<double>::quiet_NaN();
    double K_fit = std::numeric_limits<double>::quiet_NaN();
    double K_point = std::numeric_limits<double>::quiet_NaN();
};

/// Fits the quadratic Taylor coefficients of the metric in normal coordinates on the
/// stencils of radius eps and eps/2, Richardson-extrapolated, and compares them with
/// the curvature prediction.
inline NormalTaylorReport normal_taylor_check(const MetricChart& chart, const Vec& p,
                                              const std::optional<Mat>& frame = std::nullopt, double eps = 0.05,
                                              const OdeSettings& s = {}) {
    const int n = chart.dim;
    const Mat g0 = metric_value(chart, p);
    const Mat E = frame ? detail::initial_frame(chart, p, Vec::Zero(n), frame) : orthonormalize(g0, Mat::Identity(n, n));
    NormalTaylorReport rep;
    rep.epsilon = eps;
    rep.fitted = Tensor4(n);
    rep.predicted = Tensor4(n);

    auto gt = [&](const Vec& y) { return normal_metric(chart, p, E, y, s); };
    auto unit = [&](int i) { return Vec(Mat::Identity(n, n).col(i)); };

    // Second derivatives at radius h.
    auto second = [&](double h) {
        std::vector<Mat> D(static_cast<std::size_t>(n * n), Mat::Zero(n, n));  // D[h*n+k](i,j)
        for (int a = 0; a < n; ++a) {
            const Mat d = (gt(h * unit(a)) + gt(-h * unit(a)) - 2.0 * Mat::Identity(n, n)) / (h * h);
            D[static_cast<std::size_t>(a * n + a)] = d;
            for (int b = a + 1; b < n; ++b) {
                const Vec u = unit(a) + unit(b), w = unit(a) - unit(b);
                const Mat m = (gt(h * u) + gt(-h * u) - gt(h * w) - gt(-h * w)) / (4.0 * h * h);
                D[static_cast<std::size_t>(a * n + b)] = m;
                D[static_cast<std::size_t>(b * n + a)] = m;
            }
        }
        return D;
    };
    auto first = [&](double h) {
        std::vector<Mat> D;
        for (int a = 0; a < n; ++a) D.push_back((gt(h * unit(a)) - gt(-h * unit(a))) / (2.0 * h));
        return D;
    };

    const auto S1 = second(eps), S2 = second(eps / 2);
    const auto F1 = first(eps), F2 = first(eps / 2);

    // frame components of the curvature: Rf(a,b,c,d) = low(E_a, E_b, E_c, E_d)
    const Tensor4 low = curvature(chart, p).low;
    Tensor4 Rf(n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c)
                for (int d = 0; d < n; ++d) {
                    double v = 0.0;
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < n; ++j)
                            for (int k = 0; k < n; ++k)
                                for (int l = 0; l < n; ++l)
                                    v += low(i, j, k, l) * E(i, a) * E(j, b) * E(k, c) * E(l, d);
                    Rf(a, b, c, d) = v;
                }

    for (int h = 0; h < n; ++h)
        for (int k = 0; k < n; ++k) {
            const auto idx = static_cast<std::size_t>(h * n + k);
            const Mat fit = (4.0 * S2[idx] - S1[idx]) / 3.0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    rep.fitted(i, j, h, k) = fit(i, j);
                    rep.predicted(i, j, h, k) = -(Rf(i, h, j, k) + Rf(i, k, j, h)) / 3.0;
                    rep.max_deviation =
                        std::max(rep.max_deviation, std::abs(rep.fitted(i, j, h, k) - rep.predicted(i, j, h, k)));
                }
        }

    // Γ~(0) from first derivatives (g~(0) = I).
    std::vector<Mat> dg;
    for (int a = 0; a < n; ++a) dg.push_back((4.0 * F2[static_cast<std::size_t>(a)] - F1[static_cast<std::size_t>(a)]) / 3.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const double G = 0.5 * (dg[static_cast<std::size_t>(j)](i, k) + dg[static_cast<std::size_t>(k)](i, j) -
                                        dg[static_cast<std::size_t>(i)](j, k));
                rep.christoffel_origin = std::max(rep.christoffel_origin, std::abs(G));
            }

    for (int a = 0; a < n; ++a)
        for (double sign : {1.0, -1.0}) {
            const Vec y = sign * eps * unit(a);
            const Vec q = exp_map(chart, p, E * y, s);
            const LogResult lr = log_map(chart, p, E, q, s);
            rep.log_roundtrip = std::max(rep.log_roundtrip, (lr.y - y).cwiseAbs().maxCoeff());
        }

    if (n == 2) {
        rep.E_yy = rep.fitted(0, 0, 1, 1);
        rep.K_fit = -1.5 * rep.E_yy;
        rep.K_point = sectional(low, g0, E.col(0), E.col(1));
    }
    return rep;
}

}  // namespace rkit
