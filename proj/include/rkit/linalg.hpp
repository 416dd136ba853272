#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace rkit {

/// Largest chart dimension supported. Small fixed capacity keeps every vector and
/// matrix on the stack inside the integrators.
inline constexpr int kMaxDim = 6;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

inline Vec to_vec(const std::vector<double>& v) {
    Vec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
    return out;
}

inline std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

/// Portable seeded RNG: mt19937_64 with hand-rolled real mapping, so the same seed
/// produces the same samples on every standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    Vec uniform_vec(int n, double lo, double hi) {
        Vec v(n);
        for (int i = 0; i < n; ++i) v(i) = uniform(lo, hi);
        return v;
    }

    /// Standard normal via Box-Muller (portable, unlike std::normal_distribution).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

/// Gram-Schmidt of `seed` columns against the inner product `g`. Columns that become
/// numerically dependent are replaced from the coordinate basis.
inline Mat orthonormalize(const Mat& g, const Mat& seed) {
    const int n = static_cast<int>(g.rows());
    Mat out(n, n);
    int filled = 0;
    auto try_add = [&](Vec w) {
        for (int j = 0; j < filled; ++j) w -= (out.col(j).dot(g * w)) * out.col(j);
        const double nn = w.dot(g * w);
        if (nn <= 1e-20) return false;
        out.col(filled++) = w / std::sqrt(nn);
        return true;
    };
    for (int j = 0; j < seed.cols() && filled < n; ++j) try_add(seed.col(j));
    for (int j = 0; j < n && filled < n; ++j) try_add(Mat::Identity(n, n).col(j));
    return out;
}

/// Orthonormal frame at a point; first member along `v` when v is nonzero.
inline Mat adapted_frame(const Mat& g, const Vec& v) {
    const int n = static_cast<int>(g.rows());
    if (v.norm() == 0.0) return orthonormalize(g, Mat::Identity(n, n));
    Mat seed(n, 1);
    seed.col(0) = v;
    return orthonormalize(g, seed);
}

inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Composite Simpson on a (possibly nonuniform) grid. An even number of intervals
/// uses the exact three-point rule on panel pairs; a trailing single interval is
/// handled with the three-point rule on the last two intervals.
inline double simpson(const std::vector<double>& t, const std::vector<double>& y) {
    const std::size_t m = t.size();
    if (m < 2) return 0.0;
    if (m == 2) return 0.5 * (t[1] - t[0]) * (y[0] + y[1]);
    auto pair = [&](std::size_t i) {
        const double h0 = t[i + 1] - t[i], h1 = t[i + 2] - t[i + 1];
        const double hs = h0 + h1;
        return hs / 6.0 *
               ((2.0 - h1 / h0) * y[i] + hs * hs / (h0 * h1) * y[i + 1] + (2.0 - h0 / h1) * y[i + 2]);
    };
    double s = 0.0;
    std::size_t i = 0;
    for (; i + 2 < m; i += 2) s += pair(i);
    if (i + 1 < m) {
        // one interval left: integral over [t_{m-2}, t_{m-1}] of the parabola through the last 3 points
        const std::size_t a = m - 3;
        const double h0 = t[a + 1] - t[a], h1 = t[a + 2] - t[a + 1];
        s += h1 / 6.0 * (-(h1 * h1) / (h0 * (h0 + h1)) * y[a] + (3.0 + h1 / h0) * y[a + 1] +
                         (3.0 * h0 + 2.0 * h1) / (h0 + h1) * y[a + 2]);
    }
    return s;
}

struct Quadrature {
    std::vector<double> nodes, weights;
};

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton on P_n).
inline Quadrature gauss_legendre(int n) {
    Quadrature q;
    q.nodes.resize(n);
    q.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        q.nodes[i] = -x;
        q.nodes[n - 1 - i] = x;
        q.weights[i] = q.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return q;
}

}  // namespace rkit
