#pragma once

// Connection and curvature in a coordinate chart.
//
// Conventions:
//   gamma(i, j, k)  = Γ^i_jk, the ∂_i component of D_{∂_j} ∂_k.
//   up(i, j, h, k)  = R^i_jhk, the ∂_i component of R_{∂_h ∂_k} ∂_j, with
//                     R_XY = D_[X,Y] - D_X D_Y + D_Y D_X.
//   low(a, b, c, d) = g(R_{∂_a ∂_b} ∂_c, ∂_d).
// With this sign the round sphere has K = g(R_xy x, y) / |x ∧ y|^2 = +1.

#include "rkit/error.hpp"
#include "rkit/expr.hpp"
#include "rkit/linalg.hpp"
#include "rkit/manifold.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace rkit {

/// Dense 4-index array over an n-dimensional space.
class Tensor4 {
public:
    Tensor4() = default;
    explicit Tensor4(int n) : n_(n), data_(static_cast<std::size_t>(n * n * n * n), 0.0) {}

    [[nodiscard]] int dim() const { return n_; }
    double& operator()(int a, int b, int c, int d) { return data_[index(a, b, c, d)]; }
    double operator()(int a, int b, int c, int d) const { return data_[index(a, b, c, d)]; }
    [[nodiscard]] const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    [[nodiscard]] double max_abs() const {
        double m = 0.0;
        for (double x : data_) m = std::max(m, std::abs(x));
        return m;
    }

    Tensor4& operator+=(const Tensor4& o) {
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Tensor4& operator-=(const Tensor4& o) {
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Tensor4& operator*=(double s) {
        for (double& x : data_) x *= s;
        return *this;
    }
    friend Tensor4 operator+(Tensor4 a, const Tensor4& b) { return a += b; }
    friend Tensor4 operator-(Tensor4 a, const Tensor4& b) { return a -= b; }
    friend Tensor4 operator*(double s, Tensor4 a) { return a *= s; }

private:
    [[nodiscard]] std::size_t index(int a, int b, int c, int d) const {
        return static_cast<std::size_t>(((a * n_ + b) * n_ + c) * n_ + d);
    }

    int n_ = 0;
    std::vector<double> data_;
};

struct ChristoffelField {
    Vec point;
    int n = 0;
    std::vector<double> gamma;  // n^3

    double operator()(int i, int j, int k) const {
        return gamma[static_cast<std::size_t>((i * n + j) * n + k)];
    }

    /// Γ(u, w)^i = Γ^i_jk u^j w^k
    [[nodiscard]] Vec contract(const Vec& u, const Vec& w) const {
        Vec out = Vec::Zero(n);
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) {
                if (u(j) == 0.0) continue;
                for (int k = 0; k < n; ++k) s += (*this)(i, j, k) * u(j) * w(k);
            }
            out(i) = s;
        }
        return out;
    }
};

struct CurvatureTensor {
    Vec point;
    Tensor4 up;
    Tensor4 low;
};

struct RicciData {
    Vec point;
    Mat ric;
    double scalar = 0.0;
};

namespace detail {

inline ChristoffelField christoffel_from(const MetricJet& jet, const Vec& p) {
    const int n = static_cast<int>(jet.g.rows());
    ChristoffelField cf{p, n, std::vector<double>(static_cast<std::size_t>(n * n * n), 0.0)};
    for (int j = 0; j < n; ++j) {
        for (int k = j; k < n; ++k) {
            // lowered: Γ_mjk = ½(∂_j g_mk + ∂_k g_mj − ∂_m g_jk)
            Vec lower(n);
            for (int m = 0; m < n; ++m)
                lower(m) = 0.5 * (jet.dg[static_cast<std::size_t>(j)](m, k) + jet.dg[static_cast<std::size_t>(k)](m, j) -
                                  jet.dg[static_cast<std::size_t>(m)](j, k));
            const Vec raised = jet.ginv * lower;
            for (int i = 0; i < n; ++i) {
                cf.gamma[static_cast<std::size_t>((i * n + j) * n + k)] = raised(i);
                cf.gamma[static_cast<std::size_t>((i * n + k) * n + j)] = raised(i);
            }
        }
    }
    return cf;
}

/// d_l Γ^i_jk stored as dgamma[l][(i*n + j)*n + k].
inline std::array<std::vector<double>, kMaxDim> christoffel_derivatives(const MetricJet& jet) {
    const int n = static_cast<int>(jet.g.rows());
    std::array<std::vector<double>, kMaxDim> out;
    for (int l = 0; l < n; ++l) {
        const auto L = static_cast<std::size_t>(l);
        const Mat dginv = -jet.ginv * jet.dg[L] * jet.ginv;
        out[L].assign(static_cast<std::size_t>(n * n * n), 0.0);
        for (int j = 0; j < n; ++j) {
            for (int k = j; k < n; ++k) {
                Vec lower(n), dlower(n);
                for (int m = 0; m < n; ++m) {
                    const auto J = static_cast<std::size_t>(j), K = static_cast<std::size_t>(k), M = static_cast<std::size_t>(m);
                    lower(m) = 0.5 * (jet.dg[J](m, k) + jet.dg[K](m, j) - jet.dg[M](j, k));
                    dlower(m) = 0.5 * (jet.ddg[L][J](m, k) + jet.ddg[L][K](m, j) - jet.ddg[L][M](j, k));
                }
                const Vec d = dginv * lower + jet.ginv * dlower;
                for (int i = 0; i < n; ++i) {
                    out[L][static_cast<std::size_t>((i * n + j) * n + k)] = d(i);
                    out[L][static_cast<std::size_t>((i * n + k) * n + j)] = d(i);
                }
            }
        }
    }
    return out;
}

inline CurvatureTensor curvature_from(const MetricJet& jet, const ChristoffelField& gam, const Vec& p) {
    const int n = static_cast<int>(jet.g.rows());
    const auto dgam = christoffel_derivatives(jet);
    auto G = [&](int i, int j, int k) { return gam(i, j, k); };
    auto dG = [&](int l, int i, int j, int k) {
        return dgam[static_cast<std::size_t>(l)][static_cast<std::size_t>((i * n + j) * n + k)];
    };
    CurvatureTensor R{p, Tensor4(n), Tensor4(n)};
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int h = 0; h < n; ++h)
                for (int k = h + 1; k < n; ++k) {
                    double v = dG(k, i, h, j) - dG(h, i, k, j);
                    for (int m = 0; m < n; ++m) v += G(m, h, j) * G(i, k, m) - G(m, k, j) * G(i, h, m);
                    R.up(i, j, h, k) = v;
                    R.up(i, j, k, h) = -v;
                }
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c)
                for (int d = 0; d < n; ++d) {
                    double v = 0.0;
                    for (int m = 0; m < n; ++m) v += jet.g(d, m) * R.up(m, c, a, b);
                    R.low(a, b, c, d) = v;
                }
    return R;
}

}  // namespace detail

inline ChristoffelField christoffel(const MetricChart& chart, const Vec& p) {
    return detail::christoffel_from(metric_at(chart, p), p);
}

inline CurvatureTensor curvature(const MetricChart& chart, const Vec& p) {
    const MetricJet jet = metric_at(chart, p);
    return detail::curvature_from(jet, detail::christoffel_from(jet, p), p);
}

/// Everything the integrators need at one point, computed from a single jet.
struct PointGeometry {
    MetricJet jet;
    ChristoffelField gamma;
    CurvatureTensor R;
};

inline PointGeometry point_geometry(const MetricChart& chart, const Vec& p, bool with_curvature = true) {
    PointGeometry pg{metric_at(chart, p), {}, {}};
    pg.gamma = detail::christoffel_from(pg.jet, p);
    if (with_curvature) pg.R = detail::curvature_from(pg.jet, pg.gamma, p);
    return pg;
}

// ---------------------------------------------------------------------------
// Algebraic identities.

struct SymmetryResiduals {
    double r1 = 0.0;  // R(x,y) = -R(y,x)
    double r2 = 0.0;  // skew-adjoint: g(R_xy z, w) = -g(z, R_xy w)
    double r3 = 0.0;  // cyclic: R_xy z + R_yz x + R_zx y = 0
    double r4 = 0.0;  // pair symmetry: g(R_xy z, w) = g(R_zw x, y)
    double scale = 0.0;
};

/// Residuals of the four curvature identities on a lowered tensor, each normalized
/// by the largest component (absolute when the tensor vanishes).
inline SymmetryResiduals check_symmetries(const Tensor4& low) {
    const int n = low.dim();
    SymmetryResiduals r;
    r.scale = low.max_abs();
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c)
                for (int d = 0; d < n; ++d) {
                    const double x = low(a, b, c, d);
                    r.r1 = std::max(r.r1, std::abs(x + low(b, a, c, d)));
                    r.r2 = std::max(r.r2, std::abs(x + low(a, b, d, c)));
                    r.r3 = std::max(r.r3, std::abs(x + low(b, c, a, d) + low(c, a, b, d)));
                    r.r4 = std::max(r.r4, std::abs(x - low(c, d, a, b)));
                }
    const double s = r.scale > 1e-300 ? r.scale : 1.0;
    r.r1 /= s;
    r.r2 /= s;
    r.r3 /= s;
    r.r4 /= s;
    return r;
}

inline SymmetryResiduals check_symmetries(const CurvatureTensor& R) { return check_symmetries(R.low); }

/// Projects an arbitrary array onto tensors with skew symmetry in each pair and
/// pair symmetry; with `cyclic` it also removes the totally skew part so the
/// result satisfies the cyclic identity.
inline Tensor4 project_curvature_type(const Tensor4& T, bool cyclic) {
    const int n = T.dim();
    Tensor4 out(n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c)
                for (int d = 0; d < n; ++d) {
                    const double s = T(a, b, c, d) - T(b, a, c, d) - T(a, b, d, c) + T(b, a, d, c) + T(c, d, a, b) -
                                     T(d, c, a, b) - T(c, d, b, a) + T(d, c, b, a);
                    out(a, b, c, d) = s / 8.0;
                }
    if (!cyclic) return out;
    Tensor4 fixed(n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c)
                for (int d = 0; d < n; ++d)
                    fixed(a, b, c, d) =
                        out(a, b, c, d) - (out(a, b, c, d) + out(b, c, a, d) + out(c, a, b, d)) / 3.0;
    return fixed;
}

/// Residual of the second Bianchi identity at p, covariant derivatives built from
/// five-point central differences of the curvature.
inline double bianchi_residual(const MetricChart& chart, const Vec& p) {
    const int n = chart.dim;
    const PointGeometry pg = point_geometry(chart, p);
    const Tensor4& R = pg.R.up;
    double rate = 1.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) rate = std::max(rate, std::abs(pg.gamma(i, j, k)));
    std::vector<Tensor4> dR;
    for (int l = 0; l < n; ++l) {
        // step shrinks where the metric varies fast, e.g. near a conformal boundary
        const double h = std::pow(std::numeric_limits<double>::epsilon(), 0.2) * std::max(1.0, std::abs(p(l))) / rate;
        auto at = [&](double s) {
            Vec q = p;
            q(l) += s * h;
            if (!in_domain(chart, q)) throw DomainExit("Bianchi stencil leaves the chart", 0.0, to_std(p));
            return curvature(chart, q).up;
        };
        Tensor4 d = at(-2.0) - at(2.0);
        Tensor4 inner = at(1.0) - at(-1.0);
        inner *= 8.0;
        d += inner;
        d *= 1.0 / (12.0 * h);
        dR.push_back(std::move(d));
    }
    const auto& G = pg.gamma;
    // covariant derivative R^i_jhk|l
    auto cov = [&](int i, int j, int h, int k, int l) {
        double v = dR[static_cast<std::size_t>(l)](i, j, h, k);
        for (int m = 0; m < n; ++m)
            v += G(i, l, m) * R(m, j, h, k) - G(m, l, j) * R(i, m, h, k) - G(m, l, h) * R(i, j, m, k) -
                 G(m, l, k) * R(i, j, h, m);
        return v;
    };
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int h = 0; h < n; ++h)
                for (int k = 0; k < n; ++k)
                    for (int l = 0; l < n; ++l)
                        worst = std::max(worst, std::abs(cov(i, j, h, k, l) + cov(i, j, k, l, h) + cov(i, j, l, h, k)));
    const double scale = R.max_abs();
    return scale > 1e-12 ? worst / scale : worst;
}

/// Sectional curvature of span{x, y}: g(R_xy x, y) / (g(x,x) g(y,y) - g(x,y)^2).
inline double sectional(const Tensor4& low, const Mat& g, const Vec& x, const Vec& y) {
    const double gxx = x.dot(g * x), gyy = y.dot(g * y), gxy = x.dot(g * y);
    const double den = gxx * gyy - gxy * gxy;
    if (!(den > 1e-12 * gxx * gyy)) throw Error(ErrorKind::DegeneratePlane, "vectors are (nearly) collinear");
    const int n = low.dim();
    double num = 0.0;
    for (int a = 0; a < n; ++a) {
        if (x(a) == 0.0) continue;
        for (int b = 0; b < n; ++b) {
            if (y(b) == 0.0) continue;
            for (int c = 0; c < n; ++c) {
                if (x(c) == 0.0) continue;
                for (int d = 0; d < n; ++d) num += low(a, b, c, d) * x(a) * y(b) * x(c) * y(d);
            }
        }
    }
    return num / den;
}

inline double sectional(const CurvatureTensor& R, const Mat& g, const TangentVector& x, const TangentVector& y) {
    return sectional(R.low, g, x.components, y.components);
}

/// Ricci contraction Ric_ih = g^{jl} R_{ijhl} of a lowered tensor.
inline Mat ricci_contraction(const Tensor4& low, const Mat& ginv) {
    const int n = low.dim();
    Mat ric = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int h = 0; h < n; ++h) {
            double s = 0.0;
            for (int j = 0; j < n; ++j)
                for (int l = 0; l < n; ++l) s += ginv(j, l) * low(i, j, h, l);
            ric(i, h) = s;
        }
    return ric;
}

inline RicciData ricci(const CurvatureTensor& R, const Mat& g) {
    const int n = R.up.dim();
    RicciData out{R.point, Mat::Zero(n, n), 0.0};
    for (int i = 0; i < n; ++i)
        for (int h = 0; h < n; ++h) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += R.up(j, h, i, j);
            out.ric(i, h) = s;
        }
    const Mat ginv = g.inverse();
    out.scalar = (ginv.cwiseProduct(out.ric)).sum();
    return out;
}

// ---------------------------------------------------------------------------
// Curvature-type algebra: wedge products, inner product, Weyl split.

/// Q_{A,B}(x,y,z,w) = A(x,z)B(y,w) + A(y,w)B(x,z) - A(x,w)B(y,z) - A(y,z)B(x,w).
/// This realizes A∧B + B∧A; with B = g it satisfies Ric(Q_{A,g}) = (n-2)A + (tr A) g.
inline Tensor4 wedge_sym(const Mat& A, const Mat& B) {
    const int n = static_cast<int>(A.rows());
    Tensor4 Q(n);
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
            for (int z = 0; z < n; ++z)
                for (int w = 0; w < n; ++w)
                    Q(x, y, z, w) = A(x, z) * B(y, w) + A(y, w) * B(x, z) - A(x, w) * B(y, z) - A(y, z) * B(x, w);
    return Q;
}

/// Constant-curvature tensor K (g(x,z)g(y,w) - g(x,w)g(y,z)).
inline Tensor4 constant_curvature_tensor(double K, const Mat& g) { return (0.5 * K) * wedge_sym(g, g); }

/// Determinant inner product on bivector-symmetric tensors: sum over index pairs
/// a<b, c<d with all indices raised by g.
inline double curvature_inner(const Tensor4& A, const Tensor4& B, const Mat& ginv) {
    const int n = A.dim();
    // raise all indices of B
    Tensor4 t1(n), t2(n);
    auto raise = [&](const Tensor4& src, Tensor4& dst, int slot) {
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                for (int c = 0; c < n; ++c)
                    for (int d = 0; d < n; ++d) {
                        double s = 0.0;
                        for (int m = 0; m < n; ++m) {
                            const int idx[4] = {a, b, c, d};
                            int j[4] = {a, b, c, d};
                            j[slot] = m;
                            s += ginv(idx[slot], m) * src(j[0], j[1], j[2], j[3]);
                        }
                        dst(a, b, c, d) = s;
                    }
    };
    raise(B, t1, 0);
    raise(t1, t2, 1);
    raise(t2, t1, 2);
    raise(t1, t2, 3);
    double s = 0.0;
    for (std::size_t i = 0; i < A.data().size(); ++i) s += A.data()[i] * t2.data()[i];
    return 0.25 * s;
}

struct WeylDecomposition {
    Tensor4 weyl;
    Tensor4 traceless_ricci_part;
    Tensor4 scalar_part;
    double weyl_norm = 0.0;
    double traceless_norm = 0.0;
    double scalar_norm = 0.0;
    double weyl_ricci_residual = 0.0;   // max |C_Ric(weyl)|
    double orthogonality = 0.0;         // max |<part_i, part_j>| over distinct parts
    double reassembly = 0.0;            // max |sum of parts - input|
};

/// R = W + (scalar part) + (traceless Ricci part), with the two Ricci parts built
/// by W⊥(A) = (A∧I + I∧A - (tr A/(n-1)) I∧I)/(n-2).
inline WeylDecomposition weyl_decompose(const Tensor4& low, const Mat& g) {
    const int n = low.dim();
    if (n < 3) throw Error(ErrorKind::BadDimension, "Weyl decomposition needs n >= 3");
    const Mat ginv = g.inverse();
    const Mat ric = ricci_contraction(low, ginv);
    const double S = (ginv.cwiseProduct(ric)).sum();
    const Mat ric0 = ric - (S / n) * g;

    WeylDecomposition out;
    out.scalar_part = (S / (2.0 * n * (n - 1))) * wedge_sym(g, g);
    out.traceless_ricci_part = (1.0 / (n - 2)) * wedge_sym(ric0, g);
    out.weyl = low - out.scalar_part - out.traceless_ricci_part;

    out.weyl_norm = std::sqrt(std::max(0.0, curvature_inner(out.weyl, out.weyl, ginv)));
    out.traceless_norm = std::sqrt(std::max(0.0, curvature_inner(out.traceless_ricci_part, out.traceless_ricci_part, ginv)));
    out.scalar_norm = std::sqrt(std::max(0.0, curvature_inner(out.scalar_part, out.scalar_part, ginv)));
    out.weyl_ricci_residual = ricci_contraction(out.weyl, ginv).cwiseAbs().maxCoeff();
    out.orthogonality = std::max({std::abs(curvature_inner(out.weyl, out.scalar_part, ginv)),
                                  std::abs(curvature_inner(out.weyl, out.traceless_ricci_part, ginv)),
                                  std::abs(curvature_inner(out.scalar_part, out.traceless_ricci_part, ginv))});
    out.reassembly = (out.weyl + out.scalar_part + out.traceless_ricci_part - low).max_abs();
    return out;
}

/// Dimension of the space of algebraic curvature tensors, n^2(n^2-1)/12.
inline long long curvature_space_dim(int n) {
    if (n < 1) throw Error(ErrorKind::BadParam, "n must be >= 1");
    const long long N = static_cast<long long>(n) * (n - 1) / 2;
    const long long choose4 =
        n < 4 ? 0 : static_cast<long long>(n) * (n - 1) * (n - 2) * (n - 3) / 24;
    return N * (N + 1) / 2 - choose4;
}

// ---------------------------------------------------------------------------

/// max |g(D_a J, ∂_b) + g(∂_a, D_b J)| over the sample points.
inline double killing_residual(const MetricChart& chart, const std::vector<Expression>& field,
                               const std::vector<Vec>& points) {
    const int n = chart.dim;
    if (static_cast<int>(field.size()) != n)
        throw Error(ErrorKind::BadParam, "vector field needs " + std::to_string(n) + " components");
    double worst = 0.0;
    for (const Vec& p : points) {
        const MetricJet jet = metric_at(chart, p);
        const ChristoffelField G = detail::christoffel_from(jet, p);
        Vec J(n);
        Mat dJ(n, n);  // dJ(i, a) = ∂_a J^i
        for (int i = 0; i < n; ++i) {
            const Dual2 d = field[static_cast<std::size_t>(i)].eval2(p);
            J(i) = d.value();
            for (int a = 0; a < n; ++a) dJ(i, a) = d.grad(a);
        }
        Mat DJ(n, n);  // DJ(i, a) = (D_a J)^i
        for (int a = 0; a < n; ++a)
            for (int i = 0; i < n; ++i) {
                double s = dJ(i, a);
                for (int k = 0; k < n; ++k) s += G(i, a, k) * J(k);
                DJ(i, a) = s;
            }
        const Mat lowered = jet.g * DJ;  // lowered(b, a) = g(∂_b, D_a J)
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) worst = std::max(worst, std::abs(lowered(b, a) + lowered(a, b)));
    }
    return worst;
}

/// Sectional curvatures of the left-invariant metric on SO(3)/S^3 with orthogonal
/// invariant fields of lengths a, b, c, by two closed forms.
struct BergerCurvatures {
    double K12 = 0.0, K23 = 0.0, K31 = 0.0;
    double A = 0.0, B = 0.0, C = 0.0;
    double K12_squares = 0.0, K23_squares = 0.0, K31_squares = 0.0;
    double cross_check = 0.0;
};

inline BergerCurvatures berger_curvatures(double a, double b, double c) {
    if (!(a > 0.0 && b > 0.0 && c > 0.0)) throw Error(ErrorKind::BadParam, "lengths a, b, c must be positive");
    BergerCurvatures k;
    const double abc2 = 2.0 * a * b * c;
    k.A = (b * b + c * c - a * a) / abc2;
    k.B = (c * c + a * a - b * b) / abc2;
    k.C = (a * a + b * b - c * c) / abc2;
    k.K12 = k.A * k.C + k.B * k.C - k.A * k.B;
    k.K23 = k.B * k.A + k.C * k.A - k.B * k.C;
    k.K31 = k.C * k.B + k.A * k.B - k.C * k.A;

    const double u = a * a, v = b * b, w = c * c;
    auto squares = [&](double x, double y, double z) {
        return (3.0 * (x - y) * (x - y) + (x + y) * (x + y) - (3.0 * z - x - y) * (3.0 * z - x - y)) /
               (12.0 * u * v * w);
    };
    k.K12_squares = squares(u, v, w);
    k.K23_squares = squares(v, w, u);
    k.K31_squares = squares(w, u, v);
    k.cross_check = std::max({std::abs(k.K12 - k.K12_squares), std::abs(k.K23 - k.K23_squares),
                              std::abs(k.K31 - k.K31_squares)});
    return k;
}

}  // namespace rkit
