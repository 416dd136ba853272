#pragma once

// Explicit Runge-Kutta drivers over flat state vectors.

#include "rkit/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace rkit {

enum class OdeMethod { Rk4Fixed, Rkf45Adaptive };

inline const char* to_string(OdeMethod m) { return m == OdeMethod::Rk4Fixed ? "rk4_fixed" : "rkf45_adaptive"; }

struct OdeSettings {
    OdeMethod method = OdeMethod::Rk4Fixed;
    double step = 1e-3;
    double rtol = 1e-9;
    double atol = 1e-11;
    long max_steps = 50'000'000;

    void validate() const {
        if (!(step > 0.0) || !(rtol > 0.0) || !(atol > 0.0) || max_steps <= 0)
            throw Error(ErrorKind::BadParam, "ODE step, tolerances and max_steps must be positive");
    }
};

using State = std::vector<double>;

namespace ode {

inline void axpy(State& out, const State& y, double a, const State& k) {
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] + a * k[i];
}

/// One classical RK4 step. `rhs(t, y, dydt)`.
template <typename Rhs>
State rk4_step(Rhs&& rhs, double t, const State& y, double h) {
    const std::size_t m = y.size();
    State k1(m), k2(m), k3(m), k4(m), tmp(m);
    rhs(t, y, k1);
    axpy(tmp, y, 0.5 * h, k1);
    rhs(t + 0.5 * h, tmp, k2);
    axpy(tmp, y, 0.5 * h, k2);
    rhs(t + 0.5 * h, tmp, k3);
    axpy(tmp, y, h, k3);
    rhs(t + h, tmp, k4);
    State out(m);
    for (std::size_t i = 0; i < m; ++i) out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

/// Runge-Kutta-Fehlberg 4(5) step; returns the 4th-order solution and writes the
/// error estimate (difference to the 5th-order solution).
template <typename Rhs>
State rkf45_step(Rhs&& rhs, double t, const State& y, double h, State& err) {
    const std::size_t m = y.size();
    State k1(m), k2(m), k3(m), k4(m), k5(m), k6(m), tmp(m);
    rhs(t, y, k1);
    for (std::size_t i = 0; i < m; ++i) tmp[i] = y[i] + h * (k1[i] / 4.0);
    rhs(t + h / 4.0, tmp, k2);
    for (std::size_t i = 0; i < m; ++i) tmp[i] = y[i] + h * (3.0 / 32.0 * k1[i] + 9.0 / 32.0 * k2[i]);
    rhs(t + 3.0 * h / 8.0, tmp, k3);
    for (std::size_t i = 0; i < m; ++i)
        tmp[i] = y[i] + h * (1932.0 / 2197.0 * k1[i] - 7200.0 / 2197.0 * k2[i] + 7296.0 / 2197.0 * k3[i]);
    rhs(t + 12.0 * h / 13.0, tmp, k4);
    for (std::size_t i = 0; i < m; ++i)
        tmp[i] = y[i] + h * (439.0 / 216.0 * k1[i] - 8.0 * k2[i] + 3680.0 / 513.0 * k3[i] - 845.0 / 4104.0 * k4[i]);
    rhs(t + h, tmp, k5);
    for (std::size_t i = 0; i < m; ++i)
        tmp[i] = y[i] + h * (-8.0 / 27.0 * k1[i] + 2.0 * k2[i] - 3544.0 / 2565.0 * k3[i] + 1859.0 / 4104.0 * k4[i] -
                             11.0 / 40.0 * k5[i]);
    rhs(t + h / 2.0, tmp, k6);
    State y4(m);
    err.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        y4[i] = y[i] + h * (25.0 / 216.0 * k1[i] + 1408.0 / 2565.0 * k3[i] + 2197.0 / 4104.0 * k4[i] - k5[i] / 5.0);
        const double y5 = y[i] + h * (16.0 / 135.0 * k1[i] + 6656.0 / 12825.0 * k3[i] + 28561.0 / 56430.0 * k4[i] -
                                      9.0 / 50.0 * k5[i] + 2.0 / 55.0 * k6[i]);
        err[i] = y5 - y4[i];
    }
    return y4;
}

/// Integrates from t0 to t1 and calls `observe(t, y)` at t0 and after every
/// accepted step. `accept(t, y)` may throw to abort (e.g. on leaving the chart).
/// `error_len` limits the adaptive error norm to the leading components.
template <typename Rhs, typename Observe, typename Accept>
void integrate(Rhs&& rhs, State y, double t0, double t1, const OdeSettings& s, Observe&& observe, Accept&& accept,
               std::size_t error_len = 0) {
    s.validate();
    observe(t0, y);
    if (t1 == t0) return;
    const double span = t1 - t0;
    const double dir = span > 0 ? 1.0 : -1.0;
    if (s.method == OdeMethod::Rk4Fixed) {
        const long steps = std::max(1L, static_cast<long>(std::ceil(std::abs(span) / s.step - 1e-9)));
        if (steps > s.max_steps) throw Error(ErrorKind::StepFault, "fixed-step count exceeds max_steps");
        const double h = span / static_cast<double>(steps);
        for (long i = 0; i < steps; ++i) {
            const double t = t0 + h * static_cast<double>(i);
            State next = rk4_step(rhs, t, y, h);
            const double tn = i + 1 == steps ? t1 : t0 + h * static_cast<double>(i + 1);
            accept(tn, next);
            y = std::move(next);
            observe(tn, y);
        }
        return;
    }
    const std::size_t elen = error_len == 0 ? y.size() : std::min(error_len, y.size());
    double t = t0;
    double h = dir * std::min(s.step, std::abs(span));
    State err;
    long count = 0;
    while (dir * (t1 - t) > 0.0) {
        if (++count > s.max_steps) throw Error(ErrorKind::StepFault, "adaptive step count exceeds max_steps");
        if (dir * (t + h - t1) > 0.0) h = t1 - t;
        State next = rkf45_step(rhs, t, y, h, err);
        double norm = 0.0;
        for (std::size_t i = 0; i < elen; ++i) {
            const double sc = s.atol + s.rtol * std::max(std::abs(y[i]), std::abs(next[i]));
            norm = std::max(norm, std::abs(err[i]) / sc);
        }
        if (!std::isfinite(norm)) norm = 1e10;
        if (norm <= 1.0) {
            const double tn = std::abs(t1 - (t + h)) < 1e-14 * std::max(1.0, std::abs(t1)) ? t1 : t + h;
            accept(tn, next);
            t = tn;
            y = std::move(next);
            observe(t, y);
        }
        const double factor = norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(norm, -0.2), 0.2, 5.0);
        h *= factor;
        if (std::abs(h) < 1e-14 * std::max(1.0, std::abs(t)))
            throw Error(ErrorKind::StepFault, "adaptive step underflow at t = " + std::to_string(t));
    }
}

}  // namespace ode
}  // namespace rkit
