#pragma once

#include <cmath>
#include <cstddef>

#include "bb/errors.hpp"

namespace bb {

// Adaptive Simpson quadrature with the classical Richardson acceptance test.
// The family construction only ever integrates smooth functions over short
// intervals (the beam angle stays well inside (-pi/2, pi/2)), so a simple
// recursive scheme with a generous depth cap is both fast and robust.
template <typename F>
double adaptive_simpson(const F& f, double a, double b, double abs_tol) {
    struct Impl {
        const F& f;
        std::size_t max_depth;

        double recurse(double a, double b, double fa, double fm, double fb,
                       double whole, double tol, std::size_t depth) const {
            const double m = 0.5 * (a + b);
            const double lm = 0.5 * (a + m);
            const double rm = 0.5 * (m + b);
            const double flm = f(lm);
            const double frm = f(rm);
            const double h = b - a;
            const double left = (h / 12.0) * (fa + 4.0 * flm + fm);
            const double right = (h / 12.0) * (fm + 4.0 * frm + fb);
            const double delta = left + right - whole;
            if (std::abs(delta) <= 15.0 * tol || depth >= max_depth) {
                if (depth >= max_depth && std::abs(delta) > 15.0 * tol)
                    throw quadrature_error("adaptive_simpson: depth limit reached before tolerance");
                return left + right + delta / 15.0;
            }
            return recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
                   recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
        }
    };

    if (a == b) return 0.0;
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    if (!std::isfinite(fa) || !std::isfinite(fm) || !std::isfinite(fb))
        throw quadrature_error("adaptive_simpson: non-finite integrand sample");
    const double whole = ((b - a) / 6.0) * (fa + 4.0 * fm + fb);
    return Impl{f, 48}.recurse(a, b, fa, fm, fb, whole, abs_tol, 0);
}

}  // namespace bb
