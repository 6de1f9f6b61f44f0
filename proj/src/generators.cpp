#include "bb/generators.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "bb/family.hpp"

namespace bb {
namespace {

bool all_finite(const std::vector<double>& c) {
    for (double v : c)
        if (!std::isfinite(v)) return false;
    return true;
}

void check_poly(const Poly& poly, const char* field) {
    if (poly.c.empty())
        throw invariant_error(fmt::format("generator.{}: coefficient list must not be empty", field));
    if (!all_finite(poly.c))
        throw invariant_error(fmt::format("generator.{}: coefficients must all be finite", field));
}

}  // namespace

void FamilySpec::validate() const {
    plant.validate();
    check_poly(gen.mu1, "mu1");
    check_poly(gen.h, "h");
    check_poly(gen.w, "w");
    if (!std::isfinite(gen.s0))
        throw invariant_error("generator.s0: must be finite");
    if (!std::isfinite(gen.k1) || !std::isfinite(gen.k2))
        throw invariant_error("generator.chat_gains: k1 and k2 must be finite");
    if (!(std::abs(gen.s0) < plant.s_max))
        throw invariant_error(
            fmt::format("generator.s0: |s0| = {} must be smaller than plant.s_max = {}", std::abs(gen.s0),
                        plant.s_max));

    // mu1' > 0 on the whole reachable inclination interval [-abar, abar].
    const double abar = std::asin(plant.rho);
    const Poly mu1p = gen.mu1.derivative();
    constexpr int n = 129;
    for (int i = 0; i < n; ++i) {
        const double a = -abar + (2.0 * abar) * i / (n - 1);
        const double v = mu1p(a);
        if (!(v > 0.0))
            throw invariant_error(fmt::format(
                "generator.mu1: mu1'(alpha) = {:.6g} at alpha = {:.6g} must be positive on [-{:.6g}, {:.6g}]",
                v, a, abar, abar));
    }

    // h > 0 on the reachable range of the shape coordinate
    // y = psi(alpha) s - s0 + int_0^alpha psi, bounded by sampling alpha and
    // taking s at the track ends.
    double ymin = std::numeric_limits<double>::infinity();
    double ymax = -ymin;
    constexpr int m = 33;
    for (int i = 0; i < m; ++i) {
        const double a = -abar + (2.0 * abar) * i / (m - 1);
        const double ps = psi(a, gen);
        const double Ps = psi_integral(a, gen);
        ymin = std::min(ymin, -ps * plant.s_max - gen.s0 + Ps);
        ymax = std::max(ymax, ps * plant.s_max - gen.s0 + Ps);
    }
    for (int i = 0; i < n; ++i) {
        const double y = ymin + (ymax - ymin) * i / (n - 1);
        const double v = gen.h(y);
        if (!(v > 0.0))
            throw invariant_error(fmt::format(
                "generator.h: h(y) = {:.6g} at y = {:.6g} must be positive on [{:.6g}, {:.6g}]", v, y, ymin,
                ymax));
    }
}

}  // namespace bb
