#pragma once

// Shared fixtures: the reference family member and the two randomized spec
// samplers the property tests and the acceptance gate draw from.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "bb/analysis.hpp"

namespace bbtest {

using namespace bb;

inline double urand(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// The reference member: stabilizes s0 = 0.65 with the default plant.
inline FamilySpec default_spec() {
    FamilySpec spec;
    spec.gen.mu1 = Poly{0.8, 2.0};
    spec.gen.h = Poly{1.8};
    spec.gen.w = Poly{0.0, 0.0, 0.15};
    spec.gen.s0 = 0.65;
    spec.gen.k1 = -6.435;
    spec.gen.k2 = 0.482625;
    return spec;
}

// The gains the reference member linearizes to, computed independently from
// the closed-form equilibrium expressions.
inline LinearGains default_gains() {
    return LinearGains{1.1875, 3.7593968531468507, -5.5898000437062914, 13.455685546875003,
                       -0.95917641601562553};
}

// Draws a member that keeps the closed-loop metric well conditioned on the
// standard verification grid s in [0.3, 0.9], theta in [-0.5, 0.5]:
// resamples until min |mu1(alpha) ghat11 - 1| >= 0.15 over the grid, which
// bounds det ghat away from zero where residual evaluation divides by it.
inline FamilySpec random_valid_spec(std::mt19937_64& rng) {
    for (;;) {
        FamilySpec spec;
        spec.gen.mu1 = Poly{urand(rng, 0.8, 1.8), urand(rng, 1.0, 2.2), urand(rng, -0.3, 0.3),
                            urand(rng, -0.3, 0.3)};
        spec.gen.h = Poly{urand(rng, 1.2, 1.9), urand(rng, -0.05, 0.05), urand(rng, 0.005, 0.03)};
        spec.gen.w = Poly{0.0, 0.0, urand(rng, 0.05, 0.3)};
        spec.gen.s0 = urand(rng, 0.3, 0.7);
        spec.gen.k1 = urand(rng, -2.0, 2.0);
        spec.gen.k2 = urand(rng, -0.5, 0.5);
        try {
            spec.validate();
        } catch (const invariant_error&) {
            continue;
        }
        const FamilyEvaluator ev(spec);
        double margin = std::numeric_limits<double>::infinity();
        for (int i = 0; i < 20 && margin >= 0.15; ++i) {
            for (int j = 0; j < 20; ++j) {
                const double s = 0.3 + 0.6 * i / 19.0;
                const double th = -0.5 + 1.0 * j / 19.0;
                const double m1 = spec.gen.mu1(alpha_eval(th, spec.plant.rho).value);
                margin = std::min(margin, std::abs(m1 * ev.geometry(s, th).ghat.m11 - 1.0));
            }
        }
        if (margin >= 0.15) return spec;
    }
}

// Draws a member passing all six local stability tests.  The dissipation
// gains are aligned with ghat(0) acting on (-rho, 1), which makes the
// lowered dissipation matrix positive semidefinite at the equilibrium; the
// remaining ranges keep det ghat(0) and the potential Hessian positive.
inline FamilySpec random_stabilizing_spec(std::mt19937_64& rng) {
    for (;;) {
        FamilySpec spec;
        const double h0 = urand(rng, 1.3, 1.9);
        const double m0 = urand(rng, 1.15 / h0, 1.8);
        const double p = urand(rng, 1.1, 2.2);
        spec.gen.mu1 = Poly{m0, p, urand(rng, -0.2, 0.2)};
        spec.gen.h = Poly{h0, urand(rng, -0.05, 0.05), urand(rng, 0.005, 0.03)};
        spec.gen.w = Poly{0.0, 0.0, 0.5 * urand(rng, 0.2, 0.6)};
        spec.gen.s0 = urand(rng, 0.35, 0.7);
        const double rho = spec.plant.rho;
        const double s0 = spec.gen.s0;
        const double A = (1.0 - m0 * h0) / p;
        const double g11 = h0;
        const double g12 = rho * h0 + 5.0 * s0 * rho * A;
        const double g22 = rho * rho * (h0 + 10.0 * s0 * A - 25.0 * s0 * s0 * (m0 / p) * A);
        const double kappa = urand(rng, 4.0, 40.0);
        spec.gen.k1 = kappa * (-rho * g11 + g12);
        spec.gen.k2 = kappa * (-rho * g12 + g22);
        try {
            spec.validate();
        } catch (const invariant_error&) {
            continue;
        }
        if (stability_conditions(spec).overall) return spec;
    }
}

}  // namespace bbtest
