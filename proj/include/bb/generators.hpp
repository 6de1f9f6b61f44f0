#pragma once

#include <vector>

#include "bb/plant.hpp"

namespace bb {

// Dense polynomial with ascending coefficients (c[0] is the constant term),
// matching the on-disk config representation.
struct Poly {
    std::vector<double> c;

    Poly() = default;
    Poly(std::initializer_list<double> coeffs) : c(coeffs) {}
    explicit Poly(std::vector<double> coeffs) : c(std::move(coeffs)) {}

    double operator()(double x) const {
        double acc = 0.0;
        for (std::size_t i = c.size(); i-- > 0;) acc = acc * x + c[i];
        return acc;
    }

    Poly derivative() const {
        Poly d;
        if (c.size() > 1) {
            d.c.resize(c.size() - 1);
            for (std::size_t i = 1; i < c.size(); ++i) d.c[i - 1] = static_cast<double>(i) * c[i];
        } else {
            d.c = {0.0};
        }
        return d;
    }
};

// Free data selecting one member of the control-law family: the three
// generator functions as polynomials (mu1 in the beam inclination alpha,
// h and w in the shape coordinate y), the target ball position s0, and the
// linear damping gains of the injected dissipation term.
struct GeneratorSpec {
    Poly mu1;
    Poly h;
    Poly w;
    double s0 = 0.0;
    double k1 = 0.0;
    double k2 = 0.0;
};

// A complete closed-loop design: plant constants plus one family member.
struct FamilySpec {
    PlantParams plant;
    GeneratorSpec gen;

    // Checks plant ranges, |s0| < s_max, mu1' > 0 on the reachable
    // alpha-interval, and h > 0 on the reachable y-interval (both by dense
    // sampling).  Throws invariant_error naming the offending field.
    void validate() const;
};

}  // namespace bb
