#include <cmath>
#include <random>

#include <doctest.h>

#include "bb/plant.hpp"

using namespace bb;

namespace {

// Residuals of the two printed equations of motion at a proposed
// acceleration; the primary oracle for open_loop_accel.
Eigen::Vector2d motion_residual(const State& x, double u, const Eigen::Vector2d& acc,
                                const PlantParams& p) {
    const AlphaEval a = alpha_eval(x.theta, p.rho);
    const double ap = a.d1;
    const double app = a.d2;
    const double r1 = acc(0) + ap * acc(1) + (app - 2.5 * x.s * ap * ap) * x.theta_dot * x.theta_dot +
                      std::sin(a.value);
    const double r2 = ap * acc(0) + (p.a4 + (p.a3 + 2.5 * x.s * x.s) * ap * ap) * acc(1) +
                      5.0 * ap * ap * x.s * x.s_dot * x.theta_dot +
                      (p.a3 + 2.5 * x.s * x.s) * ap * app * x.theta_dot * x.theta_dot +
                      p.a5 * std::cos(x.theta) + (p.a6 + x.s) * std::cos(a.value) * ap +
                      p.a7 * x.theta_dot - u;
    return Eigen::Vector2d(r1, r2);
}

}  // namespace

TEST_CASE("alpha linkage values and derivatives") {
    const AlphaEval at0 = alpha_eval(0.0, 0.5);
    CHECK(at0.value == 0.0);
    CHECK(at0.d1 == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(at0.d2 == 0.0);

    const AlphaEval at_pi = alpha_eval(M_PI, 0.5);
    CHECK(std::abs(at_pi.value) < 1e-15);
    CHECK(at_pi.d1 == doctest::Approx(-0.5).epsilon(1e-12));

    // Central differences of alpha and alpha' at theta = 0.3.
    const double h = 1e-6;
    const AlphaEval mid = alpha_eval(0.3, 0.5);
    const AlphaEval hi = alpha_eval(0.3 + h, 0.5);
    const AlphaEval lo = alpha_eval(0.3 - h, 0.5);
    CHECK(std::abs(mid.d1 - (hi.value - lo.value) / (2 * h)) < 1e-8);
    CHECK(std::abs(mid.d2 - (hi.d1 - lo.d1) / (2 * h)) < 1e-8);
}

TEST_CASE("kinetic metric components") {
    PlantParams p;
    p.a3 = 1.0;
    p.a4 = 2.0;
    p.rho = 0.5;
    const Metric2 g = kinetic_metric(0.0, 0.0, p);
    CHECK(g.m11 == 1.0);
    CHECK(g.m12 == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(g.m22 == doctest::Approx(2.25).epsilon(1e-15));

    // Decoupled limit rho -> 0.
    PlantParams tiny = p;
    tiny.rho = 1e-9;
    const Metric2 g0 = kinetic_metric(0.7, 0.4, tiny);
    CHECK(g0.m11 == 1.0);
    CHECK(std::abs(g0.m12) < 1e-8);
    CHECK(g0.m22 == doctest::Approx(2.0).epsilon(1e-8));

    // Positive definiteness over the working box.
    PlantParams dflt;
    for (int i = 0; i <= 10; ++i) {
        for (int j = 0; j <= 10; ++j) {
            const Metric2 m = kinetic_metric(-1.0 + 0.2 * i, -1.0 + 0.2 * j, dflt);
            CHECK(m.m11 > 0.0);
            CHECK(m.det() > 0.0);
        }
    }
}

TEST_CASE("potential value and gradient") {
    PlantParams p;
    p.a5 = 1.0;
    p.a6 = 0.1;
    p.rho = 0.5;
    CHECK(potential(0.37, 0.0, p) == 0.0);
    CHECK(potential(0.2, M_PI_2, p) == doctest::Approx(1.15).epsilon(1e-14));

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> us(-0.9, 0.9);
    std::uniform_real_distribution<double> uth(-1.2, 1.2);
    const double h = 1e-6;
    PlantParams dflt;
    for (int i = 0; i < 50; ++i) {
        const double s = us(rng);
        const double th = uth(rng);
        const Eigen::Vector2d dv = potential_grad(s, th, dflt);
        const double fd_s = (potential(s + h, th, dflt) - potential(s - h, th, dflt)) / (2 * h);
        const double fd_th = (potential(s, th + h, dflt) - potential(s, th - h, dflt)) / (2 * h);
        CHECK(std::abs(dv(0) - fd_s) < 1e-8);
        CHECK(std::abs(dv(1) - fd_th) < 1e-8);
        CHECK(dv(0) == doctest::Approx(std::sin(alpha_eval(th, dflt.rho).value)).epsilon(1e-14));
    }
}

TEST_CASE("open-loop accelerations satisfy the equations of motion") {
    PlantParams p;
    const double s0 = 0.4;
    const double u_ff = p.a5 + (p.a6 + s0) * p.rho;
    const State eq{s0, 0.0, 0.0, 0.0};
    const Eigen::Vector2d acc_eq = open_loop_accel(eq, u_ff, p);
    CHECK(std::abs(acc_eq(0)) < 1e-12);
    CHECK(std::abs(acc_eq(1)) < 1e-12);

    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> us(-0.9, 0.9);
    std::uniform_real_distribution<double> uth(-1.0, 1.0);
    std::uniform_real_distribution<double> uv(-2.0, 2.0);
    std::uniform_real_distribution<double> uu(-3.0, 3.0);
    for (int i = 0; i < 100; ++i) {
        const State x{us(rng), uth(rng), uv(rng), uv(rng)};
        const double u = uu(rng);
        const Eigen::Vector2d acc = open_loop_accel(x, u, p);
        const Eigen::Vector2d r = motion_residual(x, u, acc, p);
        CHECK(std::abs(r(0)) < 1e-12);
        CHECK(std::abs(r(1)) < 1e-12);
    }
}

TEST_CASE("mechanical energy matches the quadratic form") {
    PlantParams p;
    const State x{0.3, -0.4, 1.1, 0.7};
    const double ap = alpha_eval(x.theta, p.rho).d1;
    const double T = 0.5 * x.s_dot * x.s_dot + ap * x.s_dot * x.theta_dot +
                     0.5 * (p.a4 + (p.a3 + 2.5 * x.s * x.s) * ap * ap) * x.theta_dot * x.theta_dot;
    CHECK(mechanical_energy(x, p) ==
          doctest::Approx(T + potential(x.s, x.theta, p)).epsilon(1e-14));
}

TEST_CASE("christoffel symbols of the open-loop metric") {
    PlantParams p;

    // Flat limit: all symbols vanish with the coupling.
    PlantParams tiny = p;
    tiny.rho = 1e-9;
    const Christoffel1 flat = christoffel_g(0.5, 0.7, tiny);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) CHECK(std::abs(flat.v[i][j][k]) < 1e-6);

    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> us(-0.9, 0.9);
    std::uniform_real_distribution<double> uth(-1.0, 1.0);
    const double h = 1e-5;
    for (int n = 0; n < 100; ++n) {
        const double s = us(rng);
        const double th = uth(rng);
        const Christoffel1 c = christoffel_g(s, th, p);

        // Symmetry in the first two slots.
        for (int k = 0; k < 2; ++k) {
            CHECK(c.v[0][1][k] == c.v[1][0][k]);
        }

        // Finite-difference oracle through the generic first-kind formula.
        const auto diff = [&](const Metric2& a, const Metric2& b) {
            return Metric2{(a.m11 - b.m11) / (2 * h), (a.m12 - b.m12) / (2 * h),
                           (a.m22 - b.m22) / (2 * h)};
        };
        const Metric2 d_s = diff(kinetic_metric(s + h, th, p), kinetic_metric(s - h, th, p));
        const Metric2 d_th = diff(kinetic_metric(s, th + h, p), kinetic_metric(s, th - h, p));
        const Christoffel1 fd = christoffel_first_from_grad(d_s, d_th);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k) CHECK(std::abs(c.v[i][j][k] - fd.v[i][j][k]) < 1e-6);
    }
}

TEST_CASE("first-kind symbols from explicit metric partials") {
    // Hand-checkable stub: d_s = [[2, 4], [4, 6]], d_theta = [[10, 20], [20, 30]].
    const Metric2 d_s{2.0, 4.0, 6.0};
    const Metric2 d_th{10.0, 20.0, 30.0};
    const Christoffel1 c = christoffel_first_from_grad(d_s, d_th);
    CHECK(c.v[0][0][0] == 1.0);               // 1/2 d_s m11
    CHECK(c.v[0][0][1] == -1.0);              // d_s m12 - 1/2 d_th m11
    CHECK(c.v[0][1][0] == 5.0);               // 1/2 d_th m11
    CHECK(c.v[0][1][1] == 3.0);               // 1/2 d_s m22
    CHECK(c.v[1][0][0] == c.v[0][1][0]);
    CHECK(c.v[1][0][1] == c.v[0][1][1]);
    CHECK(c.v[1][1][0] == 17.0);              // d_th m12 - 1/2 d_s m22
    CHECK(c.v[1][1][1] == 15.0);              // 1/2 d_th m22
}

TEST_CASE("plant parameter validation") {
    PlantParams ok;
    CHECK_NOTHROW(ok.validate());

    PlantParams bad = ok;
    bad.a4 = 0.0;
    CHECK_THROWS_AS(bad.validate(), invariant_error);
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("a4"), invariant_error);

    bad = ok;
    bad.rho = 1.0;
    CHECK_THROWS_AS(bad.validate(), invariant_error);

    bad = ok;
    bad.rho = -0.2;
    CHECK_THROWS_AS(bad.validate(), invariant_error);

    bad = ok;
    bad.s_max = 0.0;
    CHECK_THROWS_AS(bad.validate(), invariant_error);

    bad = ok;
    bad.a7 = -0.1;
    CHECK_THROWS_AS(bad.validate(), invariant_error);
}

TEST_CASE("state vector round trip") {
    const State x{0.1, -0.2, 0.3, -0.4};
    const State y = State::from_vec(x.vec());
    CHECK(x.s == y.s);
    CHECK(x.theta == y.theta);
    CHECK(x.s_dot == y.s_dot);
    CHECK(x.theta_dot == y.theta_dot);
}
