#include <cmath>

#include <doctest.h>

#include "bb/quadrature.hpp"
#include "helpers.hpp"

using namespace bb;

namespace {

// Independent quadrature oracle for psi.
double psi_oracle(double a, const GeneratorSpec& gen) {
    const Poly mu1p = gen.mu1.derivative();
    if (a == 0.0) return 1.0;
    const double E =
        adaptive_simpson([&](double k) { return gen.mu1(k) / mu1p(k); }, 0.0, a, 1e-13);
    return std::exp(-5.0 * E);
}

GeneratorSpec linear_mu1() {
    GeneratorSpec gen;
    gen.mu1 = Poly{0.0, 1.0};  // mu1(alpha) = alpha
    gen.h = Poly{2.0};
    gen.w = Poly{0.0, 0.0, 1.0};
    return gen;
}

}  // namespace

TEST_CASE("psi closed-form and symmetry checks") {
    const GeneratorSpec lin = linear_mu1();
    CHECK(psi(0.0, lin) == doctest::Approx(1.0).epsilon(1e-14));
    // mu1 = alpha gives psi(a) = exp(-5 a^2 / 2).
    CHECK(psi(0.4, lin) == doctest::Approx(std::exp(-0.4)).epsilon(1e-12));
    CHECK(psi(0.3, lin) == doctest::Approx(psi(-0.3, lin)).epsilon(1e-12));

    const GeneratorSpec ref = bbtest::default_spec().gen;
    CHECK(psi(0.0, ref) == doctest::Approx(1.0).epsilon(1e-14));
    for (double a : {-0.2, -0.05, 0.1, 0.24}) {
        CHECK(psi(a, ref) == doctest::Approx(psi_oracle(a, ref)).epsilon(1e-11));
        CHECK(psi(a, ref) > 0.0);
    }
}

TEST_CASE("psi integral against the quadrature oracle") {
    const GeneratorSpec ref = bbtest::default_spec().gen;
    for (double a : {-0.22, -0.1, 0.0, 0.15, 0.25}) {
        const double oracle =
            a == 0.0 ? 0.0
                     : adaptive_simpson([&](double t) { return psi_oracle(t, ref); }, 0.0, a, 1e-12);
        CHECK(psi_integral(a, ref) == doctest::Approx(oracle).epsilon(1e-10).scale(1.0));
    }
}

TEST_CASE("shape coordinate y") {
    PlantParams p;
    const GeneratorSpec ref = bbtest::default_spec().gen;
    // theta = 0: y = s - s0.
    CHECK(y_coord(0.8, 0.0, ref, p) == doctest::Approx(0.8 - ref.s0).epsilon(1e-13));
    CHECK(std::abs(y_coord(ref.s0, 0.0, ref, p)) < 1e-12);

    // Quadrature example with mu1 = alpha: s = 0.5, s0 = 0, alpha = 0.2.
    PlantParams p5;
    p5.rho = 0.5;
    GeneratorSpec lin = linear_mu1();
    lin.s0 = 0.0;
    const double theta = std::asin(std::sin(0.2) / p5.rho);
    const double expected =
        0.5 * std::exp(-0.1) +
        adaptive_simpson([](double t) { return std::exp(-2.5 * t * t); }, 0.0, 0.2, 1e-10);
    CHECK(y_coord(0.5, theta, lin, p5) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("mu and sigma auxiliary fields") {
    PlantParams p5;
    p5.rho = 0.5;
    const GeneratorSpec lin = linear_mu1();

    const MuSigma ms = mu_sigma(1.0, 0.0, lin, p5);
    CHECK(ms.mu == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(ms.sigma == doctest::Approx(-0.2).epsilon(1e-14));

    // mu is homogeneous of degree -1 in s.
    const MuSigma half = mu_sigma(0.5, 0.0, lin, p5);
    CHECK(half.mu == doctest::Approx(2.0 * ms.mu).epsilon(1e-14));

    // sigma approaches mu1(alpha) as s grows.
    const GeneratorSpec ref = bbtest::default_spec().gen;
    PlantParams p;
    const double a = alpha_eval(0.3, p.rho).value;
    CHECK(mu_sigma(1e8, 0.3, ref, p).sigma == doctest::Approx(ref.mu1(a)).epsilon(1e-8));

    CHECK_THROWS_AS(mu_sigma(0.0, 0.3, ref, p), singularity_error);
    CHECK_THROWS_AS(mu_sigma(5e-4, 0.3, ref, p), singularity_error);
    CHECK_THROWS_AS(mu_sigma(-5e-4, 0.3, ref, p), singularity_error);
}

TEST_CASE("closed-loop metric worked example") {
    // mu1 = alpha, rho = 0.5, s = 1, s0 = 1, h = 2, theta = 0.
    FamilySpec spec;
    spec.plant.rho = 0.5;
    spec.gen = linear_mu1();
    spec.gen.s0 = 1.0;

    const GeometryAt geo = ghat_at(1.0, 0.0, spec);
    CHECK(geo.ghat.m11 == doctest::Approx(2.0).epsilon(1e-13));   // h(y) at y = 0
    CHECK(geo.ghat.m12 == doctest::Approx(3.5).epsilon(1e-13));   // (1 - sigma h)/mu
    CHECK(geo.ghat.m22 == doctest::Approx(3.0).epsilon(1e-13));   // (alpha' - sigma ghat12)/mu
    CHECK(geo.mu == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(geo.sigma == doctest::Approx(-0.2).epsilon(1e-14));
}

TEST_CASE("ghat11 reduces to h on the theta = 0 slice") {
    const FamilySpec spec = bbtest::default_spec();
    for (double s : {0.2, 0.5, 0.65, 0.9}) {
        const GeometryAt geo = ghat_at(s, 0.0, spec);
        CHECK(geo.ghat.m11 == doctest::Approx(spec.gen.h(s - spec.gen.s0)).epsilon(1e-13));
    }
}

TEST_CASE("lambda transfers the open-loop metric: g = ghat lambda") {
    std::mt19937_64 rng(31);
    const FamilySpec specs[2] = {bbtest::default_spec(), bbtest::random_valid_spec(rng)};
    for (const FamilySpec& spec : specs) {
        const FamilyEvaluator ev(spec);
        for (int i = 0; i < 100; ++i) {
            const double sgn = i % 2 == 0 ? 1.0 : -1.0;
            const double s = sgn * bbtest::urand(rng, 0.05, 0.95);
            const double th = bbtest::urand(rng, -0.8, 0.8);
            const GeometryAt geo = ev.geometry(s, th, geo_lambda);
            const Eigen::Matrix2d g = kinetic_metric(s, th, spec.plant).matrix();
            const Eigen::Matrix2d back = geo.ghat.matrix() * geo.lambda;
            CHECK((back - g).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
}

TEST_CASE("shaped potential on the theta = 0 slice and at the equilibrium") {
    const FamilySpec spec = bbtest::default_spec();
    for (double s : {0.3, 0.65, 0.85}) {
        const VhatEval v = vhat_at(s, 0.0, spec);
        CHECK(v.vhat == doctest::Approx(spec.gen.w(s - spec.gen.s0)).epsilon(1e-13));
        const Poly wp = spec.gen.w.derivative();
        CHECK(v.dvhat(0) == doctest::Approx(wp(s - spec.gen.s0)).epsilon(1e-13));
    }

    // s = s0, theta = 0, w = y^2: critical point of the shaped potential.
    FamilySpec quad = spec;
    quad.gen.w = Poly{0.0, 0.0, 1.0};
    const VhatEval v0 = vhat_at(quad.gen.s0, 0.0, quad);
    CHECK(std::abs(v0.vhat) < 1e-13);
    CHECK(std::abs(v0.dvhat(0)) < 1e-13);
    CHECK(std::abs(v0.dvhat(1)) < 1e-13);
}

TEST_CASE("exact derivatives match central finite differences") {
    std::mt19937_64 rng(32);
    const FamilySpec specs[2] = {bbtest::default_spec(), bbtest::random_valid_spec(rng)};
    const double h = 1e-5;
    for (const FamilySpec& spec : specs) {
        const FamilyEvaluator ev(spec);
        for (int i = 0; i < 100; ++i) {
            const double sgn = i % 2 == 0 ? 1.0 : -1.0;
            const double s = sgn * bbtest::urand(rng, 0.05, 0.9);
            const double th = bbtest::urand(rng, -0.7, 0.7);

            const GeometryAt geo = ev.geometry(s, th, geo_vhat);
            const GeometryAt sp = ev.geometry(s + h, th, geo_vhat);
            const GeometryAt sm = ev.geometry(s - h, th, geo_vhat);
            const GeometryAt tp = ev.geometry(s, th + h, geo_vhat);
            const GeometryAt tm = ev.geometry(s, th - h, geo_vhat);

            CHECK(std::abs(geo.dvhat(0) - (sp.vhat - sm.vhat) / (2 * h)) < 1e-6);
            CHECK(std::abs(geo.dvhat(1) - (tp.vhat - tm.vhat) / (2 * h)) < 1e-6);

            CHECK(std::abs(geo.ghat_grad.d_s.m11 - (sp.ghat.m11 - sm.ghat.m11) / (2 * h)) < 1e-6);
            CHECK(std::abs(geo.ghat_grad.d_s.m12 - (sp.ghat.m12 - sm.ghat.m12) / (2 * h)) < 1e-6);
            CHECK(std::abs(geo.ghat_grad.d_s.m22 - (sp.ghat.m22 - sm.ghat.m22) / (2 * h)) < 1e-6);
            CHECK(std::abs(geo.ghat_grad.d_theta.m11 - (tp.ghat.m11 - tm.ghat.m11) / (2 * h)) < 1e-6);
            CHECK(std::abs(geo.ghat_grad.d_theta.m12 - (tp.ghat.m12 - tm.ghat.m12) / (2 * h)) < 1e-6);
            CHECK(std::abs(geo.ghat_grad.d_theta.m22 - (tp.ghat.m22 - tm.ghat.m22) / (2 * h)) < 1e-6);
        }
    }
}

TEST_CASE("dissipation field form and oddness") {
    FamilySpec spec = bbtest::default_spec();
    spec.plant.rho = 0.5;
    spec.gen.k1 = 0.3;
    spec.gen.k2 = 0.7;
    const State x{0.4, 0.0, 1.0, 2.0};  // alpha'(0) = rho = 0.5
    const Eigen::Vector2d c = chat(x, spec);
    CHECK(c(1) == doctest::Approx(1.7).epsilon(1e-15));
    CHECK(c(0) == doctest::Approx(-0.85).epsilon(1e-15));

    const State zero{0.4, -0.3, 0.0, 0.0};
    CHECK(chat(zero, spec).norm() == 0.0);

    std::mt19937_64 rng(33);
    for (int i = 0; i < 20; ++i) {
        State a{bbtest::urand(rng, -0.9, 0.9), bbtest::urand(rng, -1.0, 1.0),
                bbtest::urand(rng, -2.0, 2.0), bbtest::urand(rng, -2.0, 2.0)};
        State b = a;
        b.s_dot = -a.s_dot;
        b.theta_dot = -a.theta_dot;
        const Eigen::Vector2d ca = chat(a, spec);
        const Eigen::Vector2d cb = chat(b, spec);
        CHECK(ca(0) == -cb(0));
        CHECK(ca(1) == -cb(1));
    }
}

TEST_CASE("matching residuals vanish for family members") {
    std::mt19937_64 rng(34);
    const FamilySpec specs[2] = {bbtest::default_spec(), bbtest::random_valid_spec(rng)};
    for (const FamilySpec& spec : specs) {
        for (int i = 0; i < 7; ++i) {
            for (int j = 0; j < 7; ++j) {
                const double s = 0.3 + 0.7 * i / 6.0;  // grid reaches s = 1
                const double th = -0.5 + 1.0 * j / 6.0;
                const MatchingResiduals r = matching_residuals(s, th, spec);
                CHECK(r.r3 < 1e-6);
                CHECK(r.r4_V < 1e-7);
                CHECK(r.r5_lambda < 1e-6);
                CHECK(r.r5_lie < 1e-6);
            }
        }
    }
}

TEST_CASE("trivial self-match drives every residual to exact zero") {
    PlantParams p;
    const GeometryFn self_match = [&p](double s, double th) {
        const AlphaEval al = alpha_eval(th, p.rho);
        const double ap = al.d1, app = al.d2;
        GeometryAt geo;
        geo.ghat = kinetic_metric(s, th, p);
        geo.vhat = potential(s, th, p);
        geo.dvhat = potential_grad(s, th, p);
        geo.ghat_grad.d_s = Metric2{0.0, 0.0, 5.0 * s * ap * ap};
        geo.ghat_grad.d_theta = Metric2{0.0, app, 2.0 * ((p.a3 + 2.5 * s * s) * ap * app)};
        geo.lambda = Eigen::Matrix2d::Identity();
        geo.sigma = 1.0;  // lambda P X = P X = d/ds
        geo.mu = 0.0;
        return geo;
    };

    for (double s : {0.3, 0.55, 0.8}) {
        for (double th : {-0.4, 0.1, 0.45}) {
            const MatchingResiduals r = matching_residuals_against(s, th, p, self_match);
            CHECK(r.r3 == 0.0);
            CHECK(r.r4_V == 0.0);
            CHECK(r.r5_lambda == 0.0);
            CHECK(r.r5_lie == 0.0);
        }
    }
}

TEST_CASE("corrupting ghat11 is detected by the residuals") {
    const FamilySpec spec = bbtest::default_spec();
    double worst_r3 = 0.0, worst_lie = 0.0;
    for (double s : {0.3, 0.6, 0.9}) {
        for (double th : {-0.4, 0.0, 0.4}) {
            const MatchingResiduals r = matching_residuals_with_override(s, th, spec, 1.1);
            worst_r3 = std::max(worst_r3, r.r3);
            worst_lie = std::max(worst_lie, r.r5_lie);
        }
    }
    CHECK(worst_r3 > 1e-3);
    CHECK(worst_lie > 1e-3);

    // Factor 1 is the plain residual evaluation.
    const MatchingResiduals a = matching_residuals_with_override(0.5, 0.2, spec, 1.0);
    const MatchingResiduals b = matching_residuals(0.5, 0.2, spec);
    CHECK(a.r3 == b.r3);
    CHECK(a.r4_V == b.r4_V);
    CHECK(a.r5_lambda == b.r5_lambda);
    CHECK(a.r5_lie == b.r5_lie);
}

TEST_CASE("excluded strip: guarded entry points throw, unchecked evaluation continues") {
    const FamilySpec spec = bbtest::default_spec();
    CHECK_THROWS_AS(ghat_at(0.0, 0.2, spec), singularity_error);
    CHECK_THROWS_AS(ghat_at(5e-4, 0.2, spec), singularity_error);
    CHECK_THROWS_AS(ghat_at(-9e-4, 0.2, spec), singularity_error);
    CHECK_THROWS_AS(matching_residuals(5e-4, 0.2, spec), singularity_error);
    CHECK_NOTHROW(ghat_at(1.1e-3, 0.2, spec));

    // The cancelled forms stay finite through s = 0, where det ghat hits 0.
    const GeometryAt at0 = geometry_unchecked(0.0, 0.2, spec, geo_vhat);
    CHECK(std::isfinite(at0.ghat.m11));
    CHECK(std::isfinite(at0.ghat.m12));
    CHECK(std::isfinite(at0.ghat.m22));
    CHECK(std::isfinite(at0.vhat));
    CHECK(at0.ghat.det() == 0.0);
}

TEST_CASE("branch continuity across the strip boundary") {
    const FamilySpec spec = bbtest::default_spec();
    const FamilyEvaluator ev(spec);
    for (double sign : {1.0, -1.0}) {
        const double inside = sign * s_tol * (1.0 - 1e-9);
        const double outside = sign * s_tol * (1.0 + 1e-9);
        const GeometryAt a = ev.geometry(inside, 0.25, geo_vhat);
        const GeometryAt b = ev.geometry(outside, 0.25, geo_vhat);
        CHECK(std::abs(a.ghat.m11 - b.ghat.m11) < 1e-6);
        CHECK(std::abs(a.ghat.m12 - b.ghat.m12) < 1e-6);
        CHECK(std::abs(a.ghat.m22 - b.ghat.m22) < 1e-6);
        CHECK(std::abs(a.ghat_grad.d_s.m12 - b.ghat_grad.d_s.m12) < 1e-6);
        CHECK(std::abs(a.ghat_grad.d_s.m22 - b.ghat_grad.d_s.m22) < 1e-6);
        CHECK(std::abs(a.ghat_grad.d_theta.m12 - b.ghat_grad.d_theta.m12) < 1e-6);
        CHECK(std::abs(a.ghat_grad.d_theta.m22 - b.ghat_grad.d_theta.m22) < 1e-6);
        CHECK(std::abs(a.vhat - b.vhat) < 1e-6);
    }
}

TEST_CASE("evaluator agrees with the one-shot entry points") {
    const FamilySpec spec = bbtest::default_spec();
    const FamilyEvaluator ev(spec);
    CHECK(&ev.spec() != nullptr);
    CHECK(ev.spec().gen.s0 == spec.gen.s0);

    const GeometryAt a = ev.geometry(0.42, -0.3, geo_vhat | geo_lambda);
    const GeometryAt b = ghat_at(0.42, -0.3, spec);
    CHECK(a.ghat.m11 == b.ghat.m11);
    CHECK(a.ghat.m12 == b.ghat.m12);
    CHECK(a.ghat.m22 == b.ghat.m22);
    CHECK(a.vhat == b.vhat);
    CHECK(a.dvhat == b.dvhat);
    CHECK(a.ghat_grad.d_s.m22 == b.ghat_grad.d_s.m22);
    CHECK(a.lambda == b.lambda);
    CHECK(a.mu == b.mu);
    CHECK(a.sigma == b.sigma);
    CHECK(a.psi == b.psi);
    CHECK(a.y == b.y);
}

TEST_CASE("geometry parts flags control optional work") {
    const FamilySpec spec = bbtest::default_spec();
    const GeometryAt bare = geometry_unchecked(0.5, 0.1, spec);
    CHECK(bare.vhat == 0.0);
    CHECK(bare.lambda == Eigen::Matrix2d::Zero());
    CHECK(bare.dvhat.norm() > 0.0);  // the gradient is always produced

    const GeometryAt with_v = geometry_unchecked(0.5, 0.1, spec, geo_vhat);
    CHECK(with_v.vhat != 0.0);
}

TEST_CASE("y vanishes at the equilibrium for random generators") {
    std::mt19937_64 rng(35);
    for (int i = 0; i < 5; ++i) {
        const FamilySpec spec = bbtest::random_valid_spec(rng);
        CHECK(std::abs(y_coord(spec.gen.s0, 0.0, spec.gen, spec.plant)) < 1e-12);
    }
}
