#include "bb/family.hpp"

#include <cmath>
#include <utility>
#include <vector>

#include <fmt/format.h>

namespace bb {
namespace {

// ---------------------------------------------------------------------------
// Spectral tables.
//
// Every quadrature in the family formulas is an integral from 0 of a smooth
// function of the beam inclination, and the inclination is confined to
// [-abar, abar] with abar = asin(rho) < pi/2 no matter how theta moves.  So
// instead of re-running adaptive quadrature per evaluation point (which is
// ruinous inside the double integral of the shaped potential), each
// integrand is expanded once in Chebyshev polynomials over that fixed
// interval and integrated term by term.  Convergence is certified by the
// decay of the trailing coefficients; the integrands are analytic, so the
// expansions reach coefficient levels near 1e-15 at modest sizes and the
// resulting values are accurate to ~1e-13 in absolute terms -- comfortably
// below what the finite-difference cross-checks downstream need to resolve.
// ---------------------------------------------------------------------------

struct Cheb {
    double half = 1.0;      // domain is [-half, half]
    std::vector<double> a;  // T-series coefficients

    double operator()(double t) const {
        const double x = t / half;
        double b1 = 0.0, b2 = 0.0;
        for (std::size_t k = a.size(); k-- > 1;) {
            const double b0 = a[k] + 2.0 * x * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        return a.empty() ? 0.0 : a[0] + x * b1 - b2;
    }
};

template <typename F>
Cheb cheb_fit(const F& f, double half, const char* what) {
    for (int n : {32, 64, 128, 256, 512}) {
        std::vector<double> fx(n + 1);
        for (int j = 0; j <= n; ++j) fx[j] = f(half * std::cos(M_PI * j / n));

        std::vector<double> a(n + 1);
        for (int k = 0; k <= n; ++k) {
            double s = 0.5 * (fx[0] + (k % 2 == 0 ? fx[n] : -fx[n]));
            for (int j = 1; j < n; ++j) s += fx[j] * std::cos(M_PI * j * k / n);
            a[k] = 2.0 * s / n;
        }
        a[0] *= 0.5;
        a[n] *= 0.5;

        double scale = 0.0;
        for (double v : a) scale = std::max(scale, std::abs(v));
        if (!std::isfinite(scale))
            throw quadrature_error(fmt::format("spectral fit of {}: non-finite integrand sample", what));
        const double tail = std::max({std::abs(a[n]), std::abs(a[n - 1]), std::abs(a[n - 2])});
        if (tail <= 1e-14 * std::max(1.0, scale)) {
            std::size_t m = a.size();
            while (m > 1 && std::abs(a[m - 1]) < 1e-15 * std::max(1.0, scale)) --m;
            a.resize(m);
            return Cheb{half, std::move(a)};
        }
    }
    throw quadrature_error(fmt::format("spectral fit of {} did not converge", what));
}

// Term-by-term primitive with P(0) = 0.
Cheb cheb_primitive(const Cheb& c) {
    const std::size_t n = c.a.size();
    std::vector<double> b(n + 1, 0.0);
    const auto A = [&](std::size_t k) { return k < n ? c.a[k] : 0.0; };
    b[1] = A(0) - 0.5 * A(2);
    for (std::size_t k = 2; k <= n; ++k) b[k] = (A(k - 1) - A(k + 1)) / (2.0 * static_cast<double>(k));
    double at0 = 0.0;
    int sign = -1;  // T_2(0) = -1, T_4(0) = +1, ...
    for (std::size_t k = 2; k <= n; k += 2) {
        at0 += sign * b[k];
        sign = -sign;
    }
    b[0] = -at0;
    for (double& v : b) v *= c.half;
    return Cheb{c.half, std::move(b)};
}

double mu1p_checked_at(const Poly& mu1p, double a) {
    const double v = mu1p(a);
    if (!(v > 0.0))
        throw invariant_error(
            fmt::format("generator.mu1: mu1'(alpha) = {:.6g} at alpha = {:.6g} must be positive", v, a));
    return v;
}

// One family member resolved for evaluation: derivative polynomials plus the
// primitives E, int psi, I, F, G as spectral tables.
struct GenTables {
    PlantParams plant;
    GeneratorSpec gen;
    Poly mu1p, mu1pp, hp, wp;
    Cheb cE, cPsi, cI, cF, cG;

    explicit GenTables(const FamilySpec& spec)
        : plant(spec.plant), gen(spec.gen), mu1p(gen.mu1.derivative()), mu1pp(mu1p.derivative()),
          hp(gen.h.derivative()), wp(gen.w.derivative()) {
        const double abar = std::asin(plant.rho);
        cE = cheb_primitive(
            cheb_fit([&](double t) { return gen.mu1(t) / mu1p_checked_at(mu1p, t); }, abar, "exponent"));
        const auto psi_at = [&](double t) { return std::exp(-5.0 * cE(t)); };
        cPsi = cheb_primitive(cheb_fit(psi_at, abar, "int psi"));
        cI = cheb_primitive(cheb_fit(
            [&](double t) {
                const double ps = psi_at(t);
                return 1.0 / (mu1p_checked_at(mu1p, t) * ps * ps);
            },
            abar, "inverse-psi integral"));
        cF = cheb_primitive(cheb_fit(
            [&](double t) { return std::sin(t) / (mu1p_checked_at(mu1p, t) * psi_at(t)); }, abar,
            "sine integral"));
        cG = cheb_primitive(cheb_fit(
            [&](double t) { return std::sin(t) * cPsi(t) / (mu1p_checked_at(mu1p, t) * psi_at(t)); },
            abar, "potential double integral"));
    }

    double psi_at(double a) const { return std::exp(-5.0 * cE(a)); }
};

GeometryAt assemble(double s, double theta, const GenTables& tb, unsigned parts) {
    const PlantParams& p = tb.plant;
    const GeneratorSpec& gen = tb.gen;

    const AlphaEval al = alpha_eval(theta, p.rho);
    const double a = al.value, ap = al.d1, app = al.d2;
    const double m1 = gen.mu1(a);
    const double m1p = mu1p_checked_at(tb.mu1p, a);
    const double m1pp = tb.mu1pp(a);

    const double ps = tb.psi_at(a);
    const double Ps = tb.cPsi(a);
    const double I = tb.cI(a);
    const double F = tb.cF(a);

    GeometryAt out;
    out.psi = ps;
    out.y = ps * s - gen.s0 + Ps;
    const double hy = gen.h(out.y);
    const double hpy = tb.hp(out.y);

    // ghat_11 and its partials; differentiation passes through y(s,theta)
    // and through the integral endpoints (Leibniz rule).
    const double g11h = ps * ps * (hy + 10.0 * I);
    const double d_s_g11h = ps * ps * ps * hpy;
    const double psi_a = -5.0 * (m1 / m1p) * ps;
    const double y_a = psi_a * s + ps;
    const double y_th = y_a * ap;
    const double d_th_g11h = ap * (2.0 * ps * psi_a * (hy + 10.0 * I) + ps * ps * hpy * y_a + 10.0 / m1p);

    out.mu = m1p / (5.0 * s * ap);
    out.sigma = m1 - m1p / (5.0 * s);

    double g12h, g22h, d_s_g12h, d_th_g12h, d_s_g22h, d_th_g22h;
    if (std::abs(s) >= s_tol) {
        const double mu = out.mu, sg = out.sigma;
        g12h = (1.0 - sg * g11h) / mu;
        g22h = (ap - sg * g12h) / mu;
        const double mu_s = -m1p / (5.0 * s * s * ap);
        const double mu_th = m1pp / (5.0 * s) - m1p * app / (5.0 * s * ap * ap);
        const double sg_s = m1p / (5.0 * s * s);
        const double sg_th = m1p * ap - m1pp * ap / (5.0 * s);
        d_s_g12h = -(sg_s * g11h + sg * d_s_g11h + g12h * mu_s) / mu;
        d_th_g12h = -(sg_th * g11h + sg * d_th_g11h + g12h * mu_th) / mu;
        d_s_g22h = (0.0 - sg_s * g12h - sg * d_s_g12h - g22h * mu_s) / mu;
        d_th_g22h = (app - sg_th * g12h - sg * d_th_g12h - g22h * mu_th) / mu;
    } else {
        // Cancelled limit forms: mu and sigma carry 1/s, but substituting
        // them symbolically into the ghat recursion clears every 1/s before
        // evaluation, leaving expressions finite through s = 0.
        const double Aq = (1.0 - m1 * g11h) / m1p;
        g12h = ap * g11h + 5.0 * s * ap * Aq;
        const double R = m1 / m1p;
        const double B = g11h + 10.0 * s * Aq - 25.0 * s * s * R * Aq;
        g22h = ap * ap * B;

        const double A_s = -m1 * d_s_g11h / m1p;
        const double A_th = (-m1p * ap * g11h - m1 * d_th_g11h - Aq * m1pp * ap) / m1p;
        d_s_g12h = ap * d_s_g11h + 5.0 * ap * Aq + 5.0 * s * ap * A_s;
        d_th_g12h = app * g11h + ap * d_th_g11h + 5.0 * s * app * Aq + 5.0 * s * ap * A_th;
        const double R_th = ap * (1.0 - m1 * m1pp / (m1p * m1p));
        const double B_s = d_s_g11h + 10.0 * Aq + 10.0 * s * A_s - 50.0 * s * R * Aq - 25.0 * s * s * R * A_s;
        const double B_th = d_th_g11h + 10.0 * s * A_th - 25.0 * s * s * (R_th * Aq + R * A_th);
        d_s_g22h = ap * ap * B_s;
        d_th_g22h = 2.0 * ap * app * B + ap * ap * B_th;
    }

    out.ghat = {g11h, g12h, g22h};
    out.ghat_grad.d_s = {d_s_g11h, d_s_g12h, d_s_g22h};
    out.ghat_grad.d_theta = {d_th_g11h, d_th_g12h, d_th_g22h};

    // Exact gradient of the shaped potential.  The double integral drops
    // out of the gradient entirely: its alpha-derivative combines with the
    // other terms so that only the endpoint contribution survives.
    const double base = tb.wp(out.y) + 5.0 * F;
    out.dvhat = Eigen::Vector2d(ps * base, base * y_th + 5.0 * s * ap * std::sin(a) / m1p);

    if (parts & geo_vhat) out.vhat = gen.w(out.y) + 5.0 * (out.y + gen.s0) * F - 5.0 * tb.cG(a);

    if (parts & geo_lambda) {
        const double det = out.ghat.det();
        if (!std::isfinite(det) || det == 0.0)
            throw invariant_error(fmt::format(
                "ghat is not invertible at (s, theta) = ({:.6g}, {:.6g}): det = {:.6g}", s, theta, det));
        const Metric2 g = kinetic_metric(s, theta, p);
        const Eigen::Vector2d c0 = out.ghat.solve(Eigen::Vector2d(g.m11, g.m12));
        const Eigen::Vector2d c1 = out.ghat.solve(Eigen::Vector2d(g.m12, g.m22));
        out.lambda << c0(0), c1(0), c0(1), c1(1);
    }
    return out;
}

}  // namespace

struct FamilyEvaluator::Impl {
    FamilySpec spec;
    GenTables tables;

    explicit Impl(const FamilySpec& s) : spec(s), tables(s) {}
};

FamilyEvaluator::FamilyEvaluator(const FamilySpec& spec) : impl_(new Impl(spec)) {}
FamilyEvaluator::~FamilyEvaluator() = default;
FamilyEvaluator::FamilyEvaluator(FamilyEvaluator&&) noexcept = default;
FamilyEvaluator& FamilyEvaluator::operator=(FamilyEvaluator&&) noexcept = default;

const FamilySpec& FamilyEvaluator::spec() const { return impl_->spec; }

GeometryAt FamilyEvaluator::geometry(double s, double theta, unsigned parts) const {
    return assemble(s, theta, impl_->tables, parts);
}

double psi(double alpha_val, const GeneratorSpec& gen) {
    const Poly mu1p = gen.mu1.derivative();
    const double half = std::max(1e-8, std::abs(alpha_val));
    const Cheb cE = cheb_primitive(
        cheb_fit([&](double t) { return gen.mu1(t) / mu1p_checked_at(mu1p, t); }, half, "exponent"));
    return std::exp(-5.0 * cE(alpha_val));
}

double psi_integral(double alpha_val, const GeneratorSpec& gen) {
    const Poly mu1p = gen.mu1.derivative();
    const double half = std::max(1e-8, std::abs(alpha_val));
    const Cheb cE = cheb_primitive(
        cheb_fit([&](double t) { return gen.mu1(t) / mu1p_checked_at(mu1p, t); }, half, "exponent"));
    const Cheb cPsi =
        cheb_primitive(cheb_fit([&](double t) { return std::exp(-5.0 * cE(t)); }, half, "int psi"));
    return cPsi(alpha_val);
}

double y_coord(double s, double theta, const GeneratorSpec& gen, const PlantParams& p) {
    const double a = alpha_eval(theta, p.rho).value;
    return psi(a, gen) * s - gen.s0 + psi_integral(a, gen);
}

MuSigma mu_sigma(double s, double theta, const GeneratorSpec& gen, const PlantParams& p) {
    if (std::abs(s) < s_tol)
        throw singularity_error(fmt::format("mu_sigma: |s| = {:.6g} is inside the excluded strip (< {:g})",
                                            std::abs(s), s_tol));
    const AlphaEval al = alpha_eval(theta, p.rho);
    if (al.d1 == 0.0)
        throw singularity_error(fmt::format("mu_sigma: alpha'(theta) = 0 at theta = {:.6g}", theta));
    const Poly mu1p = gen.mu1.derivative();
    const double m1p = mu1p_checked_at(mu1p, al.value);
    return {m1p / (5.0 * s * al.d1), gen.mu1(al.value) - m1p / (5.0 * s)};
}

GeometryAt ghat_at(double s, double theta, const FamilySpec& spec) {
    if (std::abs(s) < s_tol)
        throw singularity_error(fmt::format("ghat_at: |s| = {:.6g} is inside the excluded strip (< {:g})",
                                            std::abs(s), s_tol));
    return assemble(s, theta, GenTables(spec), geo_vhat | geo_lambda);
}

VhatEval vhat_at(double s, double theta, const FamilySpec& spec) {
    const GeometryAt geo = assemble(s, theta, GenTables(spec), geo_vhat);
    return {geo.vhat, geo.dvhat};
}

Eigen::Vector2d chat(const State& x, const FamilySpec& spec) {
    const double ap = alpha_eval(x.theta, spec.plant.rho).d1;
    const double c2 = spec.gen.k1 * x.s_dot + spec.gen.k2 * x.theta_dot;
    return Eigen::Vector2d(-ap * c2, c2);
}

GeometryAt geometry_unchecked(double s, double theta, const FamilySpec& spec, unsigned parts) {
    return assemble(s, theta, GenTables(spec), parts);
}

MatchingResiduals matching_residuals_against(double s, double theta, const PlantParams& p,
                                             const GeometryFn& geometry) {
    const GeometryAt geo = geometry(s, theta);
    const Metric2 g = kinetic_metric(s, theta, p);
    const AlphaEval al = alpha_eval(theta, p.rho);
    const double ap = al.d1;

    const Christoffel1 cg = christoffel_g(s, theta, p);
    const Christoffel1 ch = christoffel_first_from_grad(geo.ghat_grad.d_s, geo.ghat_grad.d_theta);

    MatchingResiduals out;

    // Projected difference of the two connections, as a quadratic form in
    // the velocity: P(D(X,X)) = T_ij X^i X^j.  The condition holds for
    // every X iff T vanishes.
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const Eigen::Vector2d low_g(cg.v[i][j][0], cg.v[i][j][1]);
            const Eigen::Vector2d low_h(ch.v[i][j][0], ch.v[i][j][1]);
            const Eigen::Vector2d dg = g.solve(low_g);
            const Eigen::Vector2d dh = geo.ghat.solve(low_h);
            const double t = (dg(0) - dh(0)) + ap * (dg(1) - dh(1));
            out.r3 = std::max(out.r3, std::abs(t));
        }
    }

    // Projected difference of the two metric gradients of the potentials.
    const Eigen::Vector2d dV = potential_grad(s, theta, p);
    const Eigen::Vector2d v = g.solve(dV) - geo.ghat.solve(geo.dvhat);
    out.r4_V = std::abs(v(0) + ap * v(1));

    // Covariant s-derivative of m = g ghat^{-1} g on the projected slot,
    // with the plain derivative taken by central differences.
    const double h = 1e-5;
    const GeometryAt geo_sp = geometry(s + h, theta);
    const GeometryAt geo_sm = geometry(s - h, theta);
    {
        const auto m00_from = [&](const GeometryAt& gx, double sx) {
            const Metric2 gg = kinetic_metric(sx, theta, p);
            const Eigen::Vector2d col(gg.m11, gg.m12);
            const Eigen::Vector2d x = gx.ghat.solve(col);
            return gg.m11 * x(0) + gg.m12 * x(1);
        };
        const double dm = (m00_from(geo_sp, s + h) - m00_from(geo_sm, s - h)) / (2.0 * h);
        const Eigen::Vector2d low00(cg.v[0][0][0], cg.v[0][0][1]);
        const Eigen::Vector2d gamma00 = g.solve(low00);
        const Eigen::Vector2d x0 = geo.ghat.solve(Eigen::Vector2d(g.m11, g.m12));
        const Eigen::Vector2d mcol0 = g.matrix() * x0;
        out.r5_lambda = std::abs(dm - 2.0 * (gamma00(0) * mcol0(0) + gamma00(1) * mcol0(1)));
    }

    // Lie-derivative condition: L_W ghat = L_{PX} g with W = (sigma, mu).
    // The metric partials are exact; the derivatives of W come from central
    // differences of the provider's sigma/mu fields.
    const GeometryAt geo_tp = geometry(s, theta + h);
    const GeometryAt geo_tm = geometry(s, theta - h);
    const double sg = geo.sigma, mu = geo.mu;
    const double sg_s = (geo_sp.sigma - geo_sm.sigma) / (2.0 * h);
    const double mu_s = (geo_sp.mu - geo_sm.mu) / (2.0 * h);
    const double sg_th = (geo_tp.sigma - geo_tm.sigma) / (2.0 * h);
    const double mu_th = (geo_tp.mu - geo_tm.mu) / (2.0 * h);

    const Metric2& gh = geo.ghat;
    const Metric2& ds = geo.ghat_grad.d_s;
    const Metric2& dt = geo.ghat_grad.d_theta;
    const double lie11 = sg * ds.m11 + mu * dt.m11 + 2.0 * (gh.m11 * sg_s + gh.m12 * mu_s);
    const double lie12 = sg * ds.m12 + mu * dt.m12 + (gh.m12 * sg_s + gh.m22 * mu_s) +
                         (gh.m11 * sg_th + gh.m12 * mu_th);
    const double lie22 = sg * ds.m22 + mu * dt.m22 + 2.0 * (gh.m12 * sg_th + gh.m22 * mu_th);
    const double target22 = 5.0 * s * ap * ap;  // the only nonzero entry of d_s g
    out.r5_lie = std::max({std::abs(lie11), std::abs(lie12), std::abs(lie22 - target22)});

    return out;
}

MatchingResiduals matching_residuals_with_override(double s, double theta, const FamilySpec& spec,
                                                   double ghat11_factor) {
    if (std::abs(s) < s_tol)
        throw singularity_error(fmt::format(
            "matching_residuals: |s| = {:.6g} is inside the excluded strip (< {:g})", std::abs(s), s_tol));
    const GenTables tables(spec);
    const GeometryFn provider = [&tables, ghat11_factor](double sx, double tx) {
        GeometryAt g = assemble(sx, tx, tables, 0);
        if (ghat11_factor != 1.0) {
            g.ghat.m11 *= ghat11_factor;
            g.ghat_grad.d_s.m11 *= ghat11_factor;
            g.ghat_grad.d_theta.m11 *= ghat11_factor;
        }
        return g;
    };
    return matching_residuals_against(s, theta, spec.plant, provider);
}

MatchingResiduals matching_residuals(double s, double theta, const FamilySpec& spec) {
    return matching_residuals_with_override(s, theta, spec, 1.0);
}

}  // namespace bb
