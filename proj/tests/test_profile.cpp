#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nlheat/profile.hpp"
#include "nlheat/radial.hpp"
#include "nlheat/util.hpp"

#include <cmath>

using namespace nlheat;

TEST_CASE("joseph-lundgren exponent") {
    CHECK(std::isinf(joseph_lundgren(3)));
    CHECK(std::isinf(joseph_lundgren(10)));
    // 1 + 4/(7 - 2 sqrt(10)) and 1 + 4/(8 - 2 sqrt(11))
    CHECK(joseph_lundgren(11) ==
          doctest::Approx(1.0 + 4.0 / (7.0 - 2.0 * std::sqrt(10.0))).epsilon(1e-12));
    CHECK(joseph_lundgren(11) == doctest::Approx(6.9221).epsilon(1e-4));
    CHECK(joseph_lundgren(12) == doctest::Approx(3.9266).epsilon(1e-4));
    CHECK_THROWS_AS(joseph_lundgren(2), ConfigError);
}

TEST_CASE("critical exponent") {
    CHECK(critical_exponent(3, 3.0) == doctest::Approx(3.0));
    CHECK(critical_exponent(4, 2.0) == doctest::Approx(2.0));
    for (int d : {3, 5, 9})
        CHECK(critical_exponent(d, 1.0 + 2.0 / d) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(critical_exponent(3, 1.0), ConfigError);
}

TEST_CASE("power range classification") {
    const PowerRange a = validate_power_range(3, 3.0);
    CHECK(a.haraux_weissler);
    CHECK(a.jl_subcritical);
    CHECK_FALSE(a.below_fujita);
    CHECK_FALSE(a.jl_supercritical);

    const PowerRange b = validate_power_range(11, 8.0);
    CHECK(b.jl_supercritical);
    CHECK_FALSE(b.jl_subcritical);
    CHECK(b.label() == "JL-supercritical");

    const PowerRange c = validate_power_range(5, 1.1);
    CHECK(c.below_fujita);
    CHECK(c.label() == "below-Fujita");
}

TEST_CASE("profile integration: residual, boundedness, tail") {
    const ProfileSolution ps = integrate_profile(1.0, 3.0, 3);
    CHECK(ps.integration_ok);
    CHECK(ps.residual < 1e-6);
    CHECK(ps.tail_converged);
    CHECK(ps.U.all_finite());
    // U(rho_0) ~ alpha, dU(rho_0) ~ 0
    CHECK(ps.U.values[0] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(std::fabs(ps.dU.values[0]) < 1e-2);
    // rho U converges to a finite positive limit for this datum
    CHECK(ps.ell > 0.0);
    CHECK(std::isfinite(ps.ell));

    // ell stable under domain doubling (relative 1e-3)
    const ProfileSolution ps2 = integrate_profile(1.0, 3.0, 3, 80.0, 40000);
    CHECK(ps2.ell == doctest::Approx(ps.ell).epsilon(1e-3));
}

TEST_CASE("small alpha: linearized oracle and monotone ell") {
    // for tiny alpha the cubic term is negligible and U ~ alpha * (linear solution)
    const ProfileSolution tiny = integrate_profile(1e-5, 3.0, 3);
    const ProfileSolution tiny2 = integrate_profile(2e-5, 3.0, 3);
    CHECK(tiny.U.max_abs() <= 1e-5 * (1.0 + 1e-6));
    CHECK(tiny.ell > 0.0);
    // linear scaling: ell(2a) / ell(a) -> 2
    CHECK(tiny2.ell / tiny.ell == doctest::Approx(2.0).epsilon(1e-4));

    std::vector<double> ells;
    for (double a : {0.02, 0.04, 0.06, 0.08, 0.1}) {
        const ProfileSolution ps = integrate_profile(a, 3.0, 3);
        CHECK(ps.U.max_abs() == doctest::Approx(a).epsilon(1e-5)); // maximum at the origin, first node at O(h)
        ells.push_back(ps.ell);
    }
    for (std::size_t i = 0; i + 1 < ells.size(); ++i) CHECK(ells[i] < ells[i + 1]);
}

TEST_CASE("uniqueness surrogate: two tolerances agree") {
    ProfileOptions loose;
    loose.rel_tol = 1e-8;
    loose.abs_tol = 1e-10;
    const ProfileSolution a = integrate_profile(1.0, 3.0, 3, 40.0, 20000, loose);
    const ProfileSolution b = integrate_profile(1.0, 3.0, 3);
    double err = 0.0;
    for (int j = 0; j < a.grid->n(); ++j)
        err = std::max(err, std::fabs(a.U.values[j] - b.U.values[j]));
    CHECK(err < 1e-5);
}

TEST_CASE("ell is continuous in alpha on a 5-point stencil") {
    std::vector<double> ells;
    for (int i = -2; i <= 2; ++i)
        ells.push_back(integrate_profile(1.0 + 1e-3 * i, 3.0, 3).ell);
    for (std::size_t i = 0; i + 1 < ells.size(); ++i)
        CHECK(std::fabs(ells[i + 1] - ells[i]) < 2e-2 * std::fabs(ells[2]) + 1e-12);
}

TEST_CASE("physical self-similar field") {
    const ProfileSolution ps = integrate_profile(1.0, 3.0, 3);
    const RadialField at1 = physical_self_similar(ps, 1.0);
    for (int j = 0; j < ps.grid->n(); j += 997)
        CHECK(at1.values[j] == doctest::Approx(ps.U.values[j]).epsilon(1e-10));

    // value near the origin: t^{-1/(p-1)} alpha
    const double t = 0.25;
    const RadialField att = physical_self_similar(ps, t);
    CHECK(att.values[0] == doctest::Approx(std::pow(t, -0.5) * 1.0).epsilon(1e-4));

    // scaling identity: value(4t, 2r) = 4^{-1/(p-1)} value(t, r)
    const RadialField a = physical_self_similar(ps, 0.5);
    const RadialField b = physical_self_similar(ps, 2.0);
    for (double r : {0.3, 1.0, 2.7, 5.0}) {
        const double va = sample(a, r);
        const double vb = sample(b, 2.0 * r);
        CHECK(vb == doctest::Approx(0.5 * va).epsilon(1e-4));
    }
    CHECK_THROWS_AS(physical_self_similar(ps, 0.0), ConfigError);
}

TEST_CASE("singular datum: closed-form norm, log divergence, zero amplitude") {
    auto grid = build_radial_grid(3, 2.0, 8000, 1.0);
    const RadialField f = singular_datum(1.0, 3.0, grid, 1.0);
    // || rho^{-1} 1_{rho<=1} ||_{L^2(R^3)} = sqrt(4 pi)
    CHECK(lp_norm(f, 2.0) == doctest::Approx(std::sqrt(4.0 * M_PI)).epsilon(1e-2));

    // q = q_c = 3: log-divergent; denser nodes near 0 must raise the norm >= 10%
    auto fine = build_radial_grid(3, 2.0, 8000, 2.0);
    const double n_coarse = lp_norm(singular_datum(1.0, 3.0, grid, 1.0), 3.0);
    const double n_fine = lp_norm(singular_datum(1.0, 3.0, fine, 1.0), 3.0);
    CHECK(n_fine >= 1.1 * n_coarse);

    const RadialField zero = singular_datum(0.0, 3.0, grid, 1.0);
    CHECK(zero.max_abs() == 0.0);

    CHECK_THROWS_AS(singular_datum(1.0, 3.0, grid, 3.0), ConfigError);
}

TEST_CASE("blow-up reporting outside the validity regime") {
    ProfileOptions opt;
    opt.blowup_guard = 1e4;
    // large alpha with a huge domain: the integrator must either stay
    // bounded or report the last valid rho instead of becoming non-finite
    const ProfileSolution ps = integrate_profile(50.0, 3.0, 3, 40.0, 20000, opt);
    if (!ps.integration_ok) {
        CHECK(ps.last_valid_rho > 0.0);
        CHECK(ps.last_valid_rho < 40.0);
    } else {
        CHECK(ps.U.all_finite());
    }
}
