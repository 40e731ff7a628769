#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nlheat/radial.hpp"
#include "nlheat/radial_operator.hpp"
#include "nlheat/rng.hpp"
#include "nlheat/util.hpp"

#include <cmath>
#include <sstream>

using namespace nlheat;

namespace {

RadialField fill(GridPtr g, double (*fn)(double)) {
    RadialField f(g);
    for (int j = 0; j < g->n(); ++j) f.values[j] = fn(g->nodes[j]);
    return f;
}

} // namespace

TEST_CASE("grid construction and node layout") {
    auto g = build_radial_grid(3, 1.0, 100, 1.0);
    REQUIRE(g->n() == 100);
    for (int j = 0; j < 100; ++j)
        CHECK(g->nodes[j] == doctest::Approx((j + 1) / 100.0).epsilon(1e-14));
    CHECK(g->nodes.back() == 1.0);

    auto graded = build_radial_grid(3, 20.0, 2048, 2.0);
    double min_sp = 1e300, max_sp = 0.0;
    for (int j = 1; j < graded->n(); ++j) {
        const double sp = graded->nodes[j] - graded->nodes[j - 1];
        min_sp = std::min(min_sp, sp);
        max_sp = std::max(max_sp, sp);
    }
    CHECK(min_sp < 0.5 * max_sp);

    CHECK_THROWS_AS(build_radial_grid(2, 1.0, 100, 1.0), ConfigError);
    CHECK_THROWS_AS(build_radial_grid(3, 1.0, 8, 1.0), ConfigError);
    CHECK_THROWS_AS(build_radial_grid(3, -1.0, 100, 1.0), ConfigError);
}

TEST_CASE("quadrature of 1 is exact, rho^2 converges") {
    for (double grading : {1.0, 2.0}) {
        auto g = build_radial_grid(3, 2.0, 32768, grading);
        const RadialField one = fill(g, [](double) { return 1.0; });
        CHECK(radial_integral(one) ==
              doctest::Approx(std::pow(2.0, 3) / 3.0).epsilon(1e-10));
        const RadialField sq = fill(g, [](double r) { return r * r; });
        CHECK(radial_integral(sq) == doctest::Approx(32.0 / 5.0).epsilon(1e-8));
    }
}

TEST_CASE("lp norms against closed forms") {
    auto g = build_radial_grid(3, 1.0, 20000, 1.0);
    const RadialField zero(g);
    CHECK(lp_norm(zero, 2.0) == 0.0);

    const RadialField one = fill(g, [](double) { return 1.0; });
    CHECK(lp_norm(one, 1.0) == doctest::Approx(4.0 * M_PI / 3.0).epsilon(1e-8));

    // || e^{-rho^2} ||_2^2 = (pi/2)^{3/2} over R^3
    auto gbig = build_radial_grid(3, 12.0, 200000, 1.0);
    const RadialField gauss = fill(gbig, [](double r) { return std::exp(-r * r); });
    const double n2 = lp_norm(gauss, 2.0);
    CHECK(n2 * n2 == doctest::Approx(std::pow(M_PI / 2.0, 1.5)).epsilon(1e-8));

    CHECK_THROWS_AS(lp_norm(one, 0.5), ConfigError);
}

TEST_CASE("intersection norm") {
    auto g = build_radial_grid(3, 1.0, 20000, 1.0);
    const RadialField one = fill(g, [](double) { return 1.0; });
    CHECK(intersection_norm(one, 2.0, 2.0) == lp_norm(one, 2.0));
    const RadialField zero(g);
    CHECK(intersection_norm(zero, 1.0, 6.0) == 0.0);
    const double vol = 4.0 * M_PI / 3.0;
    CHECK(intersection_norm(one, 1.0, 2.0) ==
          doctest::Approx(vol + std::sqrt(vol)).epsilon(1e-8));
    CHECK_THROWS_AS(intersection_norm(one, 3.0, 2.0), ConfigError);
    CHECK_THROWS_AS(intersection_norm(one, 0.5, 2.0), ConfigError);
}

TEST_CASE("lp interpolation inequality on random fields") {
    auto g = build_radial_grid(3, 5.0, 256, 1.0);
    CounterRng rng(11, 0);
    const double eta = 2.0, gam = 6.0, q = 3.0;
    const double theta = (1.0 / q - 1.0 / gam) / (1.0 / eta - 1.0 / gam);
    for (int trial = 0; trial < 100; ++trial) {
        RadialField f(g);
        for (auto& v : f.values) v = rng.next_gaussian();
        const double lq = lp_norm(f, q);
        const double bound =
            std::pow(lp_norm(f, eta), theta) * std::pow(lp_norm(f, gam), 1.0 - theta);
        CHECK(lq <= bound * (1.0 + 1e-12));
    }
}

TEST_CASE("radial laplacian: constants, rho^2, gaussian") {
    auto g = build_radial_grid(3, 10.0, 2000, 1.0);
    const RadialField c = fill(g, [](double) { return 4.2; });
    const RadialField lc = apply_radial_laplacian(c);
    for (int j = 0; j + 1 < g->n(); ++j) CHECK(std::fabs(lc.values[j]) < 1e-10);

    const RadialField sq = fill(g, [](double r) { return r * r; });
    const RadialField lsq = apply_radial_laplacian(sq);
    for (int j = 0; j + 2 < g->n(); ++j)
        CHECK(lsq.values[j] == doctest::Approx(6.0).epsilon(1e-6));

    // analytic oracle: Lap e^{-rho^2/4} = (rho^2/4 - d/2) e^{-rho^2/4}
    const RadialField gs = fill(g, [](double r) { return std::exp(-r * r / 4.0); });
    const RadialField lgs = apply_radial_laplacian(gs);
    double err = 0.0;
    for (int j = 1; j + 2 < g->n(); ++j) {
        const double r = g->nodes[j];
        const double exact = (r * r / 4.0 - 1.5) * std::exp(-r * r / 4.0);
        err = std::max(err, std::fabs(lgs.values[j] - exact));
    }
    const double h = g->nodes[1] - g->nodes[0];
    CHECK(err < 10.0 * h * h);
}

TEST_CASE("heat step: gaussian closed form, identity, semigroup, conservation") {
    auto g = build_radial_grid(3, 20.0, 2400, 1.0);
    const double a = 1.0;
    RadialField f(g);
    for (int j = 0; j < g->n(); ++j)
        f.values[j] = std::exp(-g->nodes[j] * g->nodes[j] / (4.0 * a));

    const double t = 0.7;
    const RadialField ft = heat_step(f, t);
    double err = 0.0;
    for (int j = 0; j < g->n() - 10; ++j) {
        const double r = g->nodes[j];
        const double exact =
            std::pow(a / (a + t), 1.5) * std::exp(-r * r / (4.0 * (a + t)));
        err = std::max(err, std::fabs(ft.values[j] - exact));
    }
    CHECK(err < 1e-4);

    // t -> 0 identity
    const RadialField tiny = heat_step(f, 1e-8);
    double ierr = 0.0;
    for (int j = 0; j < g->n(); ++j)
        ierr = std::max(ierr, std::fabs(tiny.values[j] - f.values[j]));
    CHECK(ierr < 1e-4);

    // semigroup law
    const RadialField two_steps = heat_step(heat_step(f, 0.3), 0.4);
    double serr = 0.0;
    for (int j = 0; j < g->n(); ++j)
        serr = std::max(serr, std::fabs(two_steps.values[j] - ft.values[j]));
    CHECK(serr < 1e-6);

    // mass conservation for interior-supported data
    RadialField bump(g);
    for (int j = 0; j < g->n(); ++j) {
        const double r = g->nodes[j];
        bump.values[j] = r < 4.0 ? std::exp(-1.0 / (1.0 - std::pow(r / 4.0, 2))) : 0.0;
    }
    const double m0 = radial_integral(bump);
    const double m1 = radial_integral(heat_step(bump, 0.5));
    CHECK(m1 == doctest::Approx(m0).epsilon(1e-6));

    // max principle and positivity
    const RadialField big = heat_step(bump, 2.0);
    CHECK(big.max_abs() <= bump.max_abs() + 1e-8);
    for (double v : big.values) CHECK(v >= -1e-8 * bump.max_abs());

    CHECK_THROWS_AS(heat_step(f, 0.0), ConfigError);
}

TEST_CASE("heat step refinement convergence on the gaussian oracle") {
    const double a = 0.5, t = 0.4;
    auto gauss_err = [&](int n) {
        auto g = build_radial_grid(3, 16.0, n, 1.0);
        RadialField f(g);
        for (int j = 0; j < n; ++j)
            f.values[j] = std::exp(-g->nodes[j] * g->nodes[j] / (4.0 * a));
        const RadialField ft = heat_step(f, t);
        double err = 0.0;
        for (int j = 0; j < n - 8; ++j) {
            const double r = g->nodes[j];
            const double exact =
                std::pow(a / (a + t), 1.5) * std::exp(-r * r / (4.0 * (a + t)));
            err = std::max(err, std::fabs(ft.values[j] - exact));
        }
        return err;
    };
    const double e1 = gauss_err(600);
    const double e2 = gauss_err(1200);
    CHECK(e1 / e2 >= 3.0);
}

TEST_CASE("csv round trip preserves the field") {
    auto g = build_radial_grid(4, 3.0, 64, 1.5);
    RadialField f(g);
    CounterRng rng(5, 0);
    for (auto& v : f.values) v = rng.next_gaussian();
    std::stringstream ss;
    write_radial_csv(ss, f);
    const RadialField back = read_radial_csv(ss);
    REQUIRE(back.grid->n() == 64);
    CHECK(back.grid->d == 4);
    for (int j = 0; j < 64; ++j) {
        CHECK(back.grid->nodes[j] == doctest::Approx(g->nodes[j]).epsilon(1e-12));
        CHECK(back.values[j] == doctest::Approx(f.values[j]).epsilon(1e-15));
    }
}

TEST_CASE("fields stay finite through operator application") {
    auto g = build_radial_grid(3, 8.0, 512, 2.0);
    CounterRng rng(9, 2);
    RadialField f(g);
    for (auto& v : f.values) v = rng.next_gaussian();
    CHECK(apply_radial_laplacian(f).all_finite());
    CHECK(heat_step(f, 0.01).all_finite());
}
