#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nlheat/lattice.hpp"
#include "nlheat/rng.hpp"
#include "nlheat/util.hpp"

#include <cmath>

using namespace nlheat;

namespace {

// random real band-limited field, Nyquist-free, |xi|_inf below `cut`
LatticeField random_real_field(int d, double L, int n, double cut, CounterRng& rng) {
    LatticeField f = LatticeField::zeros(d, L, n);
    std::array<int, 3> m, neg;
    for (std::size_t i = 0; i < f.size(); ++i) {
        unravel(f, i, m);
        bool skip = false;
        double xi_inf = 0.0;
        for (int ax = 0; ax < d; ++ax) {
            if (m[ax] == -n / 2) skip = true;
            xi_inf = std::max(xi_inf, std::fabs(m[ax] * M_PI / L));
        }
        if (skip || xi_inf > cut) continue;
        bool lex_pos = false, is_zero = true;
        for (int ax = 0; ax < d; ++ax) {
            if (m[ax] != 0) {
                lex_pos = m[ax] > 0;
                is_zero = false;
                break;
            }
        }
        if (is_zero) {
            f.spec[i] = Cplx(rng.next_gaussian(), 0.0);
        } else if (lex_pos) {
            f.spec[i] = Cplx(rng.next_gaussian(), rng.next_gaussian());
            for (int ax = 0; ax < 3; ++ax) neg[ax] = -m[ax];
            f.spec[ravel(f, neg)] = std::conj(f.spec[i]);
        }
    }
    return f;
}

} // namespace

TEST_CASE("parseval and realness") {
    CounterRng rng(2, 0);
    for (int d : {1, 2, 3}) {
        const int n = d == 3 ? 32 : 128;
        LatticeField f = random_real_field(d, 12.0, n, 2.5, rng);
        CHECK(max_conjugate_asymmetry(f) == 0.0);
        const std::vector<double> phys = to_physical_real(f);
        double l2 = 0.0;
        for (double v : phys) l2 += v * v;
        l2 = std::sqrt(l2 * std::pow(f.dx(), d));
        CHECK(l2 == doctest::Approx(lattice_l2_spectral(f)).epsilon(1e-10));
        CHECK(lattice_lp(f, 2.0) == doctest::Approx(l2).epsilon(1e-10));
    }
}

TEST_CASE("fft round trip") {
    CounterRng rng(5, 0);
    LatticeField f = random_real_field(2, 8.0, 64, 3.0, rng);
    const std::vector<Cplx> phys = fft_inverse(f);
    const LatticeField back = fft_forward(2, 8.0, 64, phys);
    double err = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) err = std::max(err, std::abs(back.spec[i] - f.spec[i]));
    CHECK(err < 1e-12);
}

TEST_CASE("heat and bessel multipliers") {
    CounterRng rng(7, 0);
    LatticeField f = random_real_field(3, 12.0, 32, 2.0, rng);
    // semigroup property
    const LatticeField a = apply_heat(apply_heat(f, 0.3), 0.2);
    const LatticeField b = apply_heat(f, 0.5);
    double err = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) err = std::max(err, std::abs(a.spec[i] - b.spec[i]));
    CHECK(err < 1e-14);
    // bessel of sigma and -sigma invert each other
    const LatticeField c = apply_bessel(apply_bessel(f, 0.7), -0.7);
    err = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) err = std::max(err, std::abs(c.spec[i] - f.spec[i]));
    CHECK(err < 1e-12);
    // H^0 = L^2
    CHECK(sobolev_norm(f, 0.0) == doctest::Approx(lattice_l2_spectral(f)).epsilon(1e-12));
}

TEST_CASE("partition of unity: sum, support, symmetry") {
    CounterRng rng(11, 0);
    for (int d : {1, 2, 3}) {
        const BlockPartition bp = build_block_partition(d, d == 3 ? 4 : 8);
        // sum over blocks equals 1 inside |xi| <= K-1 at random points
        for (int trial = 0; trial < (d == 3 ? 200 : 1000); ++trial) {
            std::array<double, 3> xi{0.0, 0.0, 0.0};
            for (int ax = 0; ax < d; ++ax)
                xi[ax] = (2.0 * rng.next_double() - 1.0) * (bp.K - 1);
            double sum = 0.0;
            for (const KVec& k : bp.blocks()) sum += bp.psi(k, xi);
            CHECK(std::fabs(sum - 1.0) < 1e-12);

            // symmetry psi_k(xi) = psi_{-k}(-xi)
            KVec k{0, 0, 0};
            for (int ax = 0; ax < d; ++ax)
                k[ax] = static_cast<int>(std::lround(xi[ax]));
            std::array<double, 3> neg_xi{-xi[0], -xi[1], -xi[2]};
            const KVec neg_k{-k[0], -k[1], -k[2]};
            CHECK(bp.psi(k, xi) == doctest::Approx(bp.psi(neg_k, neg_xi)).epsilon(1e-12));
        }
        // support: psi_k vanishes outside k + [-1, 1]^d
        const KVec k0{1, d > 1 ? -2 : 0, 0};
        std::array<double, 3> far{k0[0] + 1.001, k0[1] - 1.2, 0.4};
        CHECK(bp.psi(k0, far) == 0.0);
        // psi_0(0) = 1: neighbours vanish at the core of block zero
        std::array<double, 3> origin{0.0, 0.0, 0.0};
        CHECK(bp.psi(KVec{0, 0, 0}, origin) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("block projection: diagonal action, completeness, contractivity") {
    CounterRng rng(13, 0);
    const BlockPartition bp = build_block_partition(1, 8);
    const double L = 16.0;
    const int n = 256;

    // single dual node: P_k scales by psi_k(xi*)
    LatticeField f = LatticeField::zeros(1, L, n);
    const std::array<int, 3> m{37, 0, 0};
    f.spec[ravel(f, m)] = Cplx(1.0, 0.0);
    const double xi_star = 37.0 * M_PI / L;
    const KVec k{static_cast<int>(std::lround(xi_star)), 0, 0};
    const LatticeField pk = project_block(f, bp, k);
    CHECK(std::abs(pk.spec[ravel(f, m)] -
                   bp.psi(k, {xi_star, 0.0, 0.0}) * f.spec[ravel(f, m)]) < 1e-14);

    // completeness and L^2-contractivity on random fields
    for (int trial = 0; trial < 20; ++trial) {
        LatticeField g = random_real_field(1, L, n, bp.K - 1.0, rng);
        LatticeField sum = LatticeField::zeros(1, L, n);
        for (const KVec& kk : bp.blocks()) {
            const LatticeField p = project_block(g, bp, kk);
            CHECK(lattice_lp(p, 2.0) <= lattice_lp(g, 2.0) * (1.0 + 1e-12));
            for (std::size_t i = 0; i < sum.size(); ++i) sum.spec[i] += p.spec[i];
        }
        double err = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i)
            err = std::max(err, std::abs(sum.spec[i] - g.spec[i]));
        CHECK(err < 1e-10);
    }
    CHECK_THROWS_AS(project_block(f, bp, KVec{9, 0, 0}), ConfigError);
}

TEST_CASE("modulation norm: zero, homogeneity, single-block reduction") {
    CounterRng rng(17, 0);
    const BlockPartition bp = build_block_partition(1, 8);
    const LatticeField zero = LatticeField::zeros(1, 16.0, 256);
    CHECK(modulation_norm(zero, bp, 2.0, 2.0, 0.0) == 0.0);

    LatticeField f = random_real_field(1, 16.0, 256, 6.0, rng);
    const double base = modulation_norm(f, bp, 2.0, 2.0, 0.5);
    LatticeField cf = f;
    for (auto& c : cf.spec) c *= -2.5;
    CHECK(modulation_norm(cf, bp, 2.0, 2.0, 0.5) == doctest::Approx(2.5 * base).epsilon(1e-12));

    // spectrum at the core of block zero: psi_0 == 1 there, so the
    // modulation norm reduces to the L^p norm
    LatticeField g = LatticeField::zeros(1, 16.0, 256);
    {
        std::array<int, 3> idx{0, 0, 0};
        g.spec[ravel(g, idx)] = Cplx(0.7, 0.0);
    }
    const double mn = modulation_norm(g, bp, 3.0, 3.0, 0.0);
    CHECK(mn == doctest::Approx(lattice_lp(g, 3.0)).epsilon(1e-6));

    CHECK_THROWS_AS(modulation_norm(f, bp, 0.5, 2.0, 0.0), ConfigError);

    // M^{2,2} with s = 0 is an l2 aggregation of the projections; for fields
    // centred on lattice frequencies it reproduces L^2 within a few percent
    LatticeField h = LatticeField::zeros(1, 16.0, 256);
    for (int kk = -4; kk <= 4; ++kk) {
        // nearest dual index to frequency kk: xi = m pi / 16 -> m = 16 kk / pi
        const int mm = static_cast<int>(std::lround(16.0 * kk / M_PI));
        std::array<int, 3> idx{mm, 0, 0};
        h.spec[ravel(h, idx)] += Cplx(0.3 + 0.05 * kk, 0.0);
        std::array<int, 3> nidx{-mm, 0, 0};
        h.spec[ravel(h, nidx)] += Cplx(0.3 + 0.05 * kk, 0.0);
    }
    const double m22 = modulation_norm(h, bp, 2.0, 2.0, 0.0);
    CHECK(m22 == doctest::Approx(lattice_lp(h, 2.0)).epsilon(0.02));
}
