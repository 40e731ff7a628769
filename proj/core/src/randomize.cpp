#include "nlheat/randomize.hpp"

#include "nlheat/profile.hpp"
#include "nlheat/util.hpp"

#include <algorithm>
#include <cmath>

namespace nlheat {

namespace {

bool lex_positive(const KVec& k) {
    for (int v : k) {
        if (v > 0) return true;
        if (v < 0) return false;
    }
    return false;
}

KVec negate(const KVec& k) { return {-k[0], -k[1], -k[2]}; }

void check_coverage(const LatticeField& f, const BlockPartition& bp) {
    const double beyond = spectral_mass_beyond(f, bp.K - 1.0);
    if (beyond > kBlockCoverageTol)
        throw ConfigError("randomize: spectral mass fraction " + std::to_string(beyond) +
                          " lies beyond the block range |xi| <= K-1; increase K");
}

} // namespace

std::map<KVec, Cplx> draw_block_coefficients(const BlockPartition& bp, CounterRng& rng) {
    std::map<KVec, Cplx> h;
    for (const KVec& k : bp.blocks()) {
        if (k == KVec{0, 0, 0}) {
            h[k] = Cplx(rng.next_gaussian(), 0.0);
        } else if (lex_positive(k)) {
            const double re = rng.next_gaussian();
            const double im = rng.next_gaussian();
            h[k] = Cplx(re, im);
            h[negate(k)] = std::conj(h[k]);
        }
    }
    return h;
}

LatticeField apply_randomization(const LatticeField& f, const BlockPartition& bp,
                                 const std::map<KVec, Cplx>& coefficients) {
    check_coverage(f, bp);
    // dense coefficient cube: map lookups dominate the per-node multiplier
    const int W = 2 * bp.K + 1;
    std::vector<Cplx> dense(static_cast<std::size_t>(W) * W * W, Cplx(0.0, 0.0));
    auto slot = [&](const KVec& k) -> Cplx& {
        return dense[((static_cast<std::size_t>(k[0] + bp.K) * W) + (k[1] + bp.K)) * W +
                     (k[2] + bp.K)];
    };
    for (const auto& [k, h] : coefficients) slot(k) = h;

    LatticeField g = f;
    std::array<int, 3> m;
    std::array<double, 3> xi{0.0, 0.0, 0.0};
    KVec k{0, 0, 0};
    std::array<int, 3> lo{0, 0, 0}, hi{0, 0, 0};
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (f.spec[i] == Cplx(0.0, 0.0)) continue;
        unravel(f, i, m);
        bool covered = true;
        for (int ax = 0; ax < f.d; ++ax) {
            xi[ax] = m[ax] * M_PI / f.L;
            const int base = static_cast<int>(std::floor(xi[ax]));
            lo[ax] = std::max(base - 1, -bp.K);
            hi[ax] = std::min(base + 1, bp.K);
            if (lo[ax] > hi[ax]) covered = false;
        }
        Cplx mult(0.0, 0.0);
        if (covered) {
            for (k[0] = lo[0]; k[0] <= hi[0]; ++k[0])
                for (k[1] = lo[1]; k[1] <= hi[1]; ++k[1])
                    for (k[2] = lo[2]; k[2] <= hi[2]; ++k[2]) {
                        const double w = bp.psi(k, xi);
                        if (w != 0.0) mult += w * slot(k);
                    }
        }
        g.spec[i] = mult * f.spec[i];
    }
    return g;
}

RandomizedDatum randomize(const LatticeField& f, const BlockPartition& bp, CounterRng& rng) {
    RandomizedDatum out;
    out.base = f;
    out.seed = rng.seed();
    out.coefficients = draw_block_coefficients(bp, rng);
    out.result = apply_randomization(f, bp, out.coefficients);
    return out;
}

LatticeField randomize_unit_coefficients(const LatticeField& f, const BlockPartition& bp) {
    std::map<KVec, Cplx> ones;
    for (const KVec& k : bp.blocks()) ones[k] = Cplx(1.0, 0.0);
    return apply_randomization(f, bp, ones);
}

double multiplier_second_moment(const BlockPartition& bp, const std::array<double, 3>& xi) {
    double zero_sq = 0.0, others = 0.0;
    KVec k{0, 0, 0};
    std::array<int, 3> lo{0, 0, 0}, hi{0, 0, 0};
    for (int ax = 0; ax < bp.d; ++ax) {
        const int base = static_cast<int>(std::floor(xi[ax]));
        lo[ax] = std::max(base - 1, -bp.K);
        hi[ax] = std::min(base + 1, bp.K);
    }
    for (k[0] = lo[0]; k[0] <= hi[0]; ++k[0])
        for (k[1] = lo[1]; k[1] <= hi[1]; ++k[1])
            for (k[2] = lo[2]; k[2] <= hi[2]; ++k[2]) {
                const double w = bp.psi(k, xi);
                if (w == 0.0) continue;
                if (k == KVec{0, 0, 0})
                    zero_sq = w * w;
                else
                    others += w * w;
            }
    return zero_sq + 2.0 * others;
}

double expected_l2_squared(const LatticeField& f, const BlockPartition& bp) {
    std::array<int, 3> m;
    std::array<double, 3> xi{0.0, 0.0, 0.0};
    double acc = 0.0;
    const double vol = std::pow(2.0 * f.L, f.d);
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (f.spec[i] == Cplx(0.0, 0.0)) continue;
        unravel(f, i, m);
        for (int ax = 0; ax < f.d; ++ax) xi[ax] = m[ax] * M_PI / f.L;
        acc += vol * std::norm(f.spec[i]) * multiplier_second_moment(bp, xi);
    }
    return acc;
}

MomentReport lq_moment_check(const LatticeField& u0, double q, int samples, CounterRng& rng,
                             const BlockPartition& bp) {
    if (samples < 1000) throw ConfigError("lq_moment_check: samples >= 1000 required");
    MomentReport rep;
    rep.q = q;
    rep.rho_list = {2.0, 4.0, 6.0, 8.0};
    std::vector<double> rho_moment(rep.rho_list.size(), 0.0);
    double second = 0.0;
    const std::uint64_t master = rng.next_u64();
    const double cell = std::pow(u0.dx(), u0.d);
    for (int s = 0; s < samples; ++s) {
        CounterRng sub(master, static_cast<std::uint64_t>(s));
        const RandomizedDatum rd = randomize(u0, bp, sub);
        const std::vector<Cplx> phys = fft_inverse(rd.result);
        std::vector<double> lp_acc(rep.rho_list.size(), 0.0);
        double lq_acc = 0.0;
        for (const Cplx& c : phys) {
            const double a = std::abs(c);
            lq_acc += std::pow(a, q);
            for (std::size_t i = 0; i < rep.rho_list.size(); ++i)
                lp_acc[i] += std::pow(a, rep.rho_list[i]);
        }
        const double lq = std::pow(cell * lq_acc, 1.0 / q);
        second += lq * lq;
        for (std::size_t i = 0; i < rep.rho_list.size(); ++i)
            rho_moment[i] += cell * lp_acc[i]; // E ||.||_rho^rho
    }
    rep.empirical_second_moment = second / samples;
    if (q < 2.0) {
        const double mqq = modulation_norm(u0, bp, q, q, 0.0);
        rep.bound_side = mqq * mqq;
    } else {
        rep.bound_side = expected_l2_squared(u0, bp);
    }
    rep.ratio = rep.empirical_second_moment / rep.bound_side;

    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < rep.rho_list.size(); ++i) {
        const double rho = rep.rho_list[i];
        rep.rho_log_moment_over_rho.push_back(std::log(rho_moment[i] / samples) / rho);
        lx.push_back(std::log(rho));
        ly.push_back(rep.rho_log_moment_over_rho.back());
    }
    rep.growth_slope = fit_line(lx, ly).slope;
    return rep;
}

namespace {

// || t^gamma (I-Lap)^{sigma/2} e^{t Lap} u0w ||_{L^theta3(0,T;L^theta2)} with a
// geometric time mesh; theta2 == 2 runs in spectral space
double smoothing_norm(const LatticeField& u0w, double gamma, double sigma, double theta2,
                      double theta3, double T) {
    const int nt = 48;
    const double t_min = 1e-8 * T;
    std::vector<double> ts(nt);
    for (int i = 0; i < nt; ++i)
        ts[i] = t_min * std::pow(T / t_min, static_cast<double>(i) / (nt - 1));

    std::vector<double> gt(nt);
    if (theta2 == 2.0) {
        std::array<int, 3> m;
        std::vector<double> xi2(u0w.size()), mass(u0w.size());
        const double vol = std::pow(2.0 * u0w.L, u0w.d);
        for (std::size_t i = 0; i < u0w.size(); ++i) {
            unravel(u0w, i, m);
            double x2 = 0.0;
            for (int ax = 0; ax < u0w.d; ++ax) {
                const double xi = m[ax] * M_PI / u0w.L;
                x2 += xi * xi;
            }
            xi2[i] = x2;
            mass[i] = vol * std::norm(u0w.spec[i]) * std::pow(1.0 + x2, sigma);
        }
        for (int k = 0; k < nt; ++k) {
            double s = 0.0;
            for (std::size_t i = 0; i < u0w.size(); ++i)
                if (mass[i] > 0.0) s += mass[i] * std::exp(-2.0 * xi2[i] * ts[k]);
            gt[k] = std::sqrt(s);
        }
    } else {
        for (int k = 0; k < nt; ++k) {
            const LatticeField ft = apply_bessel(apply_heat(u0w, ts[k]), sigma);
            gt[k] = lattice_lp(ft, theta2);
        }
    }
    // trapezoid of (t^gamma g(t))^theta3 in log t
    double acc = 0.0;
    for (int k = 0; k + 1 < nt; ++k) {
        const double f0 = std::pow(std::pow(ts[k], gamma) * gt[k], theta3) * ts[k];
        const double f1 = std::pow(std::pow(ts[k + 1], gamma) * gt[k + 1], theta3) * ts[k + 1];
        acc += 0.5 * (f0 + f1) * std::log(ts[k + 1] / ts[k]);
    }
    return std::pow(acc, 1.0 / theta3);
}

} // namespace

TailReport smoothing_tail_estimate(const LatticeField& u0, double gamma, double sigma,
                                   double theta2, double theta3, double T, int samples,
                                   CounterRng& rng, const BlockPartition& bp, double alpha) {
    if (!(theta2 >= 2.0)) throw ConfigError("smoothing_tail_estimate: theta2 >= 2 required");
    const double lhs = (sigma + alpha - 2.0 * gamma) * theta3;
    if (!(lhs < 2.0))
        throw ConfigError("smoothing_tail_estimate: (sigma+alpha-2gamma) theta3 = " +
                          std::to_string(lhs) + " violates the < 2 integrability condition");

    TailReport rep;
    std::vector<double> norms(samples), norms_small(samples);
    const std::uint64_t master = rng.next_u64();
    for (int s = 0; s < samples; ++s) {
        CounterRng sub(master, static_cast<std::uint64_t>(s));
        const RandomizedDatum rd = randomize(u0, bp, sub);
        norms[s] = smoothing_norm(rd.result, gamma, sigma, theta2, theta3, T);
        norms_small[s] = smoothing_norm(rd.result, gamma, sigma, theta2, theta3, 0.25 * T);
    }
    rep.mean_norm = mean(norms);
    rep.mean_norm_small_T = mean(norms_small);
    for (double nv : norms) rep.mean_norm_sq += nv * nv;
    rep.mean_norm_sq /= samples;

    std::vector<double> sorted = norms;
    std::sort(sorted.begin(), sorted.end());
    // survival on quantile-spaced lambdas above the bulk
    std::vector<double> fx, fy;
    for (int i = 0; i < 18; ++i) {
        const double qq = 0.55 + 0.44 * i / 17.0;
        const double lam = quantile(sorted, qq);
        const double surv = 1.0 - qq;
        rep.lambdas.push_back(lam);
        rep.log_survival.push_back(std::log(surv));
        fx.push_back(lam * lam);
        fy.push_back(std::log(surv));
    }
    const LineFit f = fit_line(fx, fy);
    rep.fit_b = -f.slope;
    rep.fit_a = f.intercept;
    rep.b_positive = rep.fit_b > 0.0;
    rep.dominated = true;
    for (std::size_t i = 0; i < rep.lambdas.size(); ++i) {
        const double model = rep.fit_a - rep.fit_b * rep.lambdas[i] * rep.lambdas[i];
        if (model < rep.log_survival[i] - 0.5) rep.dominated = false; // half a log of slack
    }
    return rep;
}

void validate_mild_gate(int d, double p, double q) {
    const double p_gate = 0.5 + std::sqrt(0.25 + 4.0 / d);
    if (!(p > p_gate))
        throw ConfigError("mild gate: p > 1/2 + sqrt(1/4 + 4/d) = " + std::to_string(p_gate) +
                          " violated");
    const double qc = critical_exponent(d, p);
    const double q_lo = 2.0 - 8.0 / (4.0 + d * p);
    if (!(q > q_lo && q < qc))
        throw ConfigError("mild gate: q must lie in (2 - 8/(4+dp), q_c) = (" +
                          std::to_string(q_lo) + ", " + std::to_string(qc) + ")");
    if (q < 2.0) {
        const double s0 = d * (2.0 - q) / (2.0 * q);
        if (!(s0 < 2.0 / p))
            throw ConfigError("mild gate: s0 = d(2-q)/(2q) >= 2/p"); // equivalent to q > q_lo
    }
}

namespace {

struct MildClauses {
    // running integrals on the mesh of (s^g1 ||z||_{rp})^{e1} and (s^g2 ||z||_r)^{e2}
    double g1 = 0.0, e1 = 0.0, t_pow1 = 0.0; // self-map clause
    double g2 = 0.0, e2 = 0.0, t_pow2 = 0.0; // contraction clause
    double inv1 = 0.0, inv2 = 0.0;           // outer exponents on the integrals
};

MildClauses make_clauses(int d, double p, double q, double r, double eps_frac) {
    MildClauses c;
    if (q >= 2.0) {
        c.g1 = 0.0;
        c.e1 = 2.0 * p;
        c.t_pow1 = 0.5;
        c.inv1 = p / c.e1; // ||z||^p_{L^{2p} L^{rp}} = I^{p/(2p)}
        c.g2 = 0.0;
        c.e2 = r;
        c.t_pow2 = 1.0 - d * (p - 1.0) / (2.0 * (r - p + 1.0));
        c.inv2 = (p - 1.0) / r;
    } else {
        const double s0 = d * (2.0 - q) / (2.0 * q);
        const double pp = std::max(p, p / (p - 1.0));
        const double alpha = 2.0;
        const double alpha_p = std::max(p / (p - 1.0), 2.0 / (p - 1.0));
        const double cap1 = (2.0 - s0 * (p - 1.0) - 2.0 / pp) / (2.0 * alpha_p);
        const double cap2 = alpha_p * (2.0 - s0 * (p - 1.0));
        const double cap3 = alpha * (2.0 - s0 * p) / 2.0;
        const double eps_prime = eps_frac * std::min({cap1, cap2, cap3});
        c.g1 = (s0 * p - 1.0 + eps_prime) / (2.0 * p);
        c.e1 = 2.0 * p;
        c.t_pow1 = (2.0 - s0 * p) / 4.0;
        c.inv1 = p / c.e1;
        c.g2 = (alpha_p - 1.0) / (alpha_p * (p - 1.0)) -
               (alpha_p * (2.0 - s0 * (p - 1.0)) - eps_prime) / (2.0 * alpha * (p - 1.0));
        c.e2 = alpha_p * (p - 1.0);
        c.t_pow2 = (2.0 - s0 * (p - 1.0) - 2.0 / pp) / 4.0;
        c.inv2 = (p - 1.0) / c.e2;
    }
    return c;
}

struct StopEval {
    double t_stop;
    std::string trigger;
};

StopEval eval_mild_stop(const std::vector<double>& times, const std::vector<double>& z_rp,
                        const std::vector<double>& z_r, const MildClauses& cl, double C, double M,
                        double horizon) {
    double I1 = 0.0, I2 = 0.0;
    for (std::size_t k = 1; k < times.size(); ++k) {
        const double dt = times[k] - times[k - 1];
        auto term = [&](const std::vector<double>& zn, double g, double e, std::size_t i) {
            return std::pow(std::pow(times[i], g) * zn[i], e);
        };
        I1 += 0.5 * dt * (term(z_rp, cl.g1, cl.e1, k - 1) + term(z_rp, cl.g1, cl.e1, k));
        I2 += 0.5 * dt * (term(z_r, cl.g2, cl.e2, k - 1) + term(z_r, cl.g2, cl.e2, k));
        const double t = times[k];
        const double v1 = C * std::pow(t, cl.t_pow1) * std::pow(I1, cl.inv1);
        const double v2 = C * std::pow(t, cl.t_pow2) * std::pow(I2, cl.inv2);
        if (v1 >= M / 2.0) return {t, "self-map"};
        if (v2 >= 0.25) return {t, "contraction"};
    }
    return {horizon, "horizon-cap"};
}

} // namespace

double mild_stopping_time(const LatticeField& u0_omega, double p, int d, double q, double horizon,
                          const MildOptions& opt) {
    validate_mild_gate(d, p, q);
    const double qc = critical_exponent(d, p);
    const double r = qc * std::max(p, p / (p - 1.0));
    const double M = std::pow(2.0 * opt.scheme_constant, -1.0 / (p - 1.0));
    const MildClauses cl = make_clauses(d, p, q, r, opt.epsilon_prime_frac);

    std::vector<double> times(opt.time_steps + 1), z_rp(opt.time_steps + 1),
        z_r(opt.time_steps + 1);
    for (int k = 0; k <= opt.time_steps; ++k) {
        times[k] = horizon * k / opt.time_steps;
        const LatticeField zt = apply_heat(u0_omega, times[k]);
        const std::vector<Cplx> phys = fft_inverse(zt);
        const double cell = std::pow(zt.dx(), zt.d);
        double arp = 0.0, ar = 0.0;
        for (const Cplx& c : phys) {
            const double a = std::abs(c);
            arp += pow_fast(a, r * p);
            ar += pow_fast(a, r);
        }
        z_rp[k] = std::pow(cell * arp, 1.0 / (r * p));
        z_r[k] = std::pow(cell * ar, 1.0 / r);
    }
    return eval_mild_stop(times, z_rp, z_r, cl, opt.scheme_constant, M, horizon).t_stop;
}

MildSolveResult mild_fixed_point(const RandomizedDatum& datum, double p, int d, double q,
                                 double horizon, const MildOptions& opt) {
    validate_mild_gate(d, p, q);
    const LatticeField& u0w = datum.result;
    if (u0w.d != d) throw ConfigError("mild_fixed_point: lattice dimension mismatch");
    const double qc = critical_exponent(d, p);
    const double r = qc * std::max(p, p / (p - 1.0));
    const double M = std::pow(2.0 * opt.scheme_constant, -1.0 / (p - 1.0));
    const MildClauses cl = make_clauses(d, p, q, r, opt.epsilon_prime_frac);

    MildSolveResult out;
    out.M = M;
    out.r = r;

    // linear-flow norms on the mesh, then the stopping time
    std::vector<double> times(opt.time_steps + 1);
    std::vector<std::vector<Cplx>> zhat_phys(times.size());
    std::vector<double> z_rp(times.size()), z_r(times.size());
    const double cell = std::pow(u0w.dx(), u0w.d);
    for (std::size_t k = 0; k < times.size(); ++k) {
        times[k] = horizon * static_cast<double>(k) / opt.time_steps;
        zhat_phys[k] = fft_inverse(apply_heat(u0w, times[k]));
        double arp = 0.0, ar = 0.0;
        for (const Cplx& c : zhat_phys[k]) {
            const double a = std::abs(c);
            arp += pow_fast(a, r * p);
            ar += pow_fast(a, r);
        }
        z_rp[k] = std::pow(cell * arp, 1.0 / (r * p));
        z_r[k] = std::pow(cell * ar, 1.0 / r);
    }
    const StopEval st =
        eval_mild_stop(times, z_rp, z_r, cl, opt.scheme_constant, M, horizon);
    out.stopping_time = st.t_stop;
    out.trigger = st.trigger;

    std::size_t K = times.size() - 1;
    while (K > 1 && times[K] > st.t_stop) --K;
    times.resize(K + 1);

    // Picard in spectral space: Gamma[v](t_k) = sum_j w_j e^{(t_k - s_j) Lap} n(v + zhat)(s_j)
    const std::size_t nn = u0w.size();
    std::vector<double> xi2(nn);
    {
        std::array<int, 3> m;
        for (std::size_t i = 0; i < nn; ++i) {
            unravel(u0w, i, m);
            double x2 = 0.0;
            for (int ax = 0; ax < u0w.d; ++ax) {
                const double xi = m[ax] * M_PI / u0w.L;
                x2 += xi * xi;
            }
            xi2[i] = x2;
        }
    }
    std::vector<LatticeField> v(times.size(), LatticeField::zeros(u0w.d, u0w.L, u0w.n));
    MildCertificate cert;
    double prev_res = -1.0;
    for (int it = 0; it < opt.picard_max; ++it) {
        // spectra of the nonlinearity at every mesh time
        std::vector<std::vector<Cplx>> Fhat(times.size());
        for (std::size_t k = 0; k < times.size(); ++k) {
            const std::vector<Cplx> vphys = fft_inverse(v[k]);
            std::vector<Cplx> nf(nn);
            for (std::size_t i = 0; i < nn; ++i) {
                const Cplx u = vphys[i] + zhat_phys[k][i];
                const double a = std::abs(u);
                nf[i] = a == 0.0 ? Cplx(0.0, 0.0) : std::pow(a, p - 1.0) * u;
            }
            Fhat[k] = fft_forward(u0w.d, u0w.L, u0w.n, nf).spec;
        }
        double res = 0.0;
        std::vector<LatticeField> v_next(times.size(), LatticeField::zeros(u0w.d, u0w.L, u0w.n));
        for (std::size_t k = 1; k < times.size(); ++k) {
            std::vector<Cplx> acc(nn, Cplx(0.0, 0.0));
            for (std::size_t j = 0; j <= k; ++j) {
                double w;
                if (j == 0)
                    w = 0.5 * (times[1] - times[0]);
                else if (j == k)
                    w = 0.5 * (times[k] - times[k - 1]);
                else
                    w = 0.5 * (times[j + 1] - times[j - 1]);
                const double dtau = times[k] - times[j];
                for (std::size_t i = 0; i < nn; ++i)
                    acc[i] += w * std::exp(-xi2[i] * dtau) * Fhat[j][i];
            }
            v_next[k].spec = std::move(acc);
            const LatticeField dv = add(v_next[k], v[k], 1.0, -1.0);
            res = std::max(res, lattice_lp(dv, r));
        }
        if (!std::isfinite(res))
            throw NumericalError("mild_fixed_point: Picard iterate diverged (non-finite)");
        cert.residuals.push_back(res);
        if (prev_res > 0.0) cert.ratios.push_back(res / prev_res);
        ++cert.iterations;
        v = std::move(v_next);
        if (res <= opt.picard_tol * std::max(1.0, M)) break;
        const auto& rr = cert.ratios;
        if (rr.size() >= 3 && rr.end()[-1] > 0.9 && rr.end()[-2] > 0.9 && rr.end()[-3] > 0.9)
            throw NumericalError("mild_fixed_point: Picard not contracting (ratios > 0.9)");
        if (it + 1 == opt.picard_max)
            throw NumericalError("mild_fixed_point: Picard did not converge, residual " +
                                 std::to_string(res));
        prev_res = res;
    }
    for (std::size_t i = 1; i < cert.ratios.size(); ++i)
        cert.max_ratio_after_2 = std::max(cert.max_ratio_after_2, cert.ratios[i]);
    cert.contraction_ok = cert.ratios.size() >= 2 && cert.max_ratio_after_2 <= 0.6;
    out.certificate = cert;
    out.times = times;
    for (std::size_t k = 0; k < times.size(); ++k) {
        out.v_lr.push_back(lattice_lp(v[k], r));
        out.v_lq.push_back(lattice_lp(v[k], q));
    }
    out.v = std::move(v);
    return out;
}

SuccessCurve success_probability(const LatticeField& u0, double q, double p, int d,
                                 const std::vector<double>& T_list, int ensemble, CounterRng& rng,
                                 const BlockPartition& bp, const MildOptions& opt) {
    if (ensemble < 100) throw ConfigError("success_probability: ensemble >= 100 required");
    validate_mild_gate(d, p, q);
    const double qc = critical_exponent(d, p);
    const double r = qc * std::max(p, p / (p - 1.0));
    const double horizon = *std::max_element(T_list.begin(), T_list.end());

    SuccessCurve curve;
    curve.T_list = T_list;
    curve.ensemble = ensemble;
    curve.kappa = q >= 2.0 ? 1.0 / p
                           : std::min(1.0 / p, 2.0 / (p - 1.0) - d / (r - p + 1.0));

    std::vector<double> stops(ensemble);
    const std::uint64_t master = rng.next_u64();
    for (int s = 0; s < ensemble; ++s) {
        CounterRng sub(master, static_cast<std::uint64_t>(s));
        const RandomizedDatum rd = randomize(u0, bp, sub);
        stops[s] = mild_stopping_time(rd.result, p, d, q, horizon, opt);
    }
    for (double T : T_list) {
        int count = 0;
        for (double tstop : stops)
            if (tstop >= T) ++count;
        curve.p_emp.push_back(static_cast<double>(count) / ensemble);
    }
    // log(1 - P) vs T^{-kappa} on the informative part of the curve
    std::vector<double> fx, fy;
    for (std::size_t i = 0; i < T_list.size(); ++i) {
        const double pe = curve.p_emp[i];
        if (pe <= 0.01 || pe >= 1.0 - 0.5 / ensemble) continue;
        fx.push_back(std::pow(T_list[i], -curve.kappa));
        fy.push_back(std::log(1.0 - pe + 1e-12));
    }
    if (fx.size() >= 3) {
        const LineFit f = fit_line(fx, fy);
        curve.fit_slope = f.slope;
        curve.fit_r2 = f.r2;
    }
    return curve;
}

} // namespace nlheat
