#pragma once

#include "nlheat/lattice.hpp"
#include "nlheat/rng.hpp"

#include <map>
#include <string>
#include <vector>

namespace nlheat {

// f^omega = sum_k h_k P_k f with h_0 real standard normal, h_k complex
// standard (independent re/im) on a lexicographic half-space, and
// h_{-k} = conj(h_k), so real data stay real.
struct RandomizedDatum {
    LatticeField base;
    std::uint64_t seed = 0;
    std::map<KVec, Cplx> coefficients;
    LatticeField result;
};

// mass fraction allowed above the partition-of-unity range |xi|_inf <= K-1
inline constexpr double kBlockCoverageTol = 1e-6;

RandomizedDatum randomize(const LatticeField& f, const BlockPartition& bp, CounterRng& rng);
// h == 1 identity path (returns f exactly up to roundoff)
LatticeField randomize_unit_coefficients(const LatticeField& f, const BlockPartition& bp);
// multiplier with externally supplied coefficients (shared-draw experiments)
LatticeField apply_randomization(const LatticeField& f, const BlockPartition& bp,
                                 const std::map<KVec, Cplx>& coefficients);
std::map<KVec, Cplx> draw_block_coefficients(const BlockPartition& bp, CounterRng& rng);

// closed-form E |sum_k h_k psi_k(xi)|^2 = psi_0^2 + 2 sum_{k != 0} psi_k^2
double multiplier_second_moment(const BlockPartition& bp, const std::array<double, 3>& xi);
// E || f^omega ||_{L^2}^2 by covariance bookkeeping over the dual lattice
double expected_l2_squared(const LatticeField& f, const BlockPartition& bp);

struct MomentReport {
    double q = 2.0;
    double empirical_second_moment = 0.0; // E ||u0^w||_{L^q}^2
    double bound_side = 0.0;              // ||u0||_{M^{q,q}}^2 (q<2) or closed form (q=2)
    double ratio = 0.0;
    // rho-moment growth: (1/rho) log E ||u0^w||_rho^rho vs log rho
    std::vector<double> rho_list;
    std::vector<double> rho_log_moment_over_rho;
    double growth_slope = 0.0; // must stay <= 0.5 + tolerance
};

MomentReport lq_moment_check(const LatticeField& u0, double q, int samples, CounterRng& rng,
                             const BlockPartition& bp);

struct TailReport {
    std::vector<double> lambdas;
    std::vector<double> log_survival;
    double fit_a = 0.0, fit_b = 0.0; // log-survival dominated by a - b lambda^2
    bool dominated = false;
    bool b_positive = false;
    double mean_norm = 0.0;
    double mean_norm_sq = 0.0; // E N^2, comparable to per-mode closed forms
    double mean_norm_small_T = 0.0; // same statistic at T/4, checks C_T -> 0
};

// survival statistics of || t^gamma (I-Lap)^{sigma/2} e^{t Lap} u0^w ||_{L^theta3(0,T; L^theta2)}
TailReport smoothing_tail_estimate(const LatticeField& u0, double gamma, double sigma,
                                   double theta2, double theta3, double T, int samples,
                                   CounterRng& rng, const BlockPartition& bp, double alpha = 0.0);

struct MildCertificate {
    std::vector<double> residuals;
    std::vector<double> ratios;
    double max_ratio_after_2 = 0.0;
    bool contraction_ok = false;
    int iterations = 0;
};

struct MildSolveResult {
    std::vector<double> times;     // mesh up to the stopping time
    std::vector<double> v_lr;      // ||v(t)||_{L^r}
    std::vector<double> v_lq;      // ||v(t)||_{L^q}
    std::vector<LatticeField> v;   // solution of the integral equation
    double stopping_time = 0.0;
    std::string trigger;
    MildCertificate certificate;
    double M = 0.0; // contraction-ball radius
    double r = 0.0;
};

struct MildOptions {
    int time_steps = 96;
    double scheme_constant = 1.0; // calibrated C; M = (2C)^{-1/(p-1)}
    double picard_tol = 1e-9;
    int picard_max = 40;
    double epsilon_prime_frac = 0.5; // fraction through the admissible interval
};

// parameter gate of the random-data solver; throws naming the violated inequality
void validate_mild_gate(int d, double p, double q);

MildSolveResult mild_fixed_point(const RandomizedDatum& datum, double p, int d, double q,
                                 double horizon, const MildOptions& opt = {});

// stopping time only (the solver's clauses evaluated on the linear flow norms)
double mild_stopping_time(const LatticeField& u0_omega, double p, int d, double q, double horizon,
                          const MildOptions& opt = {});

struct SuccessCurve {
    std::vector<double> T_list;
    std::vector<double> p_emp; // P(T_stop >= T), shared samples so monotone
    double kappa = 0.0;        // exponent in the fitted tail coordinate T^{-kappa}
    double fit_slope = 0.0;    // log(1 - p) vs T^{-kappa}, negative for small T
    double fit_r2 = 0.0;
    int ensemble = 0;
};

SuccessCurve success_probability(const LatticeField& u0, double q, double p, int d,
                                 const std::vector<double>& T_list, int ensemble, CounterRng& rng,
                                 const BlockPartition& bp, const MildOptions& opt = {});

} // namespace nlheat
