#pragma once

#include "nlheat/noise.hpp"
#include "nlheat/profile.hpp"
#include "nlheat/simvar.hpp"

#include <memory>
#include <optional>

namespace nlheat {

// epsilon is the midpoint of (max(0, q_c/q - p), q_c/q - 1); r = (p+eps) q,
// q_a = r/p, giving 1 <= q < q_a < q_c < r
struct BranchExponents {
    double eps = 0.0;
    double r = 0.0;
    double q_a = 0.0;
};
BranchExponents pick_branch_exponents(int d, double p, double q);

struct BranchConfig {
    int d = 3;
    double p = 3.0;
    double q = 1.0;
    double eps = 1.0; // separation-exponent choice, see pick_branch_exponents
    double r = 4.0;
    double q_a = 4.0 / 3.0;
    double alpha_star = 0.0;
    double lambda_star = 0.0;
    double Rbar = 1.0;
    double horizon = 0.25;    // cap of the stopping times
    double mesh_theta = 1.02; // geometric time mesh ratio
    int mesh_steps = 1200;
    GridPtr grid;
    std::shared_ptr<const ProfileSolution> profile; // expander at alpha_star
    double noise_beta = 0.0;   // sigma_j = amp (1+mu_j)^{-beta/2}; 0 means default
    double noise_amplitude = 1.0;
    int noise_cutoff = 192;
    std::optional<RadialField> perturbation; // optional radial v0 added to u_0
    double scheme_constant = 0.05;      // C in the stopping-time clauses, calibrated
    double contraction_constant = 0.05; // C' in the contraction clause, calibrated
    double picard_tol = 1e-8;
    int picard_max = 60;
    double ancient_eps = 0.02; // amplitude bound fed to the ancient surrogate
    double sim_rho_max = 30.0; // similarity-variable evolution domain
    int sim_n = 1536;
    double sim_dt = 2e-3;
};

void validate_branch_config(const BranchConfig& cfg);

struct ZNormReport {
    double sup_lr = 0.0;
    double sup_weighted = 0.0; // sup_t t^{(d/2r)((p-1)/p)} ||w(t)||_{L^{pr}}
    double total = 0.0;
    bool vanishing_at_zero = false;
};
ZNormReport z_norm(const Trajectory& tr, double p, int d, double r, double T);

// f~(w) = -[ n(ub+up-w+z) - n(ub+up) + p|ub|^{p-1}(w-z) ] - p|ub|^{p-1} z
RadialField nonlinear_forcing(const RadialField& w, const RadialField& z, const RadialField& ubar,
                              const RadialField& uprime, double p);

// times[0] = 0, times[k] = T theta^{-(steps-k)}
std::vector<double> geometric_mesh(double T, double theta, int steps);

// S[g, f]: d_t w = Laplacian w + p |ubar(t)|^{p-1} w + f, w(0) = g, by
// Crank-Nicolson on the geometric mesh with the potential at midpoints.
// `forcing` holds f at the mesh times (empty means f = 0).
Trajectory linear_inhom_solve(const RadialField& w0, const std::vector<RadialField>& forcing,
                              const ProfileSolution& ubar_profile,
                              const std::vector<double>& times);

struct PicardCertificate {
    std::vector<double> residuals; // Z-norm of successive differences
    std::vector<double> ratios;
    double max_ratio_after_2 = 0.0;
    bool contraction_ok = false; // all ratios from iterate 2 on <= 0.6
    int iterations = 0;
};

struct SolveWResult {
    Trajectory w; // fields at every retained mesh time, frozen value recorded in flag
    StoppingTimeRecord stop;
    PicardCertificate certificate;
    double M = 0.0; // Z-norm of S[w0, 0] over the full horizon
    ZNormReport bounds;
    double w0_lr = 0.0; // ||w_0||_{L^r} for the a-priori-bound ratio
};

// which = 1: u' = 0; which = 2: u' from the ancient similarity trajectory
SolveWResult solve_w(const BranchConfig& cfg, int which, const Trajectory& z_traj,
                     const Trajectory* ancient);

struct BranchResult {
    Trajectory u1, u2, w1, w2;
    std::vector<double> sep_times;
    std::vector<double> separation; // ||u1 - u2||_{L^r}
    double fitted_slope = 0.0;
    double slope_r2 = 0.0;
    double predicted_slope = 0.0; // -(1/(p-1) - d/(2r) - lambda_star)
    StoppingTimeRecord stop;      // min of the two branch stopping times
    PicardCertificate cert1, cert2;
    std::vector<double> duhamel_times;
    std::vector<double> duhamel_res1, duhamel_res2; // relative to ||u0||_{L^q}
    double boundary_ratio = 0.0; // |u| at rho_max vs interior max, validity diagnostic
    double lambda_star = 0.0;
    double ancient_rate = 0.0; // fitted growth of the surrogate, cross-check
};

BranchResult assemble_branches(const BranchConfig& cfg, std::uint64_t seed,
                               std::uint64_t path_stream = 0);

struct ContinuityReport {
    std::vector<double> moduli; // coarse to fine
    std::vector<double> ratios; // moduli[l] / moduli[l+1]
    double geo_mean_ratio = 0.0;
    bool pass = false; // geometric-mean ratio >= 1.3, no level below 1.05
};

// modulus of continuity in L^q across nested time meshes (3 dyadic levels)
ContinuityReport continuity_diagnostic(const Trajectory& u, double q);

} // namespace nlheat
