#pragma once

#include "nlheat/profile.hpp"
#include "nlheat/trajectory.hpp"

namespace nlheat {

// similarity variables: tau = ln t, rho = r / sqrt(t), v = t^{1/(p-1)} u
RadialField to_similarity(const RadialField& f, double t, double p);
RadialField from_similarity(const RadialField& v, double t, double p);

struct EvolveOptions {
    // norm keys recorded along the flow, (name, Lebesgue exponent)
    std::vector<std::pair<std::string, double>> norms;
    int norm_stride = 10;
    int field_stride = 250;
    double blowup_guard = 1e8;
    bool linearized = false; // drop N_alpha, evolve the linear flow only
    // evolution grid; profile is resampled onto it (defaults to rho_max=25, n=1600)
    GridPtr grid;
};

// perturbation flow  d_tau w = L_alpha w + N_alpha(w),
// N_alpha(w) = n(U+w) - n(U) - p |U|^{p-1} w, semi-implicit (CN + AB2 on N)
Trajectory evolve_perturbation(const RadialField& w0, const ProfileSolution& ps, double tau0,
                               double tau1, double dt, const EvolveOptions& opt = {});

struct AncientOptions {
    double eta = 1.0;
    double gamma = 12.0;
    double dt = 1e-3;
    EvolveOptions evolve;
};

// Forward-shooting surrogate for the ancient solution: start from
// delta * Ulin at tau_start with delta sized so the linear growth reaches
// eps/2 at tau_end, then run the nonlinear flow. Truncates with a flag if
// || psi ||_{L^{eta,gamma}} reaches eps.
Trajectory approximate_ancient_solution(const ProfileSolution& ps, const RadialField& Ulin,
                                        double lambda, double eps, double tau_start,
                                        double tau_end, const AncientOptions& opt = {});

struct GrowthFit {
    double rate = 0.0;
    double r2 = 0.0;
    bool flagged = false; // r2 < 0.99
};

// least-squares slope of log(norm) vs time over the trailing half of the series
GrowthFit growth_rate(const Trajectory& tr, const std::string& norm_key);

} // namespace nlheat
