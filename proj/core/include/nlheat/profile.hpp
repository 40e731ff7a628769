#pragma once

#include "nlheat/radial.hpp"

#include <string>

namespace nlheat {

// infinity for 3 <= d <= 10, else 1 + 4/(d - 4 - 2 sqrt(d-1))
double joseph_lundgren(int d);

// q_c = d(p-1)/2
double critical_exponent(int d, double p);

struct PowerRange {
    bool below_fujita = false;
    bool haraux_weissler = false;   // 1 + 2/d < p < 1 + 4/(d-2)
    bool jl_subcritical = false;    // 1 + 2/d < p < p_JL
    bool jl_supercritical = false;  // p >= p_JL

    std::string label() const;
};
PowerRange validate_power_range(int d, double p);

// Expander U_alpha: U'' + ((d-1)/rho + rho/2) U' + U/(p-1) + |U|^{p-1} U = 0,
// U(0) = alpha, U'(0) = 0, integrated by adaptive Runge-Kutta with a series
// start over the removable singularity at the origin.
struct ProfileSolution {
    double alpha = 0.0;
    double p = 0.0;
    int d = 0;
    GridPtr grid;
    RadialField U;
    RadialField dU;
    double ell = 0.0;              // rho^{2/(p-1)} U at rho_max
    double residual = 0.0;         // sup interior ODE residual
    double tail_oscillation = 0.0; // relative oscillation of rho^{2/(p-1)} U, last decade
    bool tail_converged = false;
    bool integration_ok = true;
    double last_valid_rho = 0.0;

    // cubic evaluation inside the grid, ell * rho^{-2/(p-1)} beyond it
    double evaluate_U(double rho) const;
    double evaluate_dU(double rho) const;
};

struct ProfileOptions {
    double rel_tol = 1e-11;
    double abs_tol = 1e-13;
    double blowup_guard = 1e8;
};

ProfileSolution integrate_profile(double alpha, double p, int d, double rho_max = 40.0,
                                  int n = 20000, const ProfileOptions& opt = {});

// physical expander t^{-1/(p-1)} U(r / sqrt(t)) resampled on the profile grid
RadialField physical_self_similar(const ProfileSolution& ps, double t);

// ell * rho^{-2/(p-1)} inside [0, Rbar], zero beyond
RadialField singular_datum(double ell, double p, GridPtr grid, double Rbar);

} // namespace nlheat
