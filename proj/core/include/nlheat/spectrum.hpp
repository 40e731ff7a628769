#pragma once

#include "nlheat/profile.hpp"
#include "nlheat/radial_operator.hpp"

#include <optional>
#include <vector>

namespace nlheat {

// L_alpha = L_0 + p |U_alpha|^{p-1} conjugated into the Gaussian-weighted
// space L^2(rho^{d-1} e^{rho^2/4} drho); `op` holds the symmetric matrix and
// the similarity weights, `eta` only enters the reported threshold.
struct LinearizedOperator {
    ProfileSolution profile;
    RadialOperator op;
    std::vector<double> potential; // V_alpha at the spectral grid nodes
    double eta = 1.0;

    double threshold() const {
        return 1.0 / (profile.p - 1.0) - profile.d / (2.0 * eta);
    }
};

struct SpectralReport {
    std::vector<double> eigenvalues;   // descending
    std::vector<RadialField> eigenfields; // sup-norm 1
    std::vector<double> residuals;     // ||L v - lambda v|| / ||v||, weighted norm
    std::vector<bool> converged;
    double threshold = 0.0;
};

struct SpectrumOptions {
    double rho_max = 30.0;
    int n = 2048;
    double grading = 2.0; // expander cores shrink like alpha^{-(p-1)/2}
};

LinearizedOperator assemble_linearized(const ProfileSolution& ps, double eta,
                                       const SpectrumOptions& opt = {});

SpectralReport top_eigenpairs(const LinearizedOperator& op, int k);

struct SweepRow {
    double alpha = 0.0;
    double lambda_max = 0.0;
    bool ok = false;
    std::string note;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<double> unstable_alphas;  // lambda_max > 0
    std::optional<double> min_positive_lambda;
};

SweepResult unstable_eigenvalue_sweep(double p, int d, const std::vector<double>& alphas,
                                      double eta, const SpectrumOptions& opt = {});

struct UnstableAlpha {
    double alpha = 0.0;
    double lambda = 0.0;
    double bracket_lo = 0.0; // lambda_max <= 0 here
    double bracket_hi = 0.0; // lambda_max > 0 here
    int iterations = 0;
};

// continuation/bisection over alpha for 0 < lambda_max(alpha) < eps
UnstableAlpha find_small_unstable_alpha(double p, int d, double eps, double eta,
                                        const SpectrumOptions& opt = {});

} // namespace nlheat
