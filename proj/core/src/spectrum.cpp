#include "nlheat/spectrum.hpp"

#include "nlheat/util.hpp"

#include <algorithm>
#include <cmath>

namespace nlheat {

LinearizedOperator assemble_linearized(const ProfileSolution& ps, double eta,
                                       const SpectrumOptions& opt) {
    const double qc = critical_exponent(ps.d, ps.p);
    if (!(eta >= 1.0 && eta < qc))
        throw ConfigError("assemble_linearized: 1 <= eta < d(p-1)/2 required");

    LinearizedOperator lin;
    lin.profile = ps;
    lin.eta = eta;
    GridPtr grid = build_radial_grid(ps.d, opt.rho_max, opt.n, opt.grading);
    lin.op = similarity_generator(grid, ps.p);
    lin.potential.resize(grid->n());
    for (int j = 0; j < grid->n(); ++j) {
        const double u = ps.evaluate_U(grid->nodes[j]);
        lin.potential[j] = ps.p * std::pow(std::fabs(u), ps.p - 1.0);
    }
    lin.op.add_potential(lin.potential);
    return lin;
}

SpectralReport top_eigenpairs(const LinearizedOperator& lin, int k) {
    if (k < 1) throw ConfigError("top_eigenpairs: k >= 1 required");
    const TridiagEigen e = eigen_topk(lin.op, k);
    SpectralReport rep;
    rep.threshold = lin.threshold();
    rep.eigenvalues = e.lambda;
    for (int j = 0; j < k; ++j) {
        RadialField v = eigen_field(lin.op, e, j);
        // residual in the weighted norm == plain l2 residual of the symmetric form
        const int n = e.n;
        const double* col = e.Q.data() + static_cast<std::size_t>(j) * n;
        double num = 0.0;
        for (int i = 0; i < n; ++i) {
            double av = lin.op.diag[i] * col[i];
            if (i > 0) av += lin.op.off[i - 1] * col[i - 1];
            if (i + 1 < n) av += lin.op.off[i] * col[i + 1];
            const double r = av - e.lambda[j] * col[i];
            num += r * r;
        }
        const double res = std::sqrt(num); // eigenvectors are unit in this norm
        rep.residuals.push_back(res);
        rep.converged.push_back(res <= 1e-6);
        const double m = v.max_abs();
        if (m > 0.0)
            for (auto& x : v.values) x /= m;
        // fix sign: positive at the origin-side maximum
        int imax = 0;
        for (int i = 0; i < n; ++i)
            if (std::fabs(v.values[i]) > std::fabs(v.values[imax])) imax = i;
        if (v.values[imax] < 0.0)
            for (auto& x : v.values) x = -x;
        rep.eigenfields.push_back(std::move(v));
    }
    return rep;
}

namespace {

double lambda_max_for_alpha(double alpha, double p, int d, double eta,
                            const SpectrumOptions& opt) {
    const ProfileSolution ps = integrate_profile(alpha, p, d);
    if (!ps.integration_ok)
        throw NumericalError("profile integration blew up at rho=" +
                             std::to_string(ps.last_valid_rho) + " for alpha=" +
                             std::to_string(alpha));
    const LinearizedOperator lin = assemble_linearized(ps, eta, opt);
    return top_eigenpairs(lin, 1).eigenvalues[0];
}

} // namespace

SweepResult unstable_eigenvalue_sweep(double p, int d, const std::vector<double>& alphas,
                                      double eta, const SpectrumOptions& opt) {
    if (!(p > 1.0 + 2.0 / d)) throw ConfigError("unstable_eigenvalue_sweep: p > 1 + 2/d required");
    SweepResult out;
    for (double a : alphas) {
        SweepRow row;
        row.alpha = a;
        try {
            row.lambda_max = lambda_max_for_alpha(a, p, d, eta, opt);
            row.ok = true;
            if (row.lambda_max > 0.0) {
                out.unstable_alphas.push_back(a);
                if (!out.min_positive_lambda || row.lambda_max < *out.min_positive_lambda)
                    out.min_positive_lambda = row.lambda_max;
            }
        } catch (const std::exception& e) {
            row.ok = false;
            row.note = e.what();
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

UnstableAlpha find_small_unstable_alpha(double p, int d, double eps, double eta,
                                        const SpectrumOptions& opt) {
    if (!(eps > 0.0)) throw ConfigError("find_small_unstable_alpha: eps > 0 required");
    if (!validate_power_range(d, p).jl_subcritical)
        throw ConfigError("find_small_unstable_alpha: p must be JL-subcritical (1+2/d < p < p_JL)");

    // geometric scan for a sign change of lambda_max
    double a_lo = 0.0, a_hi = 0.0, lam_hi = 0.0;
    double a = 0.125;
    double prev_a = 0.0;
    bool found = false;
    for (int k = 0; k < 13; ++k, a *= 2.0) {
        const double lam = lambda_max_for_alpha(a, p, d, eta, opt);
        if (lam > 0.0) {
            if (k == 0) {
                // already unstable at the smallest alpha; walk down
                double b = a;
                double lam_b = lam;
                while (b > 1e-6) {
                    const double b2 = 0.5 * b;
                    const double lam2 = lambda_max_for_alpha(b2, p, d, eta, opt);
                    if (lam2 <= 0.0) {
                        a_lo = b2;
                        a_hi = b;
                        lam_hi = lam_b;
                        found = true;
                        break;
                    }
                    b = b2;
                    lam_b = lam2;
                }
            } else {
                a_lo = prev_a;
                a_hi = a;
                lam_hi = lam;
                found = true;
            }
            break;
        }
        prev_a = a;
    }
    if (!found)
        throw NumericalError("find_small_unstable_alpha: no positive eigenvalue located in the "
                             "scanned alpha range [0.125, 1024]");

    UnstableAlpha best;
    best.bracket_lo = a_lo;
    best.bracket_hi = a_hi;
    if (lam_hi < eps) {
        best.alpha = a_hi;
        best.lambda = lam_hi;
        return best;
    }
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (a_lo + a_hi);
        const double lam = lambda_max_for_alpha(mid, p, d, eta, opt);
        ++best.iterations;
        if (lam <= 0.0) {
            a_lo = mid;
        } else {
            a_hi = mid;
            lam_hi = lam;
            if (lam < eps) {
                best.alpha = mid;
                best.lambda = lam;
                best.bracket_lo = a_lo;
                best.bracket_hi = a_hi;
                return best;
            }
        }
    }
    throw NumericalError("find_small_unstable_alpha: bisection exhausted, bracket [" +
                         std::to_string(a_lo) + ", " + std::to_string(a_hi) +
                         "], last positive lambda " + std::to_string(lam_hi));
}

} // namespace nlheat
