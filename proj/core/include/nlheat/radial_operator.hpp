#pragma once

#include "nlheat/radial.hpp"

#include <vector>

namespace nlheat {

// Symmetrized tridiagonal operator on a radial grid. The finite-volume
// discretizations used here are self-adjoint under positive node weights w_j,
// so we carry the symmetric matrix (diag, off) acting on g = sqrt_w * f
// together with the similarity factors sqrt_w.
struct RadialOperator {
    GridPtr grid;
    std::vector<double> diag;   // n entries
    std::vector<double> off;    // n-1 couplings, all > 0 for our generators
    std::vector<double> sqrt_w; // similarity transform into symmetric coordinates

    RadialField apply(const RadialField& f) const;
    // solves (I - c * A) x = b in field coordinates (Thomas on the symmetric form)
    RadialField solve_shifted(const RadialField& b, double c) const;
    void add_potential(const std::vector<double>& v); // A += diag(v)
};

// Radial Laplacian f'' + ((d-1)/rho) f' in conservative form, zero-flux face
// at the origin, homogeneous Dirichlet beyond rho_max.
RadialOperator radial_laplacian_operator(GridPtr g);

// Drift form f'' + ((d-1)/rho + rho/2) f' + 1/(p-1), self-adjoint under the
// weight rho^{d-1} e^{rho^2/4}; face/cell factors are assembled in log space
// to avoid overflow of the Gaussian weight.
RadialOperator similarity_generator(GridPtr g, double p);

struct TridiagEigen {
    std::vector<double> lambda; // ascending
    std::vector<double> Q;      // column-major n x n, orthonormal eigenvectors (sym coords)
    int n = 0;
};

TridiagEigen eigen_all(const RadialOperator& op);
// the k largest eigenpairs, eigenvalues descending
TridiagEigen eigen_topk(const RadialOperator& op, int k);

// mode j of a decomposition mapped back to field coordinates
RadialField eigen_field(const RadialOperator& op, const TridiagEigen& e, int j);

RadialField apply_radial_laplacian(const RadialField& f);

// e^{t Laplacian} f through the cached spectral decomposition of the grid's
// discrete Laplacian (exact in time, so the semigroup law holds to roundoff).
RadialField heat_step(const RadialField& f, double t);

// access to the cached Laplacian decomposition backing heat_step
struct HeatPropagator {
    GridPtr grid;
    std::shared_ptr<const RadialOperator> op;
    std::shared_ptr<const TridiagEigen> eigen;

    RadialField apply(const RadialField& f, double t) const;
};
HeatPropagator heat_propagator(GridPtr g);

} // namespace nlheat
