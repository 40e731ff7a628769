#pragma once

#include <iosfwd>
#include <memory>
#include <mutex>
#include <vector>

namespace nlheat {

// Nodes of a radial mesh on (0, rho_max], graded toward the origin for
// grading > 1, with finite-volume quadrature weights for
// \int_0^{rho_max} f(rho) rho^{d-1} drho. Cell faces sit at node midpoints,
// the innermost face at the origin and the outermost at rho_max, so the
// weights of f == 1 sum to rho_max^d / d exactly.
struct RadialGrid {
    int d = 3;
    double rho_max = 1.0;
    double grading = 1.0;
    std::vector<double> nodes;       // strictly increasing, > 0, back() == rho_max
    std::vector<double> weights;     // cell volumes \int_cell rho^{d-1} drho
    std::vector<double> faces;       // n+1 faces, faces[0] = 0, faces[n] = rho_max

    // lazily built spectral decomposition of the discrete Laplacian,
    // shared by heat_step and the noise mode basis
    mutable std::shared_ptr<const void> op_cache;
    mutable std::mutex cache_mutex;

    int n() const { return static_cast<int>(nodes.size()); }
};

using GridPtr = std::shared_ptr<const RadialGrid>;

GridPtr build_radial_grid(int d, double rho_max, int n, double grading = 1.0);

struct RadialField {
    GridPtr grid;
    std::vector<double> values;

    RadialField() = default;
    explicit RadialField(GridPtr g) : grid(std::move(g)), values(grid->nodes.size(), 0.0) {}
    RadialField(GridPtr g, std::vector<double> v);

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    std::size_t size() const { return values.size(); }

    bool all_finite() const;
    double max_abs() const;
};

// \int_0^{rho_max} f rho^{d-1} drho by the grid weights
double radial_integral(const RadialField& f);

// || f ||_{L^p(R^d)} over the truncated domain, unit-sphere area included
double lp_norm(const RadialField& f, double p_exp);

// || f ||_{L^{eta,gamma}} = ||f||_{L^eta} + 1_{gamma>eta} ||f||_{L^gamma}
double intersection_norm(const RadialField& f, double eta, double gamma);

// Cubic interpolation of f at radius r. Even reflection below the first
// node, zero beyond rho_max.
double sample(const RadialField& f, double r);

// RadialField pointwise helpers
RadialField map_field(const RadialField& f, double (*fn)(double));

// CSV columns (rho, value) under header "# d=<d> rho_max=<v> n=<n>"
void write_radial_csv(std::ostream& os, const RadialField& f);
RadialField read_radial_csv(std::istream& is);

} // namespace nlheat
