#include "nlheat/radial.hpp"

#include "nlheat/util.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace nlheat {

GridPtr build_radial_grid(int d, double rho_max, int n, double grading) {
    if (d < 3) throw ConfigError("build_radial_grid: d >= 3 required, got " + std::to_string(d));
    if (n < 16) throw ConfigError("build_radial_grid: n >= 16 required, got " + std::to_string(n));
    if (!(rho_max > 0.0)) throw ConfigError("build_radial_grid: rho_max > 0 required");
    if (!(grading >= 1.0)) throw ConfigError("build_radial_grid: grading >= 1 required");

    auto g = std::make_shared<RadialGrid>();
    g->d = d;
    g->rho_max = rho_max;
    g->grading = grading;
    g->nodes.resize(n);
    for (int j = 0; j < n; ++j) {
        const double s = static_cast<double>(j + 1) / n;
        g->nodes[j] = rho_max * std::pow(s, grading);
    }
    g->nodes[n - 1] = rho_max;

    g->faces.resize(n + 1);
    g->faces[0] = 0.0;
    for (int j = 1; j < n; ++j) g->faces[j] = 0.5 * (g->nodes[j - 1] + g->nodes[j]);
    g->faces[n] = rho_max;

    g->weights.resize(n);
    for (int j = 0; j < n; ++j) {
        const double a = g->faces[j], b = g->faces[j + 1];
        g->weights[j] = (std::pow(b, d) - std::pow(a, d)) / d;
    }
    return g;
}

RadialField::RadialField(GridPtr g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
    if (values.size() != grid->nodes.size())
        throw ConfigError("RadialField: value count does not match grid");
}

bool RadialField::all_finite() const {
    return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

double RadialField::max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::fabs(v));
    return m;
}

double radial_integral(const RadialField& f) {
    double s = 0.0;
    for (std::size_t j = 0; j < f.values.size(); ++j) s += f.grid->weights[j] * f.values[j];
    return s;
}

double lp_norm(const RadialField& f, double p_exp) {
    if (!(p_exp >= 1.0)) throw ConfigError("lp_norm: p >= 1 required");
    const double omega = unit_sphere_area(f.grid->d);
    double s = 0.0;
    for (std::size_t j = 0; j < f.values.size(); ++j)
        s += f.grid->weights[j] * pow_fast(std::fabs(f.values[j]), p_exp);
    return std::pow(omega * s, 1.0 / p_exp);
}

double intersection_norm(const RadialField& f, double eta, double gamma) {
    if (!(eta >= 1.0)) throw ConfigError("intersection_norm: eta >= 1 required");
    if (!(eta <= gamma)) throw ConfigError("intersection_norm: eta <= gamma required");
    double out = lp_norm(f, eta);
    if (gamma > eta) out += lp_norm(f, gamma);
    return out;
}

namespace {

// Hermite cubic on [x0,x1] with endpoint slopes
double hermite(double x, double x0, double x1, double f0, double f1, double m0, double m1) {
    const double h = x1 - x0;
    const double t = (x - x0) / h;
    const double t2 = t * t, t3 = t2 * t;
    return f0 * (2 * t3 - 3 * t2 + 1) + m0 * h * (t3 - 2 * t2 + t) + f1 * (-2 * t3 + 3 * t2) +
           m1 * h * (t3 - t2);
}

// finite-difference slope at interior node j
double fd_slope(const std::vector<double>& x, const std::vector<double>& v, std::size_t j) {
    const std::size_t n = x.size();
    if (j == 0) return (v[1] - v[0]) / (x[1] - x[0]);
    if (j + 1 == n) return (v[n - 1] - v[n - 2]) / (x[n - 1] - x[n - 2]);
    const double hl = x[j] - x[j - 1], hr = x[j + 1] - x[j];
    return (hl * hl * v[j + 1] - hr * hr * v[j - 1] + (hr * hr - hl * hl) * v[j]) /
           (hl * hr * (hl + hr));
}

} // namespace

double sample(const RadialField& f, double r) {
    const auto& x = f.grid->nodes;
    const auto& v = f.values;
    const std::size_t n = x.size();
    r = std::fabs(r);
    if (r > f.grid->rho_max) return 0.0;
    if (r == f.grid->rho_max) return v[n - 1];
    if (r < x[1]) {
        // even extension about the origin: quadratic interpolation in rho^2
        // through the first three nodes
        const double s = r * r;
        const double s0 = x[0] * x[0], s1 = x[1] * x[1], s2 = x[2] * x[2];
        return v[0] * (s - s1) * (s - s2) / ((s0 - s1) * (s0 - s2)) +
               v[1] * (s - s0) * (s - s2) / ((s1 - s0) * (s1 - s2)) +
               v[2] * (s - s0) * (s - s1) / ((s2 - s0) * (s2 - s1));
    }
    const auto it = std::upper_bound(x.begin(), x.end(), r);
    const std::size_t j = static_cast<std::size_t>(it - x.begin()) - 1;
    const std::size_t k = std::min(j + 1, n - 1);
    return hermite(r, x[j], x[k], v[j], v[k], fd_slope(x, v, j), fd_slope(x, v, k));
}

RadialField map_field(const RadialField& f, double (*fn)(double)) {
    RadialField out(f.grid);
    for (std::size_t j = 0; j < f.size(); ++j) out.values[j] = fn(f.values[j]);
    return out;
}

void write_radial_csv(std::ostream& os, const RadialField& f) {
    char buf[80];
    std::snprintf(buf, sizeof buf, "# d=%d rho_max=%.17g n=%d\n", f.grid->d, f.grid->rho_max,
                  f.grid->n());
    os << buf << "rho,value\n";
    for (std::size_t j = 0; j < f.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", f.grid->nodes[j], f.values[j]);
        os << buf;
    }
}

RadialField read_radial_csv(std::istream& is) {
    std::string line;
    int d = 0, n = 0;
    double rho_max = 0.0;
    if (!std::getline(is, line) || line.rfind("# d=", 0) != 0)
        throw NumericalError("read_radial_csv: missing header");
    if (std::sscanf(line.c_str(), "# d=%d rho_max=%lg n=%d", &d, &rho_max, &n) != 3)
        throw NumericalError("read_radial_csv: malformed header");
    std::getline(is, line); // column names
    std::vector<double> rho, val;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        double r, v;
        char comma;
        if (!(ls >> r >> comma >> v)) throw NumericalError("read_radial_csv: bad row");
        rho.push_back(r);
        val.push_back(v);
    }
    if (static_cast<int>(rho.size()) != n) throw NumericalError("read_radial_csv: row count mismatch");
    // rebuild the grid from the stored geometry; nodes must match
    double grading = 1.0;
    if (n >= 2) {
        grading = std::log(rho[0] / rho_max) / std::log(1.0 / n);
    }
    auto g = build_radial_grid(d, rho_max, n, std::max(1.0, grading));
    RadialField f(g, std::move(val));
    for (int j = 0; j < n; ++j)
        if (std::fabs(g->nodes[j] - rho[j]) > 1e-9 * rho_max)
            throw NumericalError("read_radial_csv: node layout mismatch");
    return f;
}

} // namespace nlheat
