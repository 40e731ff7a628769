#include "nlheat/radial_operator.hpp"

#include "nlheat/util.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>

namespace nlheat {

RadialField RadialOperator::apply(const RadialField& f) const {
    const int n = grid->n();
    RadialField out(f.grid);
    for (int j = 0; j < n; ++j) {
        double g = diag[j] * sqrt_w[j] * f.values[j];
        if (j > 0) g += off[j - 1] * sqrt_w[j - 1] * f.values[j - 1];
        if (j + 1 < n) g += off[j] * sqrt_w[j + 1] * f.values[j + 1];
        out.values[j] = g / sqrt_w[j];
    }
    return out;
}

RadialField RadialOperator::solve_shifted(const RadialField& b, double c) const {
    const int n = grid->n();
    std::vector<double> dw(n), rhs(n), cw(n - 1);
    for (int j = 0; j < n; ++j) {
        dw[j] = 1.0 - c * diag[j];
        rhs[j] = sqrt_w[j] * b.values[j];
    }
    for (int j = 0; j + 1 < n; ++j) cw[j] = -c * off[j];
    // Thomas, symmetric tridiagonal
    for (int j = 1; j < n; ++j) {
        const double m = cw[j - 1] / dw[j - 1];
        dw[j] -= m * cw[j - 1];
        rhs[j] -= m * rhs[j - 1];
    }
    RadialField out(b.grid);
    out.values[n - 1] = rhs[n - 1] / dw[n - 1];
    for (int j = n - 2; j >= 0; --j)
        out.values[j] = (rhs[j] - cw[j] * out.values[j + 1]) / dw[j];
    for (int j = 0; j < n; ++j) out.values[j] /= sqrt_w[j];
    return out;
}

void RadialOperator::add_potential(const std::vector<double>& v) {
    for (std::size_t j = 0; j < diag.size(); ++j) diag[j] += v[j];
}

RadialOperator radial_laplacian_operator(GridPtr gp) {
    const RadialGrid& g = *gp;
    const int n = g.n();
    RadialOperator op;
    op.grid = std::move(gp);
    op.diag.assign(n, 0.0);
    op.off.assign(n - 1, 0.0);
    op.sqrt_w.resize(n);
    for (int j = 0; j < n; ++j) op.sqrt_w[j] = std::sqrt(g.weights[j]);

    // interior fluxes through faces 1..n-1 (face 0 at the origin carries none)
    for (int j = 0; j + 1 < n; ++j) {
        const double face = g.faces[j + 1];
        const double cf = std::pow(face, g.d - 1) / (g.nodes[j + 1] - g.nodes[j]);
        op.diag[j] -= cf / g.weights[j];
        op.diag[j + 1] -= cf / g.weights[j + 1];
        op.off[j] = cf / (op.sqrt_w[j] * op.sqrt_w[j + 1]);
    }
    // Dirichlet flux at rho_max toward a zero ghost value
    const double h_last = g.nodes[n - 1] - g.nodes[n - 2];
    op.diag[n - 1] -= std::pow(g.rho_max, g.d - 1) / (h_last * g.weights[n - 1]);
    return op;
}

namespace {

double log_weight(double rho, int d) { return (d - 1) * std::log(rho) + 0.25 * rho * rho; }

// log of \int_a^b rho^{d-1} e^{rho^2/4} drho by Simpson, a >= 0
double log_cell_mass(double a, double b, int d) {
    const double mid = 0.5 * (a + b);
    const double la = a > 0.0 ? log_weight(a, d) : -1e300;
    const double lm = log_weight(mid, d);
    const double lb = log_weight(b, d);
    const double top = std::max({la, lm + std::log(4.0), lb});
    const double s = std::exp(la - top) + 4.0 * std::exp(lm - top) + std::exp(lb - top);
    return std::log((b - a) / 6.0) + top + std::log(s);
}

} // namespace

RadialOperator similarity_generator(GridPtr g, double p) {
    const int n = g->n();
    const int d = g->d;
    RadialOperator op;
    op.grid = g;
    op.diag.assign(n, 1.0 / (p - 1.0));
    op.off.assign(n - 1, 0.0);
    op.sqrt_w.resize(n);

    std::vector<double> log_vol(n);
    for (int j = 0; j < n; ++j) log_vol[j] = log_cell_mass(g->faces[j], g->faces[j + 1], d);
    // similarity factors normalized against the first cell so they stay representable
    for (int j = 0; j < n; ++j) op.sqrt_w[j] = std::exp(0.5 * (log_vol[j] - log_vol[0]));

    for (int j = 0; j + 1 < n; ++j) {
        const double face = g->faces[j + 1];
        const double lc = log_weight(face, d) - std::log(g->nodes[j + 1] - g->nodes[j]);
        op.diag[j] -= std::exp(lc - log_vol[j]);
        op.diag[j + 1] -= std::exp(lc - log_vol[j + 1]);
        op.off[j] = std::exp(lc - 0.5 * (log_vol[j] + log_vol[j + 1]));
    }
    const double h_last = g->nodes[n - 1] - g->nodes[n - 2];
    op.diag[n - 1] -= std::exp(log_weight(g->rho_max, d) - std::log(h_last) - log_vol[n - 1]);
    return op;
}

TridiagEigen eigen_all(const RadialOperator& op) {
    const int n = static_cast<int>(op.diag.size());
    TridiagEigen e;
    e.n = n;
    e.lambda = op.diag;
    std::vector<double> off = op.off;
    e.Q.assign(static_cast<std::size_t>(n) * n, 0.0);
    const int info = LAPACKE_dstevd(LAPACK_COL_MAJOR, 'V', n, e.lambda.data(), off.data(),
                                    e.Q.data(), n);
    if (info != 0) throw NumericalError("dstevd failed, info=" + std::to_string(info));
    return e;
}

namespace {

// one inverse-iteration polish step at a fixed shift, pivoted tridiagonal solve
void polish_eigenvector(const RadialOperator& op, double lambda, double* v, int n) {
    std::vector<double> dl(op.off), d(op.diag), du(op.off), du2(std::max(0, n - 2));
    for (int i = 0; i < n; ++i) d[i] -= lambda;
    std::vector<lapack_int> ipiv(n);
    const int info_f = LAPACKE_dgttrf(n, dl.data(), d.data(), du.data(), du2.data(), ipiv.data());
    if (info_f != 0) return; // exactly singular shift: the vector is already good
    for (int step = 0; step < 2; ++step) {
        std::vector<double> x(v, v + n);
        const int info_s = LAPACKE_dgttrs(LAPACK_COL_MAJOR, 'N', n, 1, dl.data(), d.data(),
                                          du.data(), du2.data(), ipiv.data(), x.data(), n);
        if (info_s != 0) return;
        double norm = 0.0;
        for (double xv : x) norm += xv * xv;
        norm = std::sqrt(norm);
        if (!(norm > 0.0) || !std::isfinite(norm)) return;
        for (int i = 0; i < n; ++i) v[i] = x[i] / norm;
    }
}

} // namespace

TridiagEigen eigen_topk(const RadialOperator& op, int k) {
    const int n = static_cast<int>(op.diag.size());
    k = std::min(k, n);
    std::vector<double> diag = op.diag, off = op.off;
    TridiagEigen e;
    e.n = n;
    e.lambda.assign(n, 0.0);
    e.Q.assign(static_cast<std::size_t>(n) * k, 0.0);
    std::vector<lapack_int> isuppz(2 * std::max(1, k));
    lapack_int m = 0;
    const int info =
        LAPACKE_dstevr(LAPACK_COL_MAJOR, 'V', 'I', n, diag.data(), off.data(), 0.0, 0.0,
                       n - k + 1, n, 0.0, &m, e.lambda.data(), e.Q.data(), n, isuppz.data());
    if (info != 0) throw NumericalError("dstevr failed, info=" + std::to_string(info));
    if (m != k) throw NumericalError("dstevr returned fewer eigenpairs than requested");
    // descending order
    std::vector<double> lam(k);
    std::vector<double> Q(e.Q.size());
    for (int j = 0; j < k; ++j) {
        lam[j] = e.lambda[k - 1 - j];
        std::copy_n(e.Q.begin() + static_cast<std::size_t>(k - 1 - j) * n, n,
                    Q.begin() + static_cast<std::size_t>(j) * n);
    }
    e.lambda = std::move(lam);
    e.Q = std::move(Q);
    for (int j = 0; j < k; ++j) {
        double* col = e.Q.data() + static_cast<std::size_t>(j) * n;
        polish_eigenvector(op, e.lambda[j], col, n);
        // Rayleigh-quotient update after the polish
        double num = 0.0;
        for (int i = 0; i < n; ++i) {
            double av = op.diag[i] * col[i];
            if (i > 0) av += op.off[i - 1] * col[i - 1];
            if (i + 1 < n) av += op.off[i] * col[i + 1];
            num += col[i] * av;
        }
        e.lambda[j] = num;
    }
    return e;
}

RadialField eigen_field(const RadialOperator& op, const TridiagEigen& e, int j) {
    RadialField f(op.grid);
    const double* col = e.Q.data() + static_cast<std::size_t>(j) * e.n;
    for (int i = 0; i < e.n; ++i) f.values[i] = col[i] / op.sqrt_w[i];
    return f;
}

RadialField apply_radial_laplacian(const RadialField& f) {
    // flux-difference form: exact zero on constants, no cancellation between
    // assembled diagonal and off-diagonal entries
    const RadialGrid& g = *f.grid;
    const int n = g.n();
    RadialField out(f.grid);
    double flux_in = 0.0; // zero-flux face at the origin
    for (int j = 0; j < n; ++j) {
        double flux_out;
        if (j + 1 < n) {
            const double face = g.faces[j + 1];
            flux_out = std::pow(face, g.d - 1) * (f.values[j + 1] - f.values[j]) /
                       (g.nodes[j + 1] - g.nodes[j]);
        } else {
            const double h_last = g.nodes[n - 1] - g.nodes[n - 2];
            flux_out = std::pow(g.rho_max, g.d - 1) * (0.0 - f.values[n - 1]) / h_last;
        }
        out.values[j] = (flux_out - flux_in) / g.weights[j];
        flux_in = flux_out;
    }
    return out;
}

HeatPropagator heat_propagator(GridPtr g) {
    struct Cache {
        std::shared_ptr<const RadialOperator> op;
        std::shared_ptr<const TridiagEigen> eigen;
    };
    std::lock_guard<std::mutex> lock(g->cache_mutex);
    auto cached = std::static_pointer_cast<const Cache>(g->op_cache);
    if (!cached) {
        if (g->n() > 6000)
            throw NumericalError("heat propagator: grid too large for dense spectral cache");
        auto op = std::make_shared<RadialOperator>(radial_laplacian_operator(g));
        auto eig = std::make_shared<TridiagEigen>(eigen_all(*op));
        auto c = std::make_shared<Cache>();
        c->op = op;
        c->eigen = eig;
        g->op_cache = c;
        cached = c;
    }
    return HeatPropagator{g, cached->op, cached->eigen};
}

RadialField HeatPropagator::apply(const RadialField& f, double t) const {
    const int n = eigen->n;
    std::vector<double> g(n), coef(n, 0.0);
    for (int j = 0; j < n; ++j) g[j] = op->sqrt_w[j] * f.values[j];
    const double* Q = eigen->Q.data();
    for (int k = 0; k < n; ++k) {
        const double* col = Q + static_cast<std::size_t>(k) * n;
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += col[j] * g[j];
        coef[k] = s * std::exp(t * eigen->lambda[k]);
    }
    RadialField out(f.grid);
    std::vector<double> acc(n, 0.0);
    for (int k = 0; k < n; ++k) {
        const double* col = Q + static_cast<std::size_t>(k) * n;
        const double ck = coef[k];
        if (ck == 0.0) continue;
        for (int j = 0; j < n; ++j) acc[j] += col[j] * ck;
    }
    for (int j = 0; j < n; ++j) out.values[j] = acc[j] / op->sqrt_w[j];
    return out;
}

RadialField heat_step(const RadialField& f, double t) {
    if (!(t > 0.0)) throw ConfigError("heat_step: t > 0 required");
    return heat_propagator(f.grid).apply(f, t);
}

} // namespace nlheat
