#include "nlheat/simvar.hpp"

#include "nlheat/radial_operator.hpp"
#include "nlheat/util.hpp"

#include <cmath>

namespace nlheat {

RadialField to_similarity(const RadialField& f, double t, double p) {
    if (!(t > 0.0)) throw ConfigError("to_similarity: t > 0 required");
    const double amp = std::pow(t, 1.0 / (p - 1.0));
    const double root = std::sqrt(t);
    RadialField out(f.grid);
    for (int j = 0; j < f.grid->n(); ++j)
        out.values[j] = amp * sample(f, f.grid->nodes[j] * root);
    return out;
}

RadialField from_similarity(const RadialField& v, double t, double p) {
    if (!(t > 0.0)) throw ConfigError("from_similarity: t > 0 required");
    const double amp = std::pow(t, -1.0 / (p - 1.0));
    const double root = std::sqrt(t);
    RadialField out(v.grid);
    for (int j = 0; j < v.grid->n(); ++j)
        out.values[j] = amp * sample(v, v.grid->nodes[j] / root);
    return out;
}

namespace {

struct SimvarFlow {
    RadialOperator lin;            // L_alpha, symmetric coordinates
    std::vector<double> u_profile; // U_alpha at nodes
    double p;

    RadialField nonlinearity(const RadialField& w) const {
        RadialField out(w.grid);
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double u = u_profile[j];
            const double ww = w.values[j];
            out.values[j] = sgn_pow(u + ww, p) - sgn_pow(u, p) -
                            p * std::pow(std::fabs(u), p - 1.0) * ww;
        }
        return out;
    }
};

SimvarFlow make_flow(const ProfileSolution& ps, GridPtr grid) {
    SimvarFlow flow;
    flow.p = ps.p;
    flow.lin = similarity_generator(grid, ps.p);
    flow.u_profile.resize(grid->n());
    std::vector<double> pot(grid->n());
    for (int j = 0; j < grid->n(); ++j) {
        flow.u_profile[j] = ps.evaluate_U(grid->nodes[j]);
        pot[j] = ps.p * std::pow(std::fabs(flow.u_profile[j]), ps.p - 1.0);
    }
    flow.lin.add_potential(pot);
    return flow;
}

void record_norms(Trajectory& tr, double t, const RadialField& w,
                  const std::vector<std::pair<std::string, double>>& keys) {
    tr.norm_table.append(t);
    for (const auto& [name, expo] : keys) tr.norm_table.series(name).push_back(lp_norm(w, expo));
}

} // namespace

Trajectory evolve_perturbation(const RadialField& w0, const ProfileSolution& ps, double tau0,
                               double tau1, double dt, const EvolveOptions& opt) {
    if (!(tau1 > tau0)) throw ConfigError("evolve_perturbation: tau1 > tau0 required");
    if (!(dt > 0.0)) throw ConfigError("evolve_perturbation: dt > 0 required");

    GridPtr grid = opt.grid ? opt.grid : w0.grid;
    RadialField w(grid);
    if (grid == w0.grid)
        w = w0;
    else
        for (int j = 0; j < grid->n(); ++j) w.values[j] = sample(w0, grid->nodes[j]);

    auto keys = opt.norms;
    if (keys.empty()) keys = {{"L2", 2.0}};

    SimvarFlow flow = make_flow(ps, grid);

    Trajectory tr;
    tr.append(tau0, w);
    record_norms(tr, tau0, w, keys);

    const long nsteps = std::lround(std::ceil((tau1 - tau0) / dt));
    RadialField n_prev(grid);
    bool have_prev = false;
    double tau = tau0;
    for (long k = 0; k < nsteps; ++k) {
        const double h = std::min(dt, tau1 - tau);
        RadialField n_cur = opt.linearized ? RadialField(grid) : flow.nonlinearity(w);
        // CN on L_alpha, AB2 on the nonlinearity (Euler for the first step)
        RadialField rhs = flow.lin.apply(w);
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double nl =
                have_prev ? 1.5 * n_cur.values[j] - 0.5 * n_prev.values[j] : n_cur.values[j];
            rhs.values[j] = w.values[j] + 0.5 * h * rhs.values[j] + h * nl;
        }
        w = flow.lin.solve_shifted(rhs, 0.5 * h);
        n_prev = std::move(n_cur);
        have_prev = true;
        tau += h;

        if (!(w.max_abs() < opt.blowup_guard) || !w.all_finite()) {
            tr.truncated = true;
            tr.flag = "blow-up";
            break;
        }
        if ((k + 1) % opt.norm_stride == 0 || k + 1 == nsteps) record_norms(tr, tau, w, keys);
        if ((k + 1) % opt.field_stride == 0 || k + 1 == nsteps) tr.append(tau, w);
    }
    return tr;
}

Trajectory approximate_ancient_solution(const ProfileSolution& ps, const RadialField& Ulin,
                                        double lambda, double eps, double tau_start,
                                        double tau_end, const AncientOptions& opt) {
    if (!(lambda > 0.0)) throw ConfigError("approximate_ancient_solution: lambda > 0 required");
    if (!(eps > 0.0)) throw ConfigError("approximate_ancient_solution: eps > 0 required");
    if (!(tau_end > tau_start))
        throw ConfigError("approximate_ancient_solution: tau_start < tau_end required");

    const double norm0 = intersection_norm(Ulin, opt.eta, opt.gamma);
    const double delta = 0.5 * eps / (std::exp(lambda * (tau_end - tau_start)) * norm0);

    RadialField w0(Ulin.grid);
    for (std::size_t j = 0; j < w0.size(); ++j) w0.values[j] = delta * Ulin.values[j];

    EvolveOptions eopt = opt.evolve;
    if (eopt.norms.empty())
        eopt.norms = {{"L_eta", opt.eta}, {"L_gamma", opt.gamma}, {"L_gamma_over_p", opt.gamma / ps.p}};

    Trajectory tr = evolve_perturbation(w0, ps, tau_start, tau_end, opt.dt, eopt);

    // truncate at the first violation of the intersection-norm bound
    const auto& t = tr.norm_table.times;
    const auto& le = tr.norm_table.values.at("L_eta");
    const auto& lg = tr.norm_table.values.at("L_gamma");
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double inorm = le[i] + (opt.gamma > opt.eta ? lg[i] : 0.0);
        if (inorm >= eps) {
            tr.truncated = true;
            tr.flag = "eps-exceeded";
            const double t_cut = t[i];
            while (!tr.times.empty() && tr.times.back() > t_cut) {
                tr.times.pop_back();
                tr.fields.pop_back();
            }
            tr.norm_table.times.resize(i + 1);
            for (auto& [k, v] : tr.norm_table.values) v.resize(i + 1);
            break;
        }
    }
    return tr;
}

GrowthFit growth_rate(const Trajectory& tr, const std::string& norm_key) {
    const auto it = tr.norm_table.values.find(norm_key);
    if (it == tr.norm_table.values.end())
        throw ConfigError("growth_rate: unknown norm key " + norm_key);
    const auto& t = tr.norm_table.times;
    const auto& v = it->second;
    if (t.size() < 10) throw ConfigError("growth_rate: need at least 10 samples");

    const std::size_t lo = t.size() / 2;
    std::vector<double> x, y;
    for (std::size_t i = lo; i < t.size(); ++i) {
        if (!(v[i] > 0.0)) throw ConfigError("growth_rate: norms must be positive");
        x.push_back(t[i]);
        y.push_back(std::log(v[i]));
    }
    const LineFit f = fit_line(x, y);
    GrowthFit g;
    g.rate = f.slope;
    g.r2 = f.r2;
    g.flagged = f.r2 < 0.99;
    return g;
}

} // namespace nlheat
