#include "nlheat/noise.hpp"

#include "nlheat/util.hpp"

#include <algorithm>
#include <cmath>

namespace nlheat {

double default_noise_smoothness(int d, double p, double q, bool* max_binds_at_zero) {
    const double raw = (d / q) * (1.0 - 2.0 * q / (p * (p - 1.0) * (d + 2.0 * q))) - 1.0;
    if (max_binds_at_zero) *max_binds_at_zero = raw <= 0.0;
    return std::max(0.0, raw);
}

NoiseColoring build_noise_coloring(GridPtr grid, double s, double q, double decay_exponent,
                                   int cutoff) {
    if (cutoff < 1 || cutoff > grid->n())
        throw ConfigError("build_noise_coloring: cutoff must be in [1, n]");
    if (!(s >= 0.0)) throw ConfigError("build_noise_coloring: s >= 0 required");

    const HeatPropagator prop = heat_propagator(grid);
    const int n = grid->n();
    const double omega = unit_sphere_area(grid->d);

    NoiseColoring nc;
    nc.grid = grid;
    nc.s_target = s;
    nc.q_target = q;
    nc.beta = decay_exponent;
    nc.mu.resize(cutoff);
    nc.sigma.resize(cutoff);
    nc.modes.reserve(cutoff);
    // Laplacian eigenvalues ascend from the most negative; modes ordered by mu ascending
    for (int j = 0; j < cutoff; ++j) {
        const int src = n - 1 - j;
        nc.mu[j] = -prop.eigen->lambda[src];
        nc.sigma[j] = std::pow(1.0 + nc.mu[j], -0.5 * decay_exponent);
        RadialField e = eigen_field(*prop.op, *prop.eigen, src);
        const double scale = 1.0 / std::sqrt(omega);
        for (auto& v : e.values) v *= scale;
        nc.modes.push_back(std::move(e));
    }

    // convergence surrogate for sum_j sigma_j^2 (1+mu_j)^s: the top half of the
    // retained modes must contribute a vanishing fraction
    double total = 0.0, head = 0.0;
    for (int j = 0; j < cutoff; ++j) {
        const double term = nc.sigma[j] * nc.sigma[j] * std::pow(1.0 + nc.mu[j], s);
        total += term;
        if (j < cutoff / 2) head += term;
    }
    nc.tail_ratio = (total - head) / total;
    if (!(nc.tail_ratio < 1e-3))
        throw ConfigError("build_noise_coloring: s-weighted mode sum not converged, tail ratio " +
                          std::to_string(nc.tail_ratio) +
                          " (increase decay_exponent or cutoff)");
    return nc;
}

RadialField sample_wiener_increment(const NoiseColoring& nc, double dt, CounterRng& rng) {
    if (dt < 0.0) throw ConfigError("sample_wiener_increment: dt >= 0 required");
    RadialField out(nc.grid);
    if (dt == 0.0) return out;
    const double root = std::sqrt(dt);
    for (std::size_t j = 0; j < nc.mu.size(); ++j) {
        const double amp = nc.sigma[j] * root * rng.next_gaussian();
        if (amp == 0.0) continue;
        const auto& e = nc.modes[j].values;
        for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += amp * e[i];
    }
    return out;
}

double ou_variance(double sigma, double mu, double t) {
    if (mu <= 0.0) return sigma * sigma * t;
    return sigma * sigma * (-std::expm1(-2.0 * mu * t)) / (2.0 * mu);
}

void PathMonitor::append(double t, const std::map<std::string, double>& row) {
    times.push_back(t);
    for (const auto& [k, v] : row) {
        norms[k].push_back(v);
        auto& rm = running_max[k];
        rm.push_back(rm.empty() ? v : std::max(rm.back(), v));
    }
}

std::pair<Trajectory, PathMonitor> stochastic_convolution_on(const NoiseColoring& nc,
                                                             const std::vector<double>& times,
                                                             CounterRng& rng,
                                                             const ConvolutionOptions& opt) {
    if (times.empty() || times[0] != 0.0)
        throw ConfigError("stochastic_convolution_on: time mesh must start at 0");
    const std::size_t nmodes = nc.mu.size();
    std::vector<double> zmode(nmodes, 0.0);

    Trajectory tr;
    PathMonitor mon;

    auto reconstruct = [&]() {
        RadialField z(nc.grid);
        for (std::size_t j = 0; j < nmodes; ++j) {
            const double c = zmode[j];
            if (c == 0.0) continue;
            const auto& e = nc.modes[j].values;
            for (std::size_t i = 0; i < z.size(); ++i) z.values[i] += c * e[i];
        }
        return z;
    };
    auto record = [&](double t, const RadialField& z) {
        std::map<std::string, double> row;
        for (const auto& [key, expo] : opt.monitor_norms) row[key] = lp_norm(z, expo);
        mon.append(t, row);
    };

    RadialField z0(nc.grid);
    tr.append(0.0, z0);
    record(0.0, z0);

    for (std::size_t k = 1; k < times.size(); ++k) {
        const double dt = times[k] - times[k - 1];
        if (!(dt > 0.0)) throw ConfigError("stochastic_convolution_on: times must increase");
        for (std::size_t j = 0; j < nmodes; ++j) {
            const double xi = rng.next_gaussian();
            zmode[j] = std::exp(-nc.mu[j] * dt) * zmode[j] +
                       std::sqrt(ou_variance(nc.sigma[j], nc.mu[j], dt)) * xi;
        }
        const RadialField z = reconstruct();
        record(times[k], z);
        if (k % opt.field_stride == 0 || k + 1 == times.size()) tr.append(times[k], z);
    }
    return {std::move(tr), std::move(mon)};
}

std::pair<Trajectory, PathMonitor> stochastic_convolution(const NoiseColoring& nc, double horizon,
                                                          double dt, CounterRng& rng,
                                                          const ConvolutionOptions& opt) {
    if (!(horizon > 0.0) || !(dt > 0.0))
        throw ConfigError("stochastic_convolution: horizon, dt > 0 required");
    std::vector<double> times{0.0};
    for (double t = dt; t < horizon + 0.5 * dt; t += dt) times.push_back(std::min(t, horizon));
    return stochastic_convolution_on(nc, times, rng, opt);
}

StoppingTimeRecord stopping_time(const PathMonitor& monitor,
                                 const std::vector<StoppingClause>& clauses, double horizon) {
    if (clauses.empty()) throw ConfigError("stopping_time: empty clause list");
    StoppingTimeRecord rec;
    rec.value = horizon;
    rec.trigger = "horizon-cap";
    for (const auto& c : clauses) rec.thresholds[c.name] = c.threshold;
    for (std::size_t i = 0; i < monitor.times.size(); ++i) {
        const double t = monitor.times[i];
        if (t > rec.value) break;
        if (t <= 0.0) continue;
        for (const auto& c : clauses) {
            if (c.value(i, t, monitor) >= c.threshold) {
                if (t < rec.value) {
                    rec.value = t;
                    rec.trigger = c.name;
                }
                break;
            }
        }
        if (rec.trigger != "horizon-cap") break;
    }
    return rec;
}

} // namespace nlheat
