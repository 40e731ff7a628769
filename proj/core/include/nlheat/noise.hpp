#pragma once

#include "nlheat/radial_operator.hpp"
#include "nlheat/rng.hpp"
#include "nlheat/trajectory.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace nlheat {

// W = J B with J diagonal in the eigenbasis of the discrete radial Laplacian:
// sigma_j = (1 + mu_j)^{-beta/2}. Modes are orthonormal in the L^2(R^d)
// radial inner product (sphere area included).
struct NoiseColoring {
    GridPtr grid;
    std::vector<double> mu;          // -Laplacian eigenvalues, ascending, > 0
    std::vector<RadialField> modes;  // e_j, orthonormal
    std::vector<double> sigma;
    double s_target = 0.0;
    double q_target = 2.0;
    double beta = 0.0;
    double tail_ratio = 0.0; // convergence surrogate of sum sigma_j^2 (1+mu_j)^s
};

// s = max(0, (d/q)(1 - 2q/(p(p-1)(d+2q))) - 1); reports which branch binds
double default_noise_smoothness(int d, double p, double q, bool* max_binds_at_zero = nullptr);

NoiseColoring build_noise_coloring(GridPtr grid, double s, double q, double decay_exponent,
                                   int cutoff);

RadialField sample_wiener_increment(const NoiseColoring& nc, double dt, CounterRng& rng);

// stationary Ornstein-Uhlenbeck variance sigma^2 (1 - e^{-2 mu t}) / (2 mu)
double ou_variance(double sigma, double mu, double t);

struct PathMonitor {
    std::vector<double> times;
    std::map<std::string, std::vector<double>> norms;
    std::map<std::string, std::vector<double>> running_max;

    void append(double t, const std::map<std::string, double>& row);
};

struct StoppingClause {
    std::string name;
    double threshold = 0.0;
    // clause value at monitor row i; crossing means value >= threshold
    std::function<double(std::size_t i, double t, const PathMonitor&)> value;
};

struct StoppingTimeRecord {
    double value = 0.0;
    std::string trigger; // clause name or "horizon-cap"
    std::map<std::string, double> thresholds;
};

struct ConvolutionOptions {
    std::vector<std::pair<std::string, double>> monitor_norms; // (key, exponent)
    int field_stride = 50;
};

// z(t) = int_0^t e^{(t-s) Laplacian} dW_s by per-mode exact exponential-Euler
// updates on the given time mesh (times[0] must be 0).
std::pair<Trajectory, PathMonitor> stochastic_convolution_on(const NoiseColoring& nc,
                                                             const std::vector<double>& times,
                                                             CounterRng& rng,
                                                             const ConvolutionOptions& opt);

std::pair<Trajectory, PathMonitor> stochastic_convolution(const NoiseColoring& nc, double horizon,
                                                          double dt, CounterRng& rng,
                                                          const ConvolutionOptions& opt);

StoppingTimeRecord stopping_time(const PathMonitor& monitor,
                                 const std::vector<StoppingClause>& clauses, double horizon);

} // namespace nlheat
