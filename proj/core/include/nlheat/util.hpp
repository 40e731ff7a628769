#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlheat {

// Gate violations (bad parameters, ranges named by the model) vs numerical
// failures (non-convergence, blow-up where not expected). The CLI maps these
// to exit codes 2 and 3.
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

double mean(const std::vector<double>& v);
double variance(const std::vector<double>& v);
// linear-interpolated quantile, q in [0,1]
double quantile(std::vector<double> v, double q);

// area of the unit sphere S^{d-1}
inline double unit_sphere_area(int d) {
    return 2.0 * std::pow(M_PI, 0.5 * d) / std::tgamma(0.5 * d);
}

inline double sgn_pow(double x, double p) {
    // |x|^{p-1} x
    return x == 0.0 ? 0.0 : std::copysign(std::pow(std::fabs(x), p), x);
}

// x^e with repeated multiplication when e is a small integer; norm loops over
// lattice fields spend their time here
inline double pow_fast(double x, double e) {
    const int n = static_cast<int>(e);
    if (e != n || n < 1 || n > 64) return std::pow(x, e);
    double acc = 1.0, base = x;
    int k = n;
    while (k > 0) {
        if (k & 1) acc *= base;
        base *= base;
        k >>= 1;
    }
    return acc;
}

} // namespace nlheat
