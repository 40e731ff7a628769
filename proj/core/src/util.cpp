#include "nlheat/util.hpp"

#include <algorithm>
#include <cmath>

namespace nlheat {

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ConfigError("fit_line: need >= 2 points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        syy += y[i] * y[i];
    }
    const double vxx = sxx - sx * sx / n;
    const double vxy = sxy - sx * sy / n;
    const double vyy = syy - sy * sy / n;
    if (!(vxx > 0.0)) throw ConfigError("fit_line: degenerate abscissae");
    LineFit f;
    f.slope = vxy / vxx;
    f.intercept = (sy - f.slope * sx) / n;
    f.r2 = vyy > 1e-300 ? (vxy * vxy) / (vxx * vyy) : 1.0;
    return f;
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / v.size();
}

double variance(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / (v.size() - 1);
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw ConfigError("quantile: empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q * (v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double w = pos - lo;
    return (1.0 - w) * v[lo] + w * v[hi];
}

} // namespace nlheat
