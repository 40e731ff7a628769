#include "nlheat/trajectory.hpp"

#include "nlheat/util.hpp"

#include <algorithm>

namespace nlheat {

RadialField Trajectory::field_at(double t) const {
    if (fields.empty()) throw NumericalError("Trajectory::field_at: empty trajectory");
    if (t <= times.front()) return fields.front();
    if (t >= times.back()) return fields.back();
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t j = static_cast<std::size_t>(it - times.begin()) - 1;
    const double w = (t - times[j]) / (times[j + 1] - times[j]);
    RadialField out(fields[j].grid);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.values[i] = (1.0 - w) * fields[j].values[i] + w * fields[j + 1].values[i];
    return out;
}

} // namespace nlheat
