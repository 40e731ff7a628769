#pragma once

#include "nlheat/radial.hpp"

#include <map>
#include <string>
#include <vector>

namespace nlheat {

// Time series of norms, usually recorded more densely than fields.
struct NormSeries {
    std::vector<double> times;
    std::map<std::string, std::vector<double>> values;

    void append(double t) { times.push_back(t); }
    std::vector<double>& series(const std::string& key) { return values[key]; }
};

struct Trajectory {
    std::vector<double> times;       // times of stored fields, strictly increasing
    std::vector<RadialField> fields; // matching `times`
    NormSeries norm_table;
    bool truncated = false;
    std::string flag; // e.g. "blow-up", "eps-exceeded"

    void append(double t, RadialField f) {
        times.push_back(t);
        fields.push_back(std::move(f));
    }
    // linear interpolation in time between stored fields; clamps at the ends
    RadialField field_at(double t) const;
};

} // namespace nlheat
