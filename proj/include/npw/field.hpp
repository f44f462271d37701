#pragma once

#include "npw/core.hpp"

#include <functional>
#include <string>

namespace npw {

/// Smooth scalar function on a coordinate chart with hand-written derivatives.
struct ScalarField {
    std::string name;
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> partials;
    std::function<Mat(const Vec&)> second_partials;
    bool smooth_on_chart = true;
    int dim = 0;  ///< 0 when the field is defined for any chart dimension

    double operator()(const Vec& x) const { return value(x); }
};

}  // namespace npw
