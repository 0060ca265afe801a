#pragma once

#include <cstddef>

#include "wptsched/params.hpp"

namespace testing_support {

// Valid parameters with the given dimensions and unit gains.
inline wpt::NetworkParams small_params(std::size_t n, int k, int q, int m = 5) {
    wpt::NetworkParams p = wpt::paper_defaults(n, 1.0);
    p.battery_levels = k;
    p.battery_capacity = k * p.battery_quantum;
    p.queue_cap = q;
    p.max_modulation = m;
    return p;
}

}  // namespace testing_support
