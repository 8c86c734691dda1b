#pragma once

#include "mimo/config.hpp"
#include "mimo/propagation.hpp"

#include <doctest.h>

namespace mimo::testing {

// Default geometry with fewer antennas, for fast Monte-Carlo tests.
inline NetworkConfig small_config(int antennas = 8)
{
    NetworkConfig cfg = default_network_config();
    cfg.antennas = antennas;
    return cfg;
}

// Two BSs, six users; small enough for per-realization loops.
inline NetworkConfig tiny_config(int antennas = 4)
{
    NetworkConfig cfg = default_network_config();
    cfg.num_bs = 2;
    cfg.users = 6;
    cfg.antennas = antennas;
    cfg.tau_p = 3;
    cfg.bs_positions = {{250.0, 500.0}, {750.0, 500.0}};
    cfg.capacities = {4, 4};
    return cfg;
}

inline double relative_frobenius(const CMatrix& a, const CMatrix& b) { return (a - b).norm() / b.norm(); }

}  // namespace mimo::testing
