#pragma once

#include "mimo/config.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace mimo {

struct SuiteResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Exact solver vs exhaustive search on random instances with K <= 8, M <= 3.
SuiteResult check_solver_against_brute_force(int instances, std::uint64_t seed, bool inject_solver_fault = false);

// LP relaxation vertices on random instances of the given size: fractionality
// <= 1e-6 and objective equal to the flow solver's.
SuiteResult check_lp_integrality(int instances, int users, int num_bs, int capacity, std::uint64_t seed);

// Backprop vs central finite differences (step 1e-6) on random small nets.
SuiteResult check_gradients(int networks, std::uint64_t seed);

// M-MMSE SINR >= MR SINR and >= SINR of `random_combiners` random unit
// vectors, for every user/BS over `realizations` fading blocks.
SuiteResult check_sinr_dominance(const NetworkConfig& cfg, int realizations, int random_combiners, std::uint64_t seed);

// Sample E{h_hat (h - h_hat)^H} within 5 standard errors of zero and sample
// covariance of h_hat within 5% (Frobenius) of Phi, for every (user, BS).
SuiteResult check_estimator_statistics(const NetworkConfig& cfg, int blocks, std::uint64_t seed);

struct SelftestOptions {
    bool inject_solver_fault = false;
};

// Runs the reduced-scale oracle suites, printing one line per suite.
bool run_selftest(std::ostream& out, const SelftestOptions& options = {});

}  // namespace mimo
