#pragma once

#include "mimo/config.hpp"
#include "mimo/propagation.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace mimo {

// Receive combiners of one BS for every user in the area; column k of `v`
// is the combining vector BS `bs` would use to decode user k.
struct CombinerBank {
    int bs = 0;
    CombinerKind kind = CombinerKind::mr;
    CMatrix v;
};

CombinerBank mr_combiner(const ChannelEstimates& est, int bs);

// (sum_k h_hat h_hat^H + Z_m)^{-1} H_hat_m, Z_m = sum_k C(k, m) + sigma^2/p I.
CombinerBank mmse_combiner(const ChannelEstimates& est, int bs, const NetworkConfig& cfg);

CombinerBank make_combiner(CombinerKind kind, const ChannelEstimates& est, int bs, const NetworkConfig& cfg);

// Per-user SINR at BS `bs` given the combiners. The interference term runs
// over every other user in the area. A zero combining vector yields 0.
std::vector<double> instantaneous_sinr(const CombinerBank& bank, const ChannelEstimates& est, int bs,
                                       const NetworkConfig& cfg);

// SINR of every user under M-MMSE combining at BS `bs`, via the closed form
// g / (1 - g) with g = h_hat_k^H (sum_j h_hat_j h_hat_j^H + Z)^{-1} h_hat_k.
// Agrees with instantaneous_sinr(mmse_combiner(...)) up to rounding.
std::vector<double> mmse_sinr(const ChannelEstimates& est, int bs, const NetworkConfig& cfg);

// SINR of user k at BS `bs` for an arbitrary combining vector v.
double combiner_sinr(const CVector& v, const ChannelEstimates& est, int k, int bs);

// Ergodic per-(user, BS) rates E{log2(1 + SINR)} in bit/symbol, before the
// tau_u / tau_c prelog.
struct RateMatrix {
    Eigen::MatrixXd r;          // K x M
    Eigen::MatrixXd std_error;  // Monte-Carlo standard error of each entry
    int n_fading = 0;

    int users() const { return static_cast<int>(r.rows()); }
    int num_bs() const { return static_cast<int>(r.cols()); }
};

struct RatePair {
    RateMatrix mr;
    RateMatrix mmse;

    const RateMatrix& operator[](CombinerKind kind) const { return kind == CombinerKind::mr ? mr : mmse; }
};

// log2(1 + SINR) for every (user, BS) in one coherence block. Block `b`
// draws from make_stream(seed, b).
struct BlockRates {
    Eigen::MatrixXd mr;
    Eigen::MatrixXd mmse;
};

BlockRates block_rates(const Scenario& scn, const std::shared_ptr<const EstimationStatistics>& stats,
                       const PilotPlan& plan, const NetworkConfig& cfg, std::uint64_t seed, int block,
                       bool want_mr, bool want_mmse);

// Monte-Carlo ergodic rates. Blocks are distributed over OpenMP threads and
// reduced in block order, so the result is bit-identical to the serial path.
RateMatrix rate_matrix(const Scenario& scn, const PilotPlan& plan, const NetworkConfig& cfg, CombinerKind kind,
                       int n_fading, std::uint64_t seed);

// Single-threaded reference for rate_matrix.
RateMatrix rate_matrix_serial(const Scenario& scn, const PilotPlan& plan, const NetworkConfig& cfg,
                              CombinerKind kind, int n_fading, std::uint64_t seed);

// Both combiners evaluated on the same fading blocks (single-threaded). The
// entry for each kind equals what rate_matrix_serial returns for it.
RatePair rate_matrices(const Scenario& scn, const PilotPlan& plan, const NetworkConfig& cfg, int n_fading,
                       std::uint64_t seed);

}  // namespace mimo
