#pragma once

#include "mimo/config.hpp"
#include "mimo/linalg.hpp"
#include "mimo/rng.hpp"

#include <memory>
#include <span>
#include <vector>

namespace mimo {

// Distances below this are clamped before evaluating the pathloss.
inline constexpr double kMinDistanceM = 10.0;

// Average channel gain (linear) at the given BS-UE distance:
// -148.1 - 37.6 log10(d_km) dB.
double pathloss_gain(double distance_m);

// Gaussian local-scattering correlation of a half-wavelength-style ULA:
// [R]_{s,t} = beta exp(j 2pi D (s-t) sin(phi)) exp(-(asd 2pi D (s-t) cos(phi))^2 / 2).
CMatrix local_scattering_correlation(int antennas, double azimuth_rad, double asd_rad,
                                     double spacing, double beta);

// Hermitian square root with negative eigenvalues clamped to zero.
CMatrix hermitian_sqrt(const CMatrix& r);

// Covariance factor F (N x rank) with F F^H = R, from a diagonally pivoted
// Cholesky that stops once the largest remaining pivot falls below
// 1e-13 max_i R_ii. Sampling h = F g with g ~ CN(0, I_rank) has covariance R.
struct CovarianceFactor {
    CMatrix factor;
    // Largest |entry| of the Schur complement left when the factorization
    // stopped; of the order of rounding for a PSD input.
    double residual = 0.0;
    // Most negative pivot encountered (0 if none).
    double min_pivot = 0.0;

    int rank() const { return static_cast<int>(factor.cols()); }
    void apply(const CVector& g, Eigen::Ref<CVector> out) const { out.noalias() = factor * g.head(factor.cols()); }
};

CovarianceFactor factor_covariance(const CMatrix& r);

// One realization of user positions together with the large-scale statistics
// they induce. `factors` caches a square-root factor of every R for sampling.
struct Scenario {
    std::vector<Point> ue_positions;
    UserBsGrid<double> gains;
    UserBsGrid<CMatrix> correlations;
    UserBsGrid<CovarianceFactor> factors;

    int users() const { return gains.users(); }
    int num_bs() const { return gains.num_bs(); }
    int antennas() const;
};

// Assembles a scenario from explicit statistics (checks the Hermitian, trace
// and PSD invariants, then factors every correlation matrix).
Scenario make_scenario(std::vector<Point> ue_positions, UserBsGrid<double> gains,
                       UserBsGrid<CMatrix> correlations);

Scenario build_scenario(const NetworkConfig& cfg, std::span<const Point> ue_positions);

std::vector<Point> draw_positions(const NetworkConfig& cfg, Rng& rng);

// h(k, m) for every user and BS in one coherence block. Stored per BS as an
// N x K matrix whose column k is the channel of user k.
struct ChannelRealization {
    std::vector<CMatrix> per_bs;

    auto h(int k, int m) const { return per_bs[static_cast<std::size_t>(m)].col(k); }
};

ChannelRealization sample_channels(const Scenario& scn, Rng& rng);

struct PilotPlan {
    std::vector<int> pilot_index;  // per user, in [0, tau_p)
    CMatrix pilots;                // tau_p x tau_p, column t is pilot t (orthonormal)

    int tau_p() const { return static_cast<int>(pilots.cols()); }
};

// pilot_index(k) = k mod tau_p, scaled DFT sequences.
PilotPlan make_pilot_plan(const NetworkConfig& cfg);

// Received pilot signal per BS (N x tau_p). The stored signal is normalized by
// sqrt(tau_p) relative to the raw samples: Y = sqrt(p) sum_k h_k phi_k^T + N
// with N ~ CN(0, sigma^2 / tau_p) per entry and unit-norm pilots. Despreading
// with phi^* / sqrt(p) then leaves noise of covariance sigma^2 / (tau_p p) I.
struct PilotObservation {
    std::vector<CMatrix> y;
};

PilotObservation received_pilots(const ChannelRealization& ch, const PilotPlan& plan,
                                 const NetworkConfig& cfg, Rng& rng);

// Y_m phi_t^* / sqrt(p): the effective observation of pilot t at BS m.
CVector despread(const PilotObservation& obs, const PilotPlan& plan, int pilot, int bs,
                 double tx_power_w);

// Second-order statistics of the MMSE estimator; they depend on the scenario
// and pilot plan only, so they are shared by every coherence block.
struct EstimationStatistics {
    UserBsGrid<CMatrix> q;         // (pilot, BS): sum_{k' on pilot} R + sigma^2/(tau_p p) I
    UserBsGrid<CMatrix> filter;    // (user, BS): R Q^{-1}
    UserBsGrid<CMatrix> phi;       // (user, BS): R Q^{-1} R
    UserBsGrid<CMatrix> error_cov; // (user, BS): R - Phi
    std::vector<CMatrix> z;        // per BS: sum_k C(k, m) + sigma^2/p I
};

std::shared_ptr<const EstimationStatistics> estimation_statistics(const Scenario& scn,
                                                                  const PilotPlan& plan,
                                                                  const NetworkConfig& cfg);

struct ChannelEstimates {
    std::vector<CMatrix> per_bs;  // N x K per BS, column k = estimate of h(k, m)
    std::shared_ptr<const EstimationStatistics> stats;

    auto h_hat(int k, int m) const { return per_bs[static_cast<std::size_t>(m)].col(k); }
    const CMatrix& q(int pilot, int m) const { return stats->q(pilot, m); }
    const CMatrix& phi(int k, int m) const { return stats->phi(k, m); }
    const CMatrix& error_cov(int k, int m) const { return stats->error_cov(k, m); }
};

ChannelEstimates mmse_estimate(const PilotObservation& obs,
                               std::shared_ptr<const EstimationStatistics> stats,
                               const PilotPlan& plan, const NetworkConfig& cfg);

ChannelEstimates mmse_estimate(const PilotObservation& obs, const Scenario& scn,
                               const PilotPlan& plan, const NetworkConfig& cfg);

}  // namespace mimo
