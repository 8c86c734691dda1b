#include "mimo/propagation.hpp"

#include "mimo/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <string>

namespace mimo {

double pathloss_gain(double distance_m)
{
    const double d_km = std::max(distance_m, kMinDistanceM) / 1000.0;
    const double gain_db = -148.1 - 37.6 * std::log10(d_km);
    return std::pow(10.0, gain_db / 10.0);
}

CMatrix local_scattering_correlation(int antennas, double azimuth_rad, double asd_rad,
                                     double spacing, double beta)
{
    // Toeplitz: only the first column needs evaluating.
    CVector first(antennas);
    const double two_pi_d = 2.0 * std::numbers::pi * spacing;
    for (int lag = 0; lag < antennas; ++lag) {
        const double phase = two_pi_d * lag * std::sin(azimuth_rad);
        const double spread = asd_rad * two_pi_d * lag * std::cos(azimuth_rad);
        first(lag) = beta * std::polar(std::exp(-0.5 * spread * spread), phase);
    }
    CMatrix r(antennas, antennas);
    for (int s = 0; s < antennas; ++s) {
        for (int t = 0; t < antennas; ++t) {
            r(s, t) = s >= t ? first(s - t) : std::conj(first(t - s));
        }
    }
    return r;
}

CMatrix hermitian_sqrt(const CMatrix& r)
{
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(r);
    if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
    const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().adjoint();
}

CovarianceFactor factor_covariance(const CMatrix& r)
{
    const Eigen::Index n = r.rows();
    CMatrix work = r;
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) perm[i] = i;
    CMatrix lower = CMatrix::Zero(n, n);
    const double scale = n > 0 ? r.diagonal().real().cwiseAbs().maxCoeff() : 0.0;
    const double cutoff = 1e-13 * scale;

    CovarianceFactor f;
    Eigen::Index rank = 0;
    for (; rank < n; ++rank) {
        Eigen::Index pivot = rank;
        for (Eigen::Index i = rank + 1; i < n; ++i) {
            if (work(i, i).real() > work(pivot, pivot).real()) pivot = i;
        }
        const double d = work(pivot, pivot).real();
        if (!std::isfinite(d)) throw NumericalError("covariance factor: non-finite pivot");
        if (d <= cutoff) break;
        if (pivot != rank) {
            work.row(rank).swap(work.row(pivot));
            work.col(rank).swap(work.col(pivot));
            lower.row(rank).swap(lower.row(pivot));
            std::swap(perm[rank], perm[pivot]);
        }
        const double root = std::sqrt(d);
        lower(rank, rank) = root;
        const Eigen::Index rest = n - rank - 1;
        if (rest == 0) continue;
        lower.col(rank).tail(rest) = work.col(rank).tail(rest) / root;
        work.bottomRightCorner(rest, rest).noalias() -=
            lower.col(rank).tail(rest) * lower.col(rank).tail(rest).adjoint();
    }
    if (rank < n) {
        const auto tail = work.bottomRightCorner(n - rank, n - rank);
        f.residual = tail.cwiseAbs().maxCoeff();
        f.min_pivot = std::min(0.0, tail.diagonal().real().minCoeff());
    }
    f.factor = CMatrix::Zero(n, rank);
    for (Eigen::Index i = 0; i < n; ++i) f.factor.row(perm[i]) = lower.row(i).head(rank);
    return f;
}

int Scenario::antennas() const
{
    return users() > 0 && num_bs() > 0 ? static_cast<int>(correlations(0, 0).rows()) : 0;
}

Scenario make_scenario(std::vector<Point> ue_positions, UserBsGrid<double> gains,
                       UserBsGrid<CMatrix> correlations)
{
    const int users = gains.users();
    const int num_bs = gains.num_bs();
    if (correlations.users() != users || correlations.num_bs() != num_bs ||
        static_cast<int>(ue_positions.size()) != users)
        throw DomainError("scenario: inconsistent dimensions");

    Scenario scn{std::move(ue_positions), std::move(gains), std::move(correlations),
                 UserBsGrid<CovarianceFactor>(users, num_bs)};
    for (int k = 0; k < users; ++k) {
        for (int m = 0; m < num_bs; ++m) {
            const CMatrix& r = scn.correlations(k, m);
            const std::string where = " at (user " + std::to_string(k) + ", BS " + std::to_string(m) + ")";
            if (r.rows() != r.cols() || (k + m > 0 && r.rows() != scn.correlations(0, 0).rows()))
                throw DomainError("scenario: correlation matrix has wrong shape" + where);
            if (!r.allFinite()) throw NumericalError("scenario: non-finite correlation" + where);
            if (hermitian_defect(r) > 1e-12) throw DomainError("scenario: correlation not Hermitian" + where);
            const double trace = r.trace().real();
            const double beta = scn.gains(k, m);
            if (beta < 0.0 || std::abs(trace / r.rows() - beta) > 1e-9 * std::max(beta, 1e-300))
                throw DomainError("scenario: trace(R)/N does not match the gain" + where);

            try {
                scn.factors(k, m) = factor_covariance(r);
            } catch (const NumericalError& e) {
                throw NumericalError(std::string("scenario: ") + e.what() + where);
            }
            if (scn.factors(k, m).residual > 1e-9 * trace || scn.factors(k, m).min_pivot < -1e-9 * trace)
                throw DomainError("scenario: correlation not positive semidefinite" + where);
        }
    }
    return scn;
}

Scenario build_scenario(const NetworkConfig& cfg, std::span<const Point> ue_positions)
{
    cfg.validate();
    if (static_cast<int>(ue_positions.size()) != cfg.users)
        throw DomainError("build_scenario: expected " + std::to_string(cfg.users) + " positions");
    const double asd_rad = cfg.asd_deg * std::numbers::pi / 180.0;

    UserBsGrid<double> gains(cfg.users, cfg.num_bs);
    UserBsGrid<CMatrix> correlations(cfg.users, cfg.num_bs);
    for (int k = 0; k < cfg.users; ++k) {
        const Point ue = ue_positions[k];
        if (!(ue.x >= 0.0 && ue.y >= 0.0 && ue.x <= cfg.area_edge_m && ue.y <= cfg.area_edge_m))
            throw DomainError("build_scenario: user " + std::to_string(k) + " outside the service area");
        for (int m = 0; m < cfg.num_bs; ++m) {
            const Point bs = cfg.bs_positions[m];
            const double dx = ue.x - bs.x;
            const double dy = ue.y - bs.y;
            gains(k, m) = pathloss_gain(std::hypot(dx, dy));
            correlations(k, m) = local_scattering_correlation(cfg.antennas, std::atan2(dy, dx), asd_rad,
                                                              cfg.antenna_spacing, gains(k, m));
        }
    }
    return make_scenario({ue_positions.begin(), ue_positions.end()}, std::move(gains), std::move(correlations));
}

std::vector<Point> draw_positions(const NetworkConfig& cfg, Rng& rng)
{
    std::uniform_real_distribution<double> coord(0.0, cfg.area_edge_m);
    std::vector<Point> out(static_cast<std::size_t>(cfg.users));
    for (auto& p : out) {
        p.x = coord(rng);
        p.y = coord(rng);
    }
    return out;
}

ChannelRealization sample_channels(const Scenario& scn, Rng& rng)
{
    const int n = scn.antennas();
    ChannelRealization ch;
    ch.per_bs.assign(static_cast<std::size_t>(scn.num_bs()), CMatrix(n, scn.users()));
    ComplexNormal draw;
    CVector g(n);
    for (int k = 0; k < scn.users(); ++k) {
        for (int m = 0; m < scn.num_bs(); ++m) {
            for (int i = 0; i < n; ++i) g(i) = draw(rng);
            scn.factors(k, m).apply(g, ch.per_bs[m].col(k));
        }
    }
    return ch;
}

PilotPlan make_pilot_plan(const NetworkConfig& cfg)
{
    PilotPlan plan;
    plan.pilot_index.resize(static_cast<std::size_t>(cfg.users));
    for (int k = 0; k < cfg.users; ++k) plan.pilot_index[k] = k % cfg.tau_p;
    const int tp = cfg.tau_p;
    plan.pilots.resize(tp, tp);
    const double scale = 1.0 / std::sqrt(static_cast<double>(tp));
    for (int s = 0; s < tp; ++s) {
        for (int t = 0; t < tp; ++t) {
            const double angle = 2.0 * std::numbers::pi * static_cast<double>((s * t) % tp) / tp;
            plan.pilots(s, t) = std::polar(scale, -angle);
        }
    }
    return plan;
}

PilotObservation received_pilots(const ChannelRealization& ch, const PilotPlan& plan,
                                 const NetworkConfig& cfg, Rng& rng)
{
    const int num_bs = static_cast<int>(ch.per_bs.size());
    const int tp = plan.tau_p();
    if (num_bs == 0 || ch.per_bs[0].cols() != static_cast<Eigen::Index>(plan.pilot_index.size()))
        throw DomainError("received_pilots: pilot plan does not match the channel realization");
    const double amp = std::sqrt(cfg.tx_power_w);
    const double noise_std = std::sqrt(cfg.noise_power_w / tp);

    PilotObservation obs;
    obs.y.reserve(static_cast<std::size_t>(num_bs));
    ComplexNormal draw;
    for (int m = 0; m < num_bs; ++m) {
        const CMatrix& h = ch.per_bs[m];
        // Sum of users per pilot first, then one outer product per pilot.
        CMatrix per_pilot = CMatrix::Zero(h.rows(), tp);
        for (Eigen::Index k = 0; k < h.cols(); ++k) per_pilot.col(plan.pilot_index[k]) += h.col(k);
        CMatrix y = amp * per_pilot * plan.pilots.transpose();
        for (Eigen::Index j = 0; j < y.cols(); ++j)
            for (Eigen::Index i = 0; i < y.rows(); ++i) y(i, j) += noise_std * draw(rng);
        obs.y.push_back(std::move(y));
    }
    return obs;
}

CVector despread(const PilotObservation& obs, const PilotPlan& plan, int pilot, int bs, double tx_power_w)
{
    return obs.y[static_cast<std::size_t>(bs)] * plan.pilots.col(pilot).conjugate() / std::sqrt(tx_power_w);
}

std::shared_ptr<const EstimationStatistics> estimation_statistics(const Scenario& scn,
                                                                  const PilotPlan& plan,
                                                                  const NetworkConfig& cfg)
{
    const int users = scn.users();
    const int num_bs = scn.num_bs();
    const int n = scn.antennas();
    const int tp = plan.tau_p();
    const double pilot_noise = cfg.noise_power_w / (tp * cfg.tx_power_w);
    const double data_noise = cfg.noise_power_w / cfg.tx_power_w;

    auto stats = std::make_shared<EstimationStatistics>();
    stats->q = UserBsGrid<CMatrix>(tp, num_bs);
    stats->filter = UserBsGrid<CMatrix>(users, num_bs);
    stats->phi = UserBsGrid<CMatrix>(users, num_bs);
    stats->error_cov = UserBsGrid<CMatrix>(users, num_bs);
    stats->z.assign(static_cast<std::size_t>(num_bs), data_noise * CMatrix::Identity(n, n));

    for (int m = 0; m < num_bs; ++m) {
        for (int t = 0; t < tp; ++t) stats->q(t, m) = pilot_noise * CMatrix::Identity(n, n);
        for (int k = 0; k < users; ++k) stats->q(plan.pilot_index[k], m) += scn.correlations(k, m);

        for (int t = 0; t < tp; ++t) {
            Eigen::LLT<CMatrix> llt(stats->q(t, m));
            if (llt.info() != Eigen::Success)
                throw NumericalError("mmse estimate: Q not positive definite at (pilot " + std::to_string(t) +
                                     ", BS " + std::to_string(m) + ")");
            for (int k = 0; k < users; ++k) {
                if (plan.pilot_index[k] != t) continue;
                const CMatrix& r = scn.correlations(k, m);
                // With Q = L L^H and W = L^{-1} R: Phi = W^H W and
                // R Q^{-1} = (L^{-H} W)^H.
                const CMatrix w = llt.matrixL().solve(r);
                CMatrix gram = CMatrix::Zero(n, n);
                gram.selfadjointView<Eigen::Lower>().rankUpdate(w.adjoint());
                CMatrix phi = gram.selfadjointView<Eigen::Lower>();
                CMatrix filter = llt.matrixU().solve(w).adjoint();
                stats->error_cov(k, m) = r - phi;
                stats->z[m] += stats->error_cov(k, m);
                stats->filter(k, m) = std::move(filter);
                stats->phi(k, m) = std::move(phi);
            }
        }
    }
    return stats;
}

ChannelEstimates mmse_estimate(const PilotObservation& obs,
                               std::shared_ptr<const EstimationStatistics> stats,
                               const PilotPlan& plan, const NetworkConfig& cfg)
{
    const int num_bs = static_cast<int>(obs.y.size());
    const int users = static_cast<int>(plan.pilot_index.size());
    if (stats->filter.num_bs() != num_bs || stats->filter.users() != users)
        throw DomainError("mmse_estimate: statistics do not match the observation");
    const int n = static_cast<int>(obs.y.front().rows());
    const int tp = plan.tau_p();

    ChannelEstimates est;
    est.per_bs.assign(static_cast<std::size_t>(num_bs), CMatrix(n, users));
    CMatrix despread_all(n, tp);
    const double inv_amp = 1.0 / std::sqrt(cfg.tx_power_w);
    for (int m = 0; m < num_bs; ++m) {
        despread_all.noalias() = inv_amp * obs.y[m] * plan.pilots.conjugate();
        for (int k = 0; k < users; ++k)
            est.per_bs[m].col(k).noalias() = stats->filter(k, m) * despread_all.col(plan.pilot_index[k]);
    }
    est.stats = std::move(stats);
    return est;
}

ChannelEstimates mmse_estimate(const PilotObservation& obs, const Scenario& scn,
                               const PilotPlan& plan, const NetworkConfig& cfg)
{
    return mmse_estimate(obs, estimation_statistics(scn, plan, cfg), plan, cfg);
}

}  // namespace mimo
