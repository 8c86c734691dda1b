#include "mimo/receiver.hpp"

#include "mimo/errors.hpp"

#include <omp.h>

#include <cmath>
#include <string>

namespace mimo {

CombinerBank mr_combiner(const ChannelEstimates& est, int bs)
{
    return {bs, CombinerKind::mr, est.per_bs.at(static_cast<std::size_t>(bs))};
}

CombinerBank mmse_combiner(const ChannelEstimates& est, int bs, const NetworkConfig& /*cfg*/)
{
    const CMatrix& h_hat = est.per_bs.at(static_cast<std::size_t>(bs));
    CMatrix system = est.stats->z[bs];
    system.selfadjointView<Eigen::Lower>().rankUpdate(h_hat);
    Eigen::LLT<CMatrix, Eigen::Lower> llt(system);
    if (llt.info() != Eigen::Success)
        throw NumericalError("M-MMSE combiner: system matrix not positive definite at BS " + std::to_string(bs));
    return {bs, CombinerKind::mmse, llt.solve(h_hat)};
}

CombinerBank make_combiner(CombinerKind kind, const ChannelEstimates& est, int bs, const NetworkConfig& cfg)
{
    return kind == CombinerKind::mr ? mr_combiner(est, bs) : mmse_combiner(est, bs, cfg);
}

std::vector<double> instantaneous_sinr(const CombinerBank& bank, const ChannelEstimates& est, int bs,
                                       const NetworkConfig& /*cfg*/)
{
    const CMatrix& h_hat = est.per_bs.at(static_cast<std::size_t>(bs));
    const CMatrix& z = est.stats->z[bs];
    const Eigen::Index users = h_hat.cols();
    if (bank.v.cols() != users || bank.v.rows() != h_hat.rows())
        throw DomainError("instantaneous_sinr: combiner bank does not match the estimates");

    // gains(i, k) = v_i^H h_hat_k
    const CMatrix gains = bank.v.adjoint() * h_hat;
    const CMatrix zv = z * bank.v;
    std::vector<double> sinr(static_cast<std::size_t>(users), 0.0);
    for (Eigen::Index k = 0; k < users; ++k) {
        if (bank.v.col(k).squaredNorm() == 0.0) continue;
        const double signal = std::norm(gains(k, k));
        double interference = bank.v.col(k).dot(zv.col(k)).real();
        for (Eigen::Index j = 0; j < users; ++j) {
            if (j != k) interference += std::norm(gains(k, j));
        }
        sinr[k] = interference > 0.0 ? signal / interference : 0.0;
    }
    return sinr;
}

double combiner_sinr(const CVector& v, const ChannelEstimates& est, int k, int bs)
{
    const CMatrix& h_hat = est.per_bs.at(static_cast<std::size_t>(bs));
    if (v.squaredNorm() == 0.0) return 0.0;
    const Eigen::VectorXcd gains = h_hat.adjoint() * v;  // conj(v^H h_j)
    double interference = v.dot(est.stats->z[bs] * v).real();
    for (Eigen::Index j = 0; j < h_hat.cols(); ++j) {
        if (j != k) interference += std::norm(gains(j));
    }
    return interference > 0.0 ? std::norm(gains(k)) / interference : 0.0;
}

std::vector<double> mmse_sinr(const ChannelEstimates& est, int bs, const NetworkConfig& cfg)
{
    const CMatrix& h_hat = est.per_bs[static_cast<std::size_t>(bs)];
    CMatrix system = est.stats->z[bs];
    system.selfadjointView<Eigen::Lower>().rankUpdate(h_hat);
    Eigen::LLT<CMatrix, Eigen::Lower> llt(system);
    if (llt.info() != Eigen::Success)
        throw NumericalError("M-MMSE combiner: system matrix not positive definite at BS " + std::to_string(bs));
    // g_k = || L^{-1} h_k ||^2
    const CMatrix w = llt.matrixL().solve(h_hat);
    std::vector<double> sinr(static_cast<std::size_t>(h_hat.cols()));
    for (Eigen::Index k = 0; k < h_hat.cols(); ++k) {
        const double g = w.col(k).squaredNorm();
        // 1 - g loses all precision near g = 1; use the explicit quotient.
        if (1.0 - g <= 1e-10) return instantaneous_sinr(mmse_combiner(est, bs, cfg), est, bs, cfg);
        sinr[k] = g / (1.0 - g);
    }
    return sinr;
}

BlockRates block_rates(const Scenario& scn, const std::shared_ptr<const EstimationStatistics>& stats,
                       const PilotPlan& plan, const NetworkConfig& cfg, std::uint64_t seed, int block,
                       bool want_mr, bool want_mmse)
{
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(block));
    const ChannelRealization ch = sample_channels(scn, rng);
    const PilotObservation obs = received_pilots(ch, plan, cfg, rng);
    const ChannelEstimates est = mmse_estimate(obs, stats, plan, cfg);

    BlockRates out;
    auto fill = [&](CombinerKind kind, Eigen::MatrixXd& dst) {
        dst.resize(scn.users(), scn.num_bs());
        for (int m = 0; m < scn.num_bs(); ++m) {
            const auto sinr = kind == CombinerKind::mmse
                                  ? mmse_sinr(est, m, cfg)
                                  : instantaneous_sinr(mr_combiner(est, m), est, m, cfg);
            for (int k = 0; k < scn.users(); ++k) dst(k, m) = std::log2(1.0 + sinr[k]);
        }
    };
    if (want_mr) fill(CombinerKind::mr, out.mr);
    if (want_mmse) fill(CombinerKind::mmse, out.mmse);
    return out;
}

namespace {

void check_fading_count(int n_fading)
{
    if (n_fading < 1) throw DomainError("rate_matrix: n_fading must be at least 1");
}

// Fixed-order accumulation over blocks.
RateMatrix reduce_blocks(const std::vector<Eigen::MatrixXd>& blocks)
{
    const Eigen::Index users = blocks.front().rows();
    const Eigen::Index num_bs = blocks.front().cols();
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(users, num_bs);
    Eigen::MatrixXd sum_sq = Eigen::MatrixXd::Zero(users, num_bs);
    for (const auto& b : blocks) {
        sum += b;
        sum_sq += b.cwiseAbs2();
    }
    const double n = static_cast<double>(blocks.size());
    RateMatrix out;
    out.n_fading = static_cast<int>(blocks.size());
    out.r = sum / n;
    if (blocks.size() > 1) {
        const Eigen::MatrixXd var = ((sum_sq - sum.cwiseAbs2() / n) / (n - 1.0)).cwiseMax(0.0);
        out.std_error = (var / n).cwiseSqrt();
    } else {
        out.std_error = Eigen::MatrixXd::Zero(users, num_bs);
    }
    return out;
}

std::string block_context(int block, const std::exception& e)
{
    return std::string(e.what()) + " (fading block " + std::to_string(block) + ")";
}

}  // namespace

RateMatrix rate_matrix(const Scenario& scn, const PilotPlan& plan, const NetworkConfig& cfg, CombinerKind kind,
                       int n_fading, std::uint64_t seed)
{
    check_fading_count(n_fading);
    const auto stats = estimation_statistics(scn, plan, cfg);
    const bool mr = kind == CombinerKind::mr;
    std::vector<Eigen::MatrixXd> blocks(static_cast<std::size_t>(n_fading));
    std::vector<std::string> errors(static_cast<std::size_t>(n_fading));

#pragma omp parallel for schedule(static)
    for (int b = 0; b < n_fading; ++b) {
        try {
            BlockRates br = block_rates(scn, stats, plan, cfg, seed, b, mr, !mr);
            blocks[b] = mr ? std::move(br.mr) : std::move(br.mmse);
        } catch (const std::exception& e) {
            errors[b] = block_context(b, e);
        }
    }
    for (const auto& e : errors) {
        if (!e.empty()) throw NumericalError(e);
    }
    return reduce_blocks(blocks);
}

RateMatrix rate_matrix_serial(const Scenario& scn, const PilotPlan& plan, const NetworkConfig& cfg,
                              CombinerKind kind, int n_fading, std::uint64_t seed)
{
    check_fading_count(n_fading);
    const auto stats = estimation_statistics(scn, plan, cfg);
    const bool mr = kind == CombinerKind::mr;
    std::vector<Eigen::MatrixXd> blocks;
    blocks.reserve(static_cast<std::size_t>(n_fading));
    for (int b = 0; b < n_fading; ++b) {
        try {
            BlockRates br = block_rates(scn, stats, plan, cfg, seed, b, mr, !mr);
            blocks.push_back(mr ? std::move(br.mr) : std::move(br.mmse));
        } catch (const std::exception& e) {
            throw NumericalError(block_context(b, e));
        }
    }
    return reduce_blocks(blocks);
}

RatePair rate_matrices(const Scenario& scn, const PilotPlan& plan, const NetworkConfig& cfg, int n_fading,
                       std::uint64_t seed)
{
    check_fading_count(n_fading);
    const auto stats = estimation_statistics(scn, plan, cfg);
    std::vector<Eigen::MatrixXd> mr;
    std::vector<Eigen::MatrixXd> mmse;
    for (int b = 0; b < n_fading; ++b) {
        try {
            BlockRates br = block_rates(scn, stats, plan, cfg, seed, b, true, true);
            mr.push_back(std::move(br.mr));
            mmse.push_back(std::move(br.mmse));
        } catch (const std::exception& e) {
            throw NumericalError(block_context(b, e));
        }
    }
    return {reduce_blocks(mr), reduce_blocks(mmse)};
}

}  // namespace mimo
