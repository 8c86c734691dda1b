#include "mimo/selftest.hpp"

#include "mimo/assignment.hpp"
#include "mimo/mlp.hpp"
#include "mimo/propagation.hpp"
#include "mimo/receiver.hpp"
#include "mimo/rng.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace mimo {

namespace {

std::string format(const char* fmt, double a, double b = 0.0)
{
    char buf[160];
    std::snprintf(buf, sizeof buf, fmt, a, b);
    return buf;
}

}  // namespace

SuiteResult check_solver_against_brute_force(int instances, std::uint64_t seed, bool inject_solver_fault)
{
    SuiteResult res{"solver-vs-brute-force", true, {}};
    Rng rng(derive_seed(seed, 0x501));
    std::uniform_int_distribution<int> users_dist(1, 8);
    std::uniform_int_distribution<int> bs_dist(1, 3);
    std::uniform_real_distribution<double> rate_dist(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < instances; ++i) {
        const int users = users_dist(rng);
        const int num_bs = bs_dist(rng);
        std::uniform_int_distribution<int> cap_dist(0, users);
        std::vector<int> caps(static_cast<std::size_t>(num_bs));
        for (int& d : caps) d = cap_dist(rng);
        Eigen::MatrixXd r(users, num_bs);
        for (int k = 0; k < users; ++k)
            for (int m = 0; m < num_bs; ++m) r(k, m) = rate_dist(rng);
        const SolveResult solved = detail::solve_association_flow(r, caps, inject_solver_fault);
        const BruteForceResult oracle = brute_force_association(r, caps);
        const double gap = std::abs(solved.report.objective - oracle.objective);
        worst = std::max(worst, gap);
        if (gap > 1e-9 || !solved.association.feasible(caps)) res.passed = false;
    }
    res.detail = std::to_string(instances) + " instances, max objective gap " + format("%.3g", worst);
    return res;
}

SuiteResult check_lp_integrality(int instances, int users, int num_bs, int capacity, std::uint64_t seed)
{
    SuiteResult res{"lp-integrality", true, {}};
    Rng rng(derive_seed(seed, 0x1b));
    std::uniform_real_distribution<double> rate_dist(0.0, 1.0);
    const std::vector<int> caps(static_cast<std::size_t>(num_bs), capacity);
    double worst_frac = 0.0;
    double worst_gap = 0.0;
    for (int i = 0; i < instances; ++i) {
        Eigen::MatrixXd r(users, num_bs);
        for (int k = 0; k < users; ++k)
            for (int m = 0; m < num_bs; ++m) r(k, m) = rate_dist(rng);
        const SolveResult lp = solve_association_lp(r, caps);
        const SolveResult flow = solve_association(r, caps);
        worst_frac = std::max(worst_frac, lp.report.max_fractionality);
        worst_gap = std::max(worst_gap, std::abs(lp.report.objective - flow.report.objective));
        if (!lp.report.integral || lp.report.max_fractionality > 1e-6 ||
            std::abs(lp.report.objective - flow.report.objective) > 1e-9 * std::max(1.0, flow.report.objective))
            res.passed = false;
    }
    res.detail = std::to_string(instances) + " instances, max fractionality " + format("%.3g", worst_frac) +
                 ", max LP/flow gap " + format("%.3g", worst_gap);
    return res;
}

SuiteResult check_gradients(int networks, std::uint64_t seed)
{
    SuiteResult res{"gradient-check", true, {}};
    Rng rng(derive_seed(seed, 0x96));
    std::uniform_int_distribution<int> size_dist(1, 8);
    std::uniform_int_distribution<int> depth_dist(1, 4);
    std::uniform_int_distribution<int> act_dist(0, 1);
    std::uniform_real_distribution<double> value(-1.0, 1.0);
    constexpr double h = 1e-6;
    double worst = 0.0;
    for (int n = 0; n < networks; ++n) {
        const int depth = depth_dist(rng);
        std::vector<int> sizes;
        std::vector<Activation> acts;
        for (int i = 0; i <= depth; ++i) sizes.push_back(size_dist(rng));
        for (int i = 0; i < depth; ++i) acts.push_back(act_dist(rng) ? Activation::sigmoid : Activation::relu);
        Mlp mlp = init_mlp(sizes, acts, rng());
        for (auto& b : mlp.biases)
            for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = 0.5 * value(rng);
        const int batch = size_dist(rng);
        Eigen::MatrixXd x(sizes.front(), batch);
        Eigen::MatrixXd t(sizes.back(), batch);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = value(rng);
        for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = 0.5 + 0.5 * value(rng);
        const Gradients g = backward(mlp, x, t).grads;

        auto loss = [&](const Mlp& net) { return mse_loss(forward_batch(net, x), t); };
        auto probe = [&](double& param, double analytic) {
            const double saved = param;
            param = saved + h;
            const double up = loss(mlp);
            param = saved - h;
            const double down = loss(mlp);
            param = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
            const double rel = std::abs(numeric - analytic) / scale;
            worst = std::max(worst, rel);
            if (rel > 1e-5) res.passed = false;
        };
        for (int l = 0; l < mlp.num_layers(); ++l) {
            for (Eigen::Index i = 0; i < mlp.weights[l].size(); ++i) probe(mlp.weights[l].data()[i], g.weights[l].data()[i]);
            for (Eigen::Index i = 0; i < mlp.biases[l].size(); ++i) probe(mlp.biases[l].data()[i], g.biases[l].data()[i]);
        }
    }
    res.detail = std::to_string(networks) + " networks, max relative error " + format("%.3g", worst);
    return res;
}

SuiteResult check_sinr_dominance(const NetworkConfig& cfg, int realizations, int random_combiners, std::uint64_t seed)
{
    SuiteResult res{"sinr-dominance", true, {}};
    const PilotPlan plan = make_pilot_plan(cfg);
    ComplexNormal draw;
    long comparisons = 0;
    double worst = 0.0;  // largest relative shortfall of M-MMSE
    for (int b = 0; b < realizations; ++b) {
        Rng rng = make_stream(seed, static_cast<std::uint64_t>(b));
        const Scenario scn = build_scenario(cfg, draw_positions(cfg, rng));
        const auto stats = estimation_statistics(scn, plan, cfg);
        const ChannelRealization ch = sample_channels(scn, rng);
        const ChannelEstimates est = mmse_estimate(received_pilots(ch, plan, cfg, rng), stats, plan, cfg);
        for (int m = 0; m < cfg.num_bs; ++m) {
            const auto mmse = instantaneous_sinr(mmse_combiner(est, m, cfg), est, m, cfg);
            const auto mr = instantaneous_sinr(mr_combiner(est, m), est, m, cfg);
            for (int k = 0; k < cfg.users; ++k) {
                auto compare = [&](double other) {
                    const double shortfall = (other - mmse[k]) / std::max(1.0, other);
                    worst = std::max(worst, shortfall);
                    if (shortfall > 1e-9) res.passed = false;
                    ++comparisons;
                };
                compare(mr[k]);
                CVector v(cfg.antennas);
                for (int trial = 0; trial < random_combiners; ++trial) {
                    for (int i = 0; i < cfg.antennas; ++i) v(i) = draw(rng);
                    v.normalize();
                    compare(combiner_sinr(v, est, k, m));
                }
            }
        }
    }
    res.detail = std::to_string(comparisons) + " comparisons, worst relative shortfall " + format("%.3g", worst);
    return res;
}

SuiteResult check_estimator_statistics(const NetworkConfig& cfg, int blocks, std::uint64_t seed)
{
    SuiteResult res{"estimator-statistics", true, {}};
    const PilotPlan plan = make_pilot_plan(cfg);
    Rng pos_rng = make_stream(seed, 0);
    const Scenario scn = build_scenario(cfg, draw_positions(cfg, pos_rng));
    const auto stats = estimation_statistics(scn, plan, cfg);
    const int n = cfg.antennas;
    const int pairs = cfg.users * cfg.num_bs;

    // Running sums per (user, BS): cross = h_hat e^H, its entrywise second
    // moment, and h_hat h_hat^H.
    std::vector<CMatrix> cross(static_cast<std::size_t>(pairs), CMatrix::Zero(n, n));
    std::vector<Eigen::MatrixXd> cross_sq(static_cast<std::size_t>(pairs), Eigen::MatrixXd::Zero(n, n));
    std::vector<CMatrix> cov(static_cast<std::size_t>(pairs), CMatrix::Zero(n, n));
    for (int b = 0; b < blocks; ++b) {
        Rng rng = make_stream(seed, static_cast<std::uint64_t>(b) + 1);
        const ChannelRealization ch = sample_channels(scn, rng);
        const ChannelEstimates est = mmse_estimate(received_pilots(ch, plan, cfg, rng), stats, plan, cfg);
        for (int k = 0; k < cfg.users; ++k) {
            for (int m = 0; m < cfg.num_bs; ++m) {
                const std::size_t idx = static_cast<std::size_t>(k) * cfg.num_bs + m;
                const CVector hh = est.h_hat(k, m);
                const CVector err = ch.h(k, m) - hh;
                const CMatrix c = hh * err.adjoint();
                cross[idx] += c;
                cross_sq[idx] += c.cwiseAbs2();
                cov[idx] += hh * hh.adjoint();
            }
        }
    }
    double worst_z = 0.0;
    double worst_cov = 0.0;
    const double nb = static_cast<double>(blocks);
    for (int k = 0; k < cfg.users; ++k) {
        for (int m = 0; m < cfg.num_bs; ++m) {
            const std::size_t idx = static_cast<std::size_t>(k) * cfg.num_bs + m;
            const CMatrix mean = cross[idx] / nb;
            const double var_sum = ((cross_sq[idx] / nb) - mean.cwiseAbs2()).sum() * nb / (nb - 1.0);
            const double std_error = std::sqrt(std::max(var_sum, 0.0) / nb);
            const double z = std_error > 0.0 ? mean.norm() / std_error : 0.0;
            const CMatrix& phi = stats->phi(k, m);
            const double cov_err = phi.norm() > 0.0 ? (cov[idx] / nb - phi).norm() / phi.norm() : 0.0;
            worst_z = std::max(worst_z, z);
            worst_cov = std::max(worst_cov, cov_err);
            if (z > 5.0 || cov_err > 0.05) res.passed = false;
        }
    }
    res.detail = std::to_string(blocks) + " blocks, N = " + std::to_string(n) + ", max |mean|/SE " +
                 format("%.3g", worst_z) + ", max covariance error " + format("%.3g", 100.0 * worst_cov) + "%";
    return res;
}

bool run_selftest(std::ostream& out, const SelftestOptions& options)
{
    NetworkConfig dominance_cfg = default_network_config();
    dominance_cfg.antennas = 16;
    NetworkConfig estimator_cfg = default_network_config();
    estimator_cfg.antennas = 4;

    const std::vector<SuiteResult> suites{
        check_solver_against_brute_force(200, 11, options.inject_solver_fault),
        check_lp_integrality(100, 40, 4, 15, 12),
        check_gradients(20, 13),
        check_sinr_dominance(dominance_cfg, 20, 100, 14),
        check_estimator_statistics(estimator_cfg, 5000, 15),
    };
    bool all = true;
    for (const auto& s : suites) {
        out << (s.passed ? "PASS " : "FAIL ") << s.name << ": " << s.detail << '\n';
        all = all && s.passed;
    }
    out << (all ? "selftest passed" : "selftest FAILED") << '\n';
    return all;
}

}  // namespace mimo
