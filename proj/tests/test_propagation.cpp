#include "mimo/errors.hpp"
#include "mimo/propagation.hpp"
#include "support.hpp"

#include <Eigen/Eigenvalues>
#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace mimo;
using mimo::testing::relative_frobenius;

namespace {

constexpr double deg = std::numbers::pi / 180.0;

// E{a(phi + delta) a(phi + delta)^H} for Gaussian delta, by trapezoidal
// quadrature over +-8 sigma. Independent of the closed form under test.
CMatrix quadrature_correlation(int n, double azimuth, double asd, double spacing, int nodes)
{
    CMatrix r = CMatrix::Zero(n, n);
    const double lo = -8.0 * asd;
    const double step = 16.0 * asd / (nodes - 1);
    double weight_sum = 0.0;
    for (int i = 0; i < nodes; ++i) {
        const double delta = lo + i * step;
        const double w = (i == 0 || i == nodes - 1 ? 0.5 : 1.0) * std::exp(-0.5 * delta * delta / (asd * asd));
        weight_sum += w;
        CVector a(n);
        for (int s = 0; s < n; ++s) a(s) = std::polar(1.0, 2.0 * std::numbers::pi * spacing * s * std::sin(azimuth + delta));
        r += w * a * a.adjoint();
    }
    return r / weight_sum;
}

}  // namespace

TEST_CASE("pathloss follows the urban macro model with a 10 m clamp")
{
    CHECK(10.0 * std::log10(pathloss_gain(1000.0)) == doctest::Approx(-148.1).epsilon(1e-12));
    CHECK(10.0 * std::log10(pathloss_gain(100.0)) == doctest::Approx(-148.1 + 37.6).epsilon(1e-12));
    CHECK(pathloss_gain(0.0) == pathloss_gain(10.0));
    CHECK(pathloss_gain(3.0) == pathloss_gain(10.0));
}

TEST_CASE("local scattering: zero angular spread collapses to a rank-one steering matrix")
{
    const double beta = 2.5e-9;
    const double phi = 0.4;
    const CMatrix r = local_scattering_correlation(8, phi, 0.0, 0.5, beta);
    CVector a(8);
    for (int s = 0; s < 8; ++s) a(s) = std::polar(1.0, std::numbers::pi * s * std::sin(phi));
    CHECK(relative_frobenius(r, beta * a * a.adjoint()) < 1e-12);
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(r);
    CHECK(eig.eigenvalues()(6) < 1e-10 * eig.eigenvalues()(7));
}

TEST_CASE("local scattering: diagonal equals the gain")
{
    const CMatrix r = local_scattering_correlation(16, 1.1, 10.0 * deg, 0.5, 3.0e-10);
    for (int i = 0; i < 16; ++i) {
        CHECK(r(i, i).real() == 3.0e-10);
        CHECK(r(i, i).imag() == 0.0);
    }
    CHECK(r.trace().real() / 16.0 == doctest::Approx(3.0e-10).epsilon(1e-12));
    CHECK(hermitian_defect(r) == 0.0);
}

TEST_CASE("local scattering closed form matches quadrature (N=4, 30 deg, ASD 10 deg)")
{
    const CMatrix closed = local_scattering_correlation(4, 30.0 * deg, 10.0 * deg, 0.5, 1.0);
    const CMatrix oracle = quadrature_correlation(4, 30.0 * deg, 10.0 * deg, 0.5, 20001);
    const double err = relative_frobenius(closed, oracle);
    MESSAGE("closed form vs quadrature, relative Frobenius error " << err);
    CHECK(err < 0.02);
}

TEST_CASE("build_scenario satisfies the correlation invariants")
{
    const NetworkConfig cfg = testing::small_config(8);
    Rng rng(5);
    const Scenario scn = build_scenario(cfg, draw_positions(cfg, rng));
    for (int k = 0; k < cfg.users; ++k) {
        for (int m = 0; m < cfg.num_bs; ++m) {
            const CMatrix& r = scn.correlations(k, m);
            CHECK(hermitian_defect(r) <= 1e-12 * std::max(1.0, r.cwiseAbs().maxCoeff()));
            CHECK(std::abs(r.trace().real() / cfg.antennas - scn.gains(k, m)) <= 1e-9 * scn.gains(k, m));
            Eigen::SelfAdjointEigenSolver<CMatrix> eig(r);
            CHECK(eig.eigenvalues().minCoeff() >= -1e-9 * r.trace().real());
            const CMatrix& f = scn.factors(k, m).factor;
            CHECK(relative_frobenius(f * f.adjoint(), r) < 1e-9);
        }
    }
}

TEST_CASE("build_scenario rejects users outside the area and clamps coincident positions")
{
    const NetworkConfig cfg = testing::tiny_config();
    std::vector<Point> pos(6, Point{100.0, 100.0});
    pos[2] = {1200.0, 10.0};
    CHECK_THROWS_AS(build_scenario(cfg, pos), DomainError);
    pos[2] = cfg.bs_positions[0];
    const Scenario scn = build_scenario(cfg, pos);
    CHECK(scn.gains(2, 0) == pathloss_gain(kMinDistanceM));
    CHECK(std::isfinite(scn.gains(2, 0)));
}

TEST_CASE("covariance factor handles the semidefinite and zero cases")
{
    const CovarianceFactor zero = factor_covariance(CMatrix::Zero(5, 5));
    CHECK(zero.rank() == 0);
    // Endfire user: nearly rank-deficient correlation.
    const CMatrix r = local_scattering_correlation(64, 0.5 * std::numbers::pi - 1e-4, 10.0 * deg, 0.5, 1.0);
    const CovarianceFactor f = factor_covariance(r);
    CHECK(f.rank() < 64);
    CHECK(relative_frobenius(f.factor * f.factor.adjoint(), r) < 1e-10);
    // Indefinite input is visible in the residual / pivots.
    CMatrix bad(2, 2);
    bad << 1.0, 2.0, 2.0, 1.0;
    const CovarianceFactor fb = factor_covariance(bad);
    CHECK(fb.min_pivot < -1.0);
}

TEST_CASE("sample_channels: zero covariance gives zero channels")
{
    UserBsGrid<double> gains(1, 1, 0.0);
    UserBsGrid<CMatrix> corr(1, 1, CMatrix::Zero(4, 4));
    const Scenario scn = make_scenario({Point{}}, gains, corr);
    Rng rng(3);
    const ChannelRealization ch = sample_channels(scn, rng);
    CHECK(ch.h(0, 0).norm() == 0.0);
}

TEST_CASE("sample_channels: identity covariance, 1e5 draws, sample covariance within 5%")
{
    const int n = 4;
    UserBsGrid<double> gains(1, 1, 1.0);
    UserBsGrid<CMatrix> corr(1, 1, CMatrix::Identity(n, n));
    const Scenario scn = make_scenario({Point{}}, gains, corr);
    Rng rng(17);
    CMatrix acc = CMatrix::Zero(n, n);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        const ChannelRealization ch = sample_channels(scn, rng);
        const CVector h = ch.h(0, 0);
        acc += h * h.adjoint();
    }
    CHECK(relative_frobenius(acc / draws, CMatrix::Identity(n, n)) < 0.05);
}

TEST_CASE("sample_channels: correlated covariance converges (N = 8)")
{
    const CMatrix r = local_scattering_correlation(8, 0.3, 10.0 * deg, 0.5, 1.0);
    UserBsGrid<double> gains(1, 1, 1.0);
    UserBsGrid<CMatrix> corr(1, 1, r);
    const Scenario scn = make_scenario({Point{}}, gains, corr);
    Rng rng(23);
    CMatrix acc = CMatrix::Zero(8, 8);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        const CVector h = sample_channels(scn, rng).h(0, 0);
        acc += h * h.adjoint();
    }
    CHECK(relative_frobenius(acc / draws, r) < 0.05);
}

TEST_CASE("sample_channels is deterministic for a fixed seed")
{
    const NetworkConfig cfg = testing::tiny_config();
    Rng pos(1);
    const Scenario scn = build_scenario(cfg, draw_positions(cfg, pos));
    Rng a(99);
    Rng b(99);
    const auto ha = sample_channels(scn, a);
    const auto hb = sample_channels(scn, b);
    for (int m = 0; m < cfg.num_bs; ++m) CHECK(ha.per_bs[m] == hb.per_bs[m]);
}

TEST_CASE("pilot plan is orthonormal and cyclic")
{
    const NetworkConfig cfg = default_network_config();
    const PilotPlan plan = make_pilot_plan(cfg);
    CHECK((plan.pilots.adjoint() * plan.pilots - CMatrix::Identity(10, 10)).cwiseAbs().maxCoeff() < 1e-12);
    for (int k = 0; k < cfg.users; ++k) CHECK(plan.pilot_index[k] == k % 10);
}

namespace {

struct NoiselessSetup {
    NetworkConfig cfg = testing::tiny_config(4);
    PilotPlan plan;
    ChannelRealization ch;

    explicit NoiselessSetup(int users)
    {
        cfg.users = users;
        cfg.num_bs = 1;
        cfg.bs_positions = {{500.0, 500.0}};
        cfg.capacities = {users};
        cfg.noise_power_w = 0.0;
        plan = make_pilot_plan(cfg);
        ch.per_bs = {CMatrix::Random(cfg.antennas, users)};
    }
};

}  // namespace

TEST_CASE("received_pilots: single user, no noise")
{
    NoiselessSetup s(1);
    Rng rng(1);
    const PilotObservation obs = received_pilots(s.ch, s.plan, s.cfg, rng);
    const CMatrix expected = std::sqrt(s.cfg.tx_power_w) * s.ch.per_bs[0].col(0) * s.plan.pilots.col(0).transpose();
    CHECK((obs.y[0] - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("received_pilots: orthogonal pilots despread exactly, shared pilots superpose")
{
    NoiselessSetup s(2);  // tau_p = 3: users 0 and 1 on pilots 0 and 1
    Rng rng(1);
    const PilotObservation obs = received_pilots(s.ch, s.plan, s.cfg, rng);
    CHECK((despread(obs, s.plan, 0, 0, s.cfg.tx_power_w) - s.ch.h(0, 0)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((despread(obs, s.plan, 1, 0, s.cfg.tx_power_w) - s.ch.h(1, 0)).cwiseAbs().maxCoeff() < 1e-14);

    NoiselessSetup shared(4);  // user 3 shares pilot 0 with user 0
    const PilotObservation obs2 = received_pilots(shared.ch, shared.plan, shared.cfg, rng);
    const CVector sum = shared.ch.h(0, 0) + shared.ch.h(3, 0);
    CHECK((despread(obs2, shared.plan, 0, 0, shared.cfg.tx_power_w) - sum).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("mmse_estimate: zero prior gives a zero estimate")
{
    const NetworkConfig cfg = testing::tiny_config(4);
    Rng rng(2);
    const Scenario base = build_scenario(cfg, draw_positions(cfg, rng));
    UserBsGrid<double> gains = base.gains;
    UserBsGrid<CMatrix> corr = base.correlations;
    gains(1, 0) = 0.0;
    corr(1, 0) = CMatrix::Zero(4, 4);
    const Scenario scn = make_scenario(base.ue_positions, gains, corr);
    const PilotPlan plan = make_pilot_plan(cfg);
    const ChannelRealization ch = sample_channels(scn, rng);
    const ChannelEstimates est = mmse_estimate(received_pilots(ch, plan, cfg, rng), scn, plan, cfg);
    CHECK(est.h_hat(1, 0).norm() == 0.0);
    CHECK(est.h_hat(0, 0).norm() > 0.0);
}

TEST_CASE("mmse_estimate: noiseless single user recovers the channel")
{
    NetworkConfig cfg = testing::tiny_config(4);
    cfg.users = 1;
    cfg.num_bs = 1;
    cfg.bs_positions = {{500.0, 500.0}};
    cfg.capacities = {1};
    cfg.noise_power_w = 1e-40;
    const std::vector<Point> pos{{520.0, 530.0}};
    const Scenario scn = build_scenario(cfg, pos);
    // Full-rank prior.
    UserBsGrid<CMatrix> corr = scn.correlations;
    corr(0, 0) = scn.gains(0, 0) * CMatrix::Identity(4, 4);
    const Scenario full = make_scenario(pos, scn.gains, corr);
    const PilotPlan plan = make_pilot_plan(cfg);
    Rng rng(8);
    const ChannelRealization ch = sample_channels(full, rng);
    const ChannelEstimates est = mmse_estimate(received_pilots(ch, plan, cfg, rng), full, plan, cfg);
    CHECK((est.h_hat(0, 0) - ch.h(0, 0)).norm() <= 1e-9 * ch.h(0, 0).norm());
}

TEST_CASE("estimation statistics: Hermitian, PSD, C = R - Phi, error shrinks the covariance")
{
    const NetworkConfig cfg = testing::small_config(8);
    Rng rng(4);
    const Scenario scn = build_scenario(cfg, draw_positions(cfg, rng));
    const PilotPlan plan = make_pilot_plan(cfg);
    const auto stats = estimation_statistics(scn, plan, cfg);
    for (int k = 0; k < cfg.users; ++k) {
        for (int m = 0; m < cfg.num_bs; ++m) {
            const CMatrix& r = scn.correlations(k, m);
            const CMatrix& phi = stats->phi(k, m);
            const CMatrix& c = stats->error_cov(k, m);
            const double scale = r.cwiseAbs().maxCoeff();
            CHECK(hermitian_defect(phi) <= 1e-12 * scale);
            CHECK((c - (r - phi)).cwiseAbs().maxCoeff() <= 1e-9 * scale);
            Eigen::SelfAdjointEigenSolver<CMatrix> e_phi(phi);
            Eigen::SelfAdjointEigenSolver<CMatrix> e_c(c);
            CHECK(e_phi.eigenvalues().minCoeff() >= -1e-9 * r.trace().real());
            CHECK(e_c.eigenvalues().minCoeff() >= -1e-9 * r.trace().real());
            CHECK(c.trace().real() <= r.trace().real() + 1e-9);
        }
    }
    for (int t = 0; t < cfg.tau_p; ++t)
        for (int m = 0; m < cfg.num_bs; ++m) CHECK(hermitian_defect(stats->q(t, m)) <= 1e-12 * stats->q(t, m).norm());
}

TEST_CASE("mmse_estimate: orthogonality and covariance of the estimate (reduced scale)")
{
    // Monte-Carlo oracle written out here for one pilot-sharing user.
    NetworkConfig cfg = testing::small_config(4);
    Rng rng(31);
    const Scenario scn = build_scenario(cfg, draw_positions(cfg, rng));
    const PilotPlan plan = make_pilot_plan(cfg);
    const auto stats = estimation_statistics(scn, plan, cfg);
    const int k = 3;
    const int m = 1;
    const int blocks = 20000;
    CMatrix cross = CMatrix::Zero(4, 4);
    Eigen::MatrixXd cross_sq = Eigen::MatrixXd::Zero(4, 4);
    CMatrix cov = CMatrix::Zero(4, 4);
    for (int b = 0; b < blocks; ++b) {
        const ChannelRealization ch = sample_channels(scn, rng);
        const ChannelEstimates est = mmse_estimate(received_pilots(ch, plan, cfg, rng), stats, plan, cfg);
        const CVector hh = est.h_hat(k, m);
        const CMatrix c = hh * (ch.h(k, m) - hh).adjoint();
        cross += c;
        cross_sq += c.cwiseAbs2();
        cov += hh * hh.adjoint();
    }
    const CMatrix mean = cross / blocks;
    const double se = std::sqrt(((cross_sq / blocks) - mean.cwiseAbs2()).sum() / blocks);
    CHECK(mean.norm() <= 5.0 * se);
    CHECK(relative_frobenius(cov / blocks, stats->phi(k, m)) < 0.05);
}

TEST_CASE("scenario pipeline is bit-identical for identical seeds")
{
    const NetworkConfig cfg = testing::tiny_config(4);
    const PilotPlan plan = make_pilot_plan(cfg);
    auto run = [&] {
        Rng rng(77);
        const Scenario scn = build_scenario(cfg, draw_positions(cfg, rng));
        const ChannelRealization ch = sample_channels(scn, rng);
        const PilotObservation obs = received_pilots(ch, plan, cfg, rng);
        return mmse_estimate(obs, scn, plan, cfg);
    };
    const ChannelEstimates a = run();
    const ChannelEstimates b = run();
    for (int m = 0; m < cfg.num_bs; ++m) CHECK(a.per_bs[m] == b.per_bs[m]);
    CHECK(a.phi(0, 0) == b.phi(0, 0));
}
