#include "mimo/errors.hpp"
#include "mimo/mlp.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace mimo;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Eigen::MatrixXd random_matrix(int rows, int cols, Rng& rng, double lo = -1.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::MatrixXd m(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) m(i, j) = u(rng);
    return m;
}

}  // namespace

TEST_CASE("init is deterministic, Glorot-bounded, with zero biases")
{
    const Mlp a = init_mlp({2, 3}, {Activation::sigmoid}, 5);
    const Mlp b = init_mlp({2, 3}, {Activation::sigmoid}, 5);
    const Mlp c = init_mlp({2, 3}, {Activation::sigmoid}, 6);
    CHECK(a.weights[0] == b.weights[0]);
    CHECK(a.weights[0] != c.weights[0]);
    CHECK(a.weights[0].rows() == 3);
    CHECK(a.weights[0].cols() == 2);
    CHECK(a.weights[0].cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 5.0));

    const Mlp net = association_network(84, 160, 1);
    for (const auto& bias : net.biases) CHECK(bias.cwiseAbs().maxCoeff() == 0.0);
    CHECK(net.layer_sizes == std::vector<int>{84, 128, 64, 64, 160});
    CHECK(net.activations ==
          std::vector<Activation>{Activation::relu, Activation::sigmoid, Activation::relu, Activation::sigmoid});
    CHECK_THROWS_AS(init_mlp({}, {}, 1), DomainError);
    CHECK_THROWS_AS(init_mlp({4}, {}, 1), DomainError);
}

TEST_CASE("parameter count of the association network, counted independently")
{
    const Mlp net = association_network(84, 160, 1);
    std::size_t counted = 0;
    for (int l = 0; l < net.num_layers(); ++l) counted += net.weights[l].size() + net.biases[l].size();
    CHECK(counted == 33696);
    CHECK(net.parameter_count() == counted);
}

TEST_CASE("forward: sigmoid of zero and ReLU identity")
{
    Mlp zero = init_mlp({3, 4}, {Activation::sigmoid}, 1);
    zero.weights[0].setZero();
    const Eigen::VectorXd out = forward(zero, std::vector<double>{1.0, -2.0, 3.0});
    for (double v : out) CHECK(v == 0.5);

    Mlp relu = init_mlp({2, 2}, {Activation::relu}, 1);
    relu.weights[0] = Eigen::MatrixXd::Identity(2, 2);
    const Eigen::VectorXd r = forward(relu, std::vector<double>{-1.0, 2.0});
    CHECK(r(0) == 0.0);
    CHECK(r(1) == 2.0);

    CHECK_THROWS_AS(forward(relu, std::vector<double>{1.0}), DomainError);
    CHECK_THROWS_AS(forward(relu, std::vector<double>{std::nan(""), 1.0}), DomainError);
}

TEST_CASE("forward matches a scalar two-layer evaluation")
{
    Rng rng(3);
    Mlp net = init_mlp({5, 7, 3}, {Activation::relu, Activation::sigmoid}, 9);
    net.biases[0] = random_matrix(7, 1, rng);
    net.biases[1] = random_matrix(3, 1, rng);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x(5);
        for (double& v : x) v = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
        std::vector<double> hidden(7);
        for (int i = 0; i < 7; ++i) {
            double s = net.biases[0](i);
            for (int j = 0; j < 5; ++j) s += net.weights[0](i, j) * x[j];
            hidden[i] = s > 0.0 ? s : 0.0;
        }
        const Eigen::VectorXd out = forward(net, x);
        for (int i = 0; i < 3; ++i) {
            double s = net.biases[1](i);
            for (int j = 0; j < 7; ++j) s += net.weights[1](i, j) * hidden[j];
            CHECK(std::abs(out(i) - sigmoid(s)) <= 1e-12);
            CHECK(out(i) > 0.0);
            CHECK(out(i) < 1.0);
        }
    }
}

TEST_CASE("forward_batch agrees with column-wise forward")
{
    Rng rng(4);
    const Mlp net = association_network(6, 8, 2, {5, 4, 3});
    const Eigen::MatrixXd x = random_matrix(6, 9, rng);
    const Eigen::MatrixXd y = forward_batch(net, x);
    for (int c = 0; c < 9; ++c) {
        const Eigen::VectorXd col = x.col(c);
        CHECK((forward(net, std::span<const double>(col.data(), 6)) - y.col(c)).cwiseAbs().maxCoeff() <= 1e-15);
    }
}

TEST_CASE("loss and gradients vanish when the prediction equals the target")
{
    Rng rng(5);
    const Mlp net = association_network(4, 3, 7, {6, 5, 4});
    const Eigen::MatrixXd x = random_matrix(4, 10, rng);
    const Eigen::MatrixXd y = forward_batch(net, x);
    CHECK(mse_loss(y, y) == 0.0);
    const BackwardResult br = backward(net, x, y);
    CHECK(br.loss == 0.0);
    for (int l = 0; l < net.num_layers(); ++l) {
        CHECK(br.grads.weights[l].cwiseAbs().maxCoeff() == 0.0);
        CHECK(br.grads.biases[l].cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("mse is the mean over samples and entries")
{
    Eigen::MatrixXd p(2, 2);
    p << 1.0, 0.0, 0.0, 0.0;
    const Eigen::MatrixXd t = Eigen::MatrixXd::Zero(2, 2);
    CHECK(mse_loss(p, t) == 0.25);
}

TEST_CASE("backward: one-neuron network against the chain rule by hand")
{
    Mlp net = init_mlp({1, 1}, {Activation::sigmoid}, 1);
    net.weights[0](0, 0) = 0.7;
    net.biases[0](0) = -0.2;
    Eigen::MatrixXd x(1, 1);
    x << 1.5;
    Eigen::MatrixXd t(1, 1);
    t << 0.1;
    const double z = sigmoid(0.7 * 1.5 - 0.2);
    const double dz = 2.0 * (z - 0.1) * z * (1.0 - z);
    const BackwardResult br = backward(net, x, t);
    CHECK(br.loss == doctest::Approx((z - 0.1) * (z - 0.1)).epsilon(1e-15));
    CHECK(br.grads.weights[0](0, 0) == doctest::Approx(dz * 1.5).epsilon(1e-14));
    CHECK(br.grads.biases[0](0) == doctest::Approx(dz).epsilon(1e-14));
}

TEST_CASE("backward matches central finite differences on random small networks")
{
    Rng rng(6);
    std::uniform_int_distribution<int> width(1, 8);
    for (int trial = 0; trial < 20; ++trial) {
        const int layers = 1 + trial % 4;
        std::vector<int> sizes{width(rng)};
        std::vector<Activation> acts;
        for (int l = 0; l < layers; ++l) {
            sizes.push_back(width(rng));
            acts.push_back(l % 2 == 0 ? Activation::sigmoid : Activation::relu);
        }
        Mlp net = init_mlp(sizes, acts, 100 + trial);
        for (auto& b : net.biases) b = random_matrix(static_cast<int>(b.size()), 1, rng, -0.5, 0.5);
        const Eigen::MatrixXd x = random_matrix(sizes.front(), 5, rng);
        const Eigen::MatrixXd t = random_matrix(sizes.back(), 5, rng, 0.0, 1.0);
        const BackwardResult br = backward(net, x, t);
        const double h = 1e-6;
        auto check_param = [&](double& param, double analytic) {
            const double saved = param;
            param = saved + h;
            const double up = mse_loss(forward_batch(net, x), t);
            param = saved - h;
            const double down = mse_loss(forward_batch(net, x), t);
            param = saved;
            const double numeric = (up - down) / (2.0 * h);
            CHECK(std::abs(numeric - analytic) <= 1e-5 * std::max({std::abs(numeric), std::abs(analytic), 1e-6}));
        };
        for (int l = 0; l < net.num_layers(); ++l) {
            for (Eigen::Index i = 0; i < net.weights[l].size(); ++i)
                check_param(net.weights[l].data()[i], br.grads.weights[l].data()[i]);
            for (Eigen::Index i = 0; i < net.biases[l].size(); ++i)
                check_param(net.biases[l](i), br.grads.biases[l](i));
        }
    }
}

TEST_CASE("NADAM: zero gradient leaves parameters unchanged")
{
    Mlp net = association_network(3, 2, 1, {4, 4, 4});
    const Mlp before = net;
    OptimizerState state = make_optimizer_state(net);
    Gradients zero = state.first_moment;
    nadam_step(net, zero, state);
    for (int l = 0; l < net.num_layers(); ++l) {
        CHECK(net.weights[l] == before.weights[l]);
        CHECK(net.biases[l] == before.biases[l]);
    }
    CHECK(state.step == 1);
}

TEST_CASE("NADAM: first step moves against the gradient")
{
    Mlp net = init_mlp({2, 2}, {Activation::sigmoid}, 1);
    const Mlp before = net;
    OptimizerState state = make_optimizer_state(net);
    Gradients g = state.first_moment;
    g.weights[0] << 0.5, -2.0, 3.0, -0.1;
    g.biases[0] << 1.0, -1.0;
    nadam_step(net, g, state);
    const Eigen::MatrixXd dw = net.weights[0] - before.weights[0];
    for (Eigen::Index i = 0; i < dw.size(); ++i) CHECK(dw.data()[i] * g.weights[0].data()[i] < 0.0);
    CHECK(net.biases[0](0) < 0.0);
    CHECK(net.biases[0](1) > 0.0);
}

TEST_CASE("NADAM: three unit-gradient steps follow the scalar recurrence")
{
    Mlp net = init_mlp({1, 1}, {Activation::relu}, 1);
    net.weights[0](0, 0) = 0.25;
    OptimizerState state = make_optimizer_state(net);
    Gradients g = state.first_moment;
    g.weights[0](0, 0) = 1.0;

    const double a = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double theta = 0.25, m = 0.0, v = 0.0;
    for (int t = 1; t <= 3; ++t) {
        m = b1 * m + (1 - b1) * 1.0;
        v = b2 * v + (1 - b2) * 1.0;
        const double m_hat = m / (1 - std::pow(b1, t));
        const double v_hat = v / (1 - std::pow(b2, t));
        theta -= a * (b1 * m_hat + (1 - b1) * 1.0 / (1 - std::pow(b1, t))) / (std::sqrt(v_hat) + eps);
        nadam_step(net, g, state);
        CHECK(std::abs(net.weights[0](0, 0) - theta) <= 1e-12);
    }
}

namespace {

struct ToyProblem {
    Eigen::MatrixXd x, y, vx, vy;

    ToyProblem()
    {
        Rng rng(77);
        x = random_matrix(3, 300, rng, 0.0, 1.0);
        vx = random_matrix(3, 60, rng, 0.0, 1.0);
        auto target = [](const Eigen::MatrixXd& in) {
            Eigen::MatrixXd out(2, in.cols());
            for (Eigen::Index c = 0; c < in.cols(); ++c) {
                out(0, c) = in(0, c) > in(1, c) ? 1.0 : 0.0;
                out(1, c) = 1.0 - out(0, c);
            }
            return out;
        };
        y = target(x);
        vy = target(vx);
    }
};

}  // namespace

TEST_CASE("train: zero epochs is a no-op")
{
    const ToyProblem p;
    const Mlp net = association_network(3, 2, 4, {8, 8, 8});
    TrainOptions opt;
    opt.epochs = 0;
    const TrainResult r = train(net, p.x, p.y, p.vx, p.vy, opt);
    CHECK(r.metrics.empty());
    CHECK(r.model.weights[0] == net.weights[0]);
}

TEST_CASE("train: loss decreases and runs are bit-identical")
{
    const ToyProblem p;
    const Mlp net = association_network(3, 2, 4, {16, 16, 16});
    TrainOptions opt;
    opt.epochs = 30;
    opt.batch_size = 16;
    opt.optimizer.learning_rate = 1e-2;
    const TrainResult a = train(net, p.x, p.y, p.vx, p.vy, opt);
    const TrainResult b = train(net, p.x, p.y, p.vx, p.vy, opt);
    REQUIRE(a.metrics.size() == 30);
    CHECK(a.metrics.back().train_mse < a.metrics.front().train_mse);
    CHECK(a.metrics.back().train_mse < 0.1);
    CHECK(a.metrics.back().val_mse < 0.15);
    for (std::size_t i = 0; i < a.metrics.size(); ++i) {
        CHECK(a.metrics[i].epoch == static_cast<int>(i) + 1);
        CHECK(a.metrics[i].train_mse == b.metrics[i].train_mse);
        CHECK(a.metrics[i].val_mse == b.metrics[i].val_mse);
    }
    for (int l = 0; l < net.num_layers(); ++l) CHECK(a.model.weights[l] == b.model.weights[l]);
}

TEST_CASE("train: divergence is reported with epoch and batch")
{
    const ToyProblem p;
    Mlp net = association_network(3, 2, 4, {8, 8, 8});
    Eigen::MatrixXd bad = p.y;
    bad(0, 5) = std::numeric_limits<double>::infinity();
    TrainOptions opt;
    opt.epochs = 2;
    try {
        train(net, p.x, bad, p.vx, p.vy, opt);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        const std::string what = e.what();
        CHECK(what.find("epoch") != std::string::npos);
        CHECK(what.find("batch") != std::string::npos);
    }
}

TEST_CASE("predict_association: dominated slices and the tie rule")
{
    // A single sigmoid layer whose biases encode the scores directly.
    Mlp net = init_mlp({1, 6}, {Activation::sigmoid}, 1);
    net.weights[0].setZero();
    net.biases[0] << -5.0, 5.0, 5.0, -5.0, 5.0, -5.0;  // 3 users x 2 BSs
    const std::vector<int> caps{3, 3};
    const Prediction p = predict_association(net, std::vector<double>{0.0}, caps, false);
    CHECK(p.association.serving() == std::vector<int>{1, 0, 0});
    CHECK_FALSE(p.capacity_violated);
    std::vector<double> rounded(6);
    for (int i = 0; i < 6; ++i) rounded[i] = std::round(p.scores(i));
    CHECK(rounded == std::vector<double>{0, 1, 1, 0, 1, 0});

    net.biases[0].setZero();
    const Prediction tie = predict_association(net, std::vector<double>{0.0}, caps, false);
    CHECK(tie.association.serving() == std::vector<int>{0, 0, 0});

    const std::vector<int> tight{1, 3};
    const Prediction over = predict_association(net, std::vector<double>{0.0}, tight, false);
    CHECK(over.capacity_violated);
    const Prediction fixed = predict_association(net, std::vector<double>{0.0}, tight, true);
    CHECK(fixed.association.feasible(tight));
    CHECK(fixed.association.assigned_count() == 3);
}

TEST_CASE("save / load round-trip and error paths")
{
    Rng rng(8);
    Mlp net = association_network(5, 4, 3, {6, 5, 4});
    for (auto& b : net.biases) b = random_matrix(static_cast<int>(b.size()), 1, rng);
    std::stringstream buf;
    save_model(buf, net);
    const std::string text = buf.str();
    const Mlp back = load_model(buf);
    CHECK(back.layer_sizes == net.layer_sizes);
    CHECK(back.activations == net.activations);
    for (int l = 0; l < net.num_layers(); ++l) {
        CHECK(back.weights[l] == net.weights[l]);
        CHECK(back.biases[l] == net.biases[l]);
    }
    const Eigen::MatrixXd x = random_matrix(5, 100, rng);
    CHECK(forward_batch(back, x) == forward_batch(net, x));

    std::istringstream truncated(text.substr(0, text.size() * 2 / 3));
    CHECK_THROWS_AS(load_model(truncated), FormatError);

    std::string future = text;
    future.replace(future.find("mimo-assoc-mlp 1"), 16, "mimo-assoc-mlp 7");
    std::istringstream fut(future);
    CHECK_THROWS_AS(load_model(fut), UnsupportedVersionError);

    std::istringstream junk("hello world\n");
    CHECK_THROWS_AS(load_model(junk), FormatError);
}
