#pragma once

#include "mimo/assignment.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mimo {

enum class Activation { relu, sigmoid };

std::string to_string(Activation a);
Activation parse_activation(const std::string& text);

// Fully-connected feedforward network. Layer l maps z_{l-1} (size
// layer_sizes[l]) to z_l = f_l(W_l z_{l-1} + b_l) (size layer_sizes[l+1]).
struct Mlp {
    std::vector<int> layer_sizes;
    std::vector<Activation> activations;  // one per weight layer
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    int num_layers() const { return static_cast<int>(weights.size()); }
    int input_size() const { return layer_sizes.front(); }
    int output_size() const { return layer_sizes.back(); }
    std::size_t parameter_count() const;
};

// Glorot-uniform weights, zero biases.
Mlp init_mlp(std::vector<int> layer_sizes, std::vector<Activation> activations, std::uint64_t seed);

// input -> 128 (ReLU) -> 64 (sigmoid) -> 64 (ReLU) -> output (sigmoid), or
// the given hidden widths with the same alternating pattern.
Mlp association_network(int input_size, int output_size, std::uint64_t seed,
                        const std::vector<int>& hidden = {128, 64, 64});

Eigen::VectorXd forward(const Mlp& mlp, std::span<const double> features);
// One sample per column.
Eigen::MatrixXd forward_batch(const Mlp& mlp, const Eigen::MatrixXd& inputs);

// Mean over samples and output entries of the squared error (one sample per column).
double mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);

struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
};

struct BackwardResult {
    Gradients grads;
    double loss = 0.0;
};

// Exact gradient of mse_loss over the batch by reverse-mode accumulation.
BackwardResult backward(const Mlp& mlp, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets);

struct NadamParams {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct OptimizerState {
    Gradients first_moment;
    Gradients second_moment;
    long step = 0;
    NadamParams params;
};

OptimizerState make_optimizer_state(const Mlp& mlp, NadamParams params = {});

// m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
// theta <- theta - lr (b1 m_hat + (1-b1) g / (1-b1^t)) / (sqrt(v_hat) + eps)
void nadam_step(Mlp& mlp, const Gradients& grads, OptimizerState& state);

struct EpochMetrics {
    int epoch = 0;
    double train_mse = 0.0;
    double val_mse = 0.0;
};

struct TrainOptions {
    int epochs = 50;
    int batch_size = 128;
    std::uint64_t seed = 1;
    NadamParams optimizer;
};

struct TrainResult {
    Mlp model;
    std::vector<EpochMetrics> metrics;
};

// Mini-batch NADAM; the sample order is reshuffled every epoch from the
// seed. After each epoch the full training and validation MSE are recorded.
// A non-finite loss aborts with a NumericalError naming the epoch and batch.
TrainResult train(Mlp mlp, const Eigen::MatrixXd& train_x, const Eigen::MatrixXd& train_y,
                  const Eigen::MatrixXd& val_x, const Eigen::MatrixXd& val_y, const TrainOptions& options);

struct Prediction {
    Association association;
    bool capacity_violated = false;
    Eigen::VectorXd scores;
};

Prediction predict_association(const Mlp& mlp, std::span<const double> features, std::span<const int> capacities,
                               bool repair);

inline constexpr int kModelVersion = 1;

// Text container; parameter values are written as hex floats so a load after
// save reproduces them bit for bit.
void save_model(std::ostream& out, const Mlp& mlp);
void save_model(const std::string& path, const Mlp& mlp);
Mlp load_model(std::istream& in);
Mlp load_model(const std::string& path);

}  // namespace mimo
