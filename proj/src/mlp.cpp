#include "mimo/mlp.hpp"

#include "mimo/dataset.hpp"
#include "mimo/errors.hpp"
#include "mimo/rng.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace mimo {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "sigmoid"; }

Activation parse_activation(const std::string& text)
{
    if (text == "relu") return Activation::relu;
    if (text == "sigmoid") return Activation::sigmoid;
    throw FormatError("unknown activation '" + text + "'");
}

std::size_t Mlp::parameter_count() const
{
    std::size_t n = 0;
    for (int l = 0; l < num_layers(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

Mlp init_mlp(std::vector<int> layer_sizes, std::vector<Activation> activations, std::uint64_t seed)
{
    if (layer_sizes.size() < 2) throw DomainError("mlp: need at least an input and an output layer");
    if (activations.size() != layer_sizes.size() - 1) throw DomainError("mlp: one activation per weight layer");
    for (int n : layer_sizes) {
        if (n < 1) throw DomainError("mlp: layer sizes must be positive");
    }
    Mlp mlp;
    mlp.layer_sizes = std::move(layer_sizes);
    mlp.activations = std::move(activations);
    Rng rng(derive_seed(seed, 0x1417));
    for (std::size_t l = 0; l + 1 < mlp.layer_sizes.size(); ++l) {
        const int fan_in = mlp.layer_sizes[l];
        const int fan_out = mlp.layer_sizes[l + 1];
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> uniform(-limit, limit);
        Eigen::MatrixXd w(fan_out, fan_in);
        for (int i = 0; i < fan_out; ++i)
            for (int j = 0; j < fan_in; ++j) w(i, j) = uniform(rng);
        mlp.weights.push_back(std::move(w));
        mlp.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return mlp;
}

Mlp association_network(int input_size, int output_size, std::uint64_t seed, const std::vector<int>& hidden)
{
    std::vector<int> sizes{input_size};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(output_size);
    std::vector<Activation> acts;
    for (std::size_t i = 0; i < hidden.size(); ++i) acts.push_back(i % 2 == 0 ? Activation::relu : Activation::sigmoid);
    acts.push_back(Activation::sigmoid);
    return init_mlp(std::move(sizes), std::move(acts), seed);
}

namespace {

void activate(Activation a, Eigen::MatrixXd& x)
{
    if (a == Activation::relu)
        x = x.cwiseMax(0.0);
    else
        x = (1.0 + (-x.array()).exp()).inverse().matrix();
}

// Keeps every layer's output for the backward pass; zs[0] is the input.
std::vector<Eigen::MatrixXd> forward_trace(const Mlp& mlp, const Eigen::MatrixXd& inputs)
{
    std::vector<Eigen::MatrixXd> zs;
    zs.reserve(mlp.weights.size() + 1);
    zs.push_back(inputs);
    for (int l = 0; l < mlp.num_layers(); ++l) {
        Eigen::MatrixXd a = mlp.weights[l] * zs.back();
        a.colwise() += mlp.biases[l];
        activate(mlp.activations[l], a);
        zs.push_back(std::move(a));
    }
    return zs;
}

void check_input(const Mlp& mlp, const Eigen::MatrixXd& inputs)
{
    if (inputs.rows() != mlp.input_size())
        throw DomainError("mlp: expected " + std::to_string(mlp.input_size()) + " features, got " +
                          std::to_string(inputs.rows()));
    if (!inputs.allFinite()) throw DomainError("mlp: non-finite input");
}

}  // namespace

Eigen::MatrixXd forward_batch(const Mlp& mlp, const Eigen::MatrixXd& inputs)
{
    check_input(mlp, inputs);
    Eigen::MatrixXd z = inputs;
    for (int l = 0; l < mlp.num_layers(); ++l) {
        Eigen::MatrixXd a = mlp.weights[l] * z;
        a.colwise() += mlp.biases[l];
        activate(mlp.activations[l], a);
        z = std::move(a);
    }
    return z;
}

Eigen::VectorXd forward(const Mlp& mlp, std::span<const double> features)
{
    const Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(features.data(), static_cast<Eigen::Index>(features.size()));
    return forward_batch(mlp, x).col(0);
}

double mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target)
{
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw DomainError("mse_loss: dimension mismatch");
    if (pred.size() == 0) return 0.0;
    return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

BackwardResult backward(const Mlp& mlp, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets)
{
    check_input(mlp, inputs);
    if (targets.rows() != mlp.output_size() || targets.cols() != inputs.cols())
        throw DomainError("backward: target dimensions do not match the network");
    const auto zs = forward_trace(mlp, inputs);
    const int layers = mlp.num_layers();

    BackwardResult out;
    out.loss = mse_loss(zs.back(), targets);
    out.grads.weights.resize(static_cast<std::size_t>(layers));
    out.grads.biases.resize(static_cast<std::size_t>(layers));

    // dL/dz for the output layer.
    Eigen::MatrixXd upstream = (2.0 / static_cast<double>(targets.size())) * (zs.back() - targets);
    for (int l = layers - 1; l >= 0; --l) {
        const Eigen::MatrixXd& z = zs[l + 1];
        Eigen::MatrixXd delta;
        if (mlp.activations[l] == Activation::relu)
            delta = upstream.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
        else
            delta = upstream.cwiseProduct(z.cwiseProduct((1.0 - z.array()).matrix()));
        out.grads.weights[l].noalias() = delta * zs[l].transpose();
        out.grads.biases[l] = delta.rowwise().sum();
        if (l > 0) upstream.noalias() = mlp.weights[l].transpose() * delta;
    }
    return out;
}

OptimizerState make_optimizer_state(const Mlp& mlp, NadamParams params)
{
    OptimizerState s;
    s.params = params;
    for (int l = 0; l < mlp.num_layers(); ++l) {
        s.first_moment.weights.push_back(Eigen::MatrixXd::Zero(mlp.weights[l].rows(), mlp.weights[l].cols()));
        s.first_moment.biases.push_back(Eigen::VectorXd::Zero(mlp.biases[l].size()));
    }
    s.second_moment = s.first_moment;
    return s;
}

namespace {

template <typename Param>
void nadam_update(Param& theta, const Param& g, Param& m, Param& v, const NadamParams& p, double bc1, double bc2)
{
    m = p.beta1 * m + (1.0 - p.beta1) * g;
    v = p.beta2 * v + (1.0 - p.beta2) * g.cwiseAbs2();
    const auto m_hat = m.array() / bc1;
    const auto v_hat = v.array() / bc2;
    const auto direction = p.beta1 * m_hat + ((1.0 - p.beta1) / bc1) * g.array();
    theta.array() -= p.learning_rate * direction / (v_hat.sqrt() + p.epsilon);
}

}  // namespace

void nadam_step(Mlp& mlp, const Gradients& grads, OptimizerState& state)
{
    if (static_cast<int>(grads.weights.size()) != mlp.num_layers() ||
        static_cast<int>(state.first_moment.weights.size()) != mlp.num_layers())
        throw DomainError("nadam_step: gradient/state layout does not match the network");
    ++state.step;
    const NadamParams& p = state.params;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(p.beta1, t);
    const double bc2 = 1.0 - std::pow(p.beta2, t);
    for (int l = 0; l < mlp.num_layers(); ++l) {
        nadam_update(mlp.weights[l], grads.weights[l], state.first_moment.weights[l], state.second_moment.weights[l], p,
                     bc1, bc2);
        nadam_update(mlp.biases[l], grads.biases[l], state.first_moment.biases[l], state.second_moment.biases[l], p,
                     bc1, bc2);
    }
}

namespace {

double full_mse(const Mlp& mlp, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y)
{
    if (x.cols() == 0) return std::numeric_limits<double>::quiet_NaN();
    // Chunked so memory stays flat for large sets; the sum order is fixed.
    constexpr Eigen::Index chunk = 4096;
    double total = 0.0;
    for (Eigen::Index start = 0; start < x.cols(); start += chunk) {
        const Eigen::Index n = std::min(chunk, x.cols() - start);
        total += (forward_batch(mlp, x.middleCols(start, n)) - y.middleCols(start, n)).squaredNorm();
    }
    return total / static_cast<double>(y.size());
}

}  // namespace

TrainResult train(Mlp mlp, const Eigen::MatrixXd& train_x, const Eigen::MatrixXd& train_y,
                  const Eigen::MatrixXd& val_x, const Eigen::MatrixXd& val_y, const TrainOptions& options)
{
    if (train_x.cols() == 0) throw DomainError("train: empty training set");
    if (train_x.cols() != train_y.cols() || val_x.cols() != val_y.cols())
        throw DomainError("train: feature and label counts differ");
    if (options.batch_size < 1) throw DomainError("train: batch size must be positive");

    TrainResult out{std::move(mlp), {}};
    OptimizerState state = make_optimizer_state(out.model, options.optimizer);
    const Eigen::Index n = train_x.cols();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    Eigen::MatrixXd batch_x(train_x.rows(), 0);
    Eigen::MatrixXd batch_y(train_y.rows(), 0);

    for (int epoch = 1; epoch <= options.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), rng);

        int batch_index = 0;
        for (Eigen::Index start = 0; start < n; start += options.batch_size, ++batch_index) {
            const Eigen::Index size = std::min<Eigen::Index>(options.batch_size, n - start);
            batch_x.resize(train_x.rows(), size);
            batch_y.resize(train_y.rows(), size);
            for (Eigen::Index i = 0; i < size; ++i) {
                batch_x.col(i) = train_x.col(order[start + i]);
                batch_y.col(i) = train_y.col(order[start + i]);
            }
            const BackwardResult br = backward(out.model, batch_x, batch_y);
            if (!std::isfinite(br.loss))
                throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                     std::to_string(batch_index));
            nadam_step(out.model, br.grads, state);
        }
        out.metrics.push_back({epoch, full_mse(out.model, train_x, train_y), full_mse(out.model, val_x, val_y)});
    }
    return out;
}

Prediction predict_association(const Mlp& mlp, std::span<const double> features, std::span<const int> capacities,
                               bool repair)
{
    Prediction p;
    p.scores = forward(mlp, features);
    const std::span<const double> scores(p.scores.data(), static_cast<std::size_t>(p.scores.size()));
    p.association = decode_labels(scores, capacities, repair);
    p.capacity_violated = !p.association.feasible(capacities);
    return p;
}

// --- persistence -------------------------------------------------------------

namespace {

constexpr const char* kModelMagic = "mimo-assoc-mlp";

void write_values(std::ostream& out, const double* data, Eigen::Index count)
{
    for (Eigen::Index i = 0; i < count; ++i) out << (i ? " " : "") << data[i];
    out << '\n';
}

class TokenReader {
public:
    explicit TokenReader(std::istream& in) : in_(in) {}

    std::string word(const char* what)
    {
        std::string tok;
        if (!(in_ >> tok)) throw FormatError(std::string("model file truncated while reading ") + what);
        return tok;
    }

    void expect(const std::string& keyword)
    {
        const std::string tok = word(keyword.c_str());
        if (tok != keyword) throw FormatError("model file: expected '" + keyword + "', found '" + tok + "'");
    }

    long integer(const char* what)
    {
        const std::string tok = word(what);
        char* end = nullptr;
        const long v = std::strtol(tok.c_str(), &end, 10);
        if (end == tok.c_str() || *end != '\0') throw FormatError(std::string("model file: bad integer for ") + what);
        return v;
    }

    double real(const char* what)
    {
        const std::string tok = word(what);
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') throw FormatError(std::string("model file: bad number for ") + what);
        return v;
    }

private:
    std::istream& in_;
};

}  // namespace

void save_model(std::ostream& out, const Mlp& mlp)
{
    out << kModelMagic << ' ' << kModelVersion << '\n';
    out << "layers " << mlp.layer_sizes.size();
    for (int n : mlp.layer_sizes) out << ' ' << n;
    out << "\nactivations";
    for (auto a : mlp.activations) out << ' ' << to_string(a);
    out << '\n' << std::hexfloat;
    for (int l = 0; l < mlp.num_layers(); ++l) {
        // Row-major weights.
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w = mlp.weights[l];
        out << "weights " << l << ' ' << w.rows() << ' ' << w.cols() << '\n';
        write_values(out, w.data(), w.size());
        out << "biases " << l << ' ' << mlp.biases[l].size() << '\n';
        write_values(out, mlp.biases[l].data(), mlp.biases[l].size());
    }
    out << std::defaultfloat << "end\n";
    if (!out) throw IoError("model: write failed");
}

void save_model(const std::string& path, const Mlp& mlp)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    save_model(out, mlp);
}

Mlp load_model(std::istream& in)
{
    TokenReader rd(in);
    rd.expect(kModelMagic);
    const long version = rd.integer("version");
    if (version != kModelVersion)
        throw UnsupportedVersionError("model file version " + std::to_string(version) + " is not supported (expected " +
                                      std::to_string(kModelVersion) + ")");
    rd.expect("layers");
    const long count = rd.integer("layer count");
    if (count < 2 || count > 1000) throw FormatError("model file: implausible layer count");
    Mlp mlp;
    for (long i = 0; i < count; ++i) {
        const long n = rd.integer("layer size");
        if (n < 1) throw FormatError("model file: layer sizes must be positive");
        mlp.layer_sizes.push_back(static_cast<int>(n));
    }
    rd.expect("activations");
    for (long i = 0; i + 1 < count; ++i) mlp.activations.push_back(parse_activation(rd.word("activation")));
    for (long l = 0; l + 1 < count; ++l) {
        rd.expect("weights");
        const long idx = rd.integer("layer index");
        const long rows = rd.integer("rows");
        const long cols = rd.integer("cols");
        if (idx != l || rows != mlp.layer_sizes[l + 1] || cols != mlp.layer_sizes[l])
            throw FormatError("model file: weight block " + std::to_string(l) + " has the wrong shape");
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w(rows, cols);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rd.real("weight");
        mlp.weights.emplace_back(w);
        rd.expect("biases");
        const long bidx = rd.integer("layer index");
        const long bn = rd.integer("bias count");
        if (bidx != l || bn != rows) throw FormatError("model file: bias block " + std::to_string(l) + " has the wrong shape");
        Eigen::VectorXd b(bn);
        for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rd.real("bias");
        mlp.biases.push_back(std::move(b));
    }
    rd.expect("end");
    return mlp;
}

Mlp load_model(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model " + path);
    return load_model(in);
}

}  // namespace mimo
