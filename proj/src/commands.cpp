#include "mimo/commands.hpp"

#include "mimo/dataset.hpp"
#include "mimo/errors.hpp"
#include "mimo/evaluation.hpp"
#include "mimo/mlp.hpp"
#include "mimo/selftest.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>

namespace mimo {

namespace {

constexpr const char* kThreadsEnv = "MIMO_ASSOC_THREADS";

void apply_thread_env()
{
    if (const char* v = std::getenv(kThreadsEnv)) {
        const int n = std::atoi(v);
        if (n > 0) omp_set_num_threads(n);
    }
}

struct GenerateArgs {
    std::string config;
    std::optional<int> samples;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> combiner;
    std::optional<int> n_fading;
    std::string out;
};

struct SplitArgs {
    std::string in;
    std::string train_out;
    std::string val_out;
    std::string test_out;
    int n_train = 0;
    int n_val = 0;
    int n_test = 0;
    std::uint64_t seed = 1;
};

struct TrainArgs {
    std::string config;
    std::string data;
    std::string val;
    std::optional<int> epochs;
    std::optional<std::uint64_t> seed;
    std::optional<int> batch_size;
    std::optional<double> learning_rate;
    std::string model_out;
    std::string metrics_out;
};

struct EvalArgs {
    std::string model;
    std::string test_data;
    std::string report_dir;
};

RunConfig resolve_config(const std::string& path)
{
    return path.empty() ? RunConfig{} : load_run_config(path);
}

int cmd_generate(const GenerateArgs& a, std::ostream& out, std::ostream& err)
{
    RunConfig cfg;
    try {
        cfg = resolve_config(a.config);
        if (a.samples) cfg.samples = *a.samples;
        if (a.seed) cfg.seed = *a.seed;
        if (a.combiner) cfg.combiner = parse_combiner(*a.combiner);
        if (a.n_fading) cfg.n_fading = *a.n_fading;
        cfg.network.validate();
        if (cfg.samples < 0) throw DomainError("--samples must be non-negative");
        if (cfg.n_fading < 1) throw DomainError("n_fading must be at least 1");
    } catch (const IoError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    }

    std::ofstream file(a.out, std::ios::binary);
    if (!file) {
        err << "I/O error: cannot open " << a.out << " for writing\n";
        return kExitIo;
    }
    err << "generating " << cfg.samples << " samples (" << to_string(cfg.combiner) << ", n_fading " << cfg.n_fading
        << ", seed " << cfg.seed << ") on " << omp_get_max_threads() << " thread(s)\n";
    const auto t0 = std::chrono::steady_clock::now();
    DatasetFile data;
    try {
        data = generate_dataset(cfg.network, cfg.combiner, cfg.n_fading, cfg.samples, cfg.seed);
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    try {
        write_dataset(file, data);
        file.close();
        if (!file) throw IoError("write failed for " + a.out);
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << '\n';
        return kExitIo;
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.1f s (%.2f samples/s)", secs, secs > 0 ? cfg.samples / secs : 0.0);
    err << "generated " << cfg.samples << " samples in " << buf << '\n';
    out << a.out << '\n';
    return kExitOk;
}

int cmd_split(const SplitArgs& a, std::ostream& out, std::ostream& err)
{
    DatasetFile data;
    try {
        data = read_dataset(a.in);
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        err << "format error: " << e.what() << '\n';
        return kExitConfig;
    }
    DatasetSplit parts;
    try {
        parts = split(data, a.n_train, a.n_val, a.n_test, a.seed);
    } catch (const std::exception& e) {
        err << "split error: " << e.what() << '\n';
        return kExitConfig;
    }
    try {
        write_dataset(a.train_out, parts.train);
        if (!a.val_out.empty()) write_dataset(a.val_out, parts.validation);
        if (!a.test_out.empty()) write_dataset(a.test_out, parts.test);
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << '\n';
        return kExitIo;
    }
    out << "train " << parts.train.samples.size() << " validation " << parts.validation.samples.size() << " test "
        << parts.test.samples.size() << '\n';
    return kExitOk;
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err)
{
    RunConfig cfg;
    DatasetFile train_set;
    DatasetFile val_set;
    try {
        cfg = resolve_config(a.config);
        if (a.epochs) cfg.epochs = *a.epochs;
        if (a.seed) cfg.seed = *a.seed;
        if (a.batch_size) cfg.batch_size = *a.batch_size;
        if (a.learning_rate) cfg.learning_rate = *a.learning_rate;
        if (cfg.epochs < 0 || cfg.batch_size < 1) throw DomainError("epochs must be >= 0 and batch size >= 1");
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    try {
        train_set = read_dataset(a.data);
        if (!a.val.empty()) val_set = read_dataset(a.val);
        else val_set.header = train_set.header;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        err << "format error: " << e.what() << '\n';
        return kExitConfig;
    }
    if (!train_set.header.compatible_with(val_set.header)) {
        err << "header mismatch between training and validation data\n";
        return kExitConfig;
    }
    if (train_set.samples.empty()) {
        err << "training set is empty\n";
        return kExitConfig;
    }

    const NetworkConfig& net = train_set.header.config;
    TrainOptions opts;
    opts.epochs = cfg.epochs;
    opts.batch_size = cfg.batch_size;
    opts.seed = cfg.seed;
    opts.optimizer.learning_rate = cfg.learning_rate;
    TrainResult result;
    try {
        Mlp mlp = association_network(2 * net.users + net.num_bs, net.users * net.num_bs, cfg.seed, cfg.hidden_layers);
        result = train(std::move(mlp), feature_matrix(train_set), label_matrix(train_set), feature_matrix(val_set),
                       label_matrix(val_set), opts);
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
    try {
        save_model(a.model_out, result.model);
        if (!a.metrics_out.empty()) {
            std::ofstream m(a.metrics_out, std::ios::binary);
            if (!m) throw IoError("cannot open " + a.metrics_out);
            m << "epoch,train_mse,val_mse\n";
            for (const auto& e : result.metrics) {
                char buf[96];
                std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", e.epoch, e.train_mse, e.val_mse);
                m << buf;
            }
            if (!m) throw IoError("write failed for " + a.metrics_out);
        }
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << '\n';
        return kExitIo;
    }
    for (const auto& e : result.metrics) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "epoch %3d  train %.4f  val %.4f\n", e.epoch, e.train_mse, e.val_mse);
        err << buf;
    }
    out << a.model_out << '\n';
    return kExitOk;
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err)
{
    Mlp mlp;
    DatasetFile test;
    try {
        mlp = load_model(a.model);
        test = read_dataset(a.test_data);
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        err << "format error: " << e.what() << '\n';
        return kExitConfig;
    }
    EvaluationReport report;
    try {
        report = evaluate_model(mlp, test);
    } catch (const DomainError& e) {
        err << "dimension mismatch: " << e.what() << '\n';
        return kExitConfig;
    }
    try {
        write_report(report, a.report_dir);
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << '\n';
        return kExitIo;
    }
    out << summary_line(report) << '\n';
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    apply_thread_env();
    CLI::App app{"Massive MIMO user association: optimal labels, neural predictor, evaluation"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Generate a labeled dataset");
    g->add_option("config,--config", gen.config, "Config file (key = value)")->check(CLI::ExistingFile);
    g->add_option("--samples", gen.samples, "Number of samples");
    g->add_option("--seed", gen.seed, "Generation seed");
    g->add_option("--combiner", gen.combiner, "mr or mmse");
    g->add_option("--n-fading", gen.n_fading, "Fading blocks per rate estimate");
    g->add_option("--out", gen.out, "Output dataset path")->required();

    SplitArgs sp;
    auto* s = app.add_subcommand("split", "Split a dataset into train/validation/test files");
    s->add_option("--in", sp.in, "Input dataset")->required();
    s->add_option("--train", sp.n_train, "Training samples")->required();
    s->add_option("--val", sp.n_val, "Validation samples");
    s->add_option("--test", sp.n_test, "Test samples");
    s->add_option("--seed", sp.seed, "Shuffle seed");
    s->add_option("--train-out", sp.train_out, "Training output path")->required();
    s->add_option("--val-out", sp.val_out, "Validation output path");
    s->add_option("--test-out", sp.test_out, "Test output path");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train the association network");
    t->add_option("--config", tr.config, "Config file (epochs, batch_size, learning_rate, hidden_layers, seed)")
        ->check(CLI::ExistingFile);
    t->add_option("--data", tr.data, "Training dataset")->required();
    t->add_option("--val", tr.val, "Validation dataset");
    t->add_option("--epochs", tr.epochs, "Training epochs");
    t->add_option("--seed", tr.seed, "Initialization and shuffle seed");
    t->add_option("--batch-size", tr.batch_size, "Mini-batch size");
    t->add_option("--lr", tr.learning_rate, "NADAM learning rate");
    t->add_option("--model-out", tr.model_out, "Model output path")->required();
    t->add_option("--metrics-out", tr.metrics_out, "Per-epoch MSE table (CSV)");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Evaluate a model against solver-optimal associations");
    e->add_option("--model", ev.model, "Model file")->required();
    e->add_option("--test-data", ev.test_data, "Test dataset")->required();
    e->add_option("--report-dir", ev.report_dir, "Report output directory")->required();

    bool inject_fault = false;
    auto* st = app.add_subcommand("selftest", "Run the embedded oracle suites");
    st->add_flag("--inject-solver-fault", inject_fault, "Corrupt one solver cost (checks the harness)")
        ->group("");

    std::vector<std::string> rev(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(rev.begin(), rev.end());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& pe) {
        err << pe.what() << '\n';
        return kExitConfig;
    }

    if (*g) return cmd_generate(gen, out, err);
    if (*s) return cmd_split(sp, out, err);
    if (*t) return cmd_train(tr, out, err);
    if (*e) return cmd_eval(ev, out, err);
    SelftestOptions opts;
    opts.inject_solver_fault = inject_fault;
    return run_selftest(out, opts) ? kExitOk : kExitFailure;
}

}  // namespace mimo
