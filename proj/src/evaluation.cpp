#include "mimo/evaluation.hpp"

#include "mimo/errors.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace mimo {

double median(std::vector<double> values)
{
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

template <typename Fn>
std::vector<double> collect(const EvaluationReport& r, Fn&& fn)
{
    std::vector<double> out;
    out.reserve(r.samples.size());
    for (const auto& s : r.samples) out.push_back(fn(s));
    return out;
}

}  // namespace

double EvaluationReport::median_ratio() const
{
    return median(collect(*this, [](const SampleEvaluation& s) { return s.repaired_ratio; }));
}

double EvaluationReport::median_raw_ratio() const
{
    return median(collect(*this, [](const SampleEvaluation& s) { return s.raw_ratio; }));
}

double EvaluationReport::median_mse() const
{
    return median(collect(*this, [](const SampleEvaluation& s) { return s.mse; }));
}

std::vector<CdfPoint> empirical_cdf(std::vector<double> values)
{
    std::sort(values.begin(), values.end());
    std::vector<CdfPoint> out;
    out.reserve(values.size());
    const double n = static_cast<double>(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out.push_back({values[i], static_cast<double>(i + 1) / n});
    return out;
}

EvaluationReport evaluate_outputs(const DatasetFile& test, const std::vector<Eigen::VectorXd>& outputs)
{
    const NetworkConfig& cfg = test.header.config;
    if (outputs.size() != test.samples.size()) throw DomainError("evaluate: one output vector per sample required");
    EvaluationReport report;
    report.combiner = test.header.combiner;
    report.users = cfg.users;
    report.samples.resize(test.samples.size());

    for (std::size_t i = 0; i < test.samples.size(); ++i) {
        const TrainingSample& s = test.samples[i];
        const Eigen::VectorXd& out = outputs[i];
        if (out.size() != static_cast<Eigen::Index>(s.label.size()))
            throw DomainError("evaluate: output length does not match the label length");
        const std::span<const double> scores(out.data(), static_cast<std::size_t>(out.size()));
        const Association optimal = solve_association(s.rates, cfg.capacities).association;
        const Association raw = decode_labels(scores, cfg.capacities, false);
        const Association repaired = repair_capacity(scores, raw, cfg.capacities);

        SampleEvaluation& e = report.samples[i];
        e.seed = s.seed;
        e.optimal_sum_rate = sum_rate(optimal, s.rates, cfg);
        e.raw_sum_rate = sum_rate(raw, s.rates, cfg);
        e.repaired_sum_rate = sum_rate(repaired, s.rates, cfg);
        const double denom = e.optimal_sum_rate > 0.0 ? e.optimal_sum_rate : 1.0;
        e.raw_ratio = e.optimal_sum_rate > 0.0 ? e.raw_sum_rate / denom : 1.0;
        e.repaired_ratio = e.optimal_sum_rate > 0.0 ? e.repaired_sum_rate / denom : 1.0;
        e.raw_capacity_violated = !raw.feasible(cfg.capacities);
        const Eigen::Map<const Eigen::VectorXd> label(s.label.data(), static_cast<Eigen::Index>(s.label.size()));
        e.mse = (out - label).squaredNorm() / static_cast<double>(label.size());
    }
    return report;
}

EvaluationReport evaluate_model(const Mlp& mlp, const DatasetFile& test)
{
    const NetworkConfig& cfg = test.header.config;
    if (mlp.input_size() != 2 * cfg.users + cfg.num_bs || mlp.output_size() != cfg.users * cfg.num_bs)
        throw DomainError("evaluate: model dimensions (" + std::to_string(mlp.input_size()) + " -> " +
                          std::to_string(mlp.output_size()) + ") do not match the dataset");
    const Eigen::MatrixXd scores = test.samples.empty() ? Eigen::MatrixXd() : forward_batch(mlp, feature_matrix(test));
    std::vector<Eigen::VectorXd> outputs;
    outputs.reserve(test.samples.size());
    for (Eigen::Index i = 0; i < scores.cols(); ++i) outputs.emplace_back(scores.col(i));
    return evaluate_outputs(test, outputs);
}

namespace {

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_report(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

}  // namespace

std::string summary_line(const EvaluationReport& report)
{
    return "combiner=" + to_string(report.combiner) + " samples=" + std::to_string(report.samples.size()) +
           " median_optimality_ratio=" + fmt(report.median_ratio()) +
           " median_optimality_ratio_raw=" + fmt(report.median_raw_ratio()) + " median_mse=" + fmt(report.median_mse());
}

void write_report(const EvaluationReport& report, const std::string& dir)
{
    const std::filesystem::path root(dir);
    std::error_code ec;
    std::filesystem::create_directories(root, ec);
    if (ec) throw IoError("cannot create report directory " + dir);

    {
        auto out = open_report(root / "samples.csv");
        out << "seed,optimal_sum_rate,raw_sum_rate,repaired_sum_rate,raw_ratio,repaired_ratio,"
               "raw_capacity_violated,mse\n";
        for (const auto& s : report.samples) {
            out << s.seed << ',' << fmt(s.optimal_sum_rate) << ',' << fmt(s.raw_sum_rate) << ','
                << fmt(s.repaired_sum_rate) << ',' << fmt(s.raw_ratio) << ',' << fmt(s.repaired_ratio) << ','
                << (s.raw_capacity_violated ? 1 : 0) << ',' << fmt(s.mse) << '\n';
        }
    }
    {
        // Average user rate = sum-rate / K, one CDF per association source.
        const double k = static_cast<double>(std::max(report.users, 1));
        auto out = open_report(root / "cdf_avg_user_rate.csv");
        out << "series,value,quantile\n";
        const auto optimal = collect(report, [&](const SampleEvaluation& s) { return s.optimal_sum_rate / k; });
        const auto predicted = collect(report, [&](const SampleEvaluation& s) { return s.repaired_sum_rate / k; });
        for (const auto& p : empirical_cdf(optimal)) out << "optimal," << fmt(p.value) << ',' << fmt(p.quantile) << '\n';
        for (const auto& p : empirical_cdf(predicted)) out << "predicted," << fmt(p.value) << ',' << fmt(p.quantile) << '\n';
    }
    {
        auto out = open_report(root / "cdf_mse.csv");
        out << "value,quantile\n";
        for (const auto& p : empirical_cdf(collect(report, [](const SampleEvaluation& s) { return s.mse; })))
            out << fmt(p.value) << ',' << fmt(p.quantile) << '\n';
    }
    {
        auto out = open_report(root / "summary.txt");
        out << summary_line(report) << '\n';
    }
}

}  // namespace mimo
