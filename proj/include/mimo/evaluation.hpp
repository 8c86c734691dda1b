#pragma once

#include "mimo/dataset.hpp"
#include "mimo/mlp.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace mimo {

struct SampleEvaluation {
    std::uint64_t seed = 0;
    double optimal_sum_rate = 0.0;    // bit/s
    double raw_sum_rate = 0.0;        // argmax decoding, capacities ignored
    double repaired_sum_rate = 0.0;   // argmax decoding + capacity repair
    double raw_ratio = 0.0;
    double repaired_ratio = 0.0;
    bool raw_capacity_violated = false;
    double mse = 0.0;                 // mean squared error of the raw outputs vs the label
};

struct EvaluationReport {
    CombinerKind combiner = CombinerKind::mmse;
    int users = 0;
    std::vector<SampleEvaluation> samples;

    double median_ratio() const;
    double median_raw_ratio() const;
    double median_mse() const;
};

double median(std::vector<double> values);

struct CdfPoint {
    double value = 0.0;
    double quantile = 0.0;
};

// Sorted values with quantile (i + 1) / n.
std::vector<CdfPoint> empirical_cdf(std::vector<double> values);

// `outputs[i]` are the K*M network scores for test.samples[i].
EvaluationReport evaluate_outputs(const DatasetFile& test, const std::vector<Eigen::VectorXd>& outputs);
EvaluationReport evaluate_model(const Mlp& mlp, const DatasetFile& test);

// Writes samples.csv, cdf_avg_user_rate.csv, cdf_mse.csv and summary.txt.
void write_report(const EvaluationReport& report, const std::string& dir);
std::string summary_line(const EvaluationReport& report);

}  // namespace mimo
