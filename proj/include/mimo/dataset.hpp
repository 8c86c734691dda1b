#pragma once

#include "mimo/assignment.hpp"
#include "mimo/config.hpp"
#include "mimo/propagation.hpp"
#include "mimo/receiver.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mimo {

inline constexpr int kDatasetVersion = 1;

struct TrainingSample {
    std::uint64_t seed = 0;
    CombinerKind combiner = CombinerKind::mmse;
    std::vector<Point> ue_positions;
    std::vector<double> features;
    std::vector<double> label;  // K * M, row-major one-hot rows of rho*
    Eigen::MatrixXd rates;      // K x M ergodic rates the label was solved from
};

struct DatasetHeader {
    int version = kDatasetVersion;
    NetworkConfig config = default_network_config();
    int n_fading = 50;
    CombinerKind combiner = CombinerKind::mmse;
    std::uint64_t generation_seed = 0;

    // Same network, fading count and combiner (seed may differ).
    bool compatible_with(const DatasetHeader& other) const;
};

struct DatasetFile {
    DatasetHeader header;
    std::vector<TrainingSample> samples;
};

// [x_0/edge, y_0/edge, ..., x_{K-1}/edge, y_{K-1}/edge, d_0/K, ..., d_{M-1}/K]
std::vector<double> encode_features(std::span<const Point> ue_positions, std::span<const int> capacities,
                                    const NetworkConfig& cfg);

std::vector<double> encode_labels(const Association& assoc);

// Per-user argmax over its M-slice (ties to the lowest BS index). With
// `repair`, users on over-full BSs are displaced lowest-margin first to their
// best BS with residual capacity (unassigned if none is left).
Association decode_labels(std::span<const double> scores, std::span<const int> capacities, bool repair);

// The repair step on its own, applied to an arbitrary starting association.
Association repair_capacity(std::span<const double> scores, Association assoc, std::span<const int> capacities);

// Seed of sample `index` in a dataset generated from `base_seed`.
std::uint64_t sample_seed(std::uint64_t base_seed, std::uint64_t index);

TrainingSample generate_sample(const NetworkConfig& cfg, const PilotPlan& plan, CombinerKind kind, int n_fading,
                               std::uint64_t seed);

// Both labelings of one position draw, rates sharing the same fading blocks.
struct SamplePair {
    TrainingSample mr;
    TrainingSample mmse;
};

SamplePair generate_sample_pair(const NetworkConfig& cfg, const PilotPlan& plan, int n_fading, std::uint64_t seed);

// Samples are generated in parallel (OpenMP) and stored in seed order.
DatasetFile generate_dataset(const NetworkConfig& cfg, CombinerKind kind, int n_fading, int count,
                             std::uint64_t seed);
DatasetFile generate_dataset_serial(const NetworkConfig& cfg, CombinerKind kind, int n_fading, int count,
                                    std::uint64_t seed);

struct DatasetPair {
    DatasetFile mr;
    DatasetFile mmse;
};

DatasetPair generate_dataset_pair(const NetworkConfig& cfg, int n_fading, int count, std::uint64_t seed);

struct DatasetSplit {
    DatasetFile train;
    DatasetFile validation;
    DatasetFile test;
};

// Seeded shuffle, then consecutive slices of the requested sizes.
DatasetSplit split(const DatasetFile& data, int n_train, int n_val, int n_test, std::uint64_t seed);

// Newline-delimited JSON: one header record, then one record per sample.
void write_dataset(std::ostream& out, const DatasetFile& data);
void write_dataset(const std::string& path, const DatasetFile& data);
DatasetFile read_dataset(std::istream& in);
DatasetFile read_dataset(const std::string& path);

// Feature / label matrices (one column per sample) for training.
Eigen::MatrixXd feature_matrix(const DatasetFile& data);
Eigen::MatrixXd label_matrix(const DatasetFile& data);

}  // namespace mimo
