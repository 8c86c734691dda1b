#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace mimo {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

double dbm_to_watt(double dbm);
double watt_to_dbm(double watt);

// Physical and protocol constants of the uplink network. Powers are linear
// (watts); the dBm values they came from are kept for reporting only.
struct NetworkConfig {
    int num_bs = 4;             // M
    int antennas = 64;          // N
    int users = 40;             // K (all users in the area)
    double tx_power_w = 0.1;    // p
    double noise_power_w = 0.0; // sigma^2
    double bandwidth_hz = 20e6; // B
    int tau_c = 200;
    int tau_p = 10;
    int tau_u = 190;
    double area_edge_m = 1000.0;
    std::vector<Point> bs_positions;
    std::vector<int> capacities;  // d_m
    double asd_deg = 10.0;
    double antenna_spacing = 0.5;  // wavelengths

    double tx_power_dbm() const { return watt_to_dbm(tx_power_w); }
    double noise_power_dbm() const { return watt_to_dbm(noise_power_w); }
    double uplink_fraction() const { return static_cast<double>(tau_u) / tau_c; }

    // Throws DomainError on any broken invariant.
    void validate() const;
};

// Four BSs on a 1 km square, 64 antennas, 40 users, 20 dBm uplink power,
// -94 dBm noise, 20 MHz, d_m = 15.
NetworkConfig default_network_config();

enum class CombinerKind { mr, mmse };

std::string to_string(CombinerKind kind);
CombinerKind parse_combiner(const std::string& text);

// Everything a CLI run needs; the network part plus protocol knobs.
struct RunConfig {
    NetworkConfig network = default_network_config();
    int n_fading = 50;
    CombinerKind combiner = CombinerKind::mmse;
    int samples = 0;
    std::uint64_t seed = 1;
    int epochs = 50;
    int batch_size = 128;
    double learning_rate = 1e-3;
    std::vector<int> hidden_layers{128, 64, 64};
};

// Flat "key = value" text. '#' starts a comment. Unknown keys are an error.
// Recognized keys are listed in README.md.
RunConfig parse_run_config(std::istream& in, RunConfig base = {});
RunConfig load_run_config(const std::string& path, RunConfig base = {});
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);

}  // namespace mimo
