#include "mimo/config.hpp"

#include "mimo/errors.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

namespace mimo {

double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double watt_to_dbm(double watt) { return 10.0 * std::log10(watt) + 30.0; }

void NetworkConfig::validate() const
{
    auto fail = [](const std::string& what) { throw DomainError("network config: " + what); };
    if (num_bs < 1 || antennas < 1 || users < 1) fail("M, N and K must be at least 1");
    if (!(tx_power_w > 0.0) || !(noise_power_w > 0.0)) fail("powers must be positive");
    if (!(bandwidth_hz > 0.0)) fail("bandwidth must be positive");
    if (tau_p < 1 || tau_u < 0 || tau_c < 1) fail("frame lengths must be positive");
    if (tau_p + tau_u > tau_c) fail("tau_p + tau_u exceeds tau_c");
    if (!(area_edge_m > 0.0)) fail("area edge must be positive");
    if (static_cast<int>(bs_positions.size()) != num_bs) fail("need one BS position per BS");
    if (static_cast<int>(capacities.size()) != num_bs) fail("need one capacity per BS");
    for (const auto& p : bs_positions) {
        if (p.x < 0.0 || p.y < 0.0 || p.x > area_edge_m || p.y > area_edge_m)
            fail("BS position outside the service area");
    }
    for (int d : capacities) {
        if (d < 0) fail("capacities must be non-negative");
    }
    if (asd_deg < 0.0) fail("angular spread must be non-negative");
    if (!(antenna_spacing > 0.0)) fail("antenna spacing must be positive");
}

NetworkConfig default_network_config()
{
    NetworkConfig cfg;
    cfg.tx_power_w = dbm_to_watt(20.0);
    cfg.noise_power_w = dbm_to_watt(-94.0);
    cfg.bs_positions = {{250.0, 250.0}, {250.0, 750.0}, {750.0, 250.0}, {750.0, 750.0}};
    cfg.capacities = {15, 15, 15, 15};
    return cfg;
}

std::string to_string(CombinerKind kind) { return kind == CombinerKind::mr ? "mr" : "mmse"; }

CombinerKind parse_combiner(const std::string& text)
{
    if (text == "mr") return CombinerKind::mr;
    if (text == "mmse" || text == "m-mmse") return CombinerKind::mmse;
    throw DomainError("unknown combiner '" + text + "' (expected mr or mmse)");
}

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v)
{
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || v.empty()) throw DomainError("config key '" + key + "': not a number: " + v);
    return out;
}

long long to_int(const std::string& key, const std::string& v)
{
    std::size_t used = 0;
    long long out = 0;
    try {
        out = std::stoll(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || v.empty()) throw DomainError("config key '" + key + "': not an integer: " + v);
    return out;
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

}  // namespace

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value)
{
    auto& net = cfg.network;
    using Setter = std::function<void(const std::string&)>;
    const std::map<std::string, Setter> setters{
        {"num_bs", [&](auto& v) { net.num_bs = static_cast<int>(to_int(key, v)); }},
        {"antennas", [&](auto& v) { net.antennas = static_cast<int>(to_int(key, v)); }},
        {"users", [&](auto& v) { net.users = static_cast<int>(to_int(key, v)); }},
        {"tx_power_dbm", [&](auto& v) { net.tx_power_w = dbm_to_watt(to_double(key, v)); }},
        {"noise_power_dbm", [&](auto& v) { net.noise_power_w = dbm_to_watt(to_double(key, v)); }},
        {"bandwidth_hz", [&](auto& v) { net.bandwidth_hz = to_double(key, v); }},
        {"tau_c", [&](auto& v) { net.tau_c = static_cast<int>(to_int(key, v)); }},
        {"tau_p", [&](auto& v) { net.tau_p = static_cast<int>(to_int(key, v)); }},
        {"tau_u", [&](auto& v) { net.tau_u = static_cast<int>(to_int(key, v)); }},
        {"area_edge_m", [&](auto& v) { net.area_edge_m = to_double(key, v); }},
        {"asd_deg", [&](auto& v) { net.asd_deg = to_double(key, v); }},
        {"antenna_spacing", [&](auto& v) { net.antenna_spacing = to_double(key, v); }},
        {"bs_positions",
         [&](auto& v) {
             net.bs_positions.clear();
             for (const auto& pair : split(v, ';')) {
                 const auto xy = split(pair, ',');
                 if (xy.size() != 2) throw DomainError("bs_positions: expected 'x,y;x,y;...'");
                 net.bs_positions.push_back({to_double(key, xy[0]), to_double(key, xy[1])});
             }
         }},
        {"capacities",
         [&](auto& v) {
             net.capacities.clear();
             for (const auto& d : split(v, ',')) net.capacities.push_back(static_cast<int>(to_int(key, d)));
         }},
        {"n_fading", [&](auto& v) { cfg.n_fading = static_cast<int>(to_int(key, v)); }},
        {"combiner", [&](auto& v) { cfg.combiner = parse_combiner(v); }},
        {"samples", [&](auto& v) { cfg.samples = static_cast<int>(to_int(key, v)); }},
        {"seed", [&](auto& v) { cfg.seed = static_cast<std::uint64_t>(to_int(key, v)); }},
        {"epochs", [&](auto& v) { cfg.epochs = static_cast<int>(to_int(key, v)); }},
        {"batch_size", [&](auto& v) { cfg.batch_size = static_cast<int>(to_int(key, v)); }},
        {"learning_rate", [&](auto& v) { cfg.learning_rate = to_double(key, v); }},
        {"hidden_layers",
         [&](auto& v) {
             cfg.hidden_layers.clear();
             for (const auto& n : split(v, ',')) cfg.hidden_layers.push_back(static_cast<int>(to_int(key, n)));
         }},
    };
    const auto it = setters.find(key);
    if (it == setters.end()) throw DomainError("unknown config key '" + key + "'");
    it->second(value);
}

RunConfig parse_run_config(std::istream& in, RunConfig base)
{
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DomainError("config line " + std::to_string(lineno) + ": expected key = value");
        apply_config_entry(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return base;
}

RunConfig load_run_config(const std::string& path, RunConfig base)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    return parse_run_config(in, std::move(base));
}

}  // namespace mimo
