#include "mimo/dataset.hpp"

#include "mimo/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

namespace mimo {

using nlohmann::json;

bool DatasetHeader::compatible_with(const DatasetHeader& other) const
{
    const NetworkConfig& a = config;
    const NetworkConfig& b = other.config;
    return version == other.version && n_fading == other.n_fading && combiner == other.combiner &&
           a.num_bs == b.num_bs && a.antennas == b.antennas && a.users == b.users &&
           a.tx_power_w == b.tx_power_w && a.noise_power_w == b.noise_power_w &&
           a.bandwidth_hz == b.bandwidth_hz && a.tau_c == b.tau_c && a.tau_p == b.tau_p &&
           a.tau_u == b.tau_u && a.area_edge_m == b.area_edge_m && a.bs_positions == b.bs_positions &&
           a.capacities == b.capacities && a.asd_deg == b.asd_deg && a.antenna_spacing == b.antenna_spacing;
}

std::vector<double> encode_features(std::span<const Point> ue_positions, std::span<const int> capacities,
                                    const NetworkConfig& cfg)
{
    if (static_cast<int>(ue_positions.size()) != cfg.users || static_cast<int>(capacities.size()) != cfg.num_bs)
        throw DomainError("encode_features: expected K positions and M capacities");
    std::vector<double> out;
    out.reserve(2 * ue_positions.size() + capacities.size());
    for (const Point& p : ue_positions) {
        out.push_back(p.x / cfg.area_edge_m);
        out.push_back(p.y / cfg.area_edge_m);
    }
    for (int d : capacities) out.push_back(static_cast<double>(d) / cfg.users);
    return out;
}

std::vector<double> encode_labels(const Association& assoc)
{
    std::vector<double> out(static_cast<std::size_t>(assoc.users()) * assoc.num_bs(), 0.0);
    for (int k = 0; k < assoc.users(); ++k) {
        if (assoc.serving(k) != Association::kUnassigned)
            out[static_cast<std::size_t>(k) * assoc.num_bs() + assoc.serving(k)] = 1.0;
    }
    return out;
}

Association repair_capacity(std::span<const double> scores, Association assoc, std::span<const int> capacities)
{
    const int users = assoc.users();
    const int num_bs = assoc.num_bs();
    if (static_cast<int>(capacities.size()) != num_bs || scores.size() != static_cast<std::size_t>(users) * num_bs)
        throw DomainError("repair_capacity: dimension mismatch");
    auto score = [&](int k, int m) { return scores[static_cast<std::size_t>(k) * num_bs + m]; };
    std::vector<int> load = assoc.loads();

    for (int m = 0; m < num_bs; ++m) {
        if (load[m] <= capacities[m]) continue;
        struct Member {
            double margin;
            int user;
        };
        std::vector<Member> members;
        for (int k = 0; k < users; ++k) {
            if (assoc.serving(k) != m) continue;
            double runner_up = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < num_bs; ++j) {
                if (j != m) runner_up = std::max(runner_up, score(k, j));
            }
            members.push_back({score(k, m) - runner_up, k});
        }
        std::stable_sort(members.begin(), members.end(),
                         [](const Member& a, const Member& b) { return a.margin < b.margin; });
        const int excess = load[m] - capacities[m];
        for (int i = 0; i < excess; ++i) {
            const int k = members[i].user;
            assoc.unassign(k);
            --load[m];
            int target = Association::kUnassigned;
            for (int j = 0; j < num_bs; ++j) {
                if (j == m || load[j] >= capacities[j]) continue;
                if (target == Association::kUnassigned || score(k, j) > score(k, target)) target = j;
            }
            if (target != Association::kUnassigned) {
                assoc.assign(k, target);
                ++load[target];
            }
        }
    }
    return assoc;
}

Association decode_labels(std::span<const double> scores, std::span<const int> capacities, bool repair)
{
    const int num_bs = static_cast<int>(capacities.size());
    if (num_bs == 0 || scores.size() % num_bs != 0) throw DomainError("decode_labels: length is not a multiple of M");
    const int users = static_cast<int>(scores.size() / num_bs);
    Association assoc(users, num_bs);
    for (int k = 0; k < users; ++k) {
        const auto slice = scores.subspan(static_cast<std::size_t>(k) * num_bs, num_bs);
        assoc.assign(k, static_cast<int>(std::max_element(slice.begin(), slice.end()) - slice.begin()));
    }
    return repair ? repair_capacity(scores, std::move(assoc), capacities) : assoc;
}

std::uint64_t sample_seed(std::uint64_t base_seed, std::uint64_t index) { return derive_seed(base_seed, index); }

namespace {

TrainingSample make_sample(const NetworkConfig& cfg, std::uint64_t seed, CombinerKind kind,
                           std::vector<Point> positions, const RateMatrix& rates)
{
    const SolveResult solved = solve_association(rates, cfg.capacities);
    TrainingSample s;
    s.seed = seed;
    s.combiner = kind;
    s.features = encode_features(positions, cfg.capacities, cfg);
    s.label = encode_labels(solved.association);
    s.ue_positions = std::move(positions);
    s.rates = rates.r;
    return s;
}

std::vector<Point> sample_positions(const NetworkConfig& cfg, std::uint64_t seed)
{
    Rng rng = make_stream(seed, 0);
    return draw_positions(cfg, rng);
}

std::uint64_t fading_seed(std::uint64_t seed) { return derive_seed(seed, 1); }

template <typename Fn>
auto with_seed_context(std::uint64_t seed, Fn&& fn)
{
    try {
        return fn();
    } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " [sample seed " + std::to_string(seed) + "]");
    }
}

}  // namespace

TrainingSample generate_sample(const NetworkConfig& cfg, const PilotPlan& plan, CombinerKind kind, int n_fading,
                               std::uint64_t seed)
{
    return with_seed_context(seed, [&] {
        auto positions = sample_positions(cfg, seed);
        const Scenario scn = build_scenario(cfg, positions);
        const RateMatrix rates = rate_matrix_serial(scn, plan, cfg, kind, n_fading, fading_seed(seed));
        return make_sample(cfg, seed, kind, std::move(positions), rates);
    });
}

SamplePair generate_sample_pair(const NetworkConfig& cfg, const PilotPlan& plan, int n_fading, std::uint64_t seed)
{
    return with_seed_context(seed, [&] {
        auto positions = sample_positions(cfg, seed);
        const Scenario scn = build_scenario(cfg, positions);
        const RatePair rates = rate_matrices(scn, plan, cfg, n_fading, fading_seed(seed));
        SamplePair out;
        out.mr = make_sample(cfg, seed, CombinerKind::mr, positions, rates.mr);
        out.mmse = make_sample(cfg, seed, CombinerKind::mmse, std::move(positions), rates.mmse);
        return out;
    });
}

namespace {

DatasetHeader make_header(const NetworkConfig& cfg, CombinerKind kind, int n_fading, std::uint64_t seed)
{
    DatasetHeader h;
    h.config = cfg;
    h.n_fading = n_fading;
    h.combiner = kind;
    h.generation_seed = seed;
    return h;
}

void check_generation(const NetworkConfig& cfg, int n_fading, int count)
{
    cfg.validate();
    if (n_fading < 1) throw DomainError("generate: n_fading must be at least 1");
    if (count < 0) throw DomainError("generate: sample count must be non-negative");
}

}  // namespace

DatasetFile generate_dataset(const NetworkConfig& cfg, CombinerKind kind, int n_fading, int count,
                             std::uint64_t seed)
{
    check_generation(cfg, n_fading, count);
    const PilotPlan plan = make_pilot_plan(cfg);
    DatasetFile out{make_header(cfg, kind, n_fading, seed), std::vector<TrainingSample>(static_cast<std::size_t>(count))};
    std::vector<std::string> errors(static_cast<std::size_t>(count));

#pragma omp parallel for schedule(dynamic, 1)
    for (int i = 0; i < count; ++i) {
        try {
            out.samples[i] = generate_sample(cfg, plan, kind, n_fading, sample_seed(seed, i));
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }
    for (const auto& e : errors) {
        if (!e.empty()) throw NumericalError(e);
    }
    return out;
}

DatasetFile generate_dataset_serial(const NetworkConfig& cfg, CombinerKind kind, int n_fading, int count,
                                    std::uint64_t seed)
{
    check_generation(cfg, n_fading, count);
    const PilotPlan plan = make_pilot_plan(cfg);
    DatasetFile out{make_header(cfg, kind, n_fading, seed), {}};
    out.samples.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) out.samples.push_back(generate_sample(cfg, plan, kind, n_fading, sample_seed(seed, i)));
    return out;
}

DatasetPair generate_dataset_pair(const NetworkConfig& cfg, int n_fading, int count, std::uint64_t seed)
{
    check_generation(cfg, n_fading, count);
    const PilotPlan plan = make_pilot_plan(cfg);
    DatasetPair out;
    out.mr.header = make_header(cfg, CombinerKind::mr, n_fading, seed);
    out.mmse.header = make_header(cfg, CombinerKind::mmse, n_fading, seed);
    out.mr.samples.resize(static_cast<std::size_t>(count));
    out.mmse.samples.resize(static_cast<std::size_t>(count));
    std::vector<std::string> errors(static_cast<std::size_t>(count));

#pragma omp parallel for schedule(dynamic, 1)
    for (int i = 0; i < count; ++i) {
        try {
            SamplePair p = generate_sample_pair(cfg, plan, n_fading, sample_seed(seed, i));
            out.mr.samples[i] = std::move(p.mr);
            out.mmse.samples[i] = std::move(p.mmse);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }
    for (const auto& e : errors) {
        if (!e.empty()) throw NumericalError(e);
    }
    return out;
}

DatasetSplit split(const DatasetFile& data, int n_train, int n_val, int n_test, std::uint64_t seed)
{
    if (n_train < 0 || n_val < 0 || n_test < 0) throw DomainError("split: sizes must be non-negative");
    const std::size_t need = static_cast<std::size_t>(n_train) + n_val + n_test;
    if (need > data.samples.size())
        throw SizeError("split: requested " + std::to_string(need) + " samples but the dataset has " +
                        std::to_string(data.samples.size()));
    std::vector<std::size_t> order(data.samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, 0x5b1f));
    std::shuffle(order.begin(), order.end(), rng);

    DatasetSplit out{{data.header, {}}, {data.header, {}}, {data.header, {}}};
    std::size_t next = 0;
    auto take = [&](DatasetFile& dst, int n) {
        dst.samples.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) dst.samples.push_back(data.samples[order[next++]]);
    };
    take(out.train, n_train);
    take(out.validation, n_val);
    take(out.test, n_test);
    return out;
}

// --- serialization ---------------------------------------------------------

namespace {

constexpr const char* kFormatName = "mimo-assoc-dataset";

json config_to_json(const NetworkConfig& c)
{
    json bs = json::array();
    for (const auto& p : c.bs_positions) bs.push_back({p.x, p.y});
    return {{"num_bs", c.num_bs},
            {"antennas", c.antennas},
            {"users", c.users},
            {"tx_power_w", c.tx_power_w},
            {"tx_power_dbm", c.tx_power_dbm()},
            {"noise_power_w", c.noise_power_w},
            {"noise_power_dbm", c.noise_power_dbm()},
            {"bandwidth_hz", c.bandwidth_hz},
            {"tau_c", c.tau_c},
            {"tau_p", c.tau_p},
            {"tau_u", c.tau_u},
            {"area_edge_m", c.area_edge_m},
            {"bs_positions", bs},
            {"capacities", c.capacities},
            {"asd_deg", c.asd_deg},
            {"antenna_spacing", c.antenna_spacing}};
}

NetworkConfig config_from_json(const json& j)
{
    NetworkConfig c;
    c.num_bs = j.at("num_bs").get<int>();
    c.antennas = j.at("antennas").get<int>();
    c.users = j.at("users").get<int>();
    c.tx_power_w = j.at("tx_power_w").get<double>();
    c.noise_power_w = j.at("noise_power_w").get<double>();
    c.bandwidth_hz = j.at("bandwidth_hz").get<double>();
    c.tau_c = j.at("tau_c").get<int>();
    c.tau_p = j.at("tau_p").get<int>();
    c.tau_u = j.at("tau_u").get<int>();
    c.area_edge_m = j.at("area_edge_m").get<double>();
    c.bs_positions.clear();
    for (const auto& p : j.at("bs_positions")) c.bs_positions.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    c.capacities = j.at("capacities").get<std::vector<int>>();
    c.asd_deg = j.at("asd_deg").get<double>();
    c.antenna_spacing = j.at("antenna_spacing").get<double>();
    return c;
}

json sample_to_json(const TrainingSample& s)
{
    json pos = json::array();
    for (const auto& p : s.ue_positions) pos.push_back({p.x, p.y});
    json rates = json::array();
    for (Eigen::Index k = 0; k < s.rates.rows(); ++k) {
        json row = json::array();
        for (Eigen::Index m = 0; m < s.rates.cols(); ++m) row.push_back(s.rates(k, m));
        rates.push_back(std::move(row));
    }
    return {{"seed", s.seed}, {"positions", pos}, {"features", s.features}, {"label", s.label}, {"rates", rates}};
}

TrainingSample sample_from_json(const json& j, const DatasetHeader& h)
{
    const NetworkConfig& c = h.config;
    TrainingSample s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.combiner = h.combiner;
    for (const auto& p : j.at("positions")) s.ue_positions.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    s.features = j.at("features").get<std::vector<double>>();
    s.label = j.at("label").get<std::vector<double>>();
    const auto& rates = j.at("rates");
    s.rates.resize(static_cast<Eigen::Index>(rates.size()), c.num_bs);
    for (std::size_t k = 0; k < rates.size(); ++k) {
        if (rates[k].size() != static_cast<std::size_t>(c.num_bs)) throw FormatError("dataset: rate row has wrong length");
        for (int m = 0; m < c.num_bs; ++m) s.rates(static_cast<Eigen::Index>(k), m) = rates[k][m].get<double>();
    }
    const std::size_t users = static_cast<std::size_t>(c.users);
    if (s.ue_positions.size() != users || s.features.size() != 2 * users + c.num_bs ||
        s.label.size() != users * c.num_bs || s.rates.rows() != c.users)
        throw FormatError("dataset: sample " + std::to_string(s.seed) + " does not match the header dimensions");
    return s;
}

}  // namespace

void write_dataset(std::ostream& out, const DatasetFile& data)
{
    const DatasetHeader& h = data.header;
    const json header = {{"format", kFormatName},
                         {"version", h.version},
                         {"config", config_to_json(h.config)},
                         {"n_fading", h.n_fading},
                         {"combiner", to_string(h.combiner)},
                         {"generation_seed", h.generation_seed},
                         {"samples", data.samples.size()}};
    out << header.dump() << '\n';
    for (const auto& s : data.samples) out << sample_to_json(s).dump() << '\n';
    if (!out) throw IoError("dataset: write failed");
}

void write_dataset(const std::string& path, const DatasetFile& data)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    write_dataset(out, data);
}

DatasetFile read_dataset(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) throw FormatError("dataset: missing header line");
    DatasetFile data;
    std::size_t expected = 0;
    try {
        const json header = json::parse(line);
        if (header.at("format").get<std::string>() != kFormatName) throw FormatError("dataset: not a dataset file");
        data.header.version = header.at("version").get<int>();
        if (data.header.version != kDatasetVersion)
            throw UnsupportedVersionError("dataset: unsupported version " + std::to_string(data.header.version));
        data.header.config = config_from_json(header.at("config"));
        data.header.n_fading = header.at("n_fading").get<int>();
        data.header.combiner = parse_combiner(header.at("combiner").get<std::string>());
        data.header.generation_seed = header.at("generation_seed").get<std::uint64_t>();
        expected = header.at("samples").get<std::size_t>();
        data.samples.reserve(expected);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            data.samples.push_back(sample_from_json(json::parse(line), data.header));
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("dataset: ") + e.what());
    } catch (const DomainError& e) {
        throw FormatError(std::string("dataset: ") + e.what());
    }
    if (data.samples.size() != expected)
        throw FormatError("dataset: header announces " + std::to_string(expected) + " samples, found " +
                          std::to_string(data.samples.size()));
    return data;
}

DatasetFile read_dataset(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset " + path);
    return read_dataset(in);
}

Eigen::MatrixXd feature_matrix(const DatasetFile& data)
{
    const Eigen::Index rows = data.samples.empty() ? 0 : static_cast<Eigen::Index>(data.samples.front().features.size());
    Eigen::MatrixXd x(rows, static_cast<Eigen::Index>(data.samples.size()));
    for (std::size_t i = 0; i < data.samples.size(); ++i)
        x.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(data.samples[i].features.data(), rows);
    return x;
}

Eigen::MatrixXd label_matrix(const DatasetFile& data)
{
    const Eigen::Index rows = data.samples.empty() ? 0 : static_cast<Eigen::Index>(data.samples.front().label.size());
    Eigen::MatrixXd y(rows, static_cast<Eigen::Index>(data.samples.size()));
    for (std::size_t i = 0; i < data.samples.size(); ++i)
        y.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(data.samples[i].label.data(), rows);
    return y;
}

}  // namespace mimo
