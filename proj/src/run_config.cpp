#include "amr/run_config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "amr/errors.hpp"

namespace amr {

namespace {

using nlohmann::json;

const std::set<std::string> kTopKeys = {
    "schema_version", "strategy",      "lr",          "batch_size",         "replay_fraction",
    "temperature",    "beta",          "probes_per_cluster", "probe_every", "iterations_per_task",
    "pretrain_iterations", "replay_weight", "iid_task_balanced", "hidden", "activation",
    "eval_threads",   "record_mu_trajectory", "seeds", "output_dir", "jobs", "dataset",
};

const std::set<std::string> kRotatedKeys = {"kind", "num_tasks", "n_train", "n_test", "dim",
                                            "rotation_degrees", "noise_sigma", "seed"};
const std::set<std::string> kPermutedKeys = {"kind", "num_tasks", "n_train", "n_test", "dim", "num_classes",
                                             "class_separation", "identity_permutations", "seed"};
const std::set<std::string> kManifestKeys = {"kind", "path"};

const std::vector<std::string> kSweepKeys = {"replay_fraction", "probes_per_cluster", "probe_every", "temperature",
                                             "beta"};

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key)) throw ConfigError("unknown config key '" + key + "' in " + where);
}

template <typename T>
T get_as(const json& obj, const std::string& key) {
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + key + "' has the wrong type");
    }
}

std::size_t get_count(const json& obj, const std::string& key) {
    const json& v = obj.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
        throw ConfigError("config key '" + key + "' must be a non-negative integer");
    return v.get<std::size_t>();
}

double get_real(const json& obj, const std::string& key) {
    const json& v = obj.at(key);
    if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
    return v.get<double>();
}

template <typename F>
void maybe(const json& obj, const std::string& key, F&& f) {
    if (obj.contains(key)) f();
}

DatasetSpec parse_dataset(const json& d, const std::filesystem::path& base_dir) {
    if (!d.is_object()) throw ConfigError("'dataset' must be a JSON object");
    DatasetSpec spec;
    const std::string kind = d.contains("kind") ? get_as<std::string>(d, "kind") : "rotated_regression";
    if (kind == "rotated_regression") {
        reject_unknown(d, kRotatedKeys, "dataset");
        spec.kind = DatasetKind::RotatedRegression;
        auto& r = spec.rotated;
        maybe(d, "num_tasks", [&] { r.num_tasks = get_count(d, "num_tasks"); });
        maybe(d, "n_train", [&] { r.n_train = get_count(d, "n_train"); });
        maybe(d, "n_test", [&] { r.n_test = get_count(d, "n_test"); });
        maybe(d, "dim", [&] { r.dim = get_count(d, "dim"); });
        maybe(d, "rotation_degrees", [&] { r.rotation_degrees = get_real(d, "rotation_degrees"); });
        maybe(d, "noise_sigma", [&] { r.noise_sigma = get_real(d, "noise_sigma"); });
        if (r.dim < 2) throw ConfigError("dataset.dim must be at least 2");
        if (r.num_tasks < 2) throw ConfigError("dataset.num_tasks must be at least 2");
        if (r.n_train == 0 || r.n_test == 0) throw ConfigError("dataset.n_train and n_test must be positive");
        if (!(r.noise_sigma >= 0.0)) throw ConfigError("dataset.noise_sigma must be non-negative");
    } else if (kind == "permuted_classification") {
        reject_unknown(d, kPermutedKeys, "dataset");
        spec.kind = DatasetKind::PermutedClassification;
        auto& p = spec.permuted;
        maybe(d, "num_tasks", [&] { p.num_tasks = get_count(d, "num_tasks"); });
        maybe(d, "n_train", [&] { p.n_train = get_count(d, "n_train"); });
        maybe(d, "n_test", [&] { p.n_test = get_count(d, "n_test"); });
        maybe(d, "dim", [&] { p.dim = get_count(d, "dim"); });
        maybe(d, "num_classes", [&] { p.num_classes = get_count(d, "num_classes"); });
        maybe(d, "class_separation", [&] { p.class_separation = get_real(d, "class_separation"); });
        maybe(d, "identity_permutations", [&] { p.identity_permutations = get_as<bool>(d, "identity_permutations"); });
        if (p.num_classes < 2) throw ConfigError("dataset.num_classes must be at least 2");
        if (p.num_tasks < 2) throw ConfigError("dataset.num_tasks must be at least 2");
        if (p.dim == 0) throw ConfigError("dataset.dim must be positive");
        if (p.n_train == 0 || p.n_test == 0) throw ConfigError("dataset.n_train and n_test must be positive");
        if (!(p.class_separation > 0.0)) throw ConfigError("dataset.class_separation must be positive");
    } else if (kind == "manifest") {
        reject_unknown(d, kManifestKeys, "dataset");
        spec.kind = DatasetKind::Manifest;
        if (!d.contains("path")) throw ConfigError("dataset.path is required for kind 'manifest'");
        const std::filesystem::path p = get_as<std::string>(d, "path");
        spec.manifest = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    } else {
        throw ConfigError("unknown dataset kind '" + kind +
                          "' (expected rotated_regression, permuted_classification or manifest)");
    }
    if (d.contains("seed")) spec.seed = get_count(d, "seed");
    return spec;
}

void validate_run(const RunConfig& c) {
    validate(c.train);
    // compare and sweep run every strategy, so check the rehearsal constraints too.
    TrainConfig rehearsal = c.train;
    rehearsal.strategy = StrategyKind::Adaptive;
    validate(rehearsal);
    if (c.seeds.empty()) throw ConfigError("'seeds' must list at least one seed");
    if (c.jobs == 0) throw ConfigError("'jobs' must be at least 1");
    if (c.output_dir.empty()) throw ConfigError("'output_dir' must not be empty");
    std::size_t n_train = 0;
    if (c.dataset.kind == DatasetKind::RotatedRegression) n_train = c.dataset.rotated.n_train;
    if (c.dataset.kind == DatasetKind::PermutedClassification) n_train = c.dataset.permuted.n_train;
    if (n_train != 0 && n_train < c.train.batch_size)
        throw ConfigError("dataset.n_train (" + std::to_string(n_train) + ") is smaller than batch_size (" +
                          std::to_string(c.train.batch_size) + ")");
}

}  // namespace

RunConfig parse_run_config(const json& doc, const std::filesystem::path& base_dir) {
    reject_unknown(doc, kTopKeys, "config");
    if (doc.contains("schema_version") && get_as<int>(doc, "schema_version") != kConfigSchemaVersion)
        throw ConfigError("unsupported config schema_version (expected " + std::to_string(kConfigSchemaVersion) + ")");

    RunConfig c;
    TrainConfig& t = c.train;
    maybe(doc, "strategy", [&] { t.strategy = parse_strategy(get_as<std::string>(doc, "strategy")); });
    maybe(doc, "lr", [&] { t.lr = get_real(doc, "lr"); });
    maybe(doc, "batch_size", [&] { t.batch_size = get_count(doc, "batch_size"); });
    maybe(doc, "replay_fraction", [&] { t.replay_fraction = get_real(doc, "replay_fraction"); });
    maybe(doc, "temperature", [&] { t.temperature = get_real(doc, "temperature"); });
    maybe(doc, "beta", [&] { t.beta = get_real(doc, "beta"); });
    maybe(doc, "probes_per_cluster", [&] { t.probes_per_cluster = get_count(doc, "probes_per_cluster"); });
    maybe(doc, "probe_every", [&] { t.probe_every = get_count(doc, "probe_every"); });
    maybe(doc, "iterations_per_task", [&] { t.iterations_per_task = get_count(doc, "iterations_per_task"); });
    maybe(doc, "pretrain_iterations", [&] { t.pretrain_iterations = get_count(doc, "pretrain_iterations"); });
    maybe(doc, "replay_weight", [&] { t.replay_weight = get_real(doc, "replay_weight"); });
    maybe(doc, "iid_task_balanced", [&] { t.iid_task_balanced = get_as<bool>(doc, "iid_task_balanced"); });
    maybe(doc, "hidden", [&] {
        const json& h = doc.at("hidden");
        if (!h.is_array()) throw ConfigError("config key 'hidden' must be an array of layer sizes");
        t.hidden.clear();
        for (const json& v : h) {
            if (!v.is_number_integer() || v.get<std::int64_t>() <= 0)
                throw ConfigError("config key 'hidden' must hold positive integers");
            t.hidden.push_back(v.get<std::size_t>());
        }
    });
    maybe(doc, "activation", [&] { t.activation = parse_activation(get_as<std::string>(doc, "activation")); });
    maybe(doc, "eval_threads", [&] { t.eval_threads = get_count(doc, "eval_threads"); });
    maybe(doc, "record_mu_trajectory", [&] { t.record_mu_trajectory = get_as<bool>(doc, "record_mu_trajectory"); });
    maybe(doc, "seeds", [&] {
        const json& s = doc.at("seeds");
        if (!s.is_array()) throw ConfigError("config key 'seeds' must be an array");
        c.seeds.clear();
        for (const json& v : s) {
            if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
                throw ConfigError("config key 'seeds' must hold non-negative integers");
            c.seeds.push_back(v.get<std::uint64_t>());
        }
    });
    maybe(doc, "output_dir", [&] {
        const std::filesystem::path p = get_as<std::string>(doc, "output_dir");
        c.output_dir = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    });
    maybe(doc, "jobs", [&] { c.jobs = get_count(doc, "jobs"); });
    maybe(doc, "dataset", [&] { c.dataset = parse_dataset(doc.at("dataset"), base_dir); });

    validate_run(c);
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    // Relative paths inside the config resolve against the current directory,
    // like paths given on the command line.
    return parse_run_config(doc);
}

void apply_override(RunConfig& config, const std::string& key, const std::string& value) {
    json doc = json::parse(to_json(config).dump());
    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::parse_error&) {
        parsed = value;  // bare strings such as strategy names
    }
    if (key == "dataset.kind") {
        // A new kind starts from that kind's defaults.
        json fresh = {{"kind", parsed}};
        if (doc["dataset"].contains("seed")) fresh["seed"] = doc["dataset"]["seed"];
        doc["dataset"] = fresh;
    } else if (key.rfind("dataset.", 0) == 0) {
        doc["dataset"][key.substr(8)] = parsed;
    } else {
        if (!kTopKeys.count(key) || key == "dataset") throw ConfigError("unknown config key '" + key + "'");
        doc[key] = parsed;
    }
    config = parse_run_config(doc);
}

nlohmann::ordered_json to_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    const TrainConfig& t = c.train;
    j["schema_version"] = kConfigSchemaVersion;
    j["strategy"] = to_string(t.strategy);
    j["lr"] = t.lr;
    j["batch_size"] = t.batch_size;
    j["replay_fraction"] = t.replay_fraction;
    j["temperature"] = t.temperature;
    j["beta"] = t.beta;
    j["probes_per_cluster"] = t.probes_per_cluster;
    j["probe_every"] = t.probe_every;
    j["iterations_per_task"] = t.iterations_per_task;
    j["pretrain_iterations"] = t.pretrain_iterations;
    j["replay_weight"] = t.replay_weight;
    j["iid_task_balanced"] = t.iid_task_balanced;
    j["hidden"] = t.hidden;
    j["activation"] = to_string(t.activation);
    j["eval_threads"] = t.eval_threads;
    j["record_mu_trajectory"] = t.record_mu_trajectory;
    j["seeds"] = c.seeds;
    j["output_dir"] = c.output_dir.string();
    j["jobs"] = c.jobs;

    nlohmann::ordered_json d;
    switch (c.dataset.kind) {
        case DatasetKind::RotatedRegression: {
            const auto& r = c.dataset.rotated;
            d["kind"] = "rotated_regression";
            d["num_tasks"] = r.num_tasks;
            d["n_train"] = r.n_train;
            d["n_test"] = r.n_test;
            d["dim"] = r.dim;
            d["rotation_degrees"] = r.rotation_degrees;
            d["noise_sigma"] = r.noise_sigma;
            break;
        }
        case DatasetKind::PermutedClassification: {
            const auto& p = c.dataset.permuted;
            d["kind"] = "permuted_classification";
            d["num_tasks"] = p.num_tasks;
            d["n_train"] = p.n_train;
            d["n_test"] = p.n_test;
            d["dim"] = p.dim;
            d["num_classes"] = p.num_classes;
            d["class_separation"] = p.class_separation;
            d["identity_permutations"] = p.identity_permutations;
            break;
        }
        case DatasetKind::Manifest:
            d["kind"] = "manifest";
            d["path"] = c.dataset.manifest.string();
            break;
    }
    if (c.dataset.seed) d["seed"] = *c.dataset.seed;
    j["dataset"] = d;
    return j;
}

std::vector<TaskDataset> materialize_dataset(const DatasetSpec& spec, std::uint64_t run_seed) {
    const std::uint64_t seed = spec.seed.value_or(run_seed);
    switch (spec.kind) {
        case DatasetKind::RotatedRegression: {
            RotatedRegressionSpec r = spec.rotated;
            r.seed = seed;
            return gen_rotated_regression(r);
        }
        case DatasetKind::PermutedClassification: {
            PermutedClassificationSpec p = spec.permuted;
            p.seed = seed;
            return gen_permuted_classification(p);
        }
        case DatasetKind::Manifest:
            return load_manifest(spec.manifest);
    }
    throw ConfigError("unknown dataset kind");
}

std::vector<std::vector<std::pair<std::string, double>>> SweepGrid::points() const {
    std::vector<std::vector<std::pair<std::string, double>>> out{{}};
    for (const auto& [key, values] : axes) {
        std::vector<std::vector<std::pair<std::string, double>>> next;
        for (const auto& prefix : out)
            for (double v : values) {
                auto p = prefix;
                p.emplace_back(key, v);
                next.push_back(std::move(p));
            }
        out = std::move(next);
    }
    return out;
}

SweepGrid parse_sweep_grid(const json& doc) {
    if (!doc.is_object()) throw ConfigError("sweep grid must be a JSON object");
    SweepGrid grid;
    // Fixed axis order keeps output independent of key order in the file.
    for (const auto& [key, _] : doc.items())
        if (std::find(kSweepKeys.begin(), kSweepKeys.end(), key) == kSweepKeys.end())
            throw ConfigError("unknown sweep key '" + key +
                              "' (allowed: replay_fraction, probes_per_cluster, probe_every, temperature, beta)");
    for (const std::string& key : kSweepKeys) {
        if (!doc.contains(key)) continue;
        const json& vals = doc.at(key);
        if (!vals.is_array() || vals.empty()) throw ConfigError("sweep key '" + key + "' needs a non-empty array");
        std::vector<double> values;
        for (const json& v : vals) {
            if (!v.is_number()) throw ConfigError("sweep key '" + key + "' must hold numbers");
            values.push_back(v.get<double>());
        }
        grid.axes.emplace_back(key, std::move(values));
    }
    if (grid.axes.empty()) throw ConfigError("sweep grid has no axes");
    return grid;
}

SweepGrid load_sweep_grid(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open sweep grid " + path.string());
    try {
        return parse_sweep_grid(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ConfigError("sweep grid " + path.string() + " is not valid JSON: " + e.what());
    }
}

void set_sweep_param(TrainConfig& config, const std::string& key, double value) {
    auto as_count = [&](double v) {
        if (!(v >= 0.0) || v != std::floor(v)) throw ConfigError("sweep value for '" + key + "' must be a whole number");
        return static_cast<std::size_t>(v);
    };
    if (key == "replay_fraction") config.replay_fraction = value;
    else if (key == "probes_per_cluster") config.probes_per_cluster = as_count(value);
    else if (key == "probe_every") config.probe_every = as_count(value);
    else if (key == "temperature") config.temperature = value;
    else if (key == "beta") config.beta = value;
    else throw ConfigError("unknown sweep key '" + key + "'");
    validate(config);
}

}  // namespace amr
