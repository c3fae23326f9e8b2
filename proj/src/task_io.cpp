#include "amr/task_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "amr/errors.hpp"
#include "amr/rng.hpp"
#include "json.hpp"

namespace amr {

namespace {

constexpr int kManifestSchemaVersion = 1;

void check_example(const Example& ex, const TaskSchema& schema, int task_id) {
    const std::string where = "task " + std::to_string(task_id) + ", example " + std::to_string(ex.example_id);
    if (ex.task_id != task_id) throw ConfigError(where + ": task_id field does not match its task");
    if (ex.features.size() != schema.feature_dim) throw ConfigError(where + ": feature dim mismatch");
    if (schema.head == Head::Regression) {
        if (ex.target.size() != schema.output_dim) throw ConfigError(where + ": target dim mismatch");
    } else if (ex.label >= schema.output_dim) {
        throw ConfigError(where + ": class label out of range");
    }
}

}  // namespace

void validate_sequence(const std::vector<TaskDataset>& tasks) {
    if (tasks.empty()) throw ConfigError("task sequence is empty");
    const TaskSchema& schema = tasks.front().schema;
    if (schema.feature_dim == 0 || schema.output_dim == 0) throw ConfigError("task schema has a zero dimension");
    if (schema.head == Head::Classification && schema.output_dim < 2)
        throw ConfigError("classification tasks need at least two classes");
    std::unordered_set<std::int64_t> ids;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        const TaskDataset& task = tasks[t];
        if (task.task_id != static_cast<int>(t))
            throw ConfigError("task ids must be dense from 0; position " + std::to_string(t) + " holds task " +
                              std::to_string(task.task_id));
        if (!(task.schema == schema)) throw ConfigError("task " + std::to_string(t) + " schema differs from task 0");
        if (task.train.empty()) throw ConfigError("task " + std::to_string(t) + " has no training examples");
        if (task.test.empty()) throw ConfigError("task " + std::to_string(t) + " has no test examples");
        for (const auto* part : {&task.train, &task.test}) {
            for (const Example& ex : *part) {
                check_example(ex, schema, task.task_id);
                if (!ids.insert(ex.example_id).second)
                    throw ConfigError("example_id " + std::to_string(ex.example_id) + " appears more than once");
            }
        }
    }
}

std::vector<TaskDataset> gen_rotated_regression(const RotatedRegressionSpec& spec) {
    if (spec.dim < 2) throw ConfigError("gen_rotated_regression: dim must be at least 2");
    if (spec.num_tasks < 2) throw ConfigError("gen_rotated_regression: need at least 2 tasks");
    if (spec.n_train == 0 || spec.n_test == 0) throw ConfigError("gen_rotated_regression: empty train or test split");
    if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma) || !std::isfinite(spec.rotation_degrees))
        throw ConfigError("gen_rotated_regression: noise_sigma and rotation_degrees must be finite, noise >= 0");

    std::normal_distribution<double> gauss(0.0, 1.0);
    Rng basis_rng = make_rng(spec.seed, Stream::Data, 0xFFFFu);
    std::vector<double> w(spec.dim), u(spec.dim);
    for (double& v : w) v = gauss(basis_rng);
    for (double& v : u) v = gauss(basis_rng);
    const double wn = std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
    for (double& v : w) v /= wn;
    const double proj = std::inner_product(u.begin(), u.end(), w.begin(), 0.0);
    for (std::size_t i = 0; i < spec.dim; ++i) u[i] -= proj * w[i];
    const double un = std::sqrt(std::inner_product(u.begin(), u.end(), u.begin(), 0.0));
    for (double& v : u) v /= un;

    const TaskSchema schema{spec.dim, Head::Regression, 1};
    std::vector<TaskDataset> tasks;
    std::int64_t next_id = 0;
    for (std::size_t t = 0; t < spec.num_tasks; ++t) {
        const double angle = static_cast<double>(t) * spec.rotation_degrees * std::numbers::pi / 180.0;
        std::vector<double> dir(spec.dim);
        for (std::size_t i = 0; i < spec.dim; ++i) dir[i] = std::cos(angle) * w[i] + std::sin(angle) * u[i];

        Rng rng = make_rng(spec.seed, Stream::Data, static_cast<std::uint32_t>(t));
        auto draw = [&](std::size_t n) {
            std::vector<Example> out(n);
            for (Example& ex : out) {
                ex.example_id = next_id++;
                ex.task_id = static_cast<int>(t);
                ex.features.resize(spec.dim);
                for (double& x : ex.features) x = gauss(rng);
                const double clean = std::inner_product(dir.begin(), dir.end(), ex.features.begin(), 0.0);
                ex.target = {clean + spec.noise_sigma * gauss(rng)};
            }
            return out;
        };
        TaskDataset task;
        task.task_id = static_cast<int>(t);
        task.schema = schema;
        task.train = draw(spec.n_train);
        task.test = draw(spec.n_test);
        tasks.push_back(std::move(task));
    }
    return tasks;
}

std::vector<std::size_t> task_permutation(const PermutedClassificationSpec& spec, std::size_t task) {
    std::vector<std::size_t> perm(spec.dim);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    if (task == 0 || spec.identity_permutations) return perm;
    Rng rng = make_rng(spec.seed, Stream::Data, 0x10000u + static_cast<std::uint32_t>(task));
    std::shuffle(perm.begin(), perm.end(), rng);
    return perm;
}

std::vector<TaskDataset> gen_permuted_classification(const PermutedClassificationSpec& spec) {
    if (spec.num_classes < 2) throw ConfigError("gen_permuted_classification: need at least 2 classes");
    if (spec.dim < 1) throw ConfigError("gen_permuted_classification: dim must be at least 1");
    if (spec.num_tasks < 2) throw ConfigError("gen_permuted_classification: need at least 2 tasks");
    if (spec.n_train == 0 || spec.n_test == 0)
        throw ConfigError("gen_permuted_classification: empty train or test split");
    if (!(spec.class_separation > 0.0) || !std::isfinite(spec.class_separation))
        throw ConfigError("gen_permuted_classification: class_separation must be positive");

    std::normal_distribution<double> gauss(0.0, 1.0);
    Rng centre_rng = make_rng(spec.seed, Stream::Data, 0xFFFFu);
    const double scale = spec.class_separation / std::sqrt(static_cast<double>(spec.dim));
    std::vector<std::vector<double>> centres;
    for (int attempt = 0;; ++attempt) {
        if (attempt == 1000)
            throw ConfigError("gen_permuted_classification: could not place " + std::to_string(spec.num_classes) +
                              " centres at the requested separation in " + std::to_string(spec.dim) + " dims");
        centres.assign(spec.num_classes, std::vector<double>(spec.dim));
        for (auto& c : centres)
            for (double& v : c) v = 1.5 * scale * gauss(centre_rng);
        double min_dist = INFINITY;
        for (std::size_t a = 0; a < centres.size(); ++a)
            for (std::size_t b = a + 1; b < centres.size(); ++b) {
                double d2 = 0.0;
                for (std::size_t i = 0; i < spec.dim; ++i) d2 += (centres[a][i] - centres[b][i]) * (centres[a][i] - centres[b][i]);
                min_dist = std::min(min_dist, std::sqrt(d2));
            }
        if (min_dist >= spec.class_separation) break;
    }

    const TaskSchema schema{spec.dim, Head::Classification, spec.num_classes};
    std::uniform_int_distribution<std::size_t> pick_class(0, spec.num_classes - 1);
    std::vector<TaskDataset> tasks;
    std::int64_t next_id = 0;
    for (std::size_t t = 0; t < spec.num_tasks; ++t) {
        const std::vector<std::size_t> perm = task_permutation(spec, t);
        Rng rng = make_rng(spec.seed, Stream::Data, static_cast<std::uint32_t>(t));
        auto draw = [&](std::size_t n) {
            std::vector<Example> out(n);
            std::vector<double> raw(spec.dim);
            for (Example& ex : out) {
                ex.example_id = next_id++;
                ex.task_id = static_cast<int>(t);
                ex.label = pick_class(rng);
                for (std::size_t i = 0; i < spec.dim; ++i) raw[i] = centres[ex.label][i] + gauss(rng);
                ex.features.resize(spec.dim);
                for (std::size_t i = 0; i < spec.dim; ++i) ex.features[i] = raw[perm[i]];
            }
            return out;
        };
        TaskDataset task;
        task.task_id = static_cast<int>(t);
        task.schema = schema;
        task.train = draw(spec.n_train);
        task.test = draw(spec.n_test);
        tasks.push_back(std::move(task));
    }
    return tasks;
}

namespace {

// Shortest round-trip representation.
std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::vector<std::string> header_for(const TaskSchema& schema) {
    std::vector<std::string> cols;
    for (std::size_t i = 0; i < schema.feature_dim; ++i) cols.push_back("x" + std::to_string(i));
    if (schema.head == Head::Regression) {
        for (std::size_t i = 0; i < schema.output_dim; ++i) cols.push_back("y" + std::to_string(i));
    } else {
        cols.push_back("label");
    }
    return cols;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

template <typename T>
T parse_number(std::string_view field, const std::string& file, std::size_t line) {
    while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.remove_suffix(1);
    T value{};
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size())
        throw LoadError(file, line, "cannot parse '" + std::string(field) + "' as a number");
    if constexpr (std::is_floating_point_v<T>) {
        if (!std::isfinite(value)) throw LoadError(file, line, "non-finite value '" + std::string(field) + "'");
    }
    return value;
}

}  // namespace

void write_task_csv(const std::filesystem::path& path, const std::vector<Example>& examples,
                    const TaskSchema& schema) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError(path.string(), 0, "cannot open for writing");
    const auto header = header_for(schema);
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    for (const Example& ex : examples) {
        for (std::size_t i = 0; i < ex.features.size(); ++i) out << (i ? "," : "") << format_double(ex.features[i]);
        if (schema.head == Head::Regression) {
            for (double y : ex.target) out << ',' << format_double(y);
        } else {
            out << ',' << ex.label;
        }
        out << '\n';
    }
    if (!out) throw LoadError(path.string(), 0, "write failed");
}

std::vector<Example> read_task_csv(const std::filesystem::path& path, const TaskSchema& schema, int task_id,
                                   std::int64_t first_example_id) {
    const std::string file = path.string();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError(file, 0, "cannot open task file");
    const auto expected = header_for(schema);

    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw LoadError(file, 1, "missing header row");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_fields(line);
    if (header.size() != expected.size())
        throw LoadError(file, line_no, "header has " + std::to_string(header.size()) + " columns, schema expects " +
                                           std::to_string(expected.size()));
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] != expected[i])
            throw LoadError(file, line_no, "header column " + std::to_string(i) + " is '" + std::string(header[i]) +
                                               "', expected '" + expected[i] + "'");

    std::vector<Example> out;
    std::int64_t next_id = first_example_id;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != expected.size())
            throw LoadError(file, line_no, "row has " + std::to_string(fields.size()) + " fields, expected " +
                                               std::to_string(expected.size()));
        Example ex;
        ex.example_id = next_id++;
        ex.task_id = task_id;
        ex.features.reserve(schema.feature_dim);
        for (std::size_t i = 0; i < schema.feature_dim; ++i)
            ex.features.push_back(parse_number<double>(fields[i], file, line_no));
        if (schema.head == Head::Regression) {
            for (std::size_t i = 0; i < schema.output_dim; ++i)
                ex.target.push_back(parse_number<double>(fields[schema.feature_dim + i], file, line_no));
        } else {
            ex.label = parse_number<std::size_t>(fields[schema.feature_dim], file, line_no);
            if (ex.label >= schema.output_dim)
                throw LoadError(file, line_no, "label " + std::to_string(ex.label) + " out of range");
        }
        out.push_back(std::move(ex));
    }
    if (out.empty()) throw LoadError(file, line_no, "no data rows");
    return out;
}

std::filesystem::path write_task_files(const std::vector<TaskDataset>& tasks, const std::filesystem::path& dir) {
    validate_sequence(tasks);
    std::filesystem::create_directories(dir);
    const TaskSchema& schema = tasks.front().schema;
    nlohmann::ordered_json manifest;
    manifest["schema_version"] = kManifestSchemaVersion;
    nlohmann::ordered_json s;
    s["feature_dim"] = schema.feature_dim;
    s["head"] = to_string(schema.head);
    s[schema.head == Head::Regression ? "output_dim" : "num_classes"] = schema.output_dim;
    manifest["schema"] = s;
    manifest["tasks"] = nlohmann::ordered_json::array();
    for (const TaskDataset& task : tasks) {
        const std::string stem = "task" + std::to_string(task.task_id);
        write_task_csv(dir / (stem + "_train.csv"), task.train, schema);
        write_task_csv(dir / (stem + "_test.csv"), task.test, schema);
        manifest["tasks"].push_back(
            {{"task_id", task.task_id}, {"train", stem + "_train.csv"}, {"test", stem + "_test.csv"}});
    }
    const auto path = dir / "manifest.json";
    std::ofstream out(path, std::ios::binary);
    out << manifest.dump(2) << '\n';
    if (!out) throw LoadError(path.string(), 0, "write failed");
    return path;
}

std::vector<TaskDataset> load_manifest(const std::filesystem::path& manifest_path) {
    const std::string file = manifest_path.string();
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) throw LoadError(file, 0, "cannot open manifest");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw LoadError(file, 0, std::string("manifest is not valid JSON: ") + e.what());
    }

    TaskSchema schema;
    std::vector<nlohmann::json> entries;
    try {
        if (doc.value("schema_version", kManifestSchemaVersion) != kManifestSchemaVersion)
            throw LoadError(file, 0, "unsupported manifest schema_version");
        const auto& s = doc.at("schema");
        schema.feature_dim = s.at("feature_dim").get<std::size_t>();
        schema.head = parse_head(s.at("head").get<std::string>());
        schema.output_dim = schema.head == Head::Regression ? s.value("output_dim", std::size_t{1})
                                                            : s.at("num_classes").get<std::size_t>();
        entries = doc.at("tasks").get<std::vector<nlohmann::json>>();
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(file, 0, std::string("malformed manifest: ") + e.what());
    } catch (const ConfigError& e) {
        throw LoadError(file, 0, e.what());
    }
    if (entries.size() < 1) throw LoadError(file, 0, "manifest lists no tasks");
    if (schema.feature_dim == 0 || schema.output_dim == 0) throw LoadError(file, 0, "schema has a zero dimension");

    const auto base = manifest_path.parent_path();
    std::vector<TaskDataset> tasks;
    std::int64_t next_id = 0;
    for (std::size_t t = 0; t < entries.size(); ++t) {
        TaskDataset task;
        std::string train_path, test_path;
        try {
            task.task_id = entries[t].at("task_id").get<int>();
            train_path = entries[t].at("train").get<std::string>();
            test_path = entries[t].at("test").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw LoadError(file, 0, "task entry " + std::to_string(t) + ": " + e.what());
        }
        if (task.task_id != static_cast<int>(t))
            throw LoadError(file, 0, "task ids must be dense from 0; entry " + std::to_string(t) + " has task_id " +
                                         std::to_string(task.task_id));
        task.schema = schema;
        auto resolve = [&](const std::string& p) {
            const std::filesystem::path path(p);
            return path.is_absolute() ? path : base / path;
        };
        task.train = read_task_csv(resolve(train_path), schema, task.task_id, next_id);
        next_id += static_cast<std::int64_t>(task.train.size());
        task.test = read_task_csv(resolve(test_path), schema, task.task_id, next_id);
        next_id += static_cast<std::int64_t>(task.test.size());
        tasks.push_back(std::move(task));
    }
    return tasks;
}

}  // namespace amr
