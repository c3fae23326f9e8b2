#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "amr/errors.hpp"
#include "amr/harness.hpp"
#include "amr/run_config.hpp"

namespace {

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::size_t jobs = 0;
    std::string output_dir;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("config", c.config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--set", c.overrides, "override a config field, key=value (repeatable)");
    cmd->add_option("--jobs,-j", c.jobs, "concurrent runs");
    cmd->add_option("--output-dir,-o", c.output_dir, "output directory");
}

// Config file, then AMR_OUTPUT_DIR, then flags.
amr::RunConfig resolve(const Common& c) {
    amr::RunConfig config = amr::load_run_config(c.config_path);
    if (const char* env = std::getenv("AMR_OUTPUT_DIR"); env && *env) config.output_dir = env;
    for (const std::string& kv : c.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw amr::UsageError("--set expects key=value, got '" + kv + "'");
        amr::apply_override(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (c.jobs > 0) config.jobs = c.jobs;
    if (!c.output_dir.empty()) config.output_dir = c.output_dir;
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive memory replay experiments"};
    app.require_subcommand(1);

    Common run_opts, compare_opts, sweep_opts;
    std::string grid_path;
    CLI::App* run = app.add_subcommand("run", "train one strategy over the configured seeds");
    add_common(run, run_opts);
    CLI::App* compare = app.add_subcommand("compare", "run every strategy and print the normalized table");
    add_common(compare, compare_opts);
    CLI::App* sweep = app.add_subcommand("sweep", "compare over a hyperparameter grid");
    add_common(sweep, sweep_opts);
    sweep->add_option("--grid", grid_path, "grid file (JSON)")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : amr::kExitConfigError;
    }

    return amr::guarded(
        [&] {
            if (*run) return amr::cmd_run(resolve(run_opts), std::cout, std::cerr);
            if (*compare) return amr::cmd_compare(resolve(compare_opts), std::cout, std::cerr);
            const amr::SweepGrid grid = amr::load_sweep_grid(grid_path);
            return amr::cmd_sweep(resolve(sweep_opts), grid, std::cout, std::cerr);
        },
        std::cerr);
}
