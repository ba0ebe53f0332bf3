#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "csdelay/cli/commands.hpp"
#include "csdelay/errors.hpp"

using namespace csdelay::cli;

int main(int argc, char** argv) {
    CLI::App app{"csdelay: delayed Cucker-Smale flocking experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    std::optional<std::uint64_t> seed;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "override the config seed");
    };
    CLI::App* simulate = app.add_subcommand("simulate", "integrate and write the diagnostics series");
    CLI::App* critical = app.add_subcommand("critical-delay", "critical delay report for the datum");
    CLI::App* sweep = app.add_subcommand("sweep", "independent runs along tau, lambda or N");
    CLI::App* validate = app.add_subcommand("validate", "run every inequality checker");
    CLI::App* feedback = app.add_subcommand("feedback", "exact solution of the delayed feedback equation");
    for (CLI::App* sub : {simulate, critical, sweep, validate, feedback}) add_common(sub);
    sweep->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitSchema;
    }

    try {
        RunConfig config = load_config(config_path);
        if (seed) config.seed = *seed;
        if (*simulate) return cmd_simulate(config, out_dir);
        if (*critical) return cmd_critical_delay(config, out_dir);
        if (*sweep) return cmd_sweep(config, out_dir, threads);
        if (*validate) return cmd_validate(config, out_dir);
        if (*feedback) return cmd_feedback(config, out_dir);
    } catch (const SchemaError& e) {
        std::cerr << "config error at " << e.path() << ": " << e.what() << '\n';
        return kExitSchema;
    } catch (const csdelay::InvalidInputError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kExitSchema;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitFailure;
}
