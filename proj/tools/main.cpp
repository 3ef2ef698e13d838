#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
    using siv1::cli::RunConfig;
    CLI::App app{"Five-level and six-level V1 centre dynamics, fits and derived photophysics"};
    app.require_subcommand(1);

    RunConfig rc;
    std::uint64_t seed = 0;
    const auto common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", rc.config_path, "YAML run configuration")->required();
        sub->add_option("-o,--output", rc.output_dir, "Output directory (overrides the config)");
        sub->add_option("--seed", seed, "Random seed (overrides the config)");
        sub->add_option("--set", rc.overrides, "Override a config key, key=value")->take_all();
    };

    auto* simulate = app.add_subcommand("simulate", "Run a protocol and write its traces");
    simulate->add_option("protocol", rc.mode, "lifetime, rabi, pulse-train, two-pulse, depletion or steady-state");
    common(simulate);

    auto* fit = app.add_subcommand("fit", "Fit datasets and write a report with residuals");
    fit->add_option("kind", rc.mode, "exponential, saturation, two-pulse or depletion");
    fit->add_option("data", rc.data_paths, "CSV datasets (default: fit.data)");
    common(fit);

    auto* derive = app.add_subcommand("derive", "Evaluate the photophysics chain");
    common(derive);

    auto* sweep = app.add_subcommand("sweep", "Repeat a protocol over values of one config key");
    sweep->add_option("protocol", rc.mode, "Simulation protocol");
    common(sweep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return siv1::cli::exit_config;
    }

    for (auto* sub : {simulate, fit, derive, sweep})
        if (sub->parsed()) rc.command = sub->get_name();
    for (auto* sub : {simulate, fit, derive, sweep})
        if (sub->parsed() && sub->count("--seed") > 0) rc.seed = seed;
    return siv1::cli::run(rc, std::cerr);
}
