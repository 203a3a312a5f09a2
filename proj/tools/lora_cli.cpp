// Experiment runner.
//
//   lora run --config <path> [--seeds a,b,c] [--out <dir>]
//   lora summarize --in <csv>
//   lora golden-toy
//
// Exit codes: 0 success, 2 configuration error, 3 experiment failure.
// LORA_THREADS sets the worker count.

#include <CLI11.hpp>
#include <iostream>

#include "lora/error.hpp"
#include "lora/harness/runner.hpp"
#include "lora/harness/summary.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kExperimentFailure = 3;

int cmd_run(const std::string& config_path, const std::string& seeds, const std::string& out) {
    auto config = lora::harness::load_config(config_path);
    lora::harness::RunOptions options;
    if (!seeds.empty()) options.seeds = lora::harness::parse_seed_list(seeds);
    options.out_dir = out.empty() ? std::filesystem::path("runs") / config.id : std::filesystem::path(out);
    const auto outcome = lora::harness::run_experiment(config, options);
    std::cout << "records: " << outcome.records.string() << "\n"
              << "summary: " << outcome.summary.string() << "\n";
    if (config.uses_cells())
        std::cout << "cells: " << outcome.cells << " (skipped " << outcome.skipped << ", infeasible rows "
                  << outcome.infeasible << ", failed rows " << outcome.failed << ")\n";
    return outcome.failed > 0 ? kExperimentFailure : 0;
}

int cmd_summarize(const std::string& in) {
    const auto records = lora::harness::read_records(in);
    std::cout << lora::harness::to_json(lora::harness::summarize(records)).dump(2) << "\n";
    return 0;
}

int cmd_golden_toy() {
    const double v0[] = {2.86, 2.98};
    std::cout << lora::harness::to_json(lora::harness::golden_toy(v0)).dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Leveraged matrix estimation and low-rank policy iteration experiments"};
    app.require_subcommand(1);

    std::string config_path, seeds, out, in;
    auto* run = app.add_subcommand("run", "Run an experiment configuration");
    run->add_option("--config", config_path, "Experiment JSON")->required();
    run->add_option("--seeds", seeds, "Comma-separated seeds overriding the config");
    run->add_option("--out", out, "Output directory (default runs/<id>)");

    auto* summarize = app.add_subcommand("summarize", "Summarize a records CSV");
    summarize->add_option("--in", in, "records.csv")->required();

    auto* golden = app.add_subcommand("golden-toy", "Print the toy-MDP condition numbers");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }

    try {
        if (*run) return cmd_run(config_path, seeds, out);
        if (*summarize) return cmd_summarize(in);
        if (*golden) return cmd_golden_toy();
    } catch (const lora::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "experiment failed: " << e.what() << "\n";
        return kExperimentFailure;
    }
    return 0;
}
