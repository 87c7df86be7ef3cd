// occuforge: EV charger occupancy forecasting from charging-session logs.

#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "occuforge/cli.hpp"
#include "occuforge/error.hpp"

namespace cli = occuforge::cli;

int main(int argc, char** argv) {
    CLI::App app{"EV charger occupancy forecasting"};
    app.require_subcommand(1);

    std::string config_path;
    std::string charger;
    int k = 1;
    std::string k_list;
    int runs = 0;
    std::string model_path;
    std::string at;
    std::string occupancy;
    std::string param;
    std::string grid;
    std::string spec_path;
    std::string out_path = "synth_occupancy.csv";

    auto* ingest = app.add_subcommand("ingest", "Sessions CSV to occupancy series and profiles");
    ingest->add_option("--config", config_path, "Run configuration file")->required();

    auto* train = app.add_subcommand("train", "Train and save one hybrid model");
    train->add_option("--config", config_path, "Run configuration file")->required();
    train->add_option("--charger", charger, "Charger id")->required();
    train->add_option("--k", k, "Forecast horizon in slots")->required();

    auto* evaluate = app.add_subcommand("evaluate", "Rolling test-split evaluation of every configured method");
    evaluate->add_option("--config", config_path, "Run configuration file")->required();
    evaluate->add_option("--k-list", k_list, "Horizons, e.g. 1,3,6,12,24,36");
    evaluate->add_option("--runs", runs, "Repeated training runs per horizon");

    auto* predict = app.add_subcommand("predict", "k-step forecast from a saved model");
    predict->add_option("--model", model_path, "Model file")->required();
    predict->add_option("--at", at, "First forecast slot, YYYY-MM-DDTHH:MM")->required();
    predict->add_option("--occupancy", occupancy, "Occupancy CSV holding the recent history")->required();

    auto* sweep = app.add_subcommand("sweep", "Hyperparameter sensitivity sweep");
    sweep->add_option("--config", config_path, "Run configuration file")->required();
    sweep->add_option("--param", param, "Configuration key to vary")->required();
    sweep->add_option("--grid", grid, "Comma-separated values")->required();
    sweep->add_option("--runs", runs, "Runs per value");

    auto* synth = app.add_subcommand("synth", "Generate a synthetic occupancy series");
    synth->add_option("--spec", spec_path, "Synth spec file")->required();
    synth->add_option("--out", out_path, "Output occupancy CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed()) {
            cli::cmd_ingest(cli::load_run_config(config_path), std::cout);
        } else if (train->parsed()) {
            cli::cmd_train(cli::load_run_config(config_path), charger, k, std::cout);
        } else if (evaluate->parsed()) {
            auto config = cli::load_run_config(config_path);
            if (!k_list.empty()) config.k_list = cli::parse_int_list(k_list);
            if (runs > 0) config.runs = runs;
            config.validate();
            cli::cmd_evaluate(config, std::cout);
        } else if (predict->parsed()) {
            const auto ts = occuforge::parse_timestamp(at);
            if (!ts) throw occuforge::ConfigError(fmt::format("cannot parse timestamp '{}'", at));
            cli::cmd_predict(model_path, occupancy, *ts, std::cout);
        } else if (sweep->parsed()) {
            auto config = cli::load_run_config(config_path);
            if (runs > 0) config.runs = runs;
            cli::cmd_sweep(config, param, cli::split_list(grid), std::cout);
        } else if (synth->parsed()) {
            cli::cmd_synth(cli::load_synth_spec(spec_path), out_path, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "occuforge: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
