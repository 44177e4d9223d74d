// Command-line front end: run, sweep and validate experiment configs.

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rofsl/config.hpp"
#include "rofsl/experiment.hpp"

namespace {

std::vector<double> parse_values(const std::string& list) {
    std::vector<double> values;
    std::stringstream ss(list);
    std::string token;
    while (std::getline(ss, token, ',')) {
        std::size_t pos = 0;
        const double v = std::stod(token, &pos);
        if (token.find_first_not_of(' ', pos) != std::string::npos) {
            throw std::invalid_argument("bad sweep value '" + token + "'");
        }
        values.push_back(v);
    }
    if (values.empty()) throw std::invalid_argument("--values is empty");
    return values;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Byzantine-robust federated learning simulator with server learning"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string axis;
    std::string values;

    auto* run = app.add_subcommand("run", "Run an experiment and write metrics.csv, summary.json, config.resolved");
    run->add_option("--config", config_path, "Experiment config (JSON)")->required();
    run->add_option("--out", out_dir, "Output directory")->required();

    auto* sweep = app.add_subcommand("sweep", "Run one experiment per value of a scalar and write sweep.csv");
    sweep->add_option("--config", config_path, "Base experiment config (JSON)")->required();
    sweep->add_option("--axis", axis, "beta, gamma, alpha, rho, theta, tau or alpha_dirichlet")->required();
    sweep->add_option("--values", values, "Comma-separated values")->required();
    sweep->add_option("--out", out_dir, "Output directory")->required();

    auto* validate = app.add_subcommand("validate", "Check a config and print it fully resolved");
    validate->add_option("--config", config_path, "Experiment config (JSON)")->required();

    CLI11_PARSE(app, argc, argv);

    rofsl::ExperimentConfig config;
    try {
        config = rofsl::load_config(config_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    if (*validate) {
        std::cout << rofsl::to_config_text(config);
        return 0;
    }
    if (*run) {
        return rofsl::run_and_persist(config, out_dir);
    }
    try {
        return rofsl::sweep_and_persist(config, axis, parse_values(values), out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
