#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "rofsl/adversary.hpp"
#include "rofsl/model_zoo.hpp"
#include "rofsl/server_defense.hpp"

namespace rofsl {

struct ModelConfig {
    ModelKind kind = ModelKind::SoftmaxRegression;
    int hidden_dim = 32;
    double weight_decay = 1e-4;
    bool operator==(const ModelConfig&) const = default;
};

enum class DataSource { Blobs, Csv };

struct DataConfig {
    DataSource source = DataSource::Blobs;
    // blobs
    int num_classes = 5;
    int input_dim = 10;
    int train_per_class = 1000;
    int test_per_class = 200;
    double spread = 1.0;
    // csv
    std::string train_csv;
    std::string test_csv;
    // partition
    double dirichlet_alpha = 0.3;
    int num_clients = 50;
    bool operator==(const DataConfig&) const = default;
};

struct ServerDataConfig {
    int n0 = 100;
    double mean_shift = 1.0;
    std::set<int> drop_classes;
    std::string csv;  // csv data source only
    bool operator==(const ServerDataConfig&) const = default;
};

struct ClientConfig {
    int sample_size = 20;
    int epochs = 2;
    int steps = 0;  // > 0 overrides epochs
    int batch_size = 50;
    double learning_rate = 0.1;
    bool operator==(const ClientConfig&) const = default;
};

struct ServerConfig {
    double gamma = 0.0;
    double learning_rate = 0.1;
    int epochs = 2;
    int steps = 0;  // > 0 overrides epochs
    int batch_size = 180;
    double tau = 1.0;
    double eta_g = 1.0;
    bool operator==(const ServerConfig&) const = default;
};

struct DefenseConfig {
    FilterSpec filter;
    AggregatorSpec aggregator;
    bool operator==(const DefenseConfig&) const = default;
};

struct AttackConfig {
    double beta = 0.0;
    AttackRanges ranges;
    bool operator==(const AttackConfig&) const = default;
};

struct RunConfig {
    int rounds = 0;
    std::uint64_t seed = 0;
    int repeats = 1;
    int rolling_window = 1;
    int eval_every = 1;
    int threads = 1;
    bool log_honest_objective = false;
    bool operator==(const RunConfig&) const = default;
};

struct ExperimentConfig {
    ModelConfig model;
    DataConfig data;
    ServerDataConfig server_data;
    ClientConfig clients;
    ServerConfig server;
    DefenseConfig defense;
    AttackConfig attack;
    RunConfig run;

    /// Throws ConfigError naming the first violated key.
    void validate() const;
    bool operator==(const ExperimentConfig&) const = default;
};

/// Parses a JSON document (comments allowed). Missing optional keys take
/// their defaults; unknown keys and out-of-range values raise ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Fully resolved JSON text; parse_config(to_config_text(c)) == c.
std::string to_config_text(const ExperimentConfig& config);

/// Scalars a sweep may vary.
const std::vector<std::string>& sweepable_axes();

/// Sets one sweepable scalar. Throws ConfigError listing valid axes.
void set_axis(ExperimentConfig& config, const std::string& axis, double value);

}  // namespace rofsl
