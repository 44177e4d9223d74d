#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "rofsl/adversary.hpp"
#include "rofsl/config.hpp"
#include "rofsl/data_forge.hpp"
#include "rofsl/local_trainer.hpp"
#include "rofsl/model_zoo.hpp"
#include "rofsl/param_space.hpp"
#include "rofsl/server_defense.hpp"

namespace rofsl {

struct ClientSpec {
    ClientData data;
    Behavior behavior;
};

/// Everything an experiment repeat needs before round 0.
struct Federation {
    ModelSpec model;
    std::vector<ClientSpec> clients;
    Dataset server_data;
    Dataset test_data;
    ParamVector initial_model;
    std::uint64_t seed = 0;  // repeat seed all per-round streams derive from
};

struct RoundState {
    int round = 0;
    ParamVector model;
};

struct RoundRecord {
    int round = 0;
    double test_accuracy = 0.0;
    double test_loss = 0.0;
    std::vector<ClientId> accepted_ids;
    int num_sampled = 0;
    int num_malicious_sampled = 0;
    int num_malicious_accepted = 0;
    double aggregate_update_norm = 0.0;  // |x̄_t - x_t|, after clipping
    double server_update_norm = 0.0;     // |x_{t+1} - x̄_t|, after clipping
    bool degenerate_fallback = false;
    bool empty_acceptance = false;
    double honest_objective = 0.0;  // F'(x_{t+1}); NaN unless enabled
};

struct RoundResult {
    RoundState next;
    RoundRecord record;
};

struct Evaluation {
    double accuracy = 0.0;
    double loss = 0.0;
};

/// S distinct ids drawn uniformly without replacement, in draw order.
std::vector<ClientId> sample_clients(int num_clients, int sample_size, Rng& rng);

/// Seed of repeat r: derived from the master seed so repeats are independent.
std::uint64_t repeat_seed(std::uint64_t master_seed, int repeat);

/// Builds data, shards, attacker assignment and the initial model.
Federation build_federation(const ExperimentConfig& config, std::uint64_t seed);

SgdPlan client_plan(const ExperimentConfig& config, std::size_t shard_size);
SgdPlan server_plan(const ExperimentConfig& config, std::size_t server_size);

/// Argmax accuracy (ties to the lowest class) and mean cross-entropy.
Evaluation evaluate(const ModelArch& arch, const ParamVector& x, const Dataset& test);

/// Sum over honest clients of p_i * f_i(x), full batch.
double honest_objective(const Federation& fed, const ParamVector& x);

/// One round: sample, collect updates, defend, server learning, evaluate.
/// With evaluate_model false the accuracy and loss fields are NaN.
RoundResult run_round(const RoundState& state, const Federation& fed, const ExperimentConfig& config,
                      bool evaluate_model = true);

/// All rounds of one repeat.
std::vector<RoundRecord> run_experiment(const ExperimentConfig& config, int repeat = 0);
std::vector<RoundRecord> run_experiment(const Federation& fed, const ExperimentConfig& config);

}  // namespace rofsl
