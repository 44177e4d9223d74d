#include "rofsl/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include <fmt/format.h>

#include "rofsl/errors.hpp"

namespace rofsl {

std::vector<ClientId> sample_clients(int num_clients, int sample_size, Rng& rng) {
    if (sample_size < 1) throw ConfigError("clients.sample_size: must be >= 1");
    if (sample_size > num_clients) {
        throw ConfigError(fmt::format("clients.sample_size: {} exceeds the {} available clients", sample_size,
                                      num_clients));
    }
    std::vector<ClientId> ids(static_cast<std::size_t>(num_clients));
    std::iota(ids.begin(), ids.end(), 0);
    // Partial Fisher-Yates.
    for (int k = 0; k < sample_size; ++k) {
        std::uniform_int_distribution<int> pick(k, num_clients - 1);
        std::swap(ids[static_cast<std::size_t>(k)], ids[static_cast<std::size_t>(pick(rng))]);
    }
    ids.resize(static_cast<std::size_t>(sample_size));
    return ids;
}

std::uint64_t repeat_seed(std::uint64_t master_seed, int repeat) {
    return derive_seed(master_seed, {tag(Stream::Repeat), static_cast<std::uint64_t>(repeat)});
}

namespace {

void load_csv_world(const ExperimentConfig& config, Dataset& train, Dataset& test, Dataset& server) {
    train = load_csv_dataset(config.data.train_csv);
    test = load_csv_dataset(config.data.test_csv, train.num_classes);
    server = load_csv_dataset(config.server_data.csv, train.num_classes);
    if (test.input_dim() != train.input_dim() || server.input_dim() != train.input_dim()) {
        throw ConfigError("data: csv files disagree on the number of features");
    }
    if (test.empty() || server.empty()) throw ConfigError("data: csv test and server files must be nonempty");
    for (int c : config.server_data.drop_classes) {
        if (c < 0 || c >= train.num_classes) throw ConfigError("server_data.drop_classes: class out of range");
    }
    std::erase_if(server.examples,
                  [&](const LabeledExample& ex) { return config.server_data.drop_classes.contains(ex.label); });
    if (server.empty()) throw ConfigError("server_data.drop_classes: no server examples remain");
    if (server.size() > static_cast<std::size_t>(config.server_data.n0)) {
        server.examples.resize(static_cast<std::size_t>(config.server_data.n0));
    }
}

}  // namespace

Federation build_federation(const ExperimentConfig& config, std::uint64_t seed) {
    config.validate();
    Federation fed;
    fed.seed = seed;

    Dataset train;
    if (config.data.source == DataSource::Blobs) {
        const BlobModel blobs =
            make_blob_model(config.data.num_classes, config.data.input_dim, config.data.spread);
        Rng train_rng = make_rng(seed, {tag(Stream::TrainData)});
        Rng test_rng = make_rng(seed, {tag(Stream::TestData)});
        Rng server_rng = make_rng(seed, {tag(Stream::ServerData)});
        train = sample_blobs(blobs, config.data.train_per_class, train_rng);
        fed.test_data = sample_blobs(blobs, config.data.test_per_class, test_rng);
        fed.server_data = make_server_dataset(blobs, config.server_data.n0, config.server_data.mean_shift,
                                              config.server_data.drop_classes, server_rng);
    } else {
        load_csv_world(config, train, fed.test_data, fed.server_data);
    }

    fed.model.arch = ModelArch{config.model.kind, static_cast<int>(train.input_dim()), config.model.hidden_dim,
                               train.num_classes};
    fed.model.loss = LossSpec{config.model.weight_decay};
    fed.model.arch.validate();

    const auto n_clients = static_cast<std::size_t>(config.data.num_clients);
    Rng partition_rng = make_rng(seed, {tag(Stream::Partition)});
    const PartitionPlan plan = dirichlet_partition(train, n_clients, config.data.dirichlet_alpha, partition_rng);

    // Own stream, drawn even when beta = 0, so runs that differ only in beta
    // share data, shards and client sampling.
    Rng attacker_rng = make_rng(seed, {tag(Stream::Attackers)});
    const auto behaviors = assign_attackers(n_clients, config.attack.beta, attacker_rng, config.attack.ranges);

    const double n_total = static_cast<double>(train.size());
    fed.clients.reserve(n_clients);
    for (std::size_t i = 0; i < n_clients; ++i) {
        ClientSpec client;
        client.data.id = static_cast<int>(i);
        client.data.shard = train.subset(plan.shards[i]);
        client.data.weight = static_cast<double>(client.data.shard.size()) / n_total;
        client.behavior = behaviors[i];
        fed.clients.push_back(std::move(client));
    }

    Rng init_rng = make_rng(seed, {tag(Stream::InitModel)});
    fed.initial_model = init_params(fed.model.arch, init_rng);
    return fed;
}

SgdPlan client_plan(const ExperimentConfig& config, std::size_t shard_size) {
    SgdPlan plan;
    plan.learning_rate = config.clients.learning_rate;
    plan.batch_size = static_cast<std::size_t>(config.clients.batch_size);
    plan.num_steps = config.clients.steps > 0
                         ? static_cast<std::size_t>(config.clients.steps)
                         : epochs_to_steps(static_cast<std::size_t>(config.clients.epochs), shard_size,
                                           plan.batch_size);
    plan.loss_scale = 1.0;
    return plan;
}

SgdPlan server_plan(const ExperimentConfig& config, std::size_t server_size) {
    SgdPlan plan;
    plan.learning_rate = config.server.learning_rate;
    plan.batch_size = static_cast<std::size_t>(config.server.batch_size);
    plan.num_steps = config.server.steps > 0
                         ? static_cast<std::size_t>(config.server.steps)
                         : epochs_to_steps(static_cast<std::size_t>(config.server.epochs), server_size,
                                           plan.batch_size);
    plan.loss_scale = config.server.gamma;
    return plan;
}

Evaluation evaluate(const ModelArch& arch, const ParamVector& x, const Dataset& test) {
    if (test.empty()) throw std::invalid_argument("evaluate: empty test set");
    std::size_t correct = 0;
    for (const auto& ex : test.examples) {
        if (predict(arch, x, ex.features) == ex.label) ++correct;
    }
    return {static_cast<double>(correct) / static_cast<double>(test.size()), cross_entropy(arch, x, test)};
}

double honest_objective(const Federation& fed, const ParamVector& x) {
    double total = 0.0;
    for (const auto& c : fed.clients) {
        if (c.behavior.malicious()) continue;
        total += c.data.weight * loss(fed.model, x, c.data.shard);
    }
    return total;
}

namespace {

// Runs fn(k) for k in [0, n) on up to `threads` workers. Each k writes only
// its own output slot, so results do not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn fn) {
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
    if (workers <= 1) {
        for (std::size_t k = 0; k < n; ++k) fn(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t k = next++; k < n; k = next++) {
                    try {
                        fn(k);
                    } catch (...) {
                        if (!failed.exchange(true)) error = std::current_exception();
                    }
                }
            });
        }
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace

RoundResult run_round(const RoundState& state, const Federation& fed, const ExperimentConfig& config,
                      bool evaluate_model) {
    const int t = state.round;
    const ParamVector& x_t = state.model;
    const auto round_tag = static_cast<std::uint64_t>(t);

    Rng sampling_rng = make_rng(fed.seed, {tag(Stream::Sampling), round_tag});
    std::vector<ClientId> sampled =
        sample_clients(static_cast<int>(fed.clients.size()), config.clients.sample_size, sampling_rng);
    std::sort(sampled.begin(), sampled.end());

    std::vector<ParamVector> deltas(sampled.size());
    parallel_for(sampled.size(), config.run.threads, [&](std::size_t k) {
        const ClientSpec& client = fed.clients[static_cast<std::size_t>(sampled[k])];
        Rng rng = make_rng(fed.seed, {tag(Stream::Client), static_cast<std::uint64_t>(client.data.id), round_tag});
        deltas[k] = client_update(fed.model, client.data, client.behavior, x_t,
                                  client_plan(config, client.data.shard.size()), rng);
    });
    UpdateMap updates;
    for (std::size_t k = 0; k < sampled.size(); ++k) updates.emplace(sampled[k], std::move(deltas[k]));

    const ParamVector server_grad = gradient(fed.model, x_t, fed.server_data);

    AggregationResult agg;
    if (config.server.eta_g != 1.0) {
        // Pseudo-gradient step on the plain mean of all updates.
        std::vector<ParamVector> all;
        for (const auto& [id, delta] : updates) {
            all.push_back(delta);
            agg.report.accepted.push_back(id);
        }
        const ParamVector step = scale(config.server.eta_g, average(all));
        agg.raw_update_norm = norm(step);
        agg.update = clip_norm(step, config.server.tau);
        agg.model = add(x_t, agg.update);
        agg.report.server_grad_norm = norm(server_grad);
    } else {
        agg = robust_aggregate_updates(x_t, updates, server_grad, config.defense.filter, config.defense.aggregator,
                                       config.server.tau);
    }

    RoundResult out;
    out.next.round = t + 1;
    double server_update_norm = 0.0;
    if (config.server.gamma > 0.0) {
        Rng server_rng = make_rng(fed.seed, {tag(Stream::Server), round_tag});
        const ParamVector trained =
            local_sgd(fed.model, agg.model, fed.server_data, server_plan(config, fed.server_data.size()), server_rng);
        const ParamVector u = clip_norm(subtract(trained, agg.model), config.server.tau);
        server_update_norm = norm(u);
        out.next.model = add(agg.model, u);
    } else {
        out.next.model = agg.model;
    }
    if (!all_finite(out.next.model)) {
        throw NumericalError(fmt::format("round {}: model has non-finite parameters", t));
    }

    RoundRecord& rec = out.record;
    rec.round = t;
    rec.accepted_ids = agg.report.accepted;
    rec.num_sampled = static_cast<int>(sampled.size());
    for (ClientId id : sampled) {
        if (fed.clients[static_cast<std::size_t>(id)].behavior.malicious()) ++rec.num_malicious_sampled;
    }
    for (ClientId id : rec.accepted_ids) {
        if (fed.clients[static_cast<std::size_t>(id)].behavior.malicious()) ++rec.num_malicious_accepted;
    }
    rec.aggregate_update_norm = norm(agg.update);
    rec.server_update_norm = server_update_norm;
    rec.degenerate_fallback = agg.report.degenerate_fallback;
    rec.empty_acceptance = agg.report.empty_acceptance;
    if (evaluate_model) {
        const Evaluation e = evaluate(fed.model.arch, out.next.model, fed.test_data);
        rec.test_accuracy = e.accuracy;
        rec.test_loss = e.loss;
    } else {
        rec.test_accuracy = std::numeric_limits<double>::quiet_NaN();
        rec.test_loss = std::numeric_limits<double>::quiet_NaN();
    }
    rec.honest_objective =
        config.run.log_honest_objective ? honest_objective(fed, out.next.model) : std::numeric_limits<double>::quiet_NaN();
    return out;
}

std::vector<RoundRecord> run_experiment(const Federation& fed, const ExperimentConfig& config) {
    std::vector<RoundRecord> records;
    records.reserve(static_cast<std::size_t>(config.run.rounds));
    RoundState state{0, fed.initial_model};
    for (int t = 0; t < config.run.rounds; ++t) {
        // Rounds between evaluations carry the last measured values forward;
        // the first and last rounds are always evaluated.
        const bool eval_now = t == 0 || t + 1 == config.run.rounds || (t + 1) % config.run.eval_every == 0;
        RoundResult r = run_round(state, fed, config, eval_now);
        if (!eval_now) {
            r.record.test_accuracy = records.back().test_accuracy;
            r.record.test_loss = records.back().test_loss;
        }
        records.push_back(std::move(r.record));
        state = std::move(r.next);
    }
    return records;
}

std::vector<RoundRecord> run_experiment(const ExperimentConfig& config, int repeat) {
    config.validate();
    if (config.run.rounds == 0) return {};
    const Federation fed = build_federation(config, repeat_seed(config.run.seed, repeat));
    return run_experiment(fed, config);
}

}  // namespace rofsl
