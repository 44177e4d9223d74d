// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "../support/oracles.hpp"
#include "rofsl/adversary.hpp"
#include "rofsl/config.hpp"
#include "rofsl/experiment.hpp"
#include "rofsl/orchestrator.hpp"
#include "rofsl/server_defense.hpp"

using namespace rofsl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

ParamVector gaussian(Rng& rng, std::size_t d, double sd = 1.0) {
    std::normal_distribution<double> n(0.0, sd);
    ParamVector v(d);
    for (auto& x : v) x = n(rng);
    return v;
}

Dataset random_batch(Rng& rng, int input_dim, int num_classes, std::size_t n) {
    std::normal_distribution<double> feat(0.0, 1.5);
    std::uniform_int_distribution<int> lab(0, num_classes - 1);
    Dataset d;
    d.num_classes = num_classes;
    for (std::size_t i = 0; i < n; ++i) {
        LabeledExample ex;
        ex.features.resize(static_cast<std::size_t>(input_dim));
        for (auto& f : ex.features) f = feat(rng);
        ex.label = lab(rng);
        d.examples.push_back(ex);
    }
    return d;
}

AggregatorSpec reference_spec() {
    AggregatorSpec spec;
    spec.kind = AggregatorKind::GeoMed;
    return spec;
}

Outcome gradient_correctness() {
    Rng rng(20240101);
    std::uniform_real_distribution<double> decay(0.0, 0.1);
    std::uniform_int_distribution<std::size_t> size(1, 16);
    double worst = 0.0;
    for (const ModelArch& arch :
         {ModelArch{ModelKind::SoftmaxRegression, 6, 0, 4}, ModelArch{ModelKind::Mlp1h, 6, 8, 4}}) {
        for (int trial = 0; trial < 50; ++trial) {
            const ModelSpec spec{arch, {decay(rng)}};
            const ParamVector x = gaussian(rng, arch.param_count(), 0.7);
            const Dataset batch = random_batch(rng, 6, 4, size(rng));
            worst = std::max(worst, testing::relative_gradient_error(
                                        gradient(spec, x, batch), testing::finite_difference_gradient(spec, x, batch)));
        }
    }
    return {worst < 1e-5, fmt::format("max relative error {:.3e} over 2x50 draws", worst)};
}

Outcome weiszfeld_vs_oracle() {
    Rng rng(77);
    std::uniform_int_distribution<int> count(3, 7);
    std::uniform_real_distribution<double> coord(-10.0, 10.0);
    const AggregatorSpec spec = reference_spec();
    double worst_ratio = 0.0;
    int non_monotone = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = count(rng);
        std::vector<testing::Point2> pts;
        std::vector<ParamVector> vecs;
        for (int i = 0; i < n; ++i) {
            const double x = coord(rng), y = coord(rng);
            pts.push_back({x, y});
            vecs.push_back(ParamVector{x, y});
        }
        const double oracle = testing::brute_force_geomed_objective(pts);
        const GeoMedResult r = weiszfeld(vecs, spec, GeoMedMode::Reference);
        worst_ratio = std::max(worst_ratio, geomed_objective(r.median, vecs) / oracle);
        for (std::size_t k = 1; k < r.objective_trace.size(); ++k)
            if (r.objective_trace[k] > r.objective_trace[k - 1]) ++non_monotone;
    }
    return {worst_ratio <= 1.0 + 1e-6 && non_monotone == 0,
            fmt::format("max objective/oracle {:.12f}, non-monotone steps {}", worst_ratio, non_monotone)};
}

Outcome breakdown() {
    Rng rng(4242);
    const AggregatorSpec spec = reference_spec();
    double worst_med = 0.0;
    double worst_avg_ratio = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 4; ++k) {
        for (double radius : {1e3, 1e6, 1e9}) {
            std::vector<ParamVector> pts;
            std::uniform_real_distribution<double> u(0.0, 1.0);
            for (int i = 0; i < 10; ++i) {
                const ParamVector v = gaussian(rng, 8);
                pts.push_back(scale(std::pow(u(rng), 1.0 / 8.0) / norm(v), v));
            }
            const ParamVector honest = average(pts);
            const ParamVector v = gaussian(rng, 8);
            for (int i = 0; i < k; ++i) pts.push_back(scale(radius / norm(v), v));
            worst_med = std::max(worst_med, norm(subtract(geometric_median(pts, spec, GeoMedMode::Reference), honest)));
            worst_avg_ratio = std::min(worst_avg_ratio, norm(average(pts)) / (radius * k / 14.0 * 0.9));
        }
    }
    return {worst_med <= 10.0 && worst_avg_ratio >= 1.0,
            fmt::format("max |geomed - honest mean| {:.4f}, min average/(0.9 R k/14) {:.4f}", worst_med,
                        worst_avg_ratio)};
}

Outcome filter_exactness() {
    Rng rng(99);
    int af_mismatch = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const ParamVector g = gaussian(rng, 7);
        UpdateMap updates;
        for (int id = 0; id < 20; ++id) updates[id] = gaussian(rng, 7);
        // Exact orthogonal case once in a while.
        if (trial % 10 == 0) updates[20] = ParamVector{g[1], -g[0], 0, 0, 0, 0, 0};
        std::vector<ClientId> expected;
        for (const auto& [id, d] : updates)
            if (dot(d, scale(-1.0, g)) >= 0.0) expected.push_back(id);
        if (angle_filter(updates, g, 0.0).accepted != expected) ++af_mismatch;
    }
    int lf_mismatch = 0;
    for (int s = 1; s <= 25; ++s) {
        UpdateMap updates;
        for (int id = 0; id < s; ++id) updates[id * 2 + 1] = gaussian(rng, 4);
        for (double theta : {0.1, 0.5, 0.9}) {
            const std::size_t want =
                static_cast<std::size_t>(s) - static_cast<std::size_t>(std::floor(theta * static_cast<double>(s)));
            if (loss_filter(updates, gaussian(rng, 4), 0.1, theta).accepted.size() != want) ++lf_mismatch;
        }
    }
    return {af_mismatch == 0 && lf_mismatch == 0,
            fmt::format("AF mismatches {}/100, LF cardinality mismatches {}/75", af_mismatch, lf_mismatch)};
}

Outcome clip_contract() {
    Rng rng(5);
    std::uniform_real_distribution<double> log_scale(-4.0, 4.0);
    int bad_norm = 0, bad_dir = 0, bad_idem = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const ParamVector v = scale(std::pow(10.0, log_scale(rng)), gaussian(rng, 1 + trial % 40));
        for (double tau : {0.1, 1.0, 10.0}) {
            const ParamVector c = clip_norm(v, tau);
            if (norm(c) > tau * (1.0 + 1e-12)) ++bad_norm;
            if (std::abs(cos_sim(c, v) - 1.0) > 1e-9) ++bad_dir;
            if (clip_norm(c, tau) != c) ++bad_idem;
        }
    }
    return {bad_norm + bad_dir + bad_idem == 0,
            fmt::format("norm violations {}, direction violations {}, idempotence violations {}", bad_norm, bad_dir,
                        bad_idem)};
}

Outcome attack_exactness() {
    Rng gen(31);
    std::uniform_real_distribution<double> nu_dist(0.1, 10.1);
    int mismatches = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const ModelSpec spec{{trial % 2 == 0 ? ModelKind::SoftmaxRegression : ModelKind::Mlp1h, 5, 6, 4}, {1e-4}};
        Rng setup(1000 + trial);
        const ClientData client{trial, make_blobs(4, 5, 8, 1.0, setup), 1.0};
        const ParamVector x_t = init_params(spec.arch, setup);
        const SgdPlan plan{0.1, 7, 6, 1.0};
        const double nu = nu_dist(gen);
        Rng a(5000 + trial), b(5000 + trial);
        const ParamVector honest = subtract(honest_client_round(spec, client, x_t, plan, a), x_t);
        const ParamVector flipped = client_update(spec, client, {BehaviorKind::SignFlip, nu}, x_t, plan, b);
        ParamVector expected(honest.size());
        for (std::size_t j = 0; j < honest.size(); ++j) expected[j] = -nu * honest[j];
        if (flipped != expected) ++mismatches;
    }
    return {mismatches == 0, fmt::format("bitwise mismatches {}/20", mismatches)};
}

ExperimentConfig fedavg_config() {
    ExperimentConfig c;
    c.data.num_classes = 5;
    c.data.input_dim = 10;
    c.data.train_per_class = 200;
    c.data.test_per_class = 50;
    c.data.num_clients = 20;
    c.clients.sample_size = 6;
    c.clients.batch_size = 10;
    c.server_data.n0 = 50;
    c.server.gamma = 0.0;
    c.server.tau = 1e12;
    c.server.eta_g = 1.0;
    c.defense.filter.kind = FilterKind::None;
    c.defense.aggregator.kind = AggregatorKind::Average;
    c.run.rounds = 5;
    c.run.seed = 8;
    return c;
}

Outcome fedavg_reduction() {
    const ExperimentConfig c = fedavg_config();
    const Federation fed = build_federation(c, repeat_seed(c.run.seed, 0));
    RoundState state{0, fed.initial_model};
    for (int t = 0; t < 5; ++t) state = run_round(state, fed, c, false).next;
    const ParamVector reference = testing::fedavg_reference(fed, c, 5);
    std::size_t differing = 0;
    for (std::size_t j = 0; j < reference.size(); ++j) differing += state.model[j] != reference[j] ? 1 : 0;
    return {differing == 0, fmt::format("{} of {} coordinates differ after 5 rounds", differing, reference.size())};
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    ExperimentConfig c = fedavg_config();
    c.attack.beta = 0.3;
    c.server.gamma = 0.1;
    c.server.tau = 1.0;
    c.defense.filter.kind = FilterKind::Loss;
    c.defense.aggregator.kind = AggregatorKind::GeoMed;
    c.run.rounds = 30;
    c.run.repeats = 2;
    c.run.threads = 2;
    const fs::path root = fs::temp_directory_path() / "rofsl_acceptance_determinism";
    fs::remove_all(root);
    const int a = run_and_persist(c, root / "a");
    const int b = run_and_persist(c, root / "b");
    const std::string ma = read_file(root / "a" / "metrics.csv");
    const std::string mb = read_file(root / "b" / "metrics.csv");
    fs::remove_all(root);
    return {a == 0 && b == 0 && !ma.empty() && ma == mb,
            fmt::format("metrics.csv {} bytes, identical: {}", ma.size(), ma == mb ? "yes" : "no")};
}

// Mirrors configs/scaled_base.json.
ExperimentConfig scaled_base() {
    ExperimentConfig c;
    c.model.kind = ModelKind::SoftmaxRegression;
    c.model.weight_decay = 1e-4;
    c.data.num_classes = 5;
    c.data.input_dim = 10;
    c.data.train_per_class = 1000;
    c.data.test_per_class = 200;
    c.data.spread = 1.0;
    c.data.dirichlet_alpha = 0.3;
    c.data.num_clients = 50;
    c.server_data.n0 = 100;
    c.server_data.mean_shift = 1.0;
    c.server_data.drop_classes = {4};
    c.clients.sample_size = 10;
    c.clients.epochs = 2;
    c.clients.batch_size = 10;
    c.clients.learning_rate = 0.1;
    c.server.gamma = 0.0;
    c.server.learning_rate = 0.1;
    c.server.epochs = 2;
    c.server.batch_size = 20;
    c.server.tau = 1.0;
    c.defense.filter.kind = FilterKind::None;
    c.defense.aggregator.kind = AggregatorKind::GeoMed;
    c.attack.beta = 0.0;
    c.run.rounds = 300;
    c.run.seed = 1;
    c.run.repeats = 3;
    c.run.rolling_window = 20;
    return c;
}

struct Scenario {
    double beta = 0.0;
    double gamma = 0.0;
    FilterKind filter = FilterKind::None;
    AggregatorKind aggregator = AggregatorKind::GeoMed;
    double rho = 0.1;
};

double final_accuracy(const Scenario& s) {
    ExperimentConfig c = scaled_base();
    c.attack.beta = s.beta;
    c.server.gamma = s.gamma;
    c.defense.filter.kind = s.filter;
    c.defense.filter.rho = s.rho;
    c.defense.aggregator.kind = s.aggregator;
    c.validate();
    return run_repeats(c).summary.final_mean();
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](int id, const std::string& name, const Outcome& o) {
        fmt::print("criterion {:>2}: {} | {} | {}\n", id, o.pass ? "PASS" : "FAIL", name, o.detail);
        std::fflush(stdout);
        if (!o.pass) ++failures;
    };
    auto guarded = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
        try {
            report(id, name, fn());
        } catch (const std::exception& e) {
            report(id, name, {false, fmt::format("exception: {}", e.what())});
        }
    };

    guarded(1, "gradient correctness", gradient_correctness);
    guarded(2, "Weiszfeld vs brute-force oracle", weiszfeld_vs_oracle);
    guarded(3, "geometric median breakdown", breakdown);
    guarded(4, "filter exactness", filter_exactness);
    guarded(5, "clip contract", clip_contract);
    guarded(6, "sign-flip exactness", attack_exactness);
    guarded(7, "FedAvg reduction", fedavg_reduction);
    guarded(8, "metrics determinism", determinism);

    const auto start = std::chrono::steady_clock::now();
#ifdef ROFSL_SCALED_CONFIG
    try {
        if (!(load_config(ROFSL_SCALED_CONFIG) == scaled_base())) {
            fmt::print("note: {} differs from the pinned scaled configuration\n", ROFSL_SCALED_CONFIG);
        }
    } catch (const std::exception& e) {
        fmt::print("note: could not read {}: {}\n", ROFSL_SCALED_CONFIG, e.what());
    }
#endif

    double clean = 0, clean_sl = 0, collapse = 0, rescue = 0, lf_03 = 0, nf_03 = 0, geo_03 = 0, avg_03 = 0;
    std::vector<double> rho_acc;
    try {
        clean = final_accuracy({0.0, 0.0});
        clean_sl = final_accuracy({0.0, 0.1});
        collapse = final_accuracy({0.6, 0.0});
        rescue = final_accuracy({0.6, 0.1, FilterKind::Loss});
        lf_03 = final_accuracy({0.3, 0.1, FilterKind::Loss});
        nf_03 = final_accuracy({0.3, 0.1, FilterKind::None});
        geo_03 = final_accuracy({0.3, 0.0, FilterKind::None, AggregatorKind::GeoMed});
        avg_03 = final_accuracy({0.3, 0.0, FilterKind::None, AggregatorKind::Average});
        for (double rho : {0.1, 0.3, 1.0})
            rho_acc.push_back(rho == 0.1 ? rescue : final_accuracy({0.6, 0.1, FilterKind::Loss,
                                                                     AggregatorKind::GeoMed, rho}));
    } catch (const std::exception& e) {
        for (int id = 9; id <= 14; ++id) report(id, "scaled experiment", {false, fmt::format("exception: {}", e.what())});
        return 1;
    }

    report(9, "no-attack sanity",
           {clean >= 0.85 && std::abs(clean_sl - clean) <= 0.05,
            fmt::format("beta=0 gamma=0 acc {:.4f} (>= 0.85), gamma=0.1 acc {:.4f} (|diff| {:.4f} <= 0.05)", clean,
                        clean_sl, std::abs(clean_sl - clean))});
    report(10, "collapse without server learning",
           {collapse <= 0.35, fmt::format("beta=0.6 gamma=0 0F acc {:.4f} (<= 0.35)", collapse)});
    const double rescue_floor = std::max(collapse + 0.25, 0.6);
    report(11, "rescue by server learning and LF",
           {rescue >= rescue_floor && rescue >= 0.75 * clean,
            fmt::format("beta=0.6 gamma=0.1 LF acc {:.4f} (>= {:.4f} and >= {:.4f})", rescue, rescue_floor,
                        0.75 * clean)});
    report(12, "ordering at beta=0.3",
           {lf_03 >= nf_03 - 0.03 && lf_03 >= 0.8 * clean && nf_03 >= 0.8 * clean,
            fmt::format("LF {:.4f}, 0F {:.4f} (LF >= 0F - 0.03, both >= {:.4f})", lf_03, nf_03, 0.8 * clean)});
    report(13, "GeoMed vs average under attack",
           {geo_03 - avg_03 >= 0.2,
            fmt::format("geomed {:.4f}, average {:.4f} (gap {:.4f} >= 0.2)", geo_03, avg_03, geo_03 - avg_03)});
    const auto [lo, hi] = std::minmax_element(rho_acc.begin(), rho_acc.end());
    report(14, "rho insensitivity",
           {*hi - *lo <= 0.1, fmt::format("rho 0.1/0.3/1.0 acc {:.4f}/{:.4f}/{:.4f} (band {:.4f} <= 0.1)", rho_acc[0],
                                          rho_acc[1], rho_acc[2], *hi - *lo)});

    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    fmt::print("scaled experiment wall time {:.1f} s\n", seconds);
    fmt::print("{} of 14 criteria passed\n", 14 - failures);
    return failures == 0 ? 0 : 1;
}
