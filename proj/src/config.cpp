#include "rofsl/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "rofsl/errors.hpp"

namespace rofsl {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported as unknown.
class Section {
public:
    Section(const json& root, std::string name) : name_(std::move(name)) {
        if (root.contains(name_)) {
            const json& node = root.at(name_);
            if (!node.is_object()) throw ConfigError(name_ + ": expected an object");
            node_ = &node;
        }
    }

    template <typename T>
    void get(const char* key, T& out) {
        if (node_ == nullptr || !node_->contains(key)) return;
        seen_.insert(key);
        read(node_->at(key), path(key), out);
    }

    template <typename T>
    void require(const char* key, T& out) {
        if (node_ == nullptr || !node_->contains(key)) throw ConfigError(path(key) + ": required key is missing");
        get(key, out);
    }

    void finish() const {
        if (node_ == nullptr) return;
        for (const auto& [key, value] : node_->items()) {
            if (!seen_.contains(key)) throw ConfigError(path(key) + ": unknown key");
        }
    }

private:
    std::string path(const std::string& key) const { return name_ + "." + key; }

    static void read(const json& v, const std::string& where, double& out) {
        if (!v.is_number()) throw ConfigError(where + ": expected a number");
        out = v.get<double>();
        if (!std::isfinite(out)) throw ConfigError(where + ": must be finite");
    }
    static void read(const json& v, const std::string& where, int& out) {
        if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
        const auto wide = v.get<std::int64_t>();
        if (wide < std::numeric_limits<int>::min() || wide > std::numeric_limits<int>::max()) {
            throw ConfigError(where + ": integer out of range");
        }
        out = static_cast<int>(wide);
    }
    static void read(const json& v, const std::string& where, std::uint64_t& out) {
        if (!v.is_number_unsigned()) throw ConfigError(where + ": expected a nonnegative integer");
        out = v.get<std::uint64_t>();
    }
    static void read(const json& v, const std::string& where, bool& out) {
        if (!v.is_boolean()) throw ConfigError(where + ": expected true or false");
        out = v.get<bool>();
    }
    static void read(const json& v, const std::string& where, std::string& out) {
        if (!v.is_string()) throw ConfigError(where + ": expected a string");
        out = v.get<std::string>();
    }
    static void read(const json& v, const std::string& where, std::set<int>& out) {
        if (!v.is_array()) throw ConfigError(where + ": expected an array of integers");
        out.clear();
        for (const auto& e : v) {
            int c = 0;
            read(e, where, c);
            out.insert(c);
        }
    }
    static void read(const json& v, const std::string& where, NuRange& out) {
        if (!v.is_array() || v.size() != 2) throw ConfigError(where + ": expected [lo, hi]");
        read(v[0], where, out.lo);
        read(v[1], where, out.hi);
    }

    std::string name_;
    const json* node_ = nullptr;
    std::set<std::string> seen_;
};

[[noreturn]] void fail(const std::string& key, const std::string& constraint, double got) {
    throw ConfigError(fmt::format("{}: {}, got {}", key, constraint, got));
}

void at_least(const char* key, double v, double lo) {
    if (!(v >= lo)) fail(key, fmt::format("must be >= {}", lo), v);
}
void positive(const char* key, double v) {
    if (!(v > 0.0)) fail(key, "must be > 0 (positive)", v);
}

}  // namespace

void ExperimentConfig::validate() const {
    at_least("model.hidden_dim", model.hidden_dim, 1);
    at_least("model.weight_decay", model.weight_decay, 0.0);

    if (data.source == DataSource::Blobs) {
        at_least("data.num_classes", data.num_classes, 2);
        at_least("data.input_dim", data.input_dim, 2);
        at_least("data.train_per_class", data.train_per_class, 1);
        at_least("data.test_per_class", data.test_per_class, 1);
        positive("data.spread", data.spread);
        for (int c : server_data.drop_classes) {
            if (c < 0 || c >= data.num_classes) {
                fail("server_data.drop_classes", fmt::format("classes must lie in [0, {})", data.num_classes), c);
            }
        }
        if (static_cast<int>(server_data.drop_classes.size()) >= data.num_classes) {
            throw ConfigError("server_data.drop_classes: cannot drop every class");
        }
    } else {
        if (data.train_csv.empty()) throw ConfigError("data.train_csv: required when data.source is csv");
        if (data.test_csv.empty()) throw ConfigError("data.test_csv: required when data.source is csv");
        if (server_data.csv.empty()) throw ConfigError("server_data.csv: required when data.source is csv");
    }
    positive("data.dirichlet_alpha", data.dirichlet_alpha);
    at_least("data.num_clients", data.num_clients, 1);

    at_least("server_data.n0", server_data.n0, 1);
    at_least("server_data.mean_shift", server_data.mean_shift, 0.0);

    at_least("clients.sample_size", clients.sample_size, 1);
    if (clients.sample_size > data.num_clients) {
        fail("clients.sample_size", fmt::format("must be <= data.num_clients ({})", data.num_clients),
             clients.sample_size);
    }
    at_least("clients.epochs", clients.epochs, 1);
    at_least("clients.steps", clients.steps, 0);
    at_least("clients.batch_size", clients.batch_size, 1);
    positive("clients.learning_rate", clients.learning_rate);

    at_least("server.gamma", server.gamma, 0.0);
    positive("server.learning_rate", server.learning_rate);
    at_least("server.epochs", server.epochs, 1);
    at_least("server.steps", server.steps, 0);
    at_least("server.batch_size", server.batch_size, 1);
    positive("server.tau", server.tau);
    positive("server.eta_g", server.eta_g);
    if (server.eta_g != 1.0 &&
        (defense.aggregator.kind != AggregatorKind::Average || defense.filter.kind != FilterKind::None)) {
        throw ConfigError("server.eta_g: values other than 1 require defense.filter none and defense.aggregator average");
    }

    defense.filter.validate();
    defense.aggregator.validate();

    if (!(attack.beta >= 0.0 && attack.beta < 1.0)) fail("attack.beta", "must lie in [0, 1)", attack.beta);
    if (!(attack.ranges.sign_flip.lo > 0.0 && attack.ranges.sign_flip.lo <= attack.ranges.sign_flip.hi)) {
        throw ConfigError("attack.sign_flip_nu: need 0 < lo <= hi");
    }
    if (!(attack.ranges.label_flip.lo > 0.0 && attack.ranges.label_flip.lo <= attack.ranges.label_flip.hi)) {
        throw ConfigError("attack.label_flip_nu: need 0 < lo <= hi");
    }

    at_least("run.rounds", run.rounds, 0);
    at_least("run.repeats", run.repeats, 1);
    at_least("run.rolling_window", run.rolling_window, 1);
    at_least("run.eval_every", run.eval_every, 1);
    at_least("run.threads", run.threads, 1);
}

ExperimentConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: malformed document: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config: top level must be an object");

    static const std::set<std::string> kSections = {"model",   "data",    "server_data", "clients",
                                                     "server",  "defense", "attack",      "run"};
    for (const auto& [key, value] : root.items()) {
        if (!kSections.contains(key)) throw ConfigError(key + ": unknown key");
    }

    ExperimentConfig c;
    {
        Section s(root, "model");
        std::string kind = to_string(c.model.kind);
        s.get("kind", kind);
        c.model.kind = parse_model_kind(kind);
        s.get("hidden_dim", c.model.hidden_dim);
        s.get("weight_decay", c.model.weight_decay);
        s.finish();
    }
    {
        Section s(root, "data");
        std::string source = "blobs";
        s.get("source", source);
        if (source == "blobs") {
            c.data.source = DataSource::Blobs;
        } else if (source == "csv") {
            c.data.source = DataSource::Csv;
        } else {
            throw ConfigError("data.source: expected blobs or csv, got '" + source + "'");
        }
        s.get("num_classes", c.data.num_classes);
        s.get("input_dim", c.data.input_dim);
        s.get("train_per_class", c.data.train_per_class);
        s.get("test_per_class", c.data.test_per_class);
        s.get("spread", c.data.spread);
        s.get("train_csv", c.data.train_csv);
        s.get("test_csv", c.data.test_csv);
        s.get("dirichlet_alpha", c.data.dirichlet_alpha);
        s.get("num_clients", c.data.num_clients);
        s.finish();
    }
    {
        Section s(root, "server_data");
        s.get("n0", c.server_data.n0);
        s.get("mean_shift", c.server_data.mean_shift);
        s.get("drop_classes", c.server_data.drop_classes);
        s.get("csv", c.server_data.csv);
        s.finish();
    }
    {
        Section s(root, "clients");
        s.get("sample_size", c.clients.sample_size);
        s.get("epochs", c.clients.epochs);
        s.get("steps", c.clients.steps);
        s.get("batch_size", c.clients.batch_size);
        s.get("learning_rate", c.clients.learning_rate);
        s.finish();
    }
    {
        Section s(root, "server");
        s.get("gamma", c.server.gamma);
        s.get("learning_rate", c.server.learning_rate);
        s.get("epochs", c.server.epochs);
        s.get("steps", c.server.steps);
        s.get("batch_size", c.server.batch_size);
        s.get("tau", c.server.tau);
        s.get("eta_g", c.server.eta_g);
        s.finish();
    }
    {
        Section s(root, "defense");
        std::string filter = to_string(c.defense.filter.kind);
        std::string aggregator = to_string(c.defense.aggregator.kind);
        s.get("filter", filter);
        s.get("aggregator", aggregator);
        c.defense.filter.kind = parse_filter_kind(filter);
        c.defense.aggregator.kind = parse_aggregator_kind(aggregator);
        s.get("alpha", c.defense.filter.alpha);
        s.get("rho", c.defense.filter.rho);
        s.get("theta", c.defense.filter.theta);
        s.get("weiszfeld_max_iters", c.defense.aggregator.weiszfeld_max_iters);
        s.get("weiszfeld_rel_tol", c.defense.aggregator.weiszfeld_rel_tol);
        s.get("weiszfeld_smoothing", c.defense.aggregator.weiszfeld_smoothing);
        s.finish();
    }
    {
        Section s(root, "attack");
        s.get("beta", c.attack.beta);
        s.get("sign_flip_nu", c.attack.ranges.sign_flip);
        s.get("label_flip_nu", c.attack.ranges.label_flip);
        s.finish();
    }
    {
        Section s(root, "run");
        s.require("rounds", c.run.rounds);
        s.get("seed", c.run.seed);
        s.get("repeats", c.run.repeats);
        s.get("rolling_window", c.run.rolling_window);
        s.get("eval_every", c.run.eval_every);
        s.get("threads", c.run.threads);
        s.get("log_honest_objective", c.run.log_honest_objective);
        s.finish();
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string to_config_text(const ExperimentConfig& c) {
    json j;
    j["model"] = {{"kind", to_string(c.model.kind)},
                  {"hidden_dim", c.model.hidden_dim},
                  {"weight_decay", c.model.weight_decay}};
    j["data"] = {{"source", c.data.source == DataSource::Blobs ? "blobs" : "csv"},
                 {"num_classes", c.data.num_classes},
                 {"input_dim", c.data.input_dim},
                 {"train_per_class", c.data.train_per_class},
                 {"test_per_class", c.data.test_per_class},
                 {"spread", c.data.spread},
                 {"train_csv", c.data.train_csv},
                 {"test_csv", c.data.test_csv},
                 {"dirichlet_alpha", c.data.dirichlet_alpha},
                 {"num_clients", c.data.num_clients}};
    j["server_data"] = {{"n0", c.server_data.n0},
                        {"mean_shift", c.server_data.mean_shift},
                        {"drop_classes", std::vector<int>(c.server_data.drop_classes.begin(),
                                                          c.server_data.drop_classes.end())},
                        {"csv", c.server_data.csv}};
    j["clients"] = {{"sample_size", c.clients.sample_size},
                    {"epochs", c.clients.epochs},
                    {"steps", c.clients.steps},
                    {"batch_size", c.clients.batch_size},
                    {"learning_rate", c.clients.learning_rate}};
    j["server"] = {{"gamma", c.server.gamma},         {"learning_rate", c.server.learning_rate},
                   {"epochs", c.server.epochs},       {"steps", c.server.steps},
                   {"batch_size", c.server.batch_size}, {"tau", c.server.tau},
                   {"eta_g", c.server.eta_g}};
    j["defense"] = {{"filter", to_string(c.defense.filter.kind)},
                    {"alpha", c.defense.filter.alpha},
                    {"rho", c.defense.filter.rho},
                    {"theta", c.defense.filter.theta},
                    {"aggregator", to_string(c.defense.aggregator.kind)},
                    {"weiszfeld_max_iters", c.defense.aggregator.weiszfeld_max_iters},
                    {"weiszfeld_rel_tol", c.defense.aggregator.weiszfeld_rel_tol},
                    {"weiszfeld_smoothing", c.defense.aggregator.weiszfeld_smoothing}};
    j["attack"] = {{"beta", c.attack.beta},
                   {"sign_flip_nu", {c.attack.ranges.sign_flip.lo, c.attack.ranges.sign_flip.hi}},
                   {"label_flip_nu", {c.attack.ranges.label_flip.lo, c.attack.ranges.label_flip.hi}}};
    j["run"] = {{"rounds", c.run.rounds},
                {"seed", c.run.seed},
                {"repeats", c.run.repeats},
                {"rolling_window", c.run.rolling_window},
                {"eval_every", c.run.eval_every},
                {"threads", c.run.threads},
                {"log_honest_objective", c.run.log_honest_objective}};
    return j.dump(2) + "\n";
}

const std::vector<std::string>& sweepable_axes() {
    static const std::vector<std::string> axes = {"beta", "gamma", "alpha", "rho", "theta", "tau", "alpha_dirichlet"};
    return axes;
}

void set_axis(ExperimentConfig& config, const std::string& axis, double value) {
    if (axis == "beta") {
        config.attack.beta = value;
    } else if (axis == "gamma") {
        config.server.gamma = value;
    } else if (axis == "alpha") {
        config.defense.filter.alpha = value;
    } else if (axis == "rho") {
        config.defense.filter.rho = value;
    } else if (axis == "theta") {
        config.defense.filter.theta = value;
    } else if (axis == "tau") {
        config.server.tau = value;
    } else if (axis == "alpha_dirichlet") {
        config.data.dirichlet_alpha = value;
    } else {
        std::string valid;
        for (const auto& a : sweepable_axes()) valid += (valid.empty() ? "" : ", ") + a;
        throw ConfigError("sweep axis '" + axis + "' is not sweepable; valid axes: " + valid);
    }
    config.validate();
}

}  // namespace rofsl
