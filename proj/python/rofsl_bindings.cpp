#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "rofsl/config.hpp"
#include "rofsl/data_forge.hpp"
#include "rofsl/errors.hpp"
#include "rofsl/experiment.hpp"
#include "rofsl/orchestrator.hpp"
#include "rofsl/param_space.hpp"
#include "rofsl/server_defense.hpp"

namespace py = pybind11;

namespace pybind11::detail {

// ParamVector crosses the boundary as a list of floats; any float sequence
// (including 1-d numpy arrays) is accepted on input.
template <>
struct type_caster<rofsl::ParamVector> {
    PYBIND11_TYPE_CASTER(rofsl::ParamVector, const_name("list[float]"));

    bool load(handle src, bool convert) {
        make_caster<std::vector<double>> inner;
        if (!inner.load(src, convert)) return false;
        value = rofsl::ParamVector(cast_op<std::vector<double>&&>(std::move(inner)));
        return true;
    }

    static handle cast(const rofsl::ParamVector& v, return_value_policy policy, handle parent) {
        return make_caster<std::vector<double>>::cast(v.raw(), policy, parent);
    }
};

}  // namespace pybind11::detail

namespace {

using namespace rofsl;

FilterSpec make_filter(const std::string& kind, double alpha, double rho, double theta) {
    FilterSpec f;
    f.kind = parse_filter_kind(kind);
    f.alpha = alpha;
    f.rho = rho;
    f.theta = theta;
    f.validate();
    return f;
}

AggregatorSpec make_aggregator(const std::string& kind, int max_iters, double rel_tol, double smoothing) {
    AggregatorSpec a;
    a.kind = parse_aggregator_kind(kind);
    a.weiszfeld_max_iters = max_iters;
    a.weiszfeld_rel_tol = rel_tol;
    a.weiszfeld_smoothing = smoothing;
    a.validate();
    return a;
}

GeoMedMode parse_mode(const std::string& mode) {
    if (mode == "online") return GeoMedMode::Online;
    if (mode == "reference") return GeoMedMode::Reference;
    throw ConfigError("mode: expected 'online' or 'reference', got '" + mode + "'");
}

py::dict report_dict(const FilterReport& r) {
    py::dict d;
    d["accepted"] = r.accepted;
    d["scores"] = r.scores;
    d["server_grad_norm"] = r.server_grad_norm;
    d["degenerate_fallback"] = r.degenerate_fallback;
    d["empty_acceptance"] = r.empty_acceptance;
    return d;
}

py::dict dataset_dict(const Dataset& data) {
    std::vector<std::vector<double>> features;
    std::vector<int> labels;
    features.reserve(data.size());
    labels.reserve(data.size());
    for (const auto& ex : data.examples) {
        features.push_back(ex.features);
        labels.push_back(ex.label);
    }
    py::dict d;
    d["features"] = features;
    d["labels"] = labels;
    d["num_classes"] = data.num_classes;
    return d;
}

py::object nan_to_none(double v) { return std::isnan(v) ? py::none() : py::cast(v); }

py::list records_list(const std::vector<RoundRecord>& records) {
    py::list out;
    for (const auto& r : records) {
        py::dict d;
        d["round"] = r.round;
        d["test_accuracy"] = nan_to_none(r.test_accuracy);
        d["test_loss"] = nan_to_none(r.test_loss);
        d["accepted_ids"] = r.accepted_ids;
        d["num_sampled"] = r.num_sampled;
        d["num_malicious_sampled"] = r.num_malicious_sampled;
        d["num_malicious_accepted"] = r.num_malicious_accepted;
        d["aggregate_update_norm"] = r.aggregate_update_norm;
        d["server_update_norm"] = r.server_update_norm;
        d["degenerate_fallback"] = r.degenerate_fallback;
        d["empty_acceptance"] = r.empty_acceptance;
        d["honest_objective"] = nan_to_none(r.honest_objective);
        out.append(d);
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_rofsl, m) {
    m.doc() = "Byzantine-robust federated learning simulator core";
    m.attr("__version__") = "0.1.0";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<DegenerateGradientError>(m, "DegenerateGradientError", PyExc_RuntimeError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.def("dot", &dot, py::arg("a"), py::arg("b"));
    m.def("norm", &norm, py::arg("a"));
    m.def("cos_sim", &cos_sim, py::arg("a"), py::arg("b"));
    m.def("clip_norm", &clip_norm, py::arg("a"), py::arg("tau"));

    m.def("lf_score", &lf_score, py::arg("delta"), py::arg("server_grad"), py::arg("rho"));
    m.def(
        "angle_filter",
        [](const UpdateMap& updates, const ParamVector& grad, double alpha) {
            return report_dict(angle_filter(updates, grad, alpha));
        },
        py::arg("updates"), py::arg("server_grad"), py::arg("alpha") = 0.0);
    m.def(
        "loss_filter",
        [](const UpdateMap& updates, const ParamVector& grad, double rho, double theta) {
            return report_dict(loss_filter(updates, grad, rho, theta));
        },
        py::arg("updates"), py::arg("server_grad"), py::arg("rho") = 0.1, py::arg("theta") = 0.5);

    m.def(
        "average",
        [](const std::vector<ParamVector>& points, std::optional<std::vector<double>> weights) {
            return weights ? average(points, *weights) : average(points);
        },
        py::arg("points"), py::arg("weights") = py::none());
    m.def(
        "weiszfeld",
        [](const std::vector<ParamVector>& points, const std::string& mode, int max_iters, double rel_tol,
           double smoothing) {
            const GeoMedResult r =
                weiszfeld(points, make_aggregator("geomed", max_iters, rel_tol, smoothing), parse_mode(mode));
            return py::make_tuple(r.median, r.iterations, r.objective_trace);
        },
        py::arg("points"), py::arg("mode") = "online", py::arg("max_iters") = 4, py::arg("rel_tol") = 1e-6,
        py::arg("smoothing") = 1e-8, "Returns (median, iterations, objective_trace).");
    m.def(
        "geometric_median",
        [](const std::vector<ParamVector>& points, const std::string& mode, int max_iters, double rel_tol,
           double smoothing) {
            return geometric_median(points, make_aggregator("geomed", max_iters, rel_tol, smoothing),
                                    parse_mode(mode));
        },
        py::arg("points"), py::arg("mode") = "online", py::arg("max_iters") = 4, py::arg("rel_tol") = 1e-6,
        py::arg("smoothing") = 1e-8);
    m.def(
        "robust_aggregate",
        [](const ParamVector& x_t, const UpdateMap& client_models, const ParamVector& grad, const std::string& filter,
           double alpha, double rho, double theta, const std::string& aggregator, double tau, int max_iters,
           double rel_tol) {
            const AggregationResult r =
                robust_aggregate(x_t, client_models, grad, make_filter(filter, alpha, rho, theta),
                                 make_aggregator(aggregator, max_iters, rel_tol, 1e-8), tau);
            return py::make_tuple(r.model, report_dict(r.report));
        },
        py::arg("x_t"), py::arg("client_models"), py::arg("server_grad"), py::arg("filter") = "none",
        py::arg("alpha") = 0.0, py::arg("rho") = 0.1, py::arg("theta") = 0.5, py::arg("aggregator") = "geomed",
        py::arg("tau") = 1.0, py::arg("max_iters") = 4, py::arg("rel_tol") = 1e-6,
        "Returns (aggregated_model, filter_report).");

    m.def(
        "make_blobs",
        [](int num_classes, int input_dim, int per_class, double spread, std::uint64_t seed) {
            Rng rng(seed);
            return dataset_dict(make_blobs(num_classes, input_dim, per_class, spread, rng));
        },
        py::arg("num_classes"), py::arg("input_dim"), py::arg("per_class"), py::arg("spread") = 1.0,
        py::arg("seed") = 0);
    m.def(
        "dirichlet_partition",
        [](const std::vector<int>& labels, int num_classes, std::size_t num_clients, double alpha,
           std::uint64_t seed) {
            Dataset d;
            d.num_classes = num_classes;
            for (int label : labels) d.examples.push_back({{}, label});
            Rng rng(seed);
            return dirichlet_partition(d, num_clients, alpha, rng).shards;
        },
        py::arg("labels"), py::arg("num_classes"), py::arg("num_clients"), py::arg("alpha"), py::arg("seed") = 0,
        "Returns one sorted list of example indices per client.");

    m.def(
        "parse_config", [](const std::string& text) { return to_config_text(parse_config(text)); },
        py::arg("text"), "Validates a JSON config and returns the fully resolved JSON text.");
    m.def(
        "run_experiment",
        [](const std::string& text, int repeat) {
            const ExperimentConfig config = parse_config(text);
            std::vector<RoundRecord> records;
            {
                py::gil_scoped_release release;
                records = run_experiment(config, repeat);
            }
            return records_list(records);
        },
        py::arg("config"), py::arg("repeat") = 0, "Runs one repeat; returns one dict per round.");
    m.def(
        "run_repeats",
        [](const std::string& text) {
            const ExperimentConfig config = parse_config(text);
            ExperimentResult result;
            {
                py::gil_scoped_release release;
                result = run_repeats(config);
            }
            py::list repeats;
            for (const auto& r : result.repeats) repeats.append(records_list(r));
            py::dict summary;
            summary["mean"] = result.summary.mean;
            summary["min"] = result.summary.min;
            summary["max"] = result.summary.max;
            summary["final_mean"] = result.summary.final_mean();
            summary["final_min"] = result.summary.final_min();
            summary["final_max"] = result.summary.final_max();
            py::dict out;
            out["repeats"] = repeats;
            out["summary"] = summary;
            return out;
        },
        py::arg("config"), "Runs every configured repeat; returns records and the rolling-accuracy summary.");
}
