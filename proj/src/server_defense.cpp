#include "rofsl/server_defense.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "rofsl/errors.hpp"

namespace rofsl {

std::string to_string(FilterKind kind) {
    switch (kind) {
        case FilterKind::None:
            return "none";
        case FilterKind::Angle:
            return "angle";
        case FilterKind::Loss:
            return "loss";
    }
    return "?";
}

std::string to_string(AggregatorKind kind) { return kind == AggregatorKind::Average ? "average" : "geomed"; }

FilterKind parse_filter_kind(const std::string& name) {
    if (name == "none") return FilterKind::None;
    if (name == "angle") return FilterKind::Angle;
    if (name == "loss") return FilterKind::Loss;
    throw ConfigError("defense.filter: expected one of none, angle, loss; got '" + name + "'");
}

AggregatorKind parse_aggregator_kind(const std::string& name) {
    if (name == "average") return AggregatorKind::Average;
    if (name == "geomed") return AggregatorKind::GeoMed;
    throw ConfigError("defense.aggregator: expected average or geomed; got '" + name + "'");
}

void FilterSpec::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError(fmt::format("defense.alpha: must lie in [0, 1], got {}", alpha));
    if (!(rho >= 0.0)) throw ConfigError(fmt::format("defense.rho: must be >= 0, got {}", rho));
    if (!(theta > 0.0 && theta < 1.0)) throw ConfigError(fmt::format("defense.theta: must lie in (0, 1), got {}", theta));
}

void AggregatorSpec::validate() const {
    if (weiszfeld_max_iters < 1) throw ConfigError("defense.weiszfeld_max_iters: must be >= 1");
    if (!(weiszfeld_rel_tol > 0.0)) throw ConfigError("defense.weiszfeld_rel_tol: must be > 0");
    if (!(weiszfeld_smoothing > 0.0)) throw ConfigError("defense.weiszfeld_smoothing: must be > 0");
}

double lf_score(const ParamVector& delta, const ParamVector& server_grad, double rho) {
    return -dot(delta, server_grad) - rho * squared_norm(delta);
}

FilterReport angle_filter(const UpdateMap& updates, const ParamVector& server_grad, double alpha) {
    FilterReport report;
    report.server_grad_norm = norm(server_grad);
    if (report.server_grad_norm < kZeroNormTolerance) {
        throw DegenerateGradientError("angle filter: server gradient has vanishing norm");
    }
    const ParamVector descent = scale(-1.0, server_grad);
    for (const auto& [id, delta] : updates) {
        const double c = cos_sim(delta, descent);
        report.scores[id] = c;
        if (c >= alpha) report.accepted.push_back(id);
    }
    return report;
}

FilterReport loss_filter(const UpdateMap& updates, const ParamVector& server_grad, double rho, double theta) {
    if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("loss filter: theta must lie in (0, 1)");
    if (updates.empty()) throw std::invalid_argument("loss filter: no updates");

    FilterReport report;
    report.server_grad_norm = norm(server_grad);
    std::vector<std::pair<double, ClientId>> ranked;
    ranked.reserve(updates.size());
    for (const auto& [id, delta] : updates) {
        const double s = lf_score(delta, server_grad, rho);
        report.scores[id] = s;
        ranked.emplace_back(s, id);
    }
    std::sort(ranked.begin(), ranked.end());

    const auto n = ranked.size();
    const auto rejected = static_cast<std::size_t>(std::floor(theta * static_cast<double>(n)));
    for (std::size_t k = rejected; k < n; ++k) report.accepted.push_back(ranked[k].second);
    std::sort(report.accepted.begin(), report.accepted.end());
    return report;
}

ParamVector average(std::span<const ParamVector> points, std::span<const double> weights) {
    if (points.empty()) throw std::invalid_argument("average: no points");
    if (points.size() != weights.size()) throw DimensionError("average: points and weights differ in length");
    const std::size_t d = points.front().size();
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw std::invalid_argument("average: weights must be nonnegative");
        total += w;
    }
    if (!(total > 0.0)) throw std::invalid_argument("average: weights sum to zero");

    ParamVector sum(d, 0.0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].size() != d) throw DimensionError("average: dimension mismatch");
        for (std::size_t j = 0; j < d; ++j) sum[j] += weights[i] * points[i][j];
    }
    for (auto& v : sum) v /= total;
    return sum;
}

ParamVector average(std::span<const ParamVector> points) {
    const std::vector<double> ones(points.size(), 1.0);
    return average(points, ones);
}

double geomed_objective(const ParamVector& z, std::span<const ParamVector> points) {
    double s = 0.0;
    for (const auto& p : points) s += norm(subtract(z, p));
    return s;
}

double smoothed_geomed_objective(const ParamVector& z, std::span<const ParamVector> points, double eps) {
    double s = 0.0;
    for (const auto& p : points) {
        const double r = norm(subtract(z, p));
        s += r >= eps ? r : r * r / (2.0 * eps) + eps / 2.0;
    }
    return s;
}

GeoMedResult weiszfeld(std::span<const ParamVector> points, const AggregatorSpec& spec, GeoMedMode mode) {
    if (points.empty()) throw std::invalid_argument("geometric_median: no points");
    spec.validate();
    const int max_iters = mode == GeoMedMode::Online ? spec.weiszfeld_max_iters : 10000;
    const double rel_tol = mode == GeoMedMode::Online ? spec.weiszfeld_rel_tol : 1e-12;
    const double eps = spec.weiszfeld_smoothing;

    GeoMedResult result;
    result.median = average(points);
    double objective = smoothed_geomed_objective(result.median, points, eps);
    result.objective_trace.push_back(objective);

    std::vector<double> weights(points.size());
    for (int k = 0; k < max_iters && objective > 0.0; ++k) {
        for (std::size_t i = 0; i < points.size(); ++i) {
            weights[i] = 1.0 / std::max(eps, norm(subtract(result.median, points[i])));
        }
        ParamVector candidate = average(points, weights);
        const double next = smoothed_geomed_objective(candidate, points, eps);
        // A rounding-level increase means the iterate cannot improve further.
        if (next > objective) break;
        result.median = std::move(candidate);
        result.objective_trace.push_back(next);
        ++result.iterations;
        const bool converged = objective - next <= rel_tol * objective;
        objective = next;
        if (converged) break;
    }
    return result;
}

ParamVector geometric_median(std::span<const ParamVector> points, const AggregatorSpec& spec, GeoMedMode mode) {
    return weiszfeld(points, spec, mode).median;
}

AggregationResult robust_aggregate_updates(const ParamVector& x_t, const UpdateMap& updates,
                                           const ParamVector& server_grad, const FilterSpec& filter,
                                           const AggregatorSpec& agg, double tau) {
    if (updates.empty()) throw std::invalid_argument("robust_aggregate: no client updates");
    if (!(tau > 0.0)) throw ConfigError("server.tau: must be > 0");

    AggregationResult out;
    auto accept_all = [&] {
        out.report.accepted.clear();
        for (const auto& [id, delta] : updates) out.report.accepted.push_back(id);
        out.report.server_grad_norm = norm(server_grad);
    };

    switch (filter.kind) {
        case FilterKind::None:
            accept_all();
            break;
        case FilterKind::Angle:
            try {
                out.report = angle_filter(updates, server_grad, filter.alpha);
            } catch (const DegenerateGradientError&) {
                accept_all();
                out.report.degenerate_fallback = true;
            }
            break;
        case FilterKind::Loss:
            out.report = loss_filter(updates, server_grad, filter.rho, filter.theta);
            break;
    }

    if (out.report.accepted.empty()) {
        out.report.empty_acceptance = true;
        out.update = ParamVector(x_t.size(), 0.0);
        out.model = x_t;
        return out;
    }

    std::vector<ParamVector> accepted;
    accepted.reserve(out.report.accepted.size());
    for (ClientId id : out.report.accepted) accepted.push_back(updates.at(id));

    const ParamVector aggregate =
        agg.kind == AggregatorKind::GeoMed ? geometric_median(accepted, agg, GeoMedMode::Online) : average(accepted);
    out.raw_update_norm = norm(aggregate);
    out.update = clip_norm(aggregate, tau);
    out.model = add(x_t, out.update);
    return out;
}

AggregationResult robust_aggregate(const ParamVector& x_t, const UpdateMap& client_models,
                                   const ParamVector& server_grad, const FilterSpec& filter,
                                   const AggregatorSpec& agg, double tau) {
    UpdateMap updates;
    for (const auto& [id, model] : client_models) updates.emplace(id, subtract(model, x_t));
    return robust_aggregate_updates(x_t, updates, server_grad, filter, agg, tau);
}

}  // namespace rofsl
