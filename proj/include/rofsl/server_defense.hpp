#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rofsl/param_space.hpp"

namespace rofsl {

using ClientId = int;

enum class FilterKind { None, Angle, Loss };
enum class AggregatorKind { Average, GeoMed };

std::string to_string(FilterKind kind);
std::string to_string(AggregatorKind kind);
FilterKind parse_filter_kind(const std::string& name);
AggregatorKind parse_aggregator_kind(const std::string& name);

struct FilterSpec {
    FilterKind kind = FilterKind::None;
    double alpha = 0.0;  // angle threshold, in [0, 1]
    double rho = 0.1;    // loss-filter norm penalty, >= 0
    double theta = 0.5;  // loss-filter rejection fraction, in (0, 1)

    void validate() const;
    bool operator==(const FilterSpec&) const = default;
};

struct AggregatorSpec {
    AggregatorKind kind = AggregatorKind::GeoMed;
    int weiszfeld_max_iters = 4;
    double weiszfeld_rel_tol = 1e-6;
    double weiszfeld_smoothing = 1e-8;

    void validate() const;
    bool operator==(const AggregatorSpec&) const = default;
};

struct FilterReport {
    std::vector<ClientId> accepted;      // ascending
    std::map<ClientId, double> scores;   // LF scores or AF cosines
    double server_grad_norm = 0.0;
    bool degenerate_fallback = false;    // AF could not run; every update accepted
    bool empty_acceptance = false;       // nothing accepted; aggregate set to zero
};

using UpdateMap = std::map<ClientId, ParamVector>;

/// -<delta, g> - rho * |delta|^2
double lf_score(const ParamVector& delta, const ParamVector& server_grad, double rho);

/// Accepts ids with cos_sim(delta, -server_grad) >= alpha. Throws
/// DegenerateGradientError when |server_grad| < 1e-12.
FilterReport angle_filter(const UpdateMap& updates, const ParamVector& server_grad, double alpha);

/// Rejects the floor(theta * |S|) lowest-scoring ids (ties: lower id first).
FilterReport loss_filter(const UpdateMap& updates, const ParamVector& server_grad, double rho, double theta);

/// sum w_i p_i / sum w_i
ParamVector average(std::span<const ParamVector> points, std::span<const double> weights);
ParamVector average(std::span<const ParamVector> points);

enum class GeoMedMode { Online, Reference };

struct GeoMedResult {
    ParamVector median;
    int iterations = 0;
    /// Smoothed objective at the start point and after every iteration.
    std::vector<double> objective_trace;
};

/// Smoothed Weiszfeld iteration started at the coordinate-wise mean.
/// Online mode honours the configured iteration cap and tolerance; reference mode
/// runs to relative tolerance 1e-12 with at most 10000 iterations.
GeoMedResult weiszfeld(std::span<const ParamVector> points, const AggregatorSpec& spec, GeoMedMode mode);

ParamVector geometric_median(std::span<const ParamVector> points, const AggregatorSpec& spec,
                             GeoMedMode mode = GeoMedMode::Online);

/// sum_i |z - x_i|
double geomed_objective(const ParamVector& z, std::span<const ParamVector> points);

/// sum_i h_eps(|z - x_i|), h_eps(r) = r for r >= eps, r^2/(2 eps) + eps/2 below.
double smoothed_geomed_objective(const ParamVector& z, std::span<const ParamVector> points, double eps);

struct AggregationResult {
    ParamVector model;           // x_t + clipped aggregate update
    ParamVector update;          // clipped aggregate update
    double raw_update_norm = 0;  // norm before clipping
    FilterReport report;
};

/// Clip_tau o Aggregate o Filter applied to client updates.
AggregationResult robust_aggregate_updates(const ParamVector& x_t, const UpdateMap& updates,
                                           const ParamVector& server_grad, const FilterSpec& filter,
                                           const AggregatorSpec& agg, double tau);

/// Same, taking the uploaded client models and deriving updates model - x_t.
AggregationResult robust_aggregate(const ParamVector& x_t, const UpdateMap& client_models,
                                   const ParamVector& server_grad, const FilterSpec& filter,
                                   const AggregatorSpec& agg, double tau);

}  // namespace rofsl
