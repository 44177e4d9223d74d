#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "../support/oracles.hpp"
#include "rofsl/errors.hpp"
#include "rofsl/server_defense.hpp"

using namespace rofsl;

namespace {

ParamVector random_vector(Rng& rng, std::size_t d, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    ParamVector v(d);
    for (auto& x : v) x = n(rng);
    return v;
}

// Uniform in the unit ball.
ParamVector in_unit_ball(Rng& rng, std::size_t d) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ParamVector v = random_vector(rng, d);
    const double r = std::pow(u(rng), 1.0 / static_cast<double>(d));
    return scale(r / norm(v), v);
}

AggregatorSpec reference_geomed() {
    AggregatorSpec spec;
    spec.kind = AggregatorKind::GeoMed;
    return spec;
}

}  // namespace

TEST_CASE("lf_score") {
    CHECK(lf_score(ParamVector{0.0, 0.0}, ParamVector{1.0, 2.0}, 0.1) == 0.0);
    CHECK(lf_score(ParamVector{1.0, 0.0}, ParamVector{-1.0, 0.0}, 0.1) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK_THROWS_AS(lf_score(ParamVector{1.0}, ParamVector{1.0, 2.0}, 0.1), DimensionError);

    // With a = -<delta, g> > 0 the gap sc(delta) - sc(-nu delta) is
    // a (1 + nu) + rho |delta|^2 (nu^2 - 1): positive for nu >= 1, and for any
    // nu > 0 once sc(delta) >= 0. Small nu with a dominant penalty can reverse it.
    Rng rng(1);
    std::uniform_real_distribution<double> nu_dist(0.01, 10.0);
    std::uniform_real_distribution<double> rho_dist(0.0, 1.0);
    int checked = 0;
    while (checked < 500) {
        const ParamVector g = random_vector(rng, 6);
        const ParamVector delta = random_vector(rng, 6);
        if (-dot(delta, g) <= 0.0) continue;
        const double nu = nu_dist(rng);
        const double rho = rho_dist(rng);
        if (nu >= 1.0 || lf_score(delta, g, rho) >= 0.0) {
            CHECK(lf_score(scale(-nu, delta), g, rho) < lf_score(delta, g, rho));
        }
        const double a = -dot(delta, g);
        CHECK(lf_score(delta, g, rho) - lf_score(scale(-nu, delta), g, rho) ==
              doctest::Approx(a * (1.0 + nu) + rho * squared_norm(delta) * (nu * nu - 1.0)).epsilon(1e-9));
        ++checked;
    }

    const ParamVector g{-1.0, 0.0};
    const ParamVector d{0.1, 0.0};
    CHECK(lf_score(scale(-0.5, d), g, 100.0) > lf_score(d, g, 100.0));
}

TEST_CASE("angle_filter") {
    const ParamVector g{1.0, -2.0, 0.5};
    UpdateMap updates{{0, scale(-1.0, g)}, {1, g}, {2, ParamVector{2.0, 1.0, 0.0}}};
    const FilterReport r = angle_filter(updates, g, 0.0);
    CHECK(r.accepted == std::vector<ClientId>{0, 2});
    CHECK(r.scores.at(0) == doctest::Approx(1.0));
    CHECK(r.scores.at(1) == doctest::Approx(-1.0));
    CHECK(r.scores.at(2) == 0.0);
    CHECK(r.server_grad_norm == doctest::Approx(norm(g)));

    CHECK(angle_filter(updates, g, 0.5).accepted == std::vector<ClientId>{0});
    CHECK_THROWS_AS(angle_filter(updates, ParamVector{0.0, 0.0, 0.0}, 0.0), DegenerateGradientError);
    CHECK_THROWS_AS(angle_filter(updates, ParamVector{1e-13, 0.0, 0.0}, 0.0), DegenerateGradientError);

    SUBCASE("alpha = 0 accepts exactly the non-negative inner products") {
        Rng rng(2);
        for (int trial = 0; trial < 100; ++trial) {
            const ParamVector grad = random_vector(rng, 5);
            UpdateMap u;
            for (int id = 0; id < 12; ++id) u[id] = random_vector(rng, 5);
            std::vector<ClientId> expected;
            for (const auto& [id, d] : u)
                if (dot(d, scale(-1.0, grad)) >= 0.0) expected.push_back(id);
            CHECK(angle_filter(u, grad, 0.0).accepted == expected);
        }
    }
}

TEST_CASE("loss_filter") {
    Rng rng(3);
    const ParamVector g = random_vector(rng, 4);
    UpdateMap twenty;
    for (int id = 0; id < 20; ++id) twenty[id * 3] = random_vector(rng, 4);
    CHECK(loss_filter(twenty, g, 0.1, 0.5).accepted.size() == 10);

    // Scores 0.1..0.4 with rho = 0: delta = s * (-g) / |g|^2 gives score s.
    const ParamVector unit{1.0, 0.0};
    UpdateMap four;
    for (int id = 1; id <= 4; ++id) four[id] = ParamVector{-0.1 * id, 0.0};
    const FilterReport r = loss_filter(four, unit, 0.0, 0.5);
    CHECK(r.accepted == std::vector<ClientId>{3, 4});
    CHECK(r.scores.at(1) == doctest::Approx(0.1));
    CHECK(r.scores.at(4) == doctest::Approx(0.4));

    UpdateMap equal;
    for (int id : {9, 2, 7, 4, 5}) equal[id] = ParamVector{1.0, 1.0};
    CHECK(loss_filter(equal, unit, 0.1, 0.5).accepted == std::vector<ClientId>{5, 7, 9});

    SUBCASE("cardinality") {
        Rng r2(4);
        for (int s = 1; s <= 25; ++s) {
            UpdateMap u;
            for (int id = 0; id < s; ++id) u[id] = random_vector(r2, 3);
            for (double theta : {0.1, 0.5, 0.9}) {
                const auto n = static_cast<std::size_t>(s) -
                               static_cast<std::size_t>(std::floor(theta * static_cast<double>(s)));
                CHECK(loss_filter(u, random_vector(r2, 3), 0.1, theta).accepted.size() == n);
            }
        }
    }
}

TEST_CASE("average") {
    const std::vector<ParamVector> one{{1.5, -2.0}};
    CHECK(average(one) == one[0]);
    const std::vector<ParamVector> two{{0.0, 0.0}, {2.0, 2.0}};
    CHECK(average(two) == ParamVector{1.0, 1.0});
    const std::vector<ParamVector> weighted{{0.0, 0.0}, {4.0, 0.0}};
    const std::vector<double> w{1.0, 3.0};
    CHECK(average(weighted, w) == ParamVector{3.0, 0.0});
    const std::vector<double> zero{0.0, 0.0};
    CHECK_THROWS(average(weighted, zero));
}

TEST_CASE("geometric median basics") {
    const AggregatorSpec spec = reference_geomed();
    const std::vector<ParamVector> same(5, ParamVector{1.25, -3.0, 7.0});
    const GeoMedResult r = weiszfeld(same, spec, GeoMedMode::Reference);
    CHECK(r.median == same[0]);

    const double h = std::sqrt(3.0) / 2.0;
    const std::vector<ParamVector> tri{{0.0, 0.0}, {1.0, 0.0}, {0.5, h}};
    const ParamVector m = geometric_median(tri, spec, GeoMedMode::Reference);
    CHECK(std::abs(m[0] - 0.5) <= 1e-6);
    CHECK(std::abs(m[1] - h / 3.0) <= 1e-6);

    // Online mode respects the iteration cap.
    Rng rng(5);
    std::vector<ParamVector> pts;
    for (int i = 0; i < 9; ++i) pts.push_back(random_vector(rng, 3, 5.0));
    const GeoMedResult online = weiszfeld(pts, spec, GeoMedMode::Online);
    CHECK(online.iterations <= spec.weiszfeld_max_iters);
    CHECK(online.objective_trace.size() == static_cast<std::size_t>(online.iterations) + 1);
}

TEST_CASE("weiszfeld against a brute-force oracle") {
    Rng rng(6);
    std::uniform_int_distribution<int> count(3, 7);
    std::uniform_real_distribution<double> coord(-10.0, 10.0);
    const AggregatorSpec spec = reference_geomed();
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
        CHECK(geomed_objective(r.median, vecs) <= oracle * (1.0 + 1e-6));
        for (std::size_t k = 1; k < r.objective_trace.size(); ++k)
            CHECK(r.objective_trace[k] <= r.objective_trace[k - 1]);
    }
}

TEST_CASE("weiszfeld monotone in both modes") {
    Rng rng(7);
    AggregatorSpec spec = reference_geomed();
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<ParamVector> pts;
        for (int i = 0; i < 2 + trial % 12; ++i) pts.push_back(random_vector(rng, 1 + trial % 6, 3.0));
        if (trial % 5 == 0) pts.push_back(pts.front());
        if (trial % 7 == 0) pts.push_back(scale(1e6, pts.back()));
        for (GeoMedMode mode : {GeoMedMode::Online, GeoMedMode::Reference}) {
            const GeoMedResult r = weiszfeld(pts, spec, mode);
            for (std::size_t k = 1; k < r.objective_trace.size(); ++k)
                CHECK(r.objective_trace[k] <= r.objective_trace[k - 1]);
            CHECK(r.objective_trace.back() ==
                  doctest::Approx(smoothed_geomed_objective(r.median, pts, spec.weiszfeld_smoothing)));
        }
    }
}

TEST_CASE("geometric median equivariance") {
    Rng rng(8);
    const AggregatorSpec spec = reference_geomed();
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<ParamVector> pts;
        for (int i = 0; i < 7; ++i) pts.push_back(random_vector(rng, 4));
        const ParamVector c = random_vector(rng, 4, 10.0);
        std::vector<ParamVector> moved;
        for (const auto& p : pts) moved.push_back(add(p, c));
        const ParamVector base = geometric_median(pts, spec, GeoMedMode::Reference);
        const ParamVector shifted = geometric_median(moved, spec, GeoMedMode::Reference);
        for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(shifted[j] - (base[j] + c[j])) <= 1e-9);

        std::vector<ParamVector> perm = pts;
        std::shuffle(perm.begin(), perm.end(), rng);
        const ParamVector permuted = geometric_median(perm, spec, GeoMedMode::Reference);
        for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(permuted[j] - base[j]) <= 1e-9);
    }
}

TEST_CASE("geometric median breakdown") {
    const AggregatorSpec spec = reference_geomed();
    Rng rng(9);
    for (int k = 1; k <= 4; ++k) {
        for (double radius : {1e3, 1e6, 1e9}) {
            std::vector<ParamVector> pts;
            for (int i = 0; i < 10; ++i) pts.push_back(in_unit_ball(rng, 5));
            const ParamVector honest_mean = average(pts);
            const ParamVector dir = random_vector(rng, 5);
            for (int i = 0; i < k; ++i) pts.push_back(scale(radius / norm(dir), dir));
            const ParamVector med = geometric_median(pts, spec, GeoMedMode::Reference);
            CHECK(norm(subtract(med, honest_mean)) <= 10.0);
            CHECK(norm(average(pts)) >= radius * k / 14.0 * 0.9);
        }
    }
}

TEST_CASE("robust_aggregate") {
    const FilterSpec none{};
    AggregatorSpec geo = reference_geomed();
    const ParamVector x{1.0, 2.0, 3.0};
    const ParamVector g{0.5, 0.5, 0.5};

    const UpdateMap single{{4, ParamVector{1.5, 1.0, 3.25}}};
    const AggregationResult one = robust_aggregate(x, single, g, none, geo, 1e12);
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(one.model[j] - single.at(4)[j]) <= 1e-12);
    CHECK(one.report.accepted == std::vector<ClientId>{4});

    const UpdateMap zeros{{0, x}, {1, x}, {2, x}};
    CHECK(robust_aggregate(x, zeros, g, none, geo, 1.0).model == x);

    SUBCASE("breakdown through the full pipeline") {
        AggregatorSpec ref = geo;
        ref.weiszfeld_max_iters = 10000;
        ref.weiszfeld_rel_tol = 1e-12;
        AggregatorSpec avg = geo;
        avg.kind = AggregatorKind::Average;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            Rng rng(seed);
            const ParamVector x_t = random_vector(rng, 6);
            UpdateMap updates;
            for (int id = 0; id < 10; ++id) updates[id] = in_unit_ball(rng, 6);
            const ParamVector dir = random_vector(rng, 6);
            for (int id = 10; id < 14; ++id) updates[id] = scale(1e6 / norm(dir), dir);
            const AggregationResult robust = robust_aggregate_updates(x_t, updates, g, none, ref, 1e12);
            CHECK(norm(subtract(robust.model, x_t)) <= 10.0);
            const AggregationResult mean = robust_aggregate_updates(x_t, updates, g, none, avg, 1e12);
            CHECK(norm(subtract(mean.model, x_t)) >= 1e5);
        }
    }

    SUBCASE("clip bound and filter wiring") {
        Rng rng(10);
        for (int trial = 0; trial < 200; ++trial) {
            const ParamVector x_t = random_vector(rng, 5);
            const ParamVector grad = random_vector(rng, 5);
            UpdateMap models;
            for (int id = 0; id < 8; ++id) models[id] = add(x_t, random_vector(rng, 5, 3.0));
            const double tau = std::array<double, 3>{0.1, 1.0, 10.0}[trial % 3];
            FilterSpec filter;
            filter.kind = std::array<FilterKind, 3>{FilterKind::None, FilterKind::Angle, FilterKind::Loss}[trial % 3];
            const AggregationResult r = robust_aggregate(x_t, models, grad, filter, geo, tau);
            CHECK(norm(subtract(r.model, x_t)) <= tau * (1.0 + 1e-12));
            if (filter.kind == FilterKind::Loss) CHECK(r.report.accepted.size() == 4);
        }
    }

    SUBCASE("empty acceptance gives a zero update") {
        FilterSpec af;
        af.kind = FilterKind::Angle;
        af.alpha = 1.0;
        const UpdateMap models{{0, add(x, g)}, {1, add(x, ParamVector{0.0, 1.0, -1.0})}};
        const AggregationResult r = robust_aggregate(x, models, g, af, geo, 1.0);
        CHECK(r.report.empty_acceptance);
        CHECK(r.report.accepted.empty());
        CHECK(r.model == x);
    }

    SUBCASE("degenerate server gradient falls back to no filter") {
        FilterSpec af;
        af.kind = FilterKind::Angle;
        const UpdateMap models{{0, add(x, g)}, {1, add(x, scale(2.0, g))}};
        const AggregationResult r = robust_aggregate(x, models, ParamVector(3, 0.0), af, geo, 1e12);
        CHECK(r.report.degenerate_fallback);
        CHECK(r.report.accepted == std::vector<ClientId>{0, 1});
    }

    SUBCASE("relabelling clients does not change the aggregate") {
        Rng rng(11);
        const ParamVector grad = random_vector(rng, 4);
        const ParamVector x_t = random_vector(rng, 4);
        std::vector<ParamVector> deltas;
        for (int i = 0; i < 9; ++i) deltas.push_back(random_vector(rng, 4));
        for (FilterKind kind : {FilterKind::None, FilterKind::Angle, FilterKind::Loss}) {
            FilterSpec filter;
            filter.kind = kind;
            UpdateMap a, b;
            for (int i = 0; i < 9; ++i) {
                a[i] = deltas[static_cast<std::size_t>(i)];
                b[100 - 7 * i] = deltas[static_cast<std::size_t>(i)];
            }
            const ParamVector ma = robust_aggregate_updates(x_t, a, grad, filter, geo, 1e12).model;
            const ParamVector mb = robust_aggregate_updates(x_t, b, grad, filter, geo, 1e12).model;
            for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(ma[j] - mb[j]) <= 1e-9);
        }
    }
}

TEST_CASE("spec validation") {
    FilterSpec f;
    f.theta = 1.0;
    CHECK_THROWS_AS(f.validate(), ConfigError);
    f.theta = 0.5;
    f.alpha = 1.5;
    CHECK_THROWS_AS(f.validate(), ConfigError);
    AggregatorSpec a;
    a.weiszfeld_max_iters = 0;
    CHECK_THROWS_AS(a.validate(), ConfigError);
    CHECK(parse_filter_kind(to_string(FilterKind::Loss)) == FilterKind::Loss);
    CHECK(parse_aggregator_kind(to_string(AggregatorKind::Average)) == AggregatorKind::Average);
    CHECK_THROWS_AS(parse_filter_kind("median"), ConfigError);
}
