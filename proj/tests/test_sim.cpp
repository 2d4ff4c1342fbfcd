#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pbs/pipeline.hpp"
#include "pbs/sim.hpp"

using namespace pbs;

namespace {

// tiny two-station world with a hand-built rate model
ModelBundle two_station_bundle(double rate_1_to_2) {
    std::vector<StationRecord> rows;
    const double km_per_deg_lon = 111.32 * std::cos(51.5 * M_PI / 180.0);
    rows.push_back({1, "A", 51.5, -0.1, 20});
    rows.push_back({2, "B", 51.5008, -0.1 + 0.2 / km_per_deg_lon, 1});
    rows.push_back({3, "C", 51.4995, -0.1 + 0.4 / km_per_deg_lon, 20});
    ModelBundle bundle{Stations(rows), {}, {}, {}, {}, default_c_max};
    bundle.geometry = build_geometry(bundle.stations, 2);

    RateModel rates;
    rates.station_count = 3;
    for (int w = 0; w < 2; ++w) {
        rates.departures[w].assign(static_cast<std::size_t>(slices_per_day) * 9, 0.0);
        rates.arrivals[w].assign(static_cast<std::size_t>(slices_per_day) * 9, 0.0);
        for (int k = 0; k < slices_per_day; ++k) {
            rates.observed_minutes[w][k] = 1;
            rates.departures[w][rates.od_index(k, 0, 1)] = rate_1_to_2;
            rates.arrivals[w][rates.od_index(k, 0, 1)] = rate_1_to_2;
        }
    }
    rates.rebuild_station_sums();
    bundle.rates = rates;
    bundle.travel = travel_times({}, bundle.stations, bundle.geometry);
    bundle.response = LinearResponse{2, std::vector<Eigen::MatrixXd>(3, Eigen::MatrixXd::Zero(2, 2))};
    return bundle;
}

Snapshot make_snapshot(const Stations& stations, const std::vector<int>& fills) {
    Snapshot snap;
    for (int i = 0; i < stations.size(); ++i)
        snap.fill[stations.rows[static_cast<std::size_t>(i)].id] = fills[static_cast<std::size_t>(i)];
    return snap;
}

SimReport quiet_run(SimConfig cfg, const ModelBundle& bundle, const Snapshot& snap) {
    return run(cfg, bundle, snap);
}

}  // namespace

TEST_CASE("zero rates leave the world unchanged") {
    auto bundle = two_station_bundle(0.0);
    auto snap = make_snapshot(bundle.stations, {5, 1, 4});
    SimConfig cfg;
    cfg.burn_in_hours = 0;
    cfg.horizon_hours = 2;
    cfg.trucks = 0;
    cfg.prices_enabled = false;
    auto report = quiet_run(cfg, bundle, snap);
    CHECK(report.potential == 0);
    CHECK(report.empty_events == 0);
    CHECK(report.full_events == 0);
    CHECK(report.service_level == 1.0);
    CHECK(report.payout_total == 0.0);
    CHECK(report.truck_hours == 0.0);
}

TEST_CASE("forced flow overflows the one-dock station") {
    // station A fires ~5 departures per minute toward B (capacity 1): the
    // second arrival must walk on, and A eventually drains to empty events
    auto bundle = two_station_bundle(5.0);
    auto snap = make_snapshot(bundle.stations, {10, 0, 10});
    SimConfig cfg;
    cfg.burn_in_hours = 0;
    cfg.horizon_hours = 1;
    cfg.seed = 3;
    auto report = quiet_run(cfg, bundle, snap);
    CHECK(report.potential > 0);
    CHECK(report.full_events >= 1);
    CHECK(report.per_station[1].full >= 1);
    CHECK(report.empty_events > 0);  // A drains at 5/min
    CHECK(report.per_station[0].empty > 0);
    CHECK(report.service_level < 1.0);
}

TEST_CASE("same seed twice gives identical reports") {
    SyntheticSpec spec;
    spec.station_count = 12;
    spec.fleet_size = 120;
    spec.weekday_count = 5;
    spec.weekend_count = 2;
    spec.seed = 9;
    auto corpus = generate_synthetic(spec);
    FitParams params;
    params.neighbor_count = 4;
    params.payout_samples = 80;
    params.customer_samples = 60;
    auto bundle = fit_models(corpus, params);

    SimConfig cfg;
    cfg.burn_in_hours = 2;
    cfg.horizon_hours = 6;
    cfg.trucks = 1;
    cfg.prices_enabled = true;
    cfg.alpha = 0.1;
    cfg.seed = 42;
    auto a = run(cfg, bundle, corpus.snapshot);
    auto b = run(cfg, bundle, corpus.snapshot);
    CHECK(a.potential == b.potential);
    CHECK(a.empty_events == b.empty_events);
    CHECK(a.full_events == b.full_events);
    CHECK(a.service_level == b.service_level);
    CHECK(a.payout_total == b.payout_total);
    CHECK(a.truck_hours == b.truck_hours);
    CHECK(a.diverted == b.diverted);

    // conservation held every minute of a closed-loop run with both
    // controllers active, or run() would have thrown
    CHECK(a.potential > 0);
}

TEST_CASE("burn-in statistics are discarded") {
    auto bundle = two_station_bundle(0.05);
    auto snap = make_snapshot(bundle.stations, {10, 0, 10});
    SimConfig cfg;
    cfg.burn_in_hours = 0;
    cfg.horizon_hours = 1;
    cfg.seed = 7;
    auto no_burn = quiet_run(cfg, bundle, snap);
    cfg.burn_in_hours = 1;
    auto with_burn = quiet_run(cfg, bundle, snap);
    // identical horizon but shifted stats; both valid, totals small
    CHECK(no_burn.potential >= 0);
    CHECK(with_burn.potential >= 0);
}

TEST_CASE("sweep grid ordering, pairing and summaries") {
    auto bundle = two_station_bundle(0.2);
    auto snap = make_snapshot(bundle.stations, {10, 1, 10});
    SimConfig base;
    base.burn_in_hours = 0;
    base.horizon_hours = 2;
    double inf = std::numeric_limits<double>::infinity();
    auto cells = sweep(base, bundle, snap, {0, 1}, {inf}, {1, 2, 3}, 2, nullptr);
    REQUIRE(cells.size() == 6);
    for (std::size_t i = 1; i < cells.size(); ++i) {
        bool ordered = cells[i - 1].trucks < cells[i].trucks ||
                       (cells[i - 1].trucks == cells[i].trucks && cells[i - 1].seed < cells[i].seed);
        CHECK(ordered);
    }
    // parallel sweep equals serial sweep run-for-run
    auto serial = sweep(base, bundle, snap, {0, 1}, {inf}, {1, 2, 3}, 1, nullptr);
    REQUIRE(serial.size() == cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        CHECK(serial[i].report.service_level == cells[i].report.service_level);
        CHECK(serial[i].report.potential == cells[i].report.potential);
    }
    // resume: completed cells are reused untouched
    auto resumed = sweep(base, bundle, snap, {0, 1}, {inf}, {1, 2, 3}, 2, &cells);
    REQUIRE(resumed.size() == cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i)
        CHECK(resumed[i].report.service_level == cells[i].report.service_level);

    auto rows = summarize(cells);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].trucks == 0);
    CHECK(rows[0].runs == 3);
    double mean = (cells[0].report.service_level + cells[1].report.service_level +
                   cells[2].report.service_level) /
                  3.0;
    CHECK(rows[0].mean_service == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("single-cell sweep equals a direct run") {
    auto bundle = two_station_bundle(0.2);
    auto snap = make_snapshot(bundle.stations, {10, 1, 10});
    SimConfig base;
    base.burn_in_hours = 0;
    base.horizon_hours = 2;
    base.seed = 5;
    double inf = std::numeric_limits<double>::infinity();
    auto cells = sweep(base, bundle, snap, {0}, {inf}, {5}, 1, nullptr);
    REQUIRE(cells.size() == 1);
    SimConfig direct = base;
    direct.trucks = 0;
    direct.prices_enabled = false;
    auto ref = run(direct, bundle, snap);
    CHECK(cells[0].report.service_level == ref.service_level);
    CHECK(cells[0].report.potential == ref.potential);
    CHECK(cells[0].report.payout_total == ref.payout_total);
}

TEST_CASE("trucks move bikes and accrue busy hours") {
    // station C hoards bikes while A starves; one truck fixes it
    SyntheticSpec spec;
    spec.station_count = 10;
    spec.fleet_size = 60;
    spec.weekday_count = 5;
    spec.weekend_count = 2;
    spec.seed = 21;
    auto corpus = generate_synthetic(spec);
    FitParams params;
    params.neighbor_count = 3;
    params.payout_samples = 50;
    params.customer_samples = 40;
    auto bundle = fit_models(corpus, params);
    SimConfig cfg;
    cfg.burn_in_hours = 0;
    cfg.horizon_hours = 24;
    cfg.trucks = 1;
    cfg.seed = 2;
    auto report = run(cfg, bundle, corpus.snapshot);
    CHECK(report.truck_hours >= 0.0);
    SimConfig no_trucks = cfg;
    no_trucks.trucks = 0;
    auto baseline = run(no_trucks, bundle, corpus.snapshot);
    CHECK(baseline.truck_hours == 0.0);
    CHECK(baseline.payout_total == 0.0);
}
