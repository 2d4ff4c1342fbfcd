#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pbs/corpus.hpp"
#include "pbs/customer.hpp"
#include "pbs/demand.hpp"
#include "pbs/geometry.hpp"
#include "pbs/pricing.hpp"
#include "pbs/routing.hpp"

namespace pbs {

// Everything fitted from a corpus once and shared read-only across runs.
struct ModelBundle {
    Stations stations;
    Geometry geometry;
    RateModel rates;
    TravelTimes travel;
    LinearResponse response;
    double c_max = default_c_max;
};

struct SimConfig {
    DayType day_type = DayType::weekday;
    int burn_in_hours = 24;
    int horizon_hours = 72;
    int trucks = 0;
    bool prices_enabled = false;
    double alpha = 0.1;  // only meaningful when prices_enabled
    std::uint64_t seed = 1;
    RoutingConfig routing;
    MpcConfig mpc;
    bool count_diverted_full_event = true;
    std::string event_log_path;  // optional per-event CSV
};

struct StationEvents {
    std::int64_t empty = 0;
    std::int64_t full = 0;
};

struct SimReport {
    std::int64_t potential = 0;
    std::int64_t empty_events = 0;
    std::int64_t full_events = 0;
    double service_level = 1.0;
    double payout_total = 0.0;
    double truck_hours = 0.0;
    std::int64_t diverted = 0;
    std::int64_t truck_moves = 0;
    std::vector<StationEvents> per_station;
    int mpc_failures = 0;
    int forecast_bound_exits = 0;
};

// Closed-loop Monte-Carlo run: Poisson demand from the full rate model,
// ground-truth customer choice, committed truck actions, issued prices.
// Deterministic for a given seed.
SimReport run(const SimConfig& config, const ModelBundle& models, const Snapshot& initial);

struct SweepCell {
    int trucks = 0;
    double alpha = 0.0;       // infinity() encodes "prices off"
    std::uint64_t seed = 0;
    SimReport report;
};

struct SweepSummary {
    int trucks = 0;
    double alpha = 0.0;
    int runs = 0;
    double mean_service = 0.0;
    double se_service = 0.0;   // standard error of the mean
    double mean_payout = 0.0;
    double mean_empty = 0.0;
    double mean_full = 0.0;
    double mean_truck_hours = 0.0;
};

std::vector<SweepCell> sweep(const SimConfig& base, const ModelBundle& models, const Snapshot& initial,
                             const std::vector<int>& truck_grid, const std::vector<double>& alpha_grid,
                             const std::vector<std::uint64_t>& seeds, int jobs,
                             const std::vector<SweepCell>* already_done = nullptr);

std::vector<SweepSummary> summarize(const std::vector<SweepCell>& cells);

}  // namespace pbs
