#include "pbs/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <queue>
#include <thread>

#include "pbs/rng.hpp"

namespace pbs {

namespace {

struct Ride {
    Minute arrival = 0;
    std::int64_t seq = 0;
    int dest = 0;
    double cost = 0.0;      // marginal travel cost draw
    bool diverted = false;  // already accepted an incentive
};

struct RideOrder {
    bool operator()(const Ride& a, const Ride& b) const {
        if (a.arrival != b.arrival) return a.arrival > b.arrival;
        return a.seq > b.seq;
    }
};

struct TruckRuntime {
    TruckState state;
    std::vector<RepositioningAction> pending;  // committed, not yet executed
    std::size_t next = 0;
};

}  // namespace

SimReport run(const SimConfig& config, const ModelBundle& models, const Snapshot& initial) {
    const int S = models.stations.size();
    const int w = static_cast<int>(config.day_type);
    const RateModel& rates = models.rates;
    const Geometry& geo = models.geometry;

    // the run clock starts at minute 0 and every simulated day has the
    // configured day type
    EtaFn eta_fn = [&](int s, Minute t) { return rates.eta(static_cast<DayType>(w), slice_of(t), s); };
    EtaFn lambda_fn = [&](int s, Minute t) {
        return rates.lambda(static_cast<DayType>(w), slice_of(t), s);
    };

    const Minute total_minutes = static_cast<Minute>(config.burn_in_hours + config.horizon_hours) * 60;
    const Minute burn_end = static_cast<Minute>(config.burn_in_hours) * 60;

    std::vector<double> fmax(static_cast<std::size_t>(S));
    std::vector<int> caps(static_cast<std::size_t>(S));
    for (int s = 0; s < S; ++s) {
        caps[static_cast<std::size_t>(s)] = models.stations.capacity(s);
        fmax[static_cast<std::size_t>(s)] = caps[static_cast<std::size_t>(s)];
    }

    PlateauTable plateaus =
        build_plateau_table(fmax, eta_fn, 0, static_cast<int>(total_minutes) + minutes_per_day);

    std::vector<int> fills(static_cast<std::size_t>(S), 0);
    std::int64_t fleet = 0;
    for (const auto& [id, count] : initial.fill) {
        fills[static_cast<std::size_t>(models.stations.index(id))] = count;
        fleet += count;
    }

    Rng rng = Rng::derive(config.seed, "sim-run");

    RoutingConfig routing = config.routing;
    int depot = pick_depot(models.stations, geo, routing);
    std::vector<TruckRuntime> trucks(static_cast<std::size_t>(config.trucks));
    for (int r = 0; r < config.trucks; ++r)
        trucks[static_cast<std::size_t>(r)].state =
            TruckState{r, depot, static_cast<Minute>(routing.window_open), 0};
    std::vector<TruckPlan> current_plans;

    MpcConfig mpc_cfg = config.mpc;
    mpc_cfg.enabled = config.prices_enabled;
    mpc_cfg.alpha = config.alpha;
    std::optional<MpcController> controller;
    if (config.prices_enabled) controller.emplace(geo, models.response, fmax, mpc_cfg);
    PriceSchedule prices;
    prices.payout.assign(static_cast<std::size_t>(S),
                         std::vector<double>(static_cast<std::size_t>(geo.neighbor_count), 0.0));
    const std::vector<double> zero_payout(static_cast<std::size_t>(geo.neighbor_count), 0.0);
    PayoutFn payout_fn = [&](int station) -> std::span<const double> {
        if (!config.prices_enabled) return zero_payout;
        return prices.payout[static_cast<std::size_t>(station)];
    };

    std::priority_queue<Ride, std::vector<Ride>, RideOrder> in_transit;
    std::int64_t seq = 0;

    SimReport report;
    report.per_station.assign(static_cast<std::size_t>(S), {});
    bool measuring = burn_end == 0;

    std::ofstream event_log;
    if (!config.event_log_path.empty()) {
        event_log.open(config.event_log_path);
        event_log << "minute,event,station\n";
    }
    auto log_event = [&](Minute t, const char* kind, int s) {
        if (event_log.is_open() && measuring)
            event_log << t << ',' << kind << ','
                      << models.stations.rows[static_cast<std::size_t>(s)].id << '\n';
    };

    // cached per-slice departure rates and their exp(-rate)
    std::vector<std::vector<double>> slice_exp(static_cast<std::size_t>(slices_per_day));
    auto exp_table = [&](int k) -> const double* {
        auto& exps = slice_exp[static_cast<std::size_t>(k)];
        if (exps.empty()) {
            exps.resize(static_cast<std::size_t>(S) * S);
            const double* m = rates.departures[w].data() + rates.od_index(k, 0, 0);
            for (std::size_t c = 0; c < exps.size(); ++c) exps[c] = m[c] > 0.0 ? std::exp(-m[c]) : 1.0;
        }
        return exps.data();
    };

    std::int64_t docked_total = 0;
    for (int v : fills) docked_total += v;

    for (Minute now = 0; now < total_minutes; ++now) {
        if (now == burn_end) {
            report = SimReport{};
            report.per_station.assign(static_cast<std::size_t>(S), {});
            measuring = true;
        }
        const int mod = minute_of_day(now);
        const int k = slice_of(now);

        // truck re-planning on the implementation-horizon cadence
        if (config.trucks > 0 && mod >= routing.window_open && mod < routing.window_close &&
            (mod - routing.window_open) % routing.impl_minutes == 0) {
            std::vector<TruckState> states;
            states.reserve(trucks.size());
            for (auto& t : trucks) states.push_back(t.state);
            std::vector<double> dfills(fills.begin(), fills.end());
            ReplanResult plan =
                replan_tick(states, models.stations, geo, plateaus, routing, dfills, eta_fn, now);
            current_plans = plan.plans;
            for (auto& t : trucks) {
                t.pending.clear();
                t.next = 0;
            }
            for (const auto& [truck_id, action] : plan.committed)
                trucks[static_cast<std::size_t>(truck_id)].pending.push_back(action);
        }

        // price re-optimization every control step
        if (config.prices_enabled && now % mpc_cfg.step_minutes == 0) {
            std::vector<std::vector<std::pair<Minute, double>>> truck_deltas(static_cast<std::size_t>(S));
            for (const auto& plan : current_plans)
                for (const auto& a : plan.actions)
                    if (a.time >= now)
                        truck_deltas[static_cast<std::size_t>(a.station)].push_back(
                            {a.time, static_cast<double>(a.delta_fill)});
            std::vector<double> dfills(fills.begin(), fills.end());
            MpcState state =
                make_mpc_state(now, dfills, eta_fn, lambda_fn, plateaus, truck_deltas, mpc_cfg);
            MpcDiagnostics diag;
            prices = controller->tick(state, &diag);
            if (diag.reused_previous) ++report.mpc_failures;
            report.forecast_bound_exits += diag.forecast_bound_exits;
        }

        // departures: per-OD Poisson counts with the slice's per-minute mean
        const double* exps = exp_table(k);
        const double* dep = rates.departures[w].data() + rates.od_index(k, 0, 0);
        for (int i = 0; i < S; ++i) {
            const double* row_rate = dep + static_cast<std::size_t>(i) * S;
            const double* row_exp = exps + static_cast<std::size_t>(i) * S;
            for (int j = 0; j < S; ++j) {
                if (row_rate[j] <= 0.0) continue;
                int count = 0;
                double p = rng.uniform();
                while (p > row_exp[j]) {
                    ++count;
                    p *= rng.uniform();
                }
                for (int c = 0; c < count; ++c) {
                    if (measuring) ++report.potential;
                    if (fills[static_cast<std::size_t>(i)] == 0) {
                        if (measuring) {
                            ++report.empty_events;
                            ++report.per_station[static_cast<std::size_t>(i)].empty;
                            log_event(now, "empty", i);
                        }
                        continue;  // the customer leaves without a journey
                    }
                    --fills[static_cast<std::size_t>(i)];
                    --docked_total;
                    Ride ride;
                    ride.arrival = now + models.travel.at(i, j);
                    ride.seq = seq++;
                    ride.dest = j;
                    ride.cost = rng.uniform(0.0, models.c_max);
                    in_transit.push(ride);
                }
            }
        }

        // arrivals due now; a diversion leg can land within the same minute
        while (!in_transit.empty() && in_transit.top().arrival <= now) {
            Ride ride = in_transit.top();
            in_transit.pop();
            int dest = ride.dest;
            bool full = fills[static_cast<std::size_t>(dest)] >= caps[static_cast<std::size_t>(dest)];

            if (!full && !ride.diverted && config.prices_enabled) {
                const auto& offers = prices.payout[static_cast<std::size_t>(dest)];
                const auto& nbrs = geo.neighbors[static_cast<std::size_t>(dest)];
                std::vector<double> dist(nbrs.size());
                for (std::size_t nk = 0; nk < nbrs.size(); ++nk)
                    dist[nk] = geo.effective_km(dest, nbrs[nk]);
                int pick = choose(offers, dist, ride.cost, false);
                if (pick >= 0) {
                    if (measuring) {
                        report.payout_total += offers[static_cast<std::size_t>(pick)];
                        ++report.diverted;
                    }
                    Ride leg = ride;
                    leg.dest = nbrs[static_cast<std::size_t>(pick)];
                    leg.diverted = true;
                    // the extra leg is ridden physically at the median speed
                    Minute delay = static_cast<Minute>(std::llround(
                        dist[static_cast<std::size_t>(pick)] / models.travel.median_speed_kmh * 60.0));
                    leg.arrival = now + std::max<Minute>(0, delay);
                    leg.seq = seq++;
                    in_transit.push(leg);
                    continue;
                }
            }

            if (full) {
                if (measuring && (config.count_diverted_full_event || !ride.diverted)) {
                    ++report.full_events;
                    ++report.per_station[static_cast<std::size_t>(dest)].full;
                    log_event(now, "full", dest);
                }
                WalkResult walk = overflow_walk(dest, fills, caps, geo, payout_fn, ride.cost);
                if (measuring) report.payout_total += walk.payout;
                ++fills[static_cast<std::size_t>(walk.station)];
                ++docked_total;
            } else {
                ++fills[static_cast<std::size_t>(dest)];
                ++docked_total;
            }
        }

        // committed truck actions scheduled for this minute
        for (auto& truck : trucks) {
            while (truck.next < truck.pending.size() && truck.pending[truck.next].time <= now) {
                const auto& action = truck.pending[truck.next];
                int s = action.station;
                int df = action.delta_fill;
                // clamp to what the station and the truck can actually move
                df = std::min(df, caps[static_cast<std::size_t>(s)] - fills[static_cast<std::size_t>(s)]);
                df = std::max(df, -fills[static_cast<std::size_t>(s)]);
                df = std::min(df, truck.state.load);
                df = std::max(df, truck.state.load - routing.max_load);
                fills[static_cast<std::size_t>(s)] += df;
                docked_total += df;
                truck.state.load -= df;
                if (measuring && df != 0) ++report.truck_moves;
                double busy = static_cast<double>(effective_journey_time_steps(
                                  geo.euclid_km(truck.state.station, s))) *
                              5.0;
                if (measuring) report.truck_hours += busy / 60.0;
                truck.state.station = s;
                truck.state.free_at = action.time + routing.handling_minutes;
                ++truck.next;
            }
        }

        // docked + riding + on trucks must be the whole fleet, every minute
        std::int64_t on_trucks = 0;
        for (const auto& t : trucks) on_trucks += t.state.load;
        if (docked_total + static_cast<std::int64_t>(in_transit.size()) + on_trucks != fleet)
            throw solver_error("bike conservation violated at minute " + std::to_string(now));
    }

    std::int64_t no_service = report.empty_events + report.full_events;
    report.service_level =
        report.potential == 0
            ? 1.0
            : std::clamp(1.0 - static_cast<double>(no_service) / static_cast<double>(report.potential),
                         0.0, 1.0);
    return report;
}

std::vector<SweepCell> sweep(const SimConfig& base, const ModelBundle& models, const Snapshot& initial,
                             const std::vector<int>& truck_grid, const std::vector<double>& alpha_grid,
                             const std::vector<std::uint64_t>& seeds, int jobs,
                             const std::vector<SweepCell>* already_done) {
    std::vector<SweepCell> cells;
    for (int trucks : truck_grid)
        for (double alpha : alpha_grid)
            for (std::uint64_t seed : seeds) {
                bool have = false;
                if (already_done) {
                    for (const auto& c : *already_done)
                        if (c.trucks == trucks && c.seed == seed &&
                            ((std::isinf(c.alpha) && std::isinf(alpha)) || c.alpha == alpha))
                            have = true;
                }
                if (!have) cells.push_back({trucks, alpha, seed, {}});
            }

    std::atomic<std::size_t> cursor{0};
    auto worker = [&]() {
        while (true) {
            std::size_t idx = cursor.fetch_add(1);
            if (idx >= cells.size()) return;
            SweepCell& cell = cells[idx];
            SimConfig cfg = base;
            cfg.trucks = cell.trucks;
            cfg.prices_enabled = !std::isinf(cell.alpha);
            cfg.alpha = cfg.prices_enabled ? cell.alpha : 0.0;
            cfg.seed = cell.seed;
            cfg.event_log_path.clear();
            cell.report = run(cfg, models, initial);
        }
    };
    int n_threads = std::max(1, jobs);
    std::vector<std::thread> pool;
    for (int i = 1; i < n_threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    if (already_done) cells.insert(cells.end(), already_done->begin(), already_done->end());
    std::sort(cells.begin(), cells.end(), [](const SweepCell& a, const SweepCell& b) {
        if (a.trucks != b.trucks) return a.trucks < b.trucks;
        if (a.alpha != b.alpha) return a.alpha < b.alpha;
        return a.seed < b.seed;
    });
    return cells;
}

std::vector<SweepSummary> summarize(const std::vector<SweepCell>& cells) {
    std::vector<SweepSummary> out;
    auto same_alpha = [](double a, double b) {
        return (std::isinf(a) && std::isinf(b)) || a == b;
    };
    for (const auto& cell : cells) {
        SweepSummary* row = nullptr;
        for (auto& s : out)
            if (s.trucks == cell.trucks && same_alpha(s.alpha, cell.alpha)) row = &s;
        if (!row) {
            out.push_back({});
            row = &out.back();
            row->trucks = cell.trucks;
            row->alpha = cell.alpha;
        }
        ++row->runs;
        row->mean_service += cell.report.service_level;
        row->mean_payout += cell.report.payout_total;
        row->mean_empty += static_cast<double>(cell.report.empty_events);
        row->mean_full += static_cast<double>(cell.report.full_events);
        row->mean_truck_hours += cell.report.truck_hours;
    }
    for (auto& row : out) {
        row.mean_service /= row.runs;
        row.mean_payout /= row.runs;
        row.mean_empty /= row.runs;
        row.mean_full /= row.runs;
        row.mean_truck_hours /= row.runs;
    }
    for (auto& row : out) {
        double ss = 0.0;
        int n = 0;
        for (const auto& cell : cells) {
            if (cell.trucks == row.trucks && same_alpha(cell.alpha, row.alpha)) {
                double d = cell.report.service_level - row.mean_service;
                ss += d * d;
                ++n;
            }
        }
        row.se_service = n > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
    }
    return out;
}

}  // namespace pbs
