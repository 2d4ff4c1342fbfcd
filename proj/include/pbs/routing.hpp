#pragma once

#include <span>
#include <vector>

#include "pbs/corpus.hpp"
#include "pbs/geometry.hpp"
#include "pbs/qp.hpp"
#include "pbs/utility.hpp"

namespace pbs {

struct RoutingConfig {
    int max_load = 20;        // bikes per truck
    int route_stops = 4;      // stop-count planning target
    int plan_minutes = 40;    // duration planning target
    int impl_minutes = 30;    // committed prefix / re-planning period
    double truck_speed_kmh = 15.0;
    int handling_minutes = 5;
    int branching = 3;        // greedy children per tree node
    int depot_cap = 10;       // intermittent-depot stash limit
    int window_open = 8 * 60;    // minutes of day
    int window_close = 22 * 60;
    int depot_station = -1;   // -1: station nearest the network centroid
    double refine_q = 8010.0; // quadratic penalty scale, >> 2*max_load^2+1
};

// Truck travel time between stations in 5-minute steps, including the
// 5-minute handling stop: ceil(d/1.25) + 1 at 15 km/h.
int effective_journey_time_steps(double d_eucl_km);

// Best single-station action for a truck carrying `load`:
// pick up down to the plateau top when overfull, drop up to the plateau
// bottom when underfull, limited by truck capacity and load.
int greedy_best_action(const Plateau& p, double fill, int load, int max_load);

struct TruckState {
    int id = 0;
    int station = 0;
    Minute free_at = 0;
    int load = 0;
};

struct RepositioningAction {
    int station = 0;
    Minute time = 0;       // action minute (5-minute grid)
    int delta_fill = 0;    // bikes moved into the station
    int load_after = 0;
};

struct TruckPlan {
    int truck = 0;
    std::vector<RepositioningAction> actions;
    int locked = 0;  // prefix preserved by collision repair
};

// Predicted per-minute fills with truck actions overlaid; saturated dynamics.
class FillOverlay {
public:
    FillOverlay() = default;
    FillOverlay(std::vector<double> fmax, const EtaFn& eta, Minute t0, int span,
                std::span<const double> fill_now);

    Minute t0() const { return t0_; }
    int span() const { return span_; }
    // predicted fill just before any action at minute t
    double at(int s, Minute t) const;
    // permanent action fold
    void apply(int s, Minute t, double df);

    struct Patch {
        int station = -1;
        std::int64_t offset = 0;
        std::vector<double> saved;
    };
    Patch fold(int s, Minute t, double df);
    void unfold(const Patch& patch);

private:
    void repropagate(int s, std::int64_t from);
    double action_sum(int s, std::int64_t offset) const;

    std::vector<double> fmax_;
    std::vector<double> eta_;    // S x span
    std::vector<double> fill_;   // S x span
    std::vector<std::vector<std::pair<std::int64_t, double>>> actions_;  // per station, sorted by offset
    Minute t0_ = 0;
    int span_ = 0;
    int stations_ = 0;
};

// Time-expanded view of the system for one planning epoch. Vertices live on a
// 5-minute grid; a vertex is dead when no arc combination reaches the depot
// before the operating window closes.
struct Network {
    Minute now = 0;
    Minute close = 0;  // absolute minute the window closes today
    int depot = 0;
    int station_count = 0;
    std::vector<int> dbar;  // S*S effective journey times in steps
    FillOverlay overlay;

    int steps(int i, int j) const { return dbar[static_cast<std::size_t>(i) * station_count + j]; }
    bool live(int s, Minute t) const {
        if (s == depot) return t <= close;  // already home, no return journey
        return t + static_cast<Minute>(steps(s, depot)) * 5 <= close;
    }
};

Network build_network(const Stations& stations, const Geometry& geometry, const RoutingConfig& cfg,
                      std::span<const double> fills, const EtaFn& eta, Minute now);

int pick_depot(const Stations& stations, const Geometry& geometry, const RoutingConfig& cfg);

struct RouteStop {
    int station = 0;
    Minute time = 0;
    int delta_fill = 0;   // refined action
    double fill_before = 0.0;
};

struct CandidateRoute {
    std::vector<RouteStop> stops;
    double utility = 0.0;
    double duration_minutes = 0.0;
    double rate() const { return duration_minutes > 0.0 ? utility / duration_minutes : 0.0; }
};

// Greedy candidate-route tree + QP load refinement for one truck. Returns the
// best refined route from the given start state; empty when nothing is useful.
// The overlay inside `net` is mutated during the search and restored before
// returning.
CandidateRoute search_route(Network& net, const PlateauTable& plateaus, const RoutingConfig& cfg,
                            const std::vector<double>& fmax, const TruckState& start,
                            int stop_quota, Minute deadline);

// Optimal integer load actions along a fixed route. `fill_before` entries must
// exclude the route's own actions. Falls back to the greedy profile when the
// QP fails.
std::vector<int> refine_actions(const std::vector<RouteStop>& route, std::span<const int> greedy,
                                const std::vector<double>& fmax, const PlateauTable& plateaus,
                                int initial_load, const RoutingConfig& cfg);

// Sequential multi-truck planning with collision repair.
std::vector<TruckPlan> plan_all_trucks(std::vector<TruckState> trucks, const Stations& stations,
                                       const Geometry& geometry, const PlateauTable& plateaus,
                                       const RoutingConfig& cfg, std::span<const double> fills,
                                       const EtaFn& eta, Minute now);

// One receding-horizon tick: plans all trucks and returns the full plans plus
// the committed prefix (actions starting within impl_minutes).
struct ReplanResult {
    std::vector<TruckPlan> plans;
    std::vector<std::pair<int, RepositioningAction>> committed;  // (truck id, action)
};

ReplanResult replan_tick(std::vector<TruckState> trucks, const Stations& stations,
                         const Geometry& geometry, const PlateauTable& plateaus,
                         const RoutingConfig& cfg, std::span<const double> fills, const EtaFn& eta,
                         Minute now);

}  // namespace pbs
