#include "pbs/routing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pbs {

int effective_journey_time_steps(double d_eucl_km) {
    return static_cast<int>(std::ceil(d_eucl_km / 1.25 - 1e-9)) + 1;
}

int greedy_best_action(const Plateau& p, double fill, int load, int max_load) {
    if (fill > p.upper) {
        int pick = static_cast<int>(std::ceil(p.upper - fill - 1e-9));
        return std::max(load - max_load, pick);
    }
    if (fill < p.lower) {
        int drop = static_cast<int>(std::floor(p.lower - fill + 1e-9));
        return std::min(load, drop);
    }
    return 0;
}

FillOverlay::FillOverlay(std::vector<double> fmax, const EtaFn& eta, Minute t0, int span,
                         std::span<const double> fill_now)
    : fmax_(std::move(fmax)), t0_(t0), span_(span), stations_(static_cast<int>(fmax_.size())) {
    eta_.resize(static_cast<std::size_t>(stations_) * span_);
    fill_.assign(static_cast<std::size_t>(stations_) * span_, 0.0);
    actions_.assign(static_cast<std::size_t>(stations_), {});
    for (int s = 0; s < stations_; ++s) {
        for (int o = 0; o < span_; ++o)
            eta_[static_cast<std::size_t>(s) * span_ + static_cast<std::size_t>(o)] = eta(s, t0 + o);
        fill_[static_cast<std::size_t>(s) * span_] = fill_now[static_cast<std::size_t>(s)];
        repropagate(s, 0);
    }
}

double FillOverlay::at(int s, Minute t) const {
    std::int64_t o = t - t0_;
    if (o < 0) o = 0;
    if (o >= span_) o = span_ - 1;
    double pre = fill_[static_cast<std::size_t>(s) * span_ + static_cast<std::size_t>(o)];
    // post-action view: a later visitor in the same minute sees prior actions
    double sum = action_sum(s, o);
    if (sum == 0.0) return pre;
    return std::clamp(pre + sum, 0.0, fmax_[static_cast<std::size_t>(s)]);
}

double FillOverlay::action_sum(int s, std::int64_t offset) const {
    double sum = 0.0;
    for (const auto& [o, df] : actions_[static_cast<std::size_t>(s)])
        if (o == offset) sum += df;
    return sum;
}

void FillOverlay::repropagate(int s, std::int64_t from) {
    const double cap = fmax_[static_cast<std::size_t>(s)];
    const std::size_t base = static_cast<std::size_t>(s) * span_;
    double level = fill_[base + static_cast<std::size_t>(from)];
    for (std::int64_t o = from; o + 1 < span_; ++o) {
        double post = std::clamp(level + action_sum(s, o), 0.0, cap);
        level = std::clamp(post + eta_[base + static_cast<std::size_t>(o)], 0.0, cap);
        fill_[base + static_cast<std::size_t>(o) + 1] = level;
    }
}

void FillOverlay::apply(int s, Minute t, double df) {
    std::int64_t o = t - t0_;
    if (o < 0 || o >= span_) return;
    auto& acts = actions_[static_cast<std::size_t>(s)];
    acts.emplace_back(o, df);
    std::sort(acts.begin(), acts.end());
    repropagate(s, o);
}

FillOverlay::Patch FillOverlay::fold(int s, Minute t, double df) {
    Patch patch;
    patch.station = s;
    patch.offset = t - t0_;
    if (patch.offset < 0 || patch.offset >= span_) {
        patch.station = -1;
        return patch;
    }
    const std::size_t base = static_cast<std::size_t>(s) * span_;
    patch.saved.assign(fill_.begin() + static_cast<std::int64_t>(base) + patch.offset + 1,
                       fill_.begin() + static_cast<std::int64_t>(base) + span_);
    auto& acts = actions_[static_cast<std::size_t>(s)];
    acts.emplace_back(patch.offset, df);
    std::sort(acts.begin(), acts.end());
    repropagate(s, patch.offset);
    return patch;
}

void FillOverlay::unfold(const Patch& patch) {
    if (patch.station < 0) return;
    auto& acts = actions_[static_cast<std::size_t>(patch.station)];
    for (auto it = acts.rbegin(); it != acts.rend(); ++it) {
        if (it->first == patch.offset) {
            acts.erase(std::next(it).base());
            break;
        }
    }
    const std::size_t base = static_cast<std::size_t>(patch.station) * span_;
    std::copy(patch.saved.begin(), patch.saved.end(),
              fill_.begin() + static_cast<std::int64_t>(base) + patch.offset + 1);
}

int pick_depot(const Stations& stations, const Geometry& geometry, const RoutingConfig& cfg) {
    (void)stations;
    if (cfg.depot_station >= 0) return cfg.depot_station;
    const int n = geometry.station_count;
    double cx = 0.0, cy = 0.0;
    for (const XY& p : geometry.station_xy) {
        cx += p.x;
        cy += p.y;
    }
    cx /= n;
    cy /= n;
    int best = 0;
    double best_d = std::numeric_limits<double>::max();
    for (int s = 0; s < n; ++s) {
        double dx = geometry.station_xy[static_cast<std::size_t>(s)].x - cx;
        double dy = geometry.station_xy[static_cast<std::size_t>(s)].y - cy;
        double d = dx * dx + dy * dy;
        if (d < best_d) {
            best_d = d;
            best = s;
        }
    }
    return best;
}

Network build_network(const Stations& stations, const Geometry& geometry, const RoutingConfig& cfg,
                      std::span<const double> fills, const EtaFn& eta, Minute now) {
    Network net;
    const int n = geometry.station_count;
    net.now = now;
    net.close = day_index(now) * minutes_per_day + cfg.window_close;
    net.depot = pick_depot(stations, geometry, cfg);
    net.station_count = n;
    net.dbar.resize(static_cast<std::size_t>(n) * n);
    int max_steps = 1;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            int d = effective_journey_time_steps(geometry.euclid_km(i, j));
            net.dbar[static_cast<std::size_t>(i) * n + j] = d;
            max_steps = std::max(max_steps, d);
        }
    int span = cfg.plan_minutes + cfg.route_stops * max_steps * 5 + cfg.impl_minutes + 30;
    std::vector<double> fmax(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) fmax[static_cast<std::size_t>(s)] = stations.capacity(s);
    net.overlay = FillOverlay(std::move(fmax), eta, now, span, fills);
    return net;
}

namespace {

double refine_objective(const std::vector<RouteStop>& route, std::span<const int> df,
                        const std::vector<double>& fmax, const PlateauTable& plateaus,
                        int initial_load, const RoutingConfig& cfg, bool* feasible) {
    const int R = static_cast<int>(route.size());
    double obj = 0.0;
    int load = initial_load;
    *feasible = true;
    for (int i = 0; i < R; ++i) {
        double same_station = 0.0;
        for (int i2 = 0; i2 <= i; ++i2)
            if (route[static_cast<std::size_t>(i2)].station == route[static_cast<std::size_t>(i)].station)
                same_station += df[static_cast<std::size_t>(i2)];
        double level = route[static_cast<std::size_t>(i)].fill_before + same_station;
        double cap = fmax[static_cast<std::size_t>(route[static_cast<std::size_t>(i)].station)];
        if (level < -1e-9 || level > cap + 1e-9) *feasible = false;
        load -= df[static_cast<std::size_t>(i)];
        if (load < 0 || load > cfg.max_load) *feasible = false;
        const Plateau& p = plateaus.at(route[static_cast<std::size_t>(i)].station, route[static_cast<std::size_t>(i)].time);
        obj += std::abs(p.lower - level) + std::abs(level - p.upper);
        obj += static_cast<double>(df[static_cast<std::size_t>(i)]) * df[static_cast<std::size_t>(i)] / cfg.refine_q;
    }
    return obj;
}

}  // namespace

std::vector<int> refine_actions(const std::vector<RouteStop>& route, std::span<const int> greedy,
                                const std::vector<double>& fmax, const PlateauTable& plateaus,
                                int initial_load, const RoutingConfig& cfg) {
    const int R = static_cast<int>(route.size());
    if (R == 0) return {};
    std::vector<int> result(greedy.begin(), greedy.end());

    auto same_station = [&](int i) {
        std::vector<int> idx;
        for (int i2 = 0; i2 <= i; ++i2)
            if (route[static_cast<std::size_t>(i2)].station == route[static_cast<std::size_t>(i)].station)
                idx.push_back(i2);
        return idx;
    };

    // variables: [df(R), lo'(R), hi'(R)]
    const int nv = 3 * R;
    std::vector<Eigen::Triplet<double>> ct;
    std::vector<double> lo, up;
    int rows = 0;
    auto add_row = [&](double l, double u) {
        lo.push_back(l);
        up.push_back(u);
        return rows++;
    };

    for (int i = 0; i < R; ++i) {
        int r = add_row(initial_load - cfg.max_load, initial_load);
        for (int i2 = 0; i2 <= i; ++i2) ct.emplace_back(r, i2, 1.0);

        double fb = route[static_cast<std::size_t>(i)].fill_before;
        double cap = fmax[static_cast<std::size_t>(route[static_cast<std::size_t>(i)].station)];
        auto shared = same_station(i);
        r = add_row(-fb, cap - fb);
        for (int i2 : shared) ct.emplace_back(r, i2, 1.0);

        const Plateau& p = plateaus.at(route[static_cast<std::size_t>(i)].station, route[static_cast<std::size_t>(i)].time);
        r = add_row(-qp::inf, fb - p.lower);
        for (int i2 : shared) ct.emplace_back(r, i2, -1.0);
        ct.emplace_back(r, R + i, -1.0);
        r = add_row(-qp::inf, p.lower - fb);
        for (int i2 : shared) ct.emplace_back(r, i2, 1.0);
        ct.emplace_back(r, R + i, -1.0);
        r = add_row(-qp::inf, p.upper - fb);
        for (int i2 : shared) ct.emplace_back(r, i2, 1.0);
        ct.emplace_back(r, 2 * R + i, -1.0);
        r = add_row(-qp::inf, fb - p.upper);
        for (int i2 : shared) ct.emplace_back(r, i2, -1.0);
        ct.emplace_back(r, 2 * R + i, -1.0);
        r = add_row(0.0, qp::inf);
        ct.emplace_back(r, R + i, 1.0);
        r = add_row(0.0, qp::inf);
        ct.emplace_back(r, 2 * R + i, 1.0);
    }

    qp::SpMat C(rows, nv);
    C.setFromTriplets(ct.begin(), ct.end());
    std::vector<Eigen::Triplet<double>> ht;
    for (int i = 0; i < R; ++i) ht.emplace_back(i, i, 2.0 / cfg.refine_q);
    qp::SpMat H(nv, nv);
    H.setFromTriplets(ht.begin(), ht.end());
    qp::Vec g = qp::Vec::Zero(nv);
    for (int i = 0; i < R; ++i) {
        g[R + i] = 1.0;
        g[2 * R + i] = 1.0;
    }
    qp::Vec l = Eigen::Map<qp::Vec>(lo.data(), rows);
    qp::Vec u = Eigen::Map<qp::Vec>(up.data(), rows);

    qp::Solver solver;
    qp::Settings settings;
    settings.max_iterations = 4000;
    solver.setup(H, g, C, l, u, settings);
    auto sol = solver.solve();
    if (sol.status == qp::Status::solved) {
        for (int i = 0; i < R; ++i) {
            double v = sol.x[i];
            result[static_cast<std::size_t>(i)] = static_cast<int>(std::trunc(v + (v > 0 ? 1e-9 : -1e-9)));
        }
        // repair the capacity chain and station bounds at the latest violating stop
        int load = initial_load;
        for (int i = 0; i < R; ++i) {
            int& df = result[static_cast<std::size_t>(i)];
            df = std::clamp(df, load - cfg.max_load, load);
            double prior = 0.0;
            for (int i2 = 0; i2 < i; ++i2)
                if (route[static_cast<std::size_t>(i2)].station == route[static_cast<std::size_t>(i)].station)
                    prior += result[static_cast<std::size_t>(i2)];
            double fb = route[static_cast<std::size_t>(i)].fill_before + prior;
            double cap = fmax[static_cast<std::size_t>(route[static_cast<std::size_t>(i)].station)];
            df = std::min(df, static_cast<int>(std::floor(cap - fb + 1e-9)));
            df = std::max(df, static_cast<int>(std::ceil(-fb - 1e-9)));
            load -= df;
        }
    }

    bool feasible = false;
    double best_obj = refine_objective(route, result, fmax, plateaus, initial_load, cfg, &feasible);
    if (!feasible) {
        result.assign(greedy.begin(), greedy.end());
        best_obj = refine_objective(route, result, fmax, plateaus, initial_load, cfg, &feasible);
    }
    // bounded rounding pass to undo integer-clipping damage; pair moves shift
    // one bike along the load chain without breaking it
    for (int sweep = 0; sweep < 2; ++sweep) {
        for (int i = 0; i < R; ++i) {
            for (int delta : {-1, 1}) {
                std::vector<int> trial = result;
                trial[static_cast<std::size_t>(i)] += delta;
                bool ok = false;
                double obj = refine_objective(route, trial, fmax, plateaus, initial_load, cfg, &ok);
                if (ok && obj < best_obj - 1e-12) {
                    best_obj = obj;
                    result = std::move(trial);
                }
            }
            for (int j = 0; j < R; ++j) {
                if (j == i) continue;
                for (int delta : {-1, 1}) {
                    std::vector<int> trial = result;
                    trial[static_cast<std::size_t>(i)] += delta;
                    trial[static_cast<std::size_t>(j)] -= delta;
                    bool ok = false;
                    double obj = refine_objective(route, trial, fmax, plateaus, initial_load, cfg, &ok);
                    if (ok && obj < best_obj - 1e-12) {
                        best_obj = obj;
                        result = std::move(trial);
                    }
                }
            }
        }
    }
    return result;
}

namespace {

struct ChildCandidate {
    int station = 0;
    Minute time = 0;
    int df = 0;
    double score = 0.0;
    int steps = 0;
    bool set = false;
};

struct SearchState {
    const PlateauTable* plateaus = nullptr;
    const RoutingConfig* cfg = nullptr;
    Network* net = nullptr;
    const std::vector<double>* fmax = nullptr;
    int stop_quota = 0;
    Minute deadline = 0;
    Minute root_free = 0;
    int root_load = 0;

    struct PathEntry {
        RouteStop stop;
        int greedy_df = 0;
        FillOverlay::Patch patch;
    };
    std::vector<PathEntry> path;
    CandidateRoute best;
    bool have_best = false;
};

void evaluate_leaf(SearchState& st) {
    if (st.path.empty()) return;
    const int R = static_cast<int>(st.path.size());

    // expose base fills (without this path's own folds)
    for (int i = R - 1; i >= 0; --i) st.net->overlay.unfold(st.path[static_cast<std::size_t>(i)].patch);

    std::vector<RouteStop> route;
    std::vector<int> greedy;
    route.reserve(static_cast<std::size_t>(R));
    for (const auto& e : st.path) {
        RouteStop stop = e.stop;
        stop.fill_before = st.net->overlay.at(stop.station, stop.time);
        route.push_back(stop);
        greedy.push_back(e.greedy_df);
    }

    std::vector<int> refined =
        refine_actions(route, greedy, *st.fmax, *st.plateaus, st.root_load, *st.cfg);

    double utility = 0.0;
    std::vector<FillOverlay::Patch> replay;
    for (int i = 0; i < R; ++i) {
        const RouteStop& stop = route[static_cast<std::size_t>(i)];
        double fill = st.net->overlay.at(stop.station, stop.time);
        utility += utility_fast(st.plateaus->at(stop.station, stop.time), fill,
                                refined[static_cast<std::size_t>(i)]);
        replay.push_back(st.net->overlay.fold(stop.station, stop.time, refined[static_cast<std::size_t>(i)]));
    }
    for (int i = R - 1; i >= 0; --i) st.net->overlay.unfold(replay[static_cast<std::size_t>(i)]);

    Minute t_last = route.back().time;
    double duration = static_cast<double>(t_last - st.root_free) + st.cfg->handling_minutes;
    if (utility > 1e-9 && duration > 0.0) {
        CandidateRoute cand;
        cand.stops = route;
        for (int i = 0; i < R; ++i) cand.stops[static_cast<std::size_t>(i)].delta_fill = refined[static_cast<std::size_t>(i)];
        cand.utility = utility;
        cand.duration_minutes = duration;
        bool better = !st.have_best;
        if (st.have_best) {
            double a = cand.rate(), b = st.best.rate();
            if (a > b + 1e-12) better = true;
            else if (std::abs(a - b) <= 1e-12) {
                if (cand.stops.back().time < st.best.stops.back().time) better = true;
                else if (cand.stops.back().time == st.best.stops.back().time &&
                         cand.stops.size() < st.best.stops.size())
                    better = true;
            }
        }
        if (better) {
            st.best = std::move(cand);
            st.have_best = true;
        }
    }

    // restore the greedy folds for the ongoing recursion
    for (auto& e : st.path) e.patch = st.net->overlay.fold(e.stop.station, e.stop.time, e.greedy_df);
}

void recurse(SearchState& st, int station, Minute time, int load, int depth) {
    const RoutingConfig& cfg = *st.cfg;
    Network& net = *st.net;
    if (depth >= st.stop_quota || time >= st.deadline) {
        evaluate_leaf(st);
        return;
    }

    std::vector<ChildCandidate> children;
    ChildCandidate store, pick;
    for (int s2 = 0; s2 < net.station_count; ++s2) {
        if (s2 == station) continue;
        int steps = net.steps(station, s2);
        Minute t2 = time + static_cast<Minute>(steps) * 5;
        if (!net.live(s2, t2)) continue;
        if (t2 - net.overlay.t0() >= net.overlay.span()) continue;
        const Plateau& p = st.plateaus->at(s2, t2);
        double fill = net.overlay.at(s2, t2);
        int df = greedy_best_action(p, fill, load, cfg.max_load);
        if (df != 0)
            children.push_back({s2, t2, df, std::abs(df) / static_cast<double>(steps), steps, true});

        auto consider = [&](ChildCandidate& slot, double value) {
            double score = value / steps;
            if (value <= 1e-9) return;
            bool better = !slot.set || score > slot.score + 1e-12 ||
                          (std::abs(score - slot.score) <= 1e-12 &&
                           (steps < slot.steps || (steps == slot.steps && s2 < slot.station)));
            if (better) slot = {s2, t2, 0, score, steps, true};
        };
        consider(store, std::min(static_cast<double>(cfg.depot_cap), p.upper - fill));
        consider(pick, std::min(static_cast<double>(cfg.depot_cap), fill - p.lower));
    }

    std::sort(children.begin(), children.end(), [](const ChildCandidate& a, const ChildCandidate& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.steps != b.steps) return a.steps < b.steps;
        return a.station < b.station;
    });
    if (static_cast<int>(children.size()) > cfg.branching)
        children.resize(static_cast<std::size_t>(cfg.branching));
    auto has_station = [&](int s2) {
        return std::any_of(children.begin(), children.end(),
                           [s2](const ChildCandidate& c) { return c.station == s2; });
    };
    if (store.set && !has_station(store.station)) children.push_back(store);
    if (pick.set && !has_station(pick.station) && pick.station != store.station) children.push_back(pick);

    if (children.empty()) {
        evaluate_leaf(st);
        return;
    }

    for (const auto& child : children) {
        SearchState::PathEntry entry;
        entry.stop.station = child.station;
        entry.stop.time = child.time;
        entry.greedy_df = child.df;
        entry.patch = net.overlay.fold(child.station, child.time, child.df);
        st.path.push_back(std::move(entry));
        recurse(st, child.station, child.time, load - child.df, depth + 1);
        net.overlay.unfold(st.path.back().patch);
        st.path.pop_back();
    }
}

}  // namespace

CandidateRoute search_route(Network& net, const PlateauTable& plateaus, const RoutingConfig& cfg,
                            const std::vector<double>& fmax, const TruckState& start,
                            int stop_quota, Minute deadline) {
    if (stop_quota <= 0) return {};
    SearchState st;
    st.plateaus = &plateaus;
    st.cfg = &cfg;
    st.net = &net;
    st.fmax = &fmax;
    st.stop_quota = stop_quota;
    st.deadline = deadline;
    st.root_free = start.free_at;
    st.root_load = start.load;
    recurse(st, start.station, start.free_at, start.load, 0);
    return st.have_best ? st.best : CandidateRoute{};
}

std::vector<TruckPlan> plan_all_trucks(std::vector<TruckState> trucks, const Stations& stations,
                                       const Geometry& geometry, const PlateauTable& plateaus,
                                       const RoutingConfig& cfg, std::span<const double> fills,
                                       const EtaFn& eta, Minute now) {
    const int R = static_cast<int>(trucks.size());
    std::vector<double> fmax(static_cast<std::size_t>(geometry.station_count));
    for (int s = 0; s < geometry.station_count; ++s) fmax[static_cast<std::size_t>(s)] = stations.capacity(s);

    std::vector<TruckPlan> plans(static_cast<std::size_t>(R));
    std::vector<int> round_start(static_cast<std::size_t>(R), 0);  // first index of the last search round
    std::vector<bool> done(static_cast<std::size_t>(R), false);
    for (int r = 0; r < R; ++r) plans[static_cast<std::size_t>(r)].truck = trucks[static_cast<std::size_t>(r)].id;

    Network net = build_network(stations, geometry, cfg, fills, eta, now);
    Minute deadline = now + cfg.plan_minutes;

    auto plan_end_state = [&](int r) -> TruckState {
        const auto& plan = plans[static_cast<std::size_t>(r)];
        TruckState state = trucks[static_cast<std::size_t>(r)];
        if (!plan.actions.empty()) {
            const auto& last = plan.actions.back();
            state.station = last.station;
            state.free_at = last.time + cfg.handling_minutes;
            state.load = last.load_after;
        }
        return state;
    };
    auto complete = [&](int r) {
        const auto& plan = plans[static_cast<std::size_t>(r)];
        if (done[static_cast<std::size_t>(r)]) return true;
        if (static_cast<int>(plan.actions.size()) >= cfg.route_stops) return true;
        return !plan.actions.empty() && plan.actions.back().time >= deadline;
    };

    auto rebuild_overlay = [&]() {
        net = build_network(stations, geometry, cfg, fills, eta, now);
        for (const auto& plan : plans)
            for (const auto& a : plan.actions) net.overlay.apply(a.station, a.time, a.delta_fill);
    };

    const int max_rounds = 16 + 8 * R;
    for (int round = 0; round < max_rounds; ++round) {
        int r = -1;
        Minute best_t = 0;
        for (int i = 0; i < R; ++i) {
            if (complete(i)) continue;
            Minute t = plans[static_cast<std::size_t>(i)].actions.empty()
                           ? trucks[static_cast<std::size_t>(i)].free_at
                           : plans[static_cast<std::size_t>(i)].actions.back().time;
            if (r < 0 || t < best_t) {
                r = i;
                best_t = t;
            }
        }
        if (r < 0) break;

        TruckState start = plan_end_state(r);
        int remaining = cfg.route_stops - static_cast<int>(plans[static_cast<std::size_t>(r)].actions.size());
        CandidateRoute route = search_route(net, plateaus, cfg, fmax, start, remaining, deadline);
        if (route.stops.empty()) {
            done[static_cast<std::size_t>(r)] = true;
            continue;
        }

        // collision scan: another truck already planned a later visit to a
        // station this route reaches earlier
        std::vector<int> colliding;
        int first_collision_at = -1;
        for (std::size_t k = 0; k < route.stops.size(); ++k) {
            const auto& stop = route.stops[k];
            for (int r2 = 0; r2 < R; ++r2) {
                if (r2 == r) continue;
                for (const auto& a : plans[static_cast<std::size_t>(r2)].actions) {
                    if (a.station == stop.station && a.time > stop.time) {
                        if (std::find(colliding.begin(), colliding.end(), r2) == colliding.end())
                            colliding.push_back(r2);
                        if (first_collision_at < 0) first_collision_at = static_cast<int>(k);
                    }
                }
            }
        }

        std::size_t keep = colliding.empty() ? route.stops.size() : 1;
        round_start[static_cast<std::size_t>(r)] = static_cast<int>(plans[static_cast<std::size_t>(r)].actions.size());
        int load = start.load;
        for (std::size_t k = 0; k < keep; ++k) {
            const auto& stop = route.stops[k];
            load -= stop.delta_fill;
            plans[static_cast<std::size_t>(r)].actions.push_back(
                {stop.station, stop.time, stop.delta_fill, load});
        }
        if (!colliding.empty()) {
            // the preserved step is locked against future repairs
            plans[static_cast<std::size_t>(r)].locked = static_cast<int>(plans[static_cast<std::size_t>(r)].actions.size());
            for (int r2 : colliding) {
                auto& victim = plans[static_cast<std::size_t>(r2)];
                int cut = std::max(victim.locked, round_start[static_cast<std::size_t>(r2)]);
                if (cut < static_cast<int>(victim.actions.size())) {
                    victim.actions.resize(static_cast<std::size_t>(cut));
                    done[static_cast<std::size_t>(r2)] = false;
                }
            }
            rebuild_overlay();
        } else {
            for (std::size_t k = 0; k < keep; ++k)
                net.overlay.apply(route.stops[k].station, route.stops[k].time, route.stops[k].delta_fill);
        }
    }
    return plans;
}

ReplanResult replan_tick(std::vector<TruckState> trucks, const Stations& stations,
                         const Geometry& geometry, const PlateauTable& plateaus,
                         const RoutingConfig& cfg, std::span<const double> fills, const EtaFn& eta,
                         Minute now) {
    ReplanResult result;
    result.plans = plan_all_trucks(trucks, stations, geometry, plateaus, cfg, fills, eta, now);

    Minute close = day_index(now) * minutes_per_day + cfg.window_close;
    int depot = pick_depot(stations, geometry, cfg);
    for (std::size_t r = 0; r < trucks.size(); ++r) {
        auto& plan = result.plans[r];
        const auto& truck = trucks[r];
        if (plan.actions.empty() && truck.station != depot && truck.free_at <= now) {
            // heading-home rule: waiting one more period must not strand the truck
            int steps = effective_journey_time_steps(geometry.euclid_km(truck.station, depot));
            if (now + cfg.impl_minutes + static_cast<Minute>(steps) * 5 > close)
                plan.actions.push_back({depot, now + static_cast<Minute>(steps) * 5, 0, truck.load});
        }
        for (const auto& a : plan.actions)
            if (a.time < now + cfg.impl_minutes) result.committed.emplace_back(plan.truck, a);
    }
    std::sort(result.committed.begin(), result.committed.end(),
              [](const auto& a, const auto& b) {
                  if (a.second.time != b.second.time) return a.second.time < b.second.time;
                  return a.first < b.first;
              });
    return result;
}

}  // namespace pbs
