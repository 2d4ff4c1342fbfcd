#include "pbs/demand.hpp"

#include <algorithm>
#include <cmath>

namespace pbs {

void RateModel::rebuild_station_sums() {
    for (int w = 0; w < 2; ++w) {
        mu_slice[w].assign(static_cast<std::size_t>(slices_per_day) * station_count, 0.0);
        lambda_slice[w].assign(static_cast<std::size_t>(slices_per_day) * station_count, 0.0);
        eta_slice[w].assign(static_cast<std::size_t>(slices_per_day) * station_count, 0.0);
        for (int k = 0; k < slices_per_day; ++k) {
            for (int i = 0; i < station_count; ++i) {
                double m = 0.0;
                for (int j = 0; j < station_count; ++j) m += departures[w][od_index(k, i, j)];
                mu_slice[w][static_cast<std::size_t>(k) * station_count + i] = m;
            }
            for (int j = 0; j < station_count; ++j) {
                double l = 0.0;
                for (int i = 0; i < station_count; ++i) l += arrivals[w][od_index(k, i, j)];
                lambda_slice[w][static_cast<std::size_t>(k) * station_count + j] = l;
            }
            for (int s = 0; s < station_count; ++s) {
                std::size_t idx = static_cast<std::size_t>(k) * station_count + s;
                eta_slice[w][idx] = lambda_slice[w][idx] - mu_slice[w][idx];
            }
        }
    }
}

RateModel fit_rates(const std::vector<RideRecord>& rides, const Stations& stations,
                    std::optional<std::pair<std::int64_t, std::int64_t>> day_span,
                    std::vector<std::string>* warnings) {
    RateModel model;
    const int n = stations.size();
    model.station_count = n;
    for (int w = 0; w < 2; ++w) {
        model.departures[w].assign(static_cast<std::size_t>(slices_per_day) * n * n, 0.0);
        model.arrivals[w].assign(static_cast<std::size_t>(slices_per_day) * n * n, 0.0);
    }

    if (!day_span && !rides.empty()) {
        std::int64_t lo = day_index(rides.front().start_time);
        std::int64_t hi = lo;
        for (const auto& r : rides) {
            lo = std::min(lo, day_index(r.start_time));
            hi = std::max(hi, day_index(r.start_time));
        }
        day_span = {lo, hi};
    }

    if (day_span) {
        for (std::int64_t d = day_span->first; d <= day_span->second; ++d) {
            int w = static_cast<int>(day_type_of_day(d));
            for (int k = 0; k < slices_per_day; ++k) model.observed_minutes[w][k] += slice_minutes;
        }
    }

    for (const auto& r : rides) {
        int i = stations.index(r.start_station);
        int j = stations.index(r.end_station);
        int wd = static_cast<int>(day_type_of(r.start_time));
        model.departures[wd][model.od_index(slice_of(r.start_time), i, j)] += 1.0;
        int wa = static_cast<int>(day_type_of(r.end_time));
        model.arrivals[wa][model.od_index(slice_of(r.end_time), i, j)] += 1.0;
    }

    for (int w = 0; w < 2; ++w) {
        for (int k = 0; k < slices_per_day; ++k) {
            std::int64_t minutes = model.observed_minutes[w][k];
            std::size_t base = static_cast<std::size_t>(k) * n * n;
            if (minutes == 0) {
                bool any = false;
                for (std::size_t c = 0; c < static_cast<std::size_t>(n) * n; ++c)
                    if (model.departures[w][base + c] != 0.0 || model.arrivals[w][base + c] != 0.0) any = true;
                if (any) {
                    for (std::size_t c = 0; c < static_cast<std::size_t>(n) * n; ++c) {
                        model.departures[w][base + c] = 0.0;
                        model.arrivals[w][base + c] = 0.0;
                    }
                    if (warnings)
                        warnings->push_back("no observed history for day-type " +
                                            std::string(day_type_name(static_cast<DayType>(w))) + " slice " +
                                            std::to_string(k) + "; rates set to 0");
                }
                continue;
            }
            double inv = 1.0 / static_cast<double>(minutes);
            for (std::size_t c = 0; c < static_cast<std::size_t>(n) * n; ++c) {
                model.departures[w][base + c] *= inv;
                model.arrivals[w][base + c] *= inv;
            }
        }
    }

    model.rebuild_station_sums();
    return model;
}

FlowRow flow_summary(const RateModel& model, Minute t) {
    FlowRow row;
    int w = static_cast<int>(day_type_of(t));
    int k = slice_of(t);
    const int n = model.station_count;
    row.mu.resize(static_cast<std::size_t>(n));
    row.lambda.resize(static_cast<std::size_t>(n));
    row.eta.resize(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) {
        row.mu[static_cast<std::size_t>(s)] = model.mu(static_cast<DayType>(w), k, s);
        row.lambda[static_cast<std::size_t>(s)] = model.lambda(static_cast<DayType>(w), k, s);
        row.eta[static_cast<std::size_t>(s)] = row.lambda[static_cast<std::size_t>(s)] - row.mu[static_cast<std::size_t>(s)];
    }
    return row;
}

TravelTimes travel_times(const std::vector<RideRecord>& rides, const Stations& stations,
                         const Geometry& geometry) {
    const int n = stations.size();
    TravelTimes tt;
    tt.station_count = n;
    tt.minutes.assign(static_cast<std::size_t>(n) * n, 0);

    std::vector<std::int64_t> total(static_cast<std::size_t>(n) * n, 0);
    std::vector<std::int64_t> count(static_cast<std::size_t>(n) * n, 0);
    std::vector<double> speeds;
    for (const auto& r : rides) {
        int i = stations.index(r.start_station);
        int j = stations.index(r.end_station);
        std::int64_t dur = r.end_time - r.start_time;
        total[static_cast<std::size_t>(i) * n + j] += dur;
        count[static_cast<std::size_t>(i) * n + j] += 1;
        if (i != j && dur > 0) speeds.push_back(geometry.euclid_km(i, j) / (static_cast<double>(dur) / 60.0));
    }

    if (speeds.empty()) {
        tt.median_speed_kmh = 12.0;
    } else {
        std::nth_element(speeds.begin(), speeds.begin() + speeds.size() / 2, speeds.end());
        tt.median_speed_kmh = speeds[speeds.size() / 2];
        if (tt.median_speed_kmh <= 0.0) tt.median_speed_kmh = 12.0;
    }

    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            std::size_t idx = static_cast<std::size_t>(i) * n + j;
            int m;
            if (count[idx] > 0) {
                m = static_cast<int>(std::llround(static_cast<double>(total[idx]) / static_cast<double>(count[idx])));
            } else {
                m = static_cast<int>(std::llround(geometry.euclid_km(i, j) / tt.median_speed_kmh * 60.0));
            }
            tt.minutes[idx] = std::max(1, m);
        }
    }
    return tt;
}

}  // namespace pbs
