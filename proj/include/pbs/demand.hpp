#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "pbs/corpus.hpp"
#include "pbs/geometry.hpp"

namespace pbs {

// Per-minute OD departure (M) and arrival (Lambda) rates, indexed by day type
// and 20-minute timeslice. Also caches per-station sums mu/lambda/eta per slice.
struct RateModel {
    int station_count = 0;
    // [w] -> flattened [k][i][j]
    std::array<std::vector<double>, 2> departures;
    std::array<std::vector<double>, 2> arrivals;
    // observed minutes per (w, k): the denominator of the rate estimate
    std::array<std::array<std::int64_t, slices_per_day>, 2> observed_minutes{};
    // [w] -> flattened [k][s]
    std::array<std::vector<double>, 2> mu_slice, lambda_slice, eta_slice;

    std::size_t od_index(int k, int i, int j) const {
        return (static_cast<std::size_t>(k) * station_count + i) * station_count + j;
    }
    double departure_rate(DayType w, int k, int i, int j) const {
        return departures[static_cast<int>(w)][od_index(k, i, j)];
    }
    double arrival_rate(DayType w, int k, int i, int j) const {
        return arrivals[static_cast<int>(w)][od_index(k, i, j)];
    }
    double mu(DayType w, int k, int s) const {
        return mu_slice[static_cast<int>(w)][static_cast<std::size_t>(k) * station_count + s];
    }
    double lambda(DayType w, int k, int s) const {
        return lambda_slice[static_cast<int>(w)][static_cast<std::size_t>(k) * station_count + s];
    }
    double eta(DayType w, int k, int s) const {
        return eta_slice[static_cast<int>(w)][static_cast<std::size_t>(k) * station_count + s];
    }

    void rebuild_station_sums();
};

// One row of the flow summary: expected per-minute departures, arrivals and net
// change for every station at a given minute.
struct FlowRow {
    std::vector<double> mu, lambda, eta;
};

// Estimates M and Lambda by binning departures (by start time) and arrivals (by
// end time) into (day-type, slice) cells, divided by the number of observed
// minutes per cell. The observation span defaults to [first ride day, last ride
// day] and every day in the span counts as observed. Cells with no observed
// minutes get zero rates and a warning.
RateModel fit_rates(const std::vector<RideRecord>& rides, const Stations& stations,
                    std::optional<std::pair<std::int64_t, std::int64_t>> day_span = std::nullopt,
                    std::vector<std::string>* warnings = nullptr);

FlowRow flow_summary(const RateModel& model, Minute t);

struct TravelTimes {
    int station_count = 0;
    std::vector<int> minutes;      // S*S, >= 1
    double median_speed_kmh = 0.0;

    int at(int i, int j) const { return minutes[static_cast<std::size_t>(i) * station_count + j]; }
};

// Mean historical ride duration per OD pair, rounded to the nearest minute and
// at least 1. Unobserved pairs fall back to the Euclidean distance at the
// corpus median ride speed (12 km/h when the corpus has no usable rides).
TravelTimes travel_times(const std::vector<RideRecord>& rides, const Stations& stations,
                         const Geometry& geometry);

}  // namespace pbs
