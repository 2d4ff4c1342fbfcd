#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pbs/demand.hpp"
#include "pbs/rng.hpp"

using namespace pbs;

namespace {

Stations grid_stations(int n) {
    std::vector<StationRecord> rows;
    for (int i = 0; i < n; ++i) {
        StationRecord s;
        s.id = i + 1;
        s.name = "S" + std::to_string(i + 1);
        s.lat = 51.5 + 0.004 * (i % 5) + 0.0013 * ((i * 3) % 7);
        s.lon = -0.1 + 0.004 * (i / 5) + 0.0011 * ((i * 5) % 3);
        s.size = 20;
        rows.push_back(s);
    }
    return Stations(rows);
}

// Monday 2024-01-01
const std::int64_t monday = days_from_civil(2024, 1, 1);

RideRecord ride(int from, int to, std::int64_t day, int start_mod, int duration) {
    RideRecord r;
    r.bike_id = 1;
    r.start_station = from;
    r.end_station = to;
    r.start_time = day * minutes_per_day + start_mod;
    r.end_time = r.start_time + duration;
    return r;
}

}  // namespace

TEST_CASE("slice arithmetic: 06:00 lands in slice 18") {
    CHECK(slice_of(monday * minutes_per_day + 6 * 60) == 18);
    CHECK(slice_of(monday * minutes_per_day) == 0);
    CHECK(slice_of(monday * minutes_per_day + 23 * 60 + 59) == 71);
}

TEST_CASE("fit_rates divides by observed minutes") {
    auto stations = grid_stations(4);
    // 10 rides 1->2 departing in slice 18 (06:00..06:19), spread over 5 weekdays
    std::vector<RideRecord> rides;
    for (int d = 0; d < 5; ++d)
        for (int k = 0; k < 2; ++k) rides.push_back(ride(1, 2, monday + d, 6 * 60 + 5 * k, 15));
    auto model = fit_rates(rides, stations, {{monday, monday + 4}});
    // M = 10 / (5 days * 20 min) = 0.1 per minute
    CHECK(model.departure_rate(DayType::weekday, 18, 0, 1) == doctest::Approx(0.1));
    CHECK(model.observed_minutes[0][18] == 100);
    CHECK(model.observed_minutes[1][18] == 0);
    // arrivals of those rides land in slice 18 too (06:15..06:34 crosses into 19)
    double arr18 = model.arrival_rate(DayType::weekday, 18, 0, 1);
    double arr19 = model.arrival_rate(DayType::weekday, 19, 0, 1);
    CHECK(arr18 * 100 + arr19 * 100 == doctest::Approx(10.0));
}

TEST_CASE("no rides gives all-zero tensors") {
    auto stations = grid_stations(3);
    auto model = fit_rates({}, stations);
    for (int w = 0; w < 2; ++w)
        for (double v : model.departures[w]) CHECK(v == 0.0);
    auto row = flow_summary(model, monday * minutes_per_day + 600);
    for (int s = 0; s < 3; ++s) {
        CHECK(row.mu[static_cast<std::size_t>(s)] == 0.0);
        CHECK(row.lambda[static_cast<std::size_t>(s)] == 0.0);
        CHECK(row.eta[static_cast<std::size_t>(s)] == 0.0);
    }
}

TEST_CASE("flow summary equals brute-force double loop") {
    auto stations = grid_stations(6);
    Rng rng(99);
    std::vector<RideRecord> rides;
    for (int i = 0; i < 400; ++i) {
        int from = 1 + static_cast<int>(rng.below(6));
        int to = 1 + static_cast<int>(rng.below(6));
        int day = static_cast<int>(rng.below(7));
        int mod = 6 * 60 + static_cast<int>(rng.below(17 * 60));
        rides.push_back(ride(from, to, monday + day, mod, 5 + static_cast<int>(rng.below(40))));
    }
    auto model = fit_rates(rides, stations, {{monday, monday + 6}});

    Minute t = (monday + 1) * minutes_per_day + 8 * 60 + 7;
    auto row = flow_summary(model, t);
    int k = slice_of(t);
    for (int s = 0; s < 6; ++s) {
        double mu = 0.0, lambda = 0.0;
        for (int j = 0; j < 6; ++j) mu += model.departure_rate(DayType::weekday, k, s, j);
        for (int i = 0; i < 6; ++i) lambda += model.arrival_rate(DayType::weekday, k, i, s);
        CHECK(row.mu[static_cast<std::size_t>(s)] == doctest::Approx(mu).epsilon(1e-12));
        CHECK(row.lambda[static_cast<std::size_t>(s)] == doctest::Approx(lambda).epsilon(1e-12));
        CHECK(row.eta[static_cast<std::size_t>(s)] == row.lambda[static_cast<std::size_t>(s)] - row.mu[static_cast<std::size_t>(s)]);
    }

    // total departures equal total arrivals over the whole corpus
    double dep_total = 0.0, arr_total = 0.0;
    for (int w = 0; w < 2; ++w)
        for (int kk = 0; kk < slices_per_day; ++kk) {
            double minutes = static_cast<double>(model.observed_minutes[w][kk]);
            for (int i = 0; i < 6; ++i)
                for (int j = 0; j < 6; ++j) {
                    dep_total += model.departure_rate(static_cast<DayType>(w), kk, i, j) * minutes;
                    arr_total += model.arrival_rate(static_cast<DayType>(w), kk, i, j) * minutes;
                }
        }
    CHECK(dep_total == doctest::Approx(400.0));
    CHECK(arr_total == doctest::Approx(400.0));
}

TEST_CASE("voronoi centers on the unit square") {
    std::vector<XY> pts = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    BoundingBox box{0, 0, 1, 1};
    auto centers = voronoi_centers(pts, box);
    CHECK(centers[0].x == doctest::Approx(0.25));
    CHECK(centers[0].y == doctest::Approx(0.25));
    CHECK(centers[1].x == doctest::Approx(0.75));
    CHECK(centers[1].y == doctest::Approx(0.25));
    CHECK(centers[2].x == doctest::Approx(0.75));
    CHECK(centers[2].y == doctest::Approx(0.75));
    CHECK(centers[3].x == doctest::Approx(0.25));
    CHECK(centers[3].y == doctest::Approx(0.75));
}

TEST_CASE("voronoi degenerate geometry") {
    BoundingBox box{0, 0, 1, 1};
    CHECK_THROWS_AS(voronoi_centers({{0, 0}, {1, 1}}, box), data_error);
    CHECK_THROWS_AS(voronoi_centers({{0, 0}, {0.5, 0.5}, {1, 1}, {0.25, 0.25}}, box), data_error);
}

TEST_CASE("random instance: every centroid lies in its own cell") {
    Rng rng(1234);
    std::vector<XY> pts;
    for (int i = 0; i < 20; ++i) pts.push_back({rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0)});
    BoundingBox box{-1, -1, 11, 11};
    auto centers = voronoi_centers(pts, box);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        // rebuild the clipped cell the same way and check containment
        Polygon cell = {{box.min_x, box.min_y}, {box.max_x, box.min_y}, {box.max_x, box.max_y}, {box.min_x, box.max_y}};
        for (std::size_t j = 0; j < pts.size(); ++j) {
            if (i == j) continue;
            double a = 2.0 * (pts[j].x - pts[i].x);
            double b = 2.0 * (pts[j].y - pts[i].y);
            double c = pts[j].x * pts[j].x + pts[j].y * pts[j].y - pts[i].x * pts[i].x - pts[i].y * pts[i].y;
            cell = clip_halfplane(cell, a, b, c);
        }
        REQUIRE(!cell.empty());
        CHECK(point_in_convex_polygon(cell, centers[i], 1e-7));
    }
}

TEST_CASE("effective distance formula and clamping") {
    CHECK(effective_distance_raw(1.0, 0.2, 0.1) == doctest::Approx(1.2));
    CHECK(effective_distance_raw(0.0, 0.3, 0.3) == doctest::Approx(0.0));
    // raw negative: origin walk saving dominates
    double raw = effective_distance_raw(0.5, 0.1, 0.4);
    CHECK(raw == doctest::Approx(-0.1));
    CHECK(std::max(0.0, raw) == 0.0);
}

TEST_CASE("geometry neighbor sets") {
    auto stations = grid_stations(12);
    auto geo = build_geometry(stations, 5);
    CHECK(geo.neighbor_count == 5);
    for (int s = 0; s < geo.station_count; ++s) {
        CHECK(geo.effective_km(s, s) == 0.0);
        const auto& nbrs = geo.neighbors[static_cast<std::size_t>(s)];
        REQUIRE(static_cast<int>(nbrs.size()) == 5);
        for (std::size_t k = 0; k < nbrs.size(); ++k) {
            CHECK(nbrs[k] != s);
            if (k > 0) CHECK(geo.effective_km(s, nbrs[k - 1]) <= geo.effective_km(s, nbrs[k]));
            // reverse set contains s
            const auto& rev = geo.reverse_neighbors[static_cast<std::size_t>(nbrs[k])];
            CHECK(std::find(rev.begin(), rev.end(), s) != rev.end());
        }
        // the neighbors really are the closest by effective distance
        double worst = geo.effective_km(s, nbrs.back());
        for (int j = 0; j < geo.station_count; ++j) {
            if (j == s || std::find(nbrs.begin(), nbrs.end(), j) != nbrs.end()) continue;
            CHECK(geo.effective_km(s, j) >= worst);
        }
    }
    // euclid symmetry, zero diagonal
    for (int i = 0; i < geo.station_count; ++i) {
        CHECK(geo.euclid_km(i, i) == 0.0);
        for (int j = 0; j < geo.station_count; ++j)
            CHECK(geo.euclid_km(i, j) == doctest::Approx(geo.euclid_km(j, i)));
    }
}

TEST_CASE("travel times: means, loops and the fallback") {
    auto stations = grid_stations(4);
    auto geo = build_geometry(stations, 3);
    std::vector<RideRecord> rides;
    rides.push_back(ride(1, 2, monday, 7 * 60, 10));
    rides.push_back(ride(1, 2, monday, 8 * 60, 20));
    rides.push_back(ride(3, 3, monday, 9 * 60, 22));  // loop ride as in the sample table
    auto tt = travel_times(rides, stations, geo);
    CHECK(tt.at(0, 1) == 15);
    CHECK(tt.at(2, 2) == 22);
    // unobserved pairs use the median-speed fallback, at least a minute
    int i = stations.index(1), j = stations.index(4);
    double expect = geo.euclid_km(i, j) / tt.median_speed_kmh * 60.0;
    CHECK(tt.at(i, j) == std::max(1, static_cast<int>(std::llround(expect))));

    SUBCASE("documented fallback arithmetic: 2 km at 12 km/h is 10 minutes") {
        CHECK(std::llround(2.0 / 12.0 * 60.0) == 10);
    }
}
