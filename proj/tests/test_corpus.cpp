#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pbs/corpus.hpp"

using namespace pbs;

namespace {

std::string temp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "pbs_corpus_test";
    std::filesystem::create_directories(dir);
    return dir.string();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

Stations sample_stations() {
    return Stations({{1, "River St Clerkenwell", 51.5291, -0.1099, 18},
                     {47, "Loop", 51.52, -0.11, 20},
                     {234, "B", 51.51, -0.12, 20},
                     {203, "C", 51.50, -0.10, 20}});
}

}  // namespace

TEST_CASE("timestamp parsing and formatting") {
    Minute t = parse_timestamp("2010-07-30 06:00:00");
    CHECK(minute_of_day(t) == 360);
    CHECK(format_timestamp(t) == "2010-07-30 06:00:00");
    CHECK(parse_timestamp("2010-07-30 06:22:00") - t == 22);
    CHECK_THROWS_AS(parse_timestamp("not a time"), data_error);
    // 2010-07-30 was a Friday
    CHECK(day_type_of(t) == DayType::weekday);
    CHECK(day_type_of(t + 1440) == DayType::weekend);
}

TEST_CASE("load_rides parses the documented row format") {
    auto dir = temp_dir();
    auto path = dir + "/rides.csv";
    write_file(path,
               "3340, 2010-07-30 06:00:00, 47, 2010-07-30 06:22:00, 47\n"
               "3870, 2010-07-30 06:00:00, 234, 2010-07-30 06:14:00, 203\n");
    auto stations = sample_stations();
    auto rides = load_rides(path, stations);
    REQUIRE(rides.size() == 2);
    CHECK(rides[0].bike_id == 3340);
    CHECK(rides[0].start_station == 47);
    CHECK(rides[0].end_station == 47);
    CHECK(rides[0].end_time - rides[0].start_time == 22);
}

TEST_CASE("load_rides edge cases") {
    auto dir = temp_dir();
    auto stations = sample_stations();

    SUBCASE("empty file gives empty list") {
        auto path = dir + "/empty.csv";
        write_file(path, "");
        CHECK(load_rides(path, stations).empty());
    }
    SUBCASE("end before start is rejected with the line number") {
        auto path = dir + "/bad_order.csv";
        write_file(path, "1, 2010-07-30 07:00:00, 47, 2010-07-30 06:00:00, 47\n");
        CHECK_THROWS_WITH_AS(load_rides(path, stations),
                             doctest::Contains("bad_order.csv:1"), data_error);
    }
    SUBCASE("unknown station id is a hard error") {
        auto path = dir + "/bad_station.csv";
        write_file(path, "1, 2010-07-30 07:00:00, 999, 2010-07-30 08:00:00, 47\n");
        CHECK_THROWS_AS(load_rides(path, stations), data_error);
    }
    SUBCASE("unparsable timestamp is a hard error") {
        auto path = dir + "/bad_time.csv";
        write_file(path, "1, garbled, 47, 2010-07-30 08:00:00, 47\n");
        CHECK_THROWS_AS(load_rides(path, stations), data_error);
    }
}

TEST_CASE("load_stations validates the table") {
    auto dir = temp_dir();
    SUBCASE("documented sample row") {
        auto path = dir + "/stations.csv";
        write_file(path, "1, River St Clerkenwell, 51.5291, -0.1099, 18\n");
        auto rows = load_stations(path);
        REQUIRE(rows.size() == 1);
        CHECK(rows[0].id == 1);
        CHECK(rows[0].name == "River St Clerkenwell");
        CHECK(rows[0].size == 18);
    }
    SUBCASE("quoted names keep their commas") {
        auto path = dir + "/stations_q.csv";
        write_file(path, "1, \"River St, Clerkenwell\", 51.5291, -0.1099, 18\n");
        auto rows = load_stations(path);
        REQUIRE(rows.size() == 1);
        CHECK(rows[0].name == "River St, Clerkenwell");
    }
    SUBCASE("duplicate ids rejected") {
        auto path = dir + "/dup.csv";
        write_file(path, "1, A, 51.5, -0.1, 18\n1, B, 51.6, -0.2, 20\n");
        CHECK_THROWS_WITH_AS(load_stations(path), doctest::Contains("duplicate"), data_error);
    }
    SUBCASE("non-positive size rejected") {
        auto path = dir + "/zero.csv";
        write_file(path, "1, A, 51.5, -0.1, 0\n");
        CHECK_THROWS_AS(load_stations(path), data_error);
    }
}

TEST_CASE("snapshot json round trip") {
    auto dir = temp_dir();
    auto stations = sample_stations();
    Snapshot snap;
    snap.time = 1234;
    snap.fill = {{1, 5}, {47, 0}, {234, 20}, {203, 7}};
    auto path = dir + "/snap.json";
    save_snapshot(path, snap);
    auto loaded = load_snapshot(path, stations);
    CHECK(loaded.time == snap.time);
    CHECK(loaded.fill == snap.fill);

    SUBCASE("overfull snapshot rejected") {
        write_file(path, "{\"time\": 0, \"fill\": {\"1\": 19}}");
        CHECK_THROWS_AS(load_snapshot(path, stations), data_error);
    }
}

TEST_CASE("synthetic generator is deterministic") {
    SyntheticSpec spec;
    spec.station_count = 12;
    spec.fleet_size = 100;
    spec.weekday_count = 5;
    spec.weekend_count = 2;
    spec.seed = 7;
    auto a = generate_synthetic(spec);
    auto b = generate_synthetic(spec);

    auto dir = temp_dir();
    save_rides(dir + "/a.csv", a.rides);
    save_rides(dir + "/b.csv", b.rides);
    save_stations(dir + "/as.csv", a.stations.rows);
    save_stations(dir + "/bs.csv", b.stations.rows);
    save_snapshot(dir + "/a.json", a.snapshot);
    save_snapshot(dir + "/b.json", b.snapshot);
    CHECK(slurp(dir + "/a.csv") == slurp(dir + "/b.csv"));
    CHECK(slurp(dir + "/as.csv") == slurp(dir + "/bs.csv"));
    CHECK(slurp(dir + "/a.json") == slurp(dir + "/b.json"));
}

TEST_CASE("synthetic corpus invariants") {
    SyntheticSpec spec;
    spec.station_count = 20;
    spec.fleet_size = 180;
    spec.weekday_count = 5;
    spec.weekend_count = 2;
    spec.seed = 3;
    auto corpus = generate_synthetic(spec);

    // snapshot totals the fleet and respects capacities
    std::int64_t total = 0;
    for (auto& [id, count] : corpus.snapshot.fill) {
        int idx = corpus.stations.index(id);
        CHECK(count >= 0);
        CHECK(count <= corpus.stations.capacity(idx));
        total += count;
    }
    CHECK(total == spec.fleet_size);

    // rides reference existing stations and start within 06:00-24:00
    for (const auto& r : corpus.rides) {
        CHECK(corpus.stations.has_id(r.start_station));
        CHECK(corpus.stations.has_id(r.end_station));
        CHECK(r.end_time >= r.start_time);
        int mod = minute_of_day(r.start_time);
        CHECK(mod >= 6 * 60);
        CHECK(mod < 24 * 60);
    }

    // write-then-load round trip is identity
    auto dir = temp_dir();
    save_stations(dir + "/rt_stations.csv", corpus.stations.rows);
    save_rides(dir + "/rt_rides.csv", corpus.rides);
    auto st2 = Stations(load_stations(dir + "/rt_stations.csv"));
    auto rides2 = load_rides(dir + "/rt_rides.csv", st2);
    REQUIRE(rides2.size() == corpus.rides.size());
    for (std::size_t i = 0; i < rides2.size(); ++i) {
        CHECK(rides2[i].bike_id == corpus.rides[i].bike_id);
        CHECK(rides2[i].start_time == corpus.rides[i].start_time);
        CHECK(rides2[i].end_time == corpus.rides[i].end_time);
        CHECK(rides2[i].start_station == corpus.rides[i].start_station);
        CHECK(rides2[i].end_station == corpus.rides[i].end_station);
    }
}

namespace {

// hourly departure histogram oracle used for the commuter-peak checks
std::array<double, 24> hourly_histogram(const std::vector<RideRecord>& rides, DayType type) {
    std::array<double, 24> h{};
    int days = 0;
    std::int64_t seen_day = -1;
    for (const auto& r : rides) {
        if (day_type_of(r.start_time) != type) continue;
        if (day_index(r.start_time) != seen_day) {
            seen_day = day_index(r.start_time);
            ++days;
        }
        h[static_cast<std::size_t>(minute_of_day(r.start_time) / 60)] += 1.0;
    }
    if (days > 0)
        for (auto& v : h) v /= days;
    return h;
}

}  // namespace

TEST_CASE("weekday histogram has morning and evening commuter peaks") {
    SyntheticSpec spec;
    spec.station_count = 50;
    spec.fleet_size = 500;
    spec.weekday_count = 10;
    spec.weekend_count = 10;
    spec.seed = 11;
    auto corpus = generate_synthetic(spec);
    auto h = hourly_histogram(corpus.rides, DayType::weekday);

    double morning = 0.0, evening = 0.0, midday = 0.0;
    for (int hh = 7; hh < 10; ++hh) morning = std::max(morning, h[static_cast<std::size_t>(hh)]);
    for (int hh = 16; hh < 19; ++hh) evening = std::max(evening, h[static_cast<std::size_t>(hh)]);
    for (int hh = 11; hh < 16; ++hh) midday += h[static_cast<std::size_t>(hh)] / 5.0;
    CHECK(morning > 1.3 * midday);
    CHECK(evening > 1.3 * midday);

    // weekends stay flat
    auto hw = hourly_histogram(corpus.rides, DayType::weekend);
    double we_morning = 0.0, we_midday = 0.0;
    for (int hh = 7; hh < 10; ++hh) we_morning = std::max(we_morning, hw[static_cast<std::size_t>(hh)]);
    for (int hh = 11; hh < 16; ++hh) we_midday += hw[static_cast<std::size_t>(hh)] / 5.0;
    CHECK(we_morning < 1.3 * we_midday);
}

TEST_CASE("zero peak heights make weekday and weekend profiles alike") {
    SyntheticSpec spec;
    spec.station_count = 30;
    spec.fleet_size = 300;
    spec.weekday_count = 10;
    spec.weekend_count = 4;
    spec.peaks.morning_height = 0.0;
    spec.peaks.evening_height = 0.0;
    spec.seed = 5;
    auto corpus = generate_synthetic(spec);
    auto hd = hourly_histogram(corpus.rides, DayType::weekday);
    auto he = hourly_histogram(corpus.rides, DayType::weekend);
    double total_d = 0.0, total_e = 0.0;
    for (int hh = 6; hh < 24; ++hh) {
        total_d += hd[static_cast<std::size_t>(hh)];
        total_e += he[static_cast<std::size_t>(hh)];
    }
    // weekend base is 0.85x the weekday base; compare shape after normalizing
    for (int hh = 6; hh < 24; ++hh) {
        double pd = hd[static_cast<std::size_t>(hh)] / total_d;
        double pe = he[static_cast<std::size_t>(hh)] / total_e;
        CHECK(std::abs(pd - pe) < 0.02);
    }
}

TEST_CASE("infeasible synthetic spec rejected") {
    SyntheticSpec spec;
    spec.station_count = 3;
    spec.fleet_size = 100000;
    CHECK_THROWS_AS(generate_synthetic(spec), data_error);
}
