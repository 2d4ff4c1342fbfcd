#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "pbs/common.hpp"

namespace pbs {

struct RideRecord {
    std::int64_t bike_id = 0;
    Minute start_time = 0;
    int start_station = 0;  // external station id
    Minute end_time = 0;
    int end_station = 0;
};

struct StationRecord {
    int id = 0;
    std::string name;
    double lat = 0.0;
    double lon = 0.0;
    int size = 0;  // capacity in docks
};

struct Snapshot {
    Minute time = 0;
    std::map<int, int> fill;  // station id -> docked bikes; ordered for stable output
};

// Station table with a dense index (0..S-1) used by every downstream module.
struct Stations {
    std::vector<StationRecord> rows;
    std::unordered_map<int, int> index_of_id;

    explicit Stations(std::vector<StationRecord> r = {});
    int size() const { return static_cast<int>(rows.size()); }
    int index(int id) const;         // throws data_error on unknown id
    bool has_id(int id) const { return index_of_id.count(id) != 0; }
    int capacity(int idx) const { return rows[static_cast<std::size_t>(idx)].size; }
    std::int64_t total_capacity() const;
};

struct PeakProfile {
    double morning_height = 2.5;   // multiplier on the base rate at the peak
    double morning_width = 75.0;   // gaussian sigma, minutes
    double evening_height = 2.5;
    double evening_width = 90.0;
};

struct SyntheticSpec {
    int station_count = 50;
    int fleet_size = 500;
    int weekday_count = 10;  // minimum number of days of each type
    int weekend_count = 4;
    PeakProfile peaks;
    double base_rides_per_station_per_day = 10.0;
    std::uint64_t seed = 1;
};

struct Corpus {
    Stations stations;
    std::vector<RideRecord> rides;
    Snapshot snapshot;
};

std::vector<StationRecord> load_stations(const std::string& path);
std::vector<RideRecord> load_rides(const std::string& path, const Stations& stations);
Snapshot load_snapshot(const std::string& path, const Stations& stations);

void save_stations(const std::string& path, const std::vector<StationRecord>& stations);
void save_rides(const std::string& path, const std::vector<RideRecord>& rides);
void save_snapshot(const std::string& path, const Snapshot& snapshot);

// Synthesizes a corpus with commuter structure: weekday mornings flow toward the
// city center and evenings flow back out; weekends are flat. Rides start within
// 06:00-24:00. Whole civil weeks are generated starting on a Monday so that both
// day-type quotas are covered and date-derived day typing is consistent.
Corpus generate_synthetic(const SyntheticSpec& spec);

}  // namespace pbs
