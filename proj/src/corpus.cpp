#include "pbs/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pbs/csv.hpp"
#include "pbs/rng.hpp"

namespace pbs {

std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

Minute parse_timestamp(const std::string& s) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
    int n = std::sscanf(s.c_str(), "%d-%d-%d %d:%d:%d", &y, &mo, &d, &h, &mi, &sec);
    if (n < 5 || mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 || mi > 59)
        throw data_error("unparsable timestamp: '" + s + "'");
    return days_from_civil(y, mo, d) * minutes_per_day + h * 60 + mi;
}

std::string format_timestamp(Minute t) {
    int y, m, d;
    civil_from_days(day_index(t), y, m, d);
    int mod = minute_of_day(t);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d %02d:%02d:00", y, m, d, mod / 60, mod % 60);
    return buf;
}

Stations::Stations(std::vector<StationRecord> r) : rows(std::move(r)) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size < 1)
            throw data_error("station " + std::to_string(rows[i].id) + ": size must be >= 1");
        auto [it, inserted] = index_of_id.emplace(rows[i].id, static_cast<int>(i));
        if (!inserted)
            throw data_error("duplicate station id " + std::to_string(rows[i].id));
    }
}

int Stations::index(int id) const {
    auto it = index_of_id.find(id);
    if (it == index_of_id.end())
        throw data_error("unknown station id " + std::to_string(id));
    return it->second;
}

std::int64_t Stations::total_capacity() const {
    std::int64_t sum = 0;
    for (const auto& s : rows) sum += s.size;
    return sum;
}

namespace {

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open " + path);
    return in;
}

bool looks_like_header(const std::vector<std::string>& fields) {
    std::int64_t v;
    return !fields.empty() && !parse_int(fields[0], v);
}

}  // namespace

std::vector<StationRecord> load_stations(const std::string& path) {
    auto in = open_input(path);
    std::vector<StationRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = split_csv(line);
        if (lineno == 1 && looks_like_header(f)) continue;
        if (f.size() != 5)
            throw data_error(path + ":" + std::to_string(lineno) + ": expected 5 fields, got " +
                             std::to_string(f.size()));
        StationRecord s;
        std::int64_t id, size;
        if (!parse_int(f[0], id) || !parse_double(f[2], s.lat) || !parse_double(f[3], s.lon) ||
            !parse_int(f[4], size))
            throw data_error(path + ":" + std::to_string(lineno) + ": malformed station row");
        s.id = static_cast<int>(id);
        s.name = f[1];
        s.size = static_cast<int>(size);
        if (s.size < 1)
            throw data_error(path + ":" + std::to_string(lineno) + ": station size must be >= 1");
        out.push_back(std::move(s));
    }
    // surfaces duplicate ids early, with the same message the Stations ctor uses
    Stations check(out);
    return out;
}

std::vector<RideRecord> load_rides(const std::string& path, const Stations& stations) {
    auto in = open_input(path);
    std::vector<RideRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = split_csv(line);
        if (lineno == 1 && looks_like_header(f)) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        if (f.size() != 5) throw data_error(where + ": expected 5 fields, got " + std::to_string(f.size()));
        RideRecord r;
        std::int64_t bike, s1, s2;
        if (!parse_int(f[0], bike) || !parse_int(f[2], s1) || !parse_int(f[4], s2))
            throw data_error(where + ": malformed ride row");
        try {
            r.start_time = parse_timestamp(f[1]);
            r.end_time = parse_timestamp(f[3]);
        } catch (const data_error& e) {
            throw data_error(where + ": " + e.what());
        }
        r.bike_id = bike;
        r.start_station = static_cast<int>(s1);
        r.end_station = static_cast<int>(s2);
        if (!stations.has_id(r.start_station) || !stations.has_id(r.end_station))
            throw data_error(where + ": ride references unknown station");
        if (r.end_time < r.start_time)
            throw data_error(where + ": ride ends before it starts");
        out.push_back(r);
    }
    return out;
}

Snapshot load_snapshot(const std::string& path, const Stations& stations) {
    auto in = open_input(path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw data_error(path + ": invalid snapshot JSON: " + e.what());
    }
    Snapshot snap;
    if (!j.contains("time") || !j.contains("fill"))
        throw data_error(path + ": snapshot must contain 'time' and 'fill'");
    snap.time = j.at("time").get<Minute>();
    for (auto it = j.at("fill").begin(); it != j.at("fill").end(); ++it) {
        std::int64_t id;
        if (!parse_int(it.key(), id)) throw data_error(path + ": bad station key '" + it.key() + "'");
        int count = it.value().get<int>();
        int idx = stations.index(static_cast<int>(id));
        if (count < 0 || count > stations.capacity(idx))
            throw data_error(path + ": fill out of range for station " + it.key());
        snap.fill[static_cast<int>(id)] = count;
    }
    return snap;
}

void save_stations(const std::string& path, const std::vector<StationRecord>& stations) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path);
    out << "id,name,lat,lon,size\n";
    for (const auto& s : stations) {
        std::string name = s.name;
        bool quote = name.find(',') != std::string::npos || name.find('"') != std::string::npos;
        if (quote) {
            std::string q = "\"";
            for (char c : name) {
                if (c == '"') q += '"';
                q += c;
            }
            q += '"';
            name = q;
        }
        out << s.id << ',' << name << ',' << fmt_general(s.lat) << ',' << fmt_general(s.lon) << ','
            << s.size << '\n';
    }
}

void save_rides(const std::string& path, const std::vector<RideRecord>& rides) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path);
    out << "bike_id,start_time,start_station,end_time,end_station\n";
    for (const auto& r : rides)
        out << r.bike_id << ',' << format_timestamp(r.start_time) << ',' << r.start_station << ','
            << format_timestamp(r.end_time) << ',' << r.end_station << '\n';
}

void save_snapshot(const std::string& path, const Snapshot& snapshot) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path);
    out << "{\"time\": " << snapshot.time << ", \"fill\": {";
    bool first = true;
    for (const auto& [id, count] : snapshot.fill) {
        if (!first) out << ", ";
        first = false;
        out << '"' << id << "\": " << count;
    }
    out << "}}\n";
}

namespace {

struct SyntheticCity {
    std::vector<StationRecord> stations;
    std::vector<double> x, y;       // km, center at origin
    std::vector<double> center_r;   // distance from the center
};

SyntheticCity make_city(const SyntheticSpec& spec, Rng& rng) {
    SyntheticCity city;
    const double lat0 = 51.5074, lon0 = -0.1278;
    const double km_per_deg_lat = 111.32;
    const double km_per_deg_lon = km_per_deg_lat * std::cos(lat0 * M_PI / 180.0);
    for (int i = 0; i < spec.station_count; ++i) {
        double xx = rng.normal(0.0, 2.2);
        double yy = rng.normal(0.0, 2.2);
        StationRecord s;
        s.id = i + 1;
        s.name = "S" + std::to_string(s.id);
        s.lat = lat0 + yy / km_per_deg_lat;
        s.lon = lon0 + xx / km_per_deg_lon;
        s.size = 14 + static_cast<int>(rng.below(23));  // 14..36 docks
        city.stations.push_back(std::move(s));
        city.x.push_back(xx);
        city.y.push_back(yy);
        city.center_r.push_back(std::sqrt(xx * xx + yy * yy));
    }
    return city;
}

// OD weight tables for the three demand regimes. Gravity kernel with a
// center-of-town bias on the commute destination (morning) or origin (evening).
enum Regime { kMorning = 0, kEvening = 1, kFlat = 2 };

std::vector<double> regime_cdf(const SyntheticCity& city, Regime regime) {
    const int n = static_cast<int>(city.stations.size());
    const double sigma_gravity = 2.0;   // km
    const double sigma_center = 1.8;    // km
    std::vector<double> w(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double dx = city.x[i] - city.x[j];
            double dy = city.y[i] - city.y[j];
            double d = std::sqrt(dx * dx + dy * dy);
            double g = std::exp(-d / sigma_gravity);
            if (i == j) g *= 0.05;  // loop rides exist but are rare
            if (regime == kMorning) g *= std::exp(-city.center_r[j] / sigma_center);
            if (regime == kEvening) g *= std::exp(-city.center_r[i] / sigma_center);
            w[static_cast<std::size_t>(i) * n + j] = g;
        }
    }
    double total = 0.0;
    for (double v : w) total += v;
    double acc = 0.0;
    for (double& v : w) {
        acc += v / total;
        v = acc;
    }
    w.back() = 1.0;
    return w;
}

int sample_cdf(const std::vector<double>& cdf, Rng& rng) {
    double u = rng.uniform();
    auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    return static_cast<int>(it - cdf.begin());
}

}  // namespace

Corpus generate_synthetic(const SyntheticSpec& spec) {
    if (spec.station_count < 2) throw data_error("synthetic spec: need at least 2 stations");
    Rng rng = Rng::derive(spec.seed, "synthetic-city");
    SyntheticCity city = make_city(spec, rng);

    Stations stations(city.stations);
    if (spec.fleet_size > stations.total_capacity())
        throw data_error("synthetic spec: fleet exceeds total station capacity");

    // initial nighttime fill, proportional to capacity with exact fleet total
    Snapshot snap;
    {
        const int n = stations.size();
        std::vector<int> fill(static_cast<std::size_t>(n), 0);
        double total_cap = static_cast<double>(stations.total_capacity());
        std::int64_t assigned = 0;
        std::vector<std::pair<double, int>> remainder;
        for (int i = 0; i < n; ++i) {
            double share = spec.fleet_size * stations.capacity(i) / total_cap;
            fill[static_cast<std::size_t>(i)] = static_cast<int>(share);
            assigned += fill[static_cast<std::size_t>(i)];
            remainder.push_back({share - std::floor(share), i});
        }
        std::sort(remainder.begin(), remainder.end(),
                  [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
        for (std::size_t k = 0; assigned < spec.fleet_size; ++k) {
            int i = remainder[k % remainder.size()].second;
            if (fill[static_cast<std::size_t>(i)] < stations.capacity(i)) {
                ++fill[static_cast<std::size_t>(i)];
                ++assigned;
            }
        }
        snap.time = 0;
        for (int i = 0; i < n; ++i) snap.fill[stations.rows[static_cast<std::size_t>(i)].id] = fill[static_cast<std::size_t>(i)];
    }

    // demand tables
    std::vector<double> cdf_morning = regime_cdf(city, kMorning);
    std::vector<double> cdf_evening = regime_cdf(city, kEvening);
    std::vector<double> cdf_flat = regime_cdf(city, kFlat);

    int weeks = std::max({1, (spec.weekday_count + 4) / 5, (spec.weekend_count + 1) / 2});
    // first Monday on/after 2024-01-01 (which is itself a Monday)
    std::int64_t first_day = days_from_civil(2024, 1, 1);

    std::vector<RideRecord> rides;
    Rng demand_rng = Rng::derive(spec.seed, "synthetic-demand");
    std::int64_t next_bike = 1;

    const double base_per_min =
        spec.base_rides_per_station_per_day * spec.station_count / (18.0 * 60.0);

    for (int day = 0; day < weeks * 7; ++day) {
        std::int64_t d = first_day + day;
        bool weekend = day_type_of_day(d) == DayType::weekend;
        for (int mod = 6 * 60; mod < 24 * 60; ++mod) {
            double rate = base_per_min;
            Regime regime = kFlat;
            if (!weekend) {
                double morning = spec.peaks.morning_height *
                                 std::exp(-0.5 * std::pow((mod - 8 * 60) / spec.peaks.morning_width, 2));
                double evening = spec.peaks.evening_height *
                                 std::exp(-0.5 * std::pow((mod - 17.5 * 60) / spec.peaks.evening_width, 2));
                rate *= 1.0 + morning + evening;
                if (morning > 0.3 && morning > evening) regime = kMorning;
                else if (evening > 0.3) regime = kEvening;
            } else {
                rate *= 0.85;
            }
            int count = demand_rng.poisson(rate);
            for (int c = 0; c < count; ++c) {
                const std::vector<double>& cdf = regime == kMorning  ? cdf_morning
                                                 : regime == kEvening ? cdf_evening
                                                                      : cdf_flat;
                int pair = sample_cdf(cdf, demand_rng);
                int i = pair / spec.station_count;
                int j = pair % spec.station_count;
                double dx = city.x[i] - city.x[j];
                double dy = city.y[i] - city.y[j];
                double dist = std::sqrt(dx * dx + dy * dy);
                int duration;
                if (i == j) {
                    duration = 10 + static_cast<int>(demand_rng.below(31));
                } else {
                    double speed = std::clamp(demand_rng.normal(13.0, 2.0), 8.0, 20.0);  // km/h
                    duration = std::max(2, static_cast<int>(std::lround(dist / speed * 60.0)));
                }
                RideRecord r;
                r.bike_id = next_bike++;
                r.start_time = d * minutes_per_day + mod;
                r.end_time = r.start_time + duration;
                r.start_station = stations.rows[static_cast<std::size_t>(i)].id;
                r.end_station = stations.rows[static_cast<std::size_t>(j)].id;
                rides.push_back(r);
            }
        }
    }

    snap.time = first_day * minutes_per_day;
    Corpus corpus{std::move(stations), std::move(rides), std::move(snap)};
    return corpus;
}

}  // namespace pbs
