#include "pbs/pipeline.hpp"

#include <cstring>
#include <fstream>

#include "pbs/manifest.hpp"

namespace pbs {

namespace {

constexpr std::uint64_t rates_magic = 0x5042535241544531ULL;  // "PBSRATE1"
constexpr std::uint64_t resp_magic = 0x5042535245535031ULL;   // "PBSRESP1"

void put_u64(std::ofstream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void put_doubles(std::ofstream& out, const double* p, std::size_t n) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}
bool get_u64(std::ifstream& in, std::uint64_t& v) {
    in.read(reinterpret_cast<char*>(&v), 8);
    return in.gcount() == 8;
}
bool get_doubles(std::ifstream& in, double* p, std::size_t n) {
    in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
    return in.gcount() == static_cast<std::streamsize>(n * sizeof(double));
}

}  // namespace

std::uint64_t fit_cache_key(std::uint64_t corpus_hash, const FitParams& params) {
    std::uint64_t h = corpus_hash;
    auto mix = [&h](const void* p, std::size_t n) { h = fnv1a_bytes(p, n, h); };
    mix(&params.neighbor_count, sizeof params.neighbor_count);
    mix(&params.c_max, sizeof params.c_max);
    mix(&params.p_max, sizeof params.p_max);
    mix(&params.payout_samples, sizeof params.payout_samples);
    mix(&params.customer_samples, sizeof params.customer_samples);
    mix(&params.response_seed, sizeof params.response_seed);
    return h;
}

std::uint64_t corpus_files_hash(const std::string& rides_path, const std::string& stations_path,
                                const std::string& snapshot_path) {
    std::uint64_t h = fnv1a_file(rides_path);
    h = fnv1a_bytes(&h, sizeof h, fnv1a_file(stations_path));
    h = fnv1a_bytes(&h, sizeof h, fnv1a_file(snapshot_path));
    return h;
}

std::uint64_t corpus_content_hash(const Corpus& corpus) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* p, std::size_t n) { h = fnv1a_bytes(p, n, h); };
    for (const auto& r : corpus.rides) {
        mix(&r.bike_id, sizeof r.bike_id);
        mix(&r.start_time, sizeof r.start_time);
        mix(&r.start_station, sizeof r.start_station);
        mix(&r.end_time, sizeof r.end_time);
        mix(&r.end_station, sizeof r.end_station);
    }
    for (const auto& s : corpus.stations.rows) {
        mix(&s.id, sizeof s.id);
        mix(s.name.data(), s.name.size());
        mix(&s.lat, sizeof s.lat);
        mix(&s.lon, sizeof s.lon);
        mix(&s.size, sizeof s.size);
    }
    mix(&corpus.snapshot.time, sizeof corpus.snapshot.time);
    for (const auto& [id, count] : corpus.snapshot.fill) {
        mix(&id, sizeof id);
        mix(&count, sizeof count);
    }
    return h;
}

void save_rates_cache(const std::string& path, std::uint64_t key, const RateModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write " + path);
    put_u64(out, rates_magic);
    put_u64(out, key);
    put_u64(out, static_cast<std::uint64_t>(model.station_count));
    for (int w = 0; w < 2; ++w) {
        put_doubles(out, model.departures[w].data(), model.departures[w].size());
        put_doubles(out, model.arrivals[w].data(), model.arrivals[w].size());
        for (int k = 0; k < slices_per_day; ++k)
            put_u64(out, static_cast<std::uint64_t>(model.observed_minutes[w][k]));
    }
}

std::optional<RateModel> load_rates_cache(const std::string& path, std::uint64_t key) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::uint64_t magic = 0, file_key = 0, stations = 0;
    if (!get_u64(in, magic) || magic != rates_magic) return std::nullopt;
    if (!get_u64(in, file_key) || file_key != key) return std::nullopt;
    if (!get_u64(in, stations)) return std::nullopt;
    RateModel model;
    model.station_count = static_cast<int>(stations);
    std::size_t cells = static_cast<std::size_t>(slices_per_day) * stations * stations;
    for (int w = 0; w < 2; ++w) {
        model.departures[w].resize(cells);
        model.arrivals[w].resize(cells);
        if (!get_doubles(in, model.departures[w].data(), cells)) return std::nullopt;
        if (!get_doubles(in, model.arrivals[w].data(), cells)) return std::nullopt;
        for (int k = 0; k < slices_per_day; ++k) {
            std::uint64_t v = 0;
            if (!get_u64(in, v)) return std::nullopt;
            model.observed_minutes[w][k] = static_cast<std::int64_t>(v);
        }
    }
    model.rebuild_station_sums();
    return model;
}

void save_response_cache(const std::string& path, std::uint64_t key, const LinearResponse& response) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write " + path);
    put_u64(out, resp_magic);
    put_u64(out, key);
    put_u64(out, static_cast<std::uint64_t>(response.coeff.size()));
    put_u64(out, static_cast<std::uint64_t>(response.neighbor_count));
    for (const auto& m : response.coeff) put_doubles(out, m.data(), static_cast<std::size_t>(m.size()));
}

std::optional<LinearResponse> load_response_cache(const std::string& path, std::uint64_t key) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::uint64_t magic = 0, file_key = 0, stations = 0, neighbors = 0;
    if (!get_u64(in, magic) || magic != resp_magic) return std::nullopt;
    if (!get_u64(in, file_key) || file_key != key) return std::nullopt;
    if (!get_u64(in, stations) || !get_u64(in, neighbors)) return std::nullopt;
    LinearResponse response;
    response.neighbor_count = static_cast<int>(neighbors);
    response.coeff.resize(stations);
    for (auto& m : response.coeff) {
        m.resize(static_cast<Eigen::Index>(neighbors), static_cast<Eigen::Index>(neighbors));
        if (!get_doubles(in, m.data(), static_cast<std::size_t>(m.size()))) return std::nullopt;
    }
    return response;
}

ModelBundle fit_models(const Corpus& corpus, const FitParams& params, const std::string& cache_path,
                       bool* cache_hit) {
    ModelBundle bundle{Stations(corpus.stations.rows), {}, {}, {}, {}, params.c_max};
    bundle.geometry = build_geometry(bundle.stations, params.neighbor_count);
    bundle.rates = fit_rates(corpus.rides, bundle.stations);
    bundle.travel = travel_times(corpus.rides, bundle.stations, bundle.geometry);

    std::uint64_t key = 0;
    if (!cache_path.empty()) {
        key = fit_cache_key(corpus_content_hash(corpus), params);
        if (auto cached = load_response_cache(cache_path, key)) {
            bundle.response = std::move(*cached);
            if (cache_hit) *cache_hit = true;
            return bundle;
        }
    }

    FitConfig fit_cfg;
    fit_cfg.c_max = params.c_max;
    fit_cfg.p_max = params.p_max;
    fit_cfg.payout_samples = params.payout_samples;
    fit_cfg.customer_samples = params.customer_samples;
    bundle.response = fit_linear_response(bundle.geometry, fit_cfg, params.response_seed);
    if (!cache_path.empty()) save_response_cache(cache_path, key, bundle.response);
    if (cache_hit) *cache_hit = false;
    return bundle;
}

}  // namespace pbs
