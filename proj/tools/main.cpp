#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "pbs/csv.hpp"
#include "pbs/manifest.hpp"
#include "pbs/pipeline.hpp"

namespace fs = std::filesystem;
using namespace pbs;

namespace {

struct CorpusOptions {
    std::string rides, stations, snapshot;
    bool synthetic = false;
    SyntheticSpec spec;
    std::string write_corpus_dir;
};

struct FitOptions {
    FitParams params;
    std::string cache_dir;
};

void add_corpus_flags(CLI::App* cmd, CorpusOptions& opt) {
    cmd->add_option("--rides", opt.rides, "ride CSV path");
    cmd->add_option("--stations", opt.stations, "station CSV path");
    cmd->add_option("--snapshot", opt.snapshot, "initial fill snapshot JSON path");
    cmd->add_flag("--synthetic", opt.synthetic, "generate a synthetic corpus instead of loading files");
    cmd->add_option("--synthetic-stations", opt.spec.station_count, "synthetic station count");
    cmd->add_option("--synthetic-fleet", opt.spec.fleet_size, "synthetic fleet size");
    cmd->add_option("--synthetic-weekdays", opt.spec.weekday_count, "minimum weekdays generated");
    cmd->add_option("--synthetic-weekends", opt.spec.weekend_count, "minimum weekend days generated");
    cmd->add_option("--synthetic-seed", opt.spec.seed, "synthetic generator seed");
    cmd->add_option("--synthetic-base-rides", opt.spec.base_rides_per_station_per_day,
                    "base rides per station per day");
    cmd->add_option("--synthetic-morning-peak", opt.spec.peaks.morning_height, "morning peak height");
    cmd->add_option("--synthetic-evening-peak", opt.spec.peaks.evening_height, "evening peak height");
    cmd->add_option("--write-corpus", opt.write_corpus_dir, "write the (synthetic) corpus to this directory");
}

void add_fit_flags(CLI::App* cmd, FitOptions& opt) {
    cmd->add_option("--neighbors", opt.params.neighbor_count, "price slots per station");
    cmd->add_option("--c-max", opt.params.c_max, "max marginal travel cost, GBP/km");
    cmd->add_option("--p-max", opt.params.p_max, "max single payout, GBP");
    cmd->add_option("--fit-payout-samples", opt.params.payout_samples, "response fit payout samples");
    cmd->add_option("--fit-customer-samples", opt.params.customer_samples, "response fit customers per sample");
    cmd->add_option("--fit-seed", opt.params.response_seed, "response fit seed");
    cmd->add_option("--cache-dir", opt.cache_dir, "directory for fitted-model caches");
}

Corpus load_corpus(const CorpusOptions& opt, std::string* corpus_hash) {
    Corpus corpus{Stations(std::vector<StationRecord>{}), {}, {}};
    if (opt.synthetic) {
        corpus = generate_synthetic(opt.spec);
        if (!opt.write_corpus_dir.empty()) {
            fs::create_directories(opt.write_corpus_dir);
            save_stations(opt.write_corpus_dir + "/stations.csv", corpus.stations.rows);
            save_rides(opt.write_corpus_dir + "/rides.csv", corpus.rides);
            save_snapshot(opt.write_corpus_dir + "/snapshot.json", corpus.snapshot);
        }
    } else {
        if (opt.rides.empty() || opt.stations.empty() || opt.snapshot.empty())
            throw usage_error("either --synthetic or all of --rides/--stations/--snapshot are required");
        auto stations = Stations(load_stations(opt.stations));
        auto rides = load_rides(opt.rides, stations);
        auto snapshot = load_snapshot(opt.snapshot, stations);
        corpus = Corpus{std::move(stations), std::move(rides), std::move(snapshot)};
    }
    if (corpus_hash) *corpus_hash = hash_hex(corpus_content_hash(corpus));
    return corpus;
}

ModelBundle fit_bundle(const Corpus& corpus, const FitOptions& fit, bool* cache_hit = nullptr) {
    std::string cache_path;
    if (!fit.cache_dir.empty()) {
        fs::create_directories(fit.cache_dir);
        cache_path = fit.cache_dir + "/response.cache";
    }
    return fit_models(corpus, fit.params, cache_path, cache_hit);
}

std::string alpha_str(double alpha) {
    if (std::isinf(alpha)) return "inf";
    return fmt_general(alpha);
}

double parse_alpha(const std::string& s) {
    if (s == "inf" || s == "off" || s == "none") return std::numeric_limits<double>::infinity();
    double v = 0.0;
    if (!parse_double(s, v) || v <= 0.0) throw usage_error("bad alpha value '" + s + "'");
    return v;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
    std::vector<std::uint64_t> seeds;
    std::size_t dash = s.find('-');
    if (dash != std::string::npos) {
        std::int64_t lo = 0, hi = 0;
        if (!parse_int(s.substr(0, dash), lo) || !parse_int(s.substr(dash + 1), hi) || hi < lo)
            throw usage_error("bad seed range '" + s + "'");
        for (std::int64_t v = lo; v <= hi; ++v) seeds.push_back(static_cast<std::uint64_t>(v));
        return seeds;
    }
    for (const auto& part : split_csv(s)) {
        std::int64_t v = 0;
        if (!parse_int(part, v)) throw usage_error("bad seed list '" + s + "'");
        seeds.push_back(static_cast<std::uint64_t>(v));
    }
    return seeds;
}

std::string report_row(const std::string& run_id, int trucks, double alpha, std::uint64_t seed,
                       DayType day_type, const SimReport& r) {
    std::string row = run_id;
    row += ',' + std::to_string(trucks);
    row += ',' + alpha_str(alpha);
    row += ',' + std::to_string(seed);
    row += ',' + std::string(day_type_name(day_type));
    row += ',' + std::to_string(r.potential);
    row += ',' + std::to_string(r.empty_events);
    row += ',' + std::to_string(r.full_events);
    row += ',' + fmt_double(r.service_level, 6);
    row += ',' + fmt_double(r.payout_total, 2);
    row += ',' + fmt_double(r.truck_hours, 2);
    return row;
}

const char* report_header =
    "run_id,R,alpha,seed,day_type,potential,empty_events,full_events,service_level,payout_total,truck_hours";

struct SimFlags {
    std::string day_type = "weekday";
    int trucks = 0;
    std::string alpha = "inf";
    std::uint64_t seed = 1;
    int burn_in_hours = 24;
    int hours = 72;
    std::string event_log;
    int window_open = 8 * 60;
    int window_close = 22 * 60;
    int depot = -1;
    int branching = 3;
    int depot_cap = 10;
    int horizon_steps = 6;
    int step_minutes = 20;
    bool exclude_diverted_full = false;
};

void add_sim_flags(CLI::App* cmd, SimFlags& opt) {
    cmd->add_option("--day-type", opt.day_type, "weekday or weekend")
        ->check(CLI::IsMember({"weekday", "weekend"}));
    cmd->add_option("--trucks", opt.trucks, "number of repositioning trucks");
    cmd->add_option("--alpha", opt.alpha, "price-controller weight; inf disables incentives");
    cmd->add_option("--seed", opt.seed, "simulation seed");
    cmd->add_option("--burn-in-hours", opt.burn_in_hours, "burn-in period, hours");
    cmd->add_option("--hours", opt.hours, "measured horizon, hours");
    cmd->add_option("--event-log", opt.event_log, "per-event CSV log path");
    cmd->add_option("--window-open", opt.window_open, "truck window open, minutes of day");
    cmd->add_option("--window-close", opt.window_close, "truck window close, minutes of day");
    cmd->add_option("--depot", opt.depot, "depot station id (-1 = nearest to centroid)");
    cmd->add_option("--branching", opt.branching, "route-tree children per node");
    cmd->add_option("--depot-cap", opt.depot_cap, "intermittent depot stash cap");
    cmd->add_option("--price-horizon", opt.horizon_steps, "price controller horizon steps");
    cmd->add_option("--price-step", opt.step_minutes, "price controller step, minutes");
    cmd->add_flag("--exclude-diverted-full", opt.exclude_diverted_full,
                  "do not count full events hit by incentive-diverted customers");
}

SimConfig make_sim_config(const SimFlags& opt, const Stations& stations) {
    SimConfig cfg;
    cfg.day_type = opt.day_type == "weekend" ? DayType::weekend : DayType::weekday;
    cfg.trucks = opt.trucks;
    double alpha = parse_alpha(opt.alpha);
    cfg.prices_enabled = !std::isinf(alpha);
    cfg.alpha = cfg.prices_enabled ? alpha : 0.0;
    cfg.seed = opt.seed;
    cfg.burn_in_hours = opt.burn_in_hours;
    cfg.horizon_hours = opt.hours;
    cfg.event_log_path = opt.event_log;
    cfg.routing.window_open = opt.window_open;
    cfg.routing.window_close = opt.window_close;
    cfg.routing.branching = opt.branching;
    cfg.routing.depot_cap = opt.depot_cap;
    cfg.mpc.horizon_steps = opt.horizon_steps;
    cfg.mpc.step_minutes = opt.step_minutes;
    cfg.count_diverted_full_event = !opt.exclude_diverted_full;
    if (opt.depot >= 0) cfg.routing.depot_station = stations.index(opt.depot);
    return cfg;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"station-based shared-mobility rebalancing laboratory"};
    app.set_config("--config", "", "TOML config file mirrored by the flags (flags win)");
    app.require_subcommand(1);

    // ---- fit ----
    auto* fit_cmd = app.add_subcommand("fit", "fit demand, geometry and customer-response models");
    CorpusOptions fit_corpus;
    FitOptions fit_opt;
    add_corpus_flags(fit_cmd, fit_corpus);
    add_fit_flags(fit_cmd, fit_opt);
    std::string fit_out = "fit-manifest.json";
    fit_cmd->add_option("--out", fit_out, "manifest output path");

    // ---- simulate ----
    auto* sim_cmd = app.add_subcommand("simulate", "run one closed-loop simulation");
    CorpusOptions sim_corpus;
    FitOptions sim_fit;
    SimFlags sim_flags;
    add_corpus_flags(sim_cmd, sim_corpus);
    add_fit_flags(sim_cmd, sim_fit);
    add_sim_flags(sim_cmd, sim_flags);
    std::string sim_out = "report.csv";
    sim_cmd->add_option("--out", sim_out, "report CSV path");

    // ---- sweep ----
    auto* sweep_cmd = app.add_subcommand("sweep", "run a truck/alpha grid of simulations");
    CorpusOptions sweep_corpus;
    FitOptions sweep_fit;
    SimFlags sweep_flags;
    add_corpus_flags(sweep_cmd, sweep_corpus);
    add_fit_flags(sweep_cmd, sweep_fit);
    add_sim_flags(sweep_cmd, sweep_flags);
    std::string trucks_grid = "0", alpha_grid = "inf", seed_spec = "1";
    std::string sweep_dir = "sweep";
    int jobs = 2;
    bool resume = false;
    sweep_cmd->add_option("--trucks-grid", trucks_grid, "comma list of truck counts");
    sweep_cmd->add_option("--alpha-grid", alpha_grid, "comma list of alpha values (inf allowed)");
    sweep_cmd->add_option("--seeds", seed_spec, "seed list 1,2,3 or range 1-20");
    sweep_cmd->add_option("--out-dir", sweep_dir, "output directory");
    sweep_cmd->add_option("--jobs", jobs, "parallel runs");
    sweep_cmd->add_flag("--resume", resume, "re-use completed grid cells from runs.csv");

    // ---- report ----
    auto* report_cmd = app.add_subcommand("report", "aggregate a runs.csv into a summary table");
    std::string runs_path, summary_path = "summary.csv";
    report_cmd->add_option("--runs", runs_path, "runs.csv from sweep")->required();
    report_cmd->add_option("--out", summary_path, "summary CSV path");

    CLI11_PARSE(app, argc, argv);

    if (fit_cmd->parsed()) {
        std::string corpus_hash;
        Corpus corpus = load_corpus(fit_corpus, &corpus_hash);
        bool cache_hit = false;
        ModelBundle bundle = fit_bundle(corpus, fit_opt, &cache_hit);
        std::cout << "stations: " << bundle.stations.size() << "\nrides: " << corpus.rides.size()
                  << "\ncorpus hash: " << corpus_hash << "\nresponse cache: "
                  << (fit_opt.cache_dir.empty() ? "disabled" : (cache_hit ? "hit" : "written")) << "\n";
        RunManifest manifest;
        manifest.command = "fit";
        manifest.corpus_hash = corpus_hash;
        manifest.seed = fit_opt.params.response_seed;
        manifest.parameters["neighbors"] = std::to_string(fit_opt.params.neighbor_count);
        manifest.parameters["c_max"] = fmt_general(fit_opt.params.c_max);
        manifest.parameters["p_max"] = fmt_general(fit_opt.params.p_max);
        manifest.parameters["payout_samples"] = std::to_string(fit_opt.params.payout_samples);
        manifest.parameters["customer_samples"] = std::to_string(fit_opt.params.customer_samples);
        if (!fit_opt.cache_dir.empty()) manifest.outputs.push_back(fit_opt.cache_dir + "/response.cache");
        write_manifest(fit_out, manifest);
        return 0;
    }

    if (sim_cmd->parsed()) {
        std::string corpus_hash;
        Corpus corpus = load_corpus(sim_corpus, &corpus_hash);
        ModelBundle bundle = fit_bundle(corpus, sim_fit);
        SimConfig cfg = make_sim_config(sim_flags, bundle.stations);
        SimReport report = run(cfg, bundle, corpus.snapshot);

        double alpha = parse_alpha(sim_flags.alpha);
        std::string run_id = "t" + std::to_string(cfg.trucks) + "-a" + alpha_str(alpha) + "-s" +
                             std::to_string(cfg.seed) + "-" + day_type_name(cfg.day_type);
        std::string manifest_path = sim_out + ".manifest.json";
        std::ofstream out(sim_out);
        if (!out) throw data_error("cannot write " + sim_out);
        out << "# manifest: " << manifest_path << "\n" << report_header << "\n"
            << report_row(run_id, cfg.trucks, alpha, cfg.seed, cfg.day_type, report) << "\n";
        out.close();

        RunManifest manifest;
        manifest.command = "simulate";
        manifest.corpus_hash = corpus_hash;
        manifest.seed = cfg.seed;
        manifest.parameters["day_type"] = day_type_name(cfg.day_type);
        manifest.parameters["trucks"] = std::to_string(cfg.trucks);
        manifest.parameters["alpha"] = alpha_str(alpha);
        manifest.parameters["burn_in_hours"] = std::to_string(cfg.burn_in_hours);
        manifest.parameters["hours"] = std::to_string(cfg.horizon_hours);
        manifest.outputs.push_back(sim_out);
        write_manifest(manifest_path, manifest);
        std::cout << report_header << "\n"
                  << report_row(run_id, cfg.trucks, alpha, cfg.seed, cfg.day_type, report) << "\n";
        return 0;
    }

    if (sweep_cmd->parsed()) {
        std::string corpus_hash;
        Corpus corpus = load_corpus(sweep_corpus, &corpus_hash);
        ModelBundle bundle = fit_bundle(corpus, sweep_fit);
        SimConfig base = make_sim_config(sweep_flags, bundle.stations);

        std::vector<int> trucks;
        for (const auto& part : split_csv(trucks_grid)) {
            std::int64_t v = 0;
            if (!parse_int(part, v)) throw usage_error("bad trucks grid '" + trucks_grid + "'");
            trucks.push_back(static_cast<int>(v));
        }
        std::vector<double> alphas;
        for (const auto& part : split_csv(alpha_grid)) alphas.push_back(parse_alpha(part));
        std::vector<std::uint64_t> seeds = parse_seeds(seed_spec);

        fs::create_directories(sweep_dir);
        std::string runs_path = sweep_dir + "/runs.csv";

        std::vector<SweepCell> done;
        if (resume && fs::exists(runs_path)) {
            std::ifstream in(runs_path);
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty() || line[0] == '#' || line.rfind("run_id", 0) == 0) continue;
                auto f = split_csv(line);
                if (f.size() < 11) continue;
                SweepCell cell;
                std::int64_t v = 0;
                parse_int(f[1], v);
                cell.trucks = static_cast<int>(v);
                cell.alpha = parse_alpha(f[2]);
                parse_int(f[3], v);
                cell.seed = static_cast<std::uint64_t>(v);
                parse_int(f[5], cell.report.potential);
                parse_int(f[6], cell.report.empty_events);
                parse_int(f[7], cell.report.full_events);
                parse_double(f[8], cell.report.service_level);
                parse_double(f[9], cell.report.payout_total);
                parse_double(f[10], cell.report.truck_hours);
                done.push_back(cell);
            }
        }

        auto cells = sweep(base, bundle, corpus.snapshot, trucks, alphas, seeds, jobs,
                           done.empty() ? nullptr : &done);

        std::string manifest_path = sweep_dir + "/manifest.json";
        {
            std::ofstream out(runs_path);
            if (!out) throw data_error("cannot write " + runs_path);
            out << "# manifest: " << manifest_path << "\n" << report_header << "\n";
            for (const auto& cell : cells) {
                std::string run_id = "t" + std::to_string(cell.trucks) + "-a" + alpha_str(cell.alpha) +
                                     "-s" + std::to_string(cell.seed) + "-" + day_type_name(base.day_type);
                out << report_row(run_id, cell.trucks, cell.alpha, cell.seed, base.day_type, cell.report)
                    << "\n";
            }
        }
        {
            auto rows = summarize(cells);
            std::ofstream out(sweep_dir + "/summary.csv");
            out << "# manifest: " << manifest_path << "\n";
            out << "R,alpha,runs,mean_service,se_service,ci95_service,mean_payout,mean_empty,mean_full,"
                   "mean_truck_hours\n";
            for (const auto& r : rows) {
                out << r.trucks << ',' << alpha_str(r.alpha) << ',' << r.runs << ','
                    << fmt_double(r.mean_service, 6) << ',' << fmt_double(r.se_service, 6) << ','
                    << fmt_double(1.96 * r.se_service, 6) << ',' << fmt_double(r.mean_payout, 2) << ','
                    << fmt_double(r.mean_empty, 2) << ',' << fmt_double(r.mean_full, 2) << ','
                    << fmt_double(r.mean_truck_hours, 2) << "\n";
            }
        }
        RunManifest manifest;
        manifest.command = "sweep";
        manifest.corpus_hash = corpus_hash;
        manifest.seed = seeds.empty() ? 0 : seeds.front();
        manifest.parameters["day_type"] = day_type_name(base.day_type);
        manifest.parameters["trucks_grid"] = trucks_grid;
        manifest.parameters["alpha_grid"] = alpha_grid;
        manifest.parameters["seeds"] = seed_spec;
        manifest.outputs.push_back(runs_path);
        manifest.outputs.push_back(sweep_dir + "/summary.csv");
        write_manifest(manifest_path, manifest);
        std::cout << "sweep complete: " << cells.size() << " runs -> " << runs_path << "\n";
        return 0;
    }

    if (report_cmd->parsed()) {
        std::ifstream in(runs_path);
        if (!in) throw data_error("cannot open " + runs_path);
        std::vector<SweepCell> cells;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#' || line.rfind("run_id", 0) == 0) continue;
            auto f = split_csv(line);
            if (f.size() < 11) throw data_error(runs_path + ": malformed row '" + line + "'");
            SweepCell cell;
            std::int64_t v = 0;
            parse_int(f[1], v);
            cell.trucks = static_cast<int>(v);
            cell.alpha = parse_alpha(f[2]);
            parse_int(f[3], v);
            cell.seed = static_cast<std::uint64_t>(v);
            parse_int(f[5], cell.report.potential);
            parse_int(f[6], cell.report.empty_events);
            parse_int(f[7], cell.report.full_events);
            parse_double(f[8], cell.report.service_level);
            parse_double(f[9], cell.report.payout_total);
            parse_double(f[10], cell.report.truck_hours);
            cells.push_back(cell);
        }
        auto rows = summarize(cells);
        std::ofstream out(summary_path);
        if (!out) throw data_error("cannot write " + summary_path);
        out << "R,alpha,runs,mean_service,se_service,ci95_service,mean_payout,mean_empty,mean_full,"
               "mean_truck_hours\n";
        for (const auto& r : rows) {
            out << r.trucks << ',' << alpha_str(r.alpha) << ',' << r.runs << ','
                << fmt_double(r.mean_service, 6) << ',' << fmt_double(r.se_service, 6) << ','
                << fmt_double(1.96 * r.se_service, 6) << ',' << fmt_double(r.mean_payout, 2) << ','
                << fmt_double(r.mean_empty, 2) << ',' << fmt_double(r.mean_full, 2) << ','
                << fmt_double(r.mean_truck_hours, 2) << "\n";
        }
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const usage_error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
