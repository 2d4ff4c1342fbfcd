#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string bin = PBS_BIN_PATH;

std::string work_dir() {
    auto dir = fs::temp_directory_path() / "pbs_cli_test";
    fs::create_directories(dir);
    return dir.string();
}

int run_cmd(const std::string& args, const std::string& log = "/dev/null") {
    std::string cmd = bin + " " + args + " >" + log + " 2>&1";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

const std::string synth =
    "--synthetic --synthetic-stations 12 --synthetic-fleet 120 --synthetic-weekdays 5 "
    "--synthetic-weekends 2 --synthetic-seed 7 --neighbors 4 --fit-payout-samples 60 "
    "--fit-customer-samples 50";

}  // namespace

TEST_CASE("help exits cleanly") {
    CHECK(run_cmd("--help") == 0);
    CHECK(run_cmd("simulate --help") == 0);
}

TEST_CASE("missing corpus is a usage error") {
    CHECK(run_cmd("simulate --trucks 0") == 1);
}

TEST_CASE("corrupt csv is a data error with a line number") {
    auto dir = work_dir();
    std::ofstream(dir + "/bad.csv") << "id,name,lat,lon,size\nnot,a,valid,row\n";
    std::ofstream(dir + "/rides.csv") << "";
    std::ofstream(dir + "/snap.json") << "{\"time\":0,\"fill\":{}}";
    std::string log = dir + "/err.log";
    int rc = run_cmd("simulate --rides " + dir + "/rides.csv --stations " + dir +
                         "/bad.csv --snapshot " + dir + "/snap.json",
                     log);
    CHECK(rc == 2);
    CHECK(slurp(log).find("bad.csv:2") != std::string::npos);
}

TEST_CASE("fit writes caches and re-runs hit them") {
    auto dir = work_dir();
    std::string cache = dir + "/cache1";
    fs::remove_all(cache);
    std::string log1 = dir + "/fit1.log";
    std::string log2 = dir + "/fit2.log";
    CHECK(run_cmd("fit " + synth + " --cache-dir " + cache + " --out " + dir + "/fit.json", log1) == 0);
    CHECK(slurp(log1).find("response cache: written") != std::string::npos);
    CHECK(run_cmd("fit " + synth + " --cache-dir " + cache + " --out " + dir + "/fit.json", log2) == 0);
    CHECK(slurp(log2).find("response cache: hit") != std::string::npos);
    // changing c_max invalidates the key
    std::string log3 = dir + "/fit3.log";
    CHECK(run_cmd("fit " + synth + " --c-max 10 --cache-dir " + cache + " --out " + dir + "/fit.json",
                  log3) == 0);
    CHECK(slurp(log3).find("response cache: written") != std::string::npos);
}

TEST_CASE("simulate is byte-deterministic and honors the baseline") {
    auto dir = work_dir();
    std::string common = "simulate " + synth +
                         " --trucks 0 --alpha inf --seed 1 --burn-in-hours 1 --hours 2 --out ";
    CHECK(run_cmd(common + dir + "/r1.csv") == 0);
    CHECK(run_cmd(common + dir + "/r2.csv") == 0);
    std::string a = slurp(dir + "/r1.csv");
    std::string b = slurp(dir + "/r2.csv");
    // identical invocations produce identical bytes apart from the manifest path line
    auto strip = [](std::string s) {
        return s.substr(s.find('\n') + 1);
    };
    CHECK(strip(a) == strip(b));
    CHECK(a.find("payout_total") != std::string::npos);
    // baseline: no payouts, no truck hours
    CHECK(a.find(",0.00,0.00") != std::string::npos);
    // manifest written and referenced
    CHECK(a.rfind("# manifest: ", 0) == 0);
    CHECK(fs::exists(dir + "/r1.csv.manifest.json"));
}

TEST_CASE("sweep writes runs and summary; resume is idempotent") {
    auto dir = work_dir();
    std::string sweep_dir = dir + "/sweep1";
    fs::remove_all(sweep_dir);
    std::string cmd = "sweep " + synth +
                      " --trucks-grid 0 --alpha-grid inf --seeds 1-2 --jobs 2 --burn-in-hours 1 "
                      "--hours 2 --out-dir " +
                      sweep_dir;
    CHECK(run_cmd(cmd) == 0);
    std::string runs1 = slurp(sweep_dir + "/runs.csv");
    CHECK(runs1.find("t0-ainf-s1-weekday") != std::string::npos);
    CHECK(runs1.find("t0-ainf-s2-weekday") != std::string::npos);
    CHECK(fs::exists(sweep_dir + "/summary.csv"));
    CHECK(run_cmd(cmd + " --resume") == 0);
    CHECK(slurp(sweep_dir + "/runs.csv") == runs1);

    // report subcommand aggregates the runs file
    CHECK(run_cmd("report --runs " + sweep_dir + "/runs.csv --out " + dir + "/summary2.csv") == 0);
    std::string summary = slurp(dir + "/summary2.csv");
    CHECK(summary.find("mean_service") != std::string::npos);
    CHECK(summary.find("0,inf,2,") != std::string::npos);
}
