#pragma once

#include <optional>
#include <string>

#include "pbs/sim.hpp"

namespace pbs {

struct FitParams {
    int neighbor_count = 10;
    double c_max = default_c_max;
    double p_max = 5.0;
    int payout_samples = 500;
    int customer_samples = 400;
    std::uint64_t response_seed = 1;
};

// Cache key covering everything that shapes the fitted models.
std::uint64_t fit_cache_key(std::uint64_t corpus_hash, const FitParams& params);

// Fits geometry, rates, travel times and the customer response from a corpus.
// When `cache_path` is given and holds a matching key, the slow response fit
// is loaded instead of recomputed; otherwise the cache is (re)written.
ModelBundle fit_models(const Corpus& corpus, const FitParams& params,
                       const std::string& cache_path = {}, bool* cache_hit = nullptr);

// Combined hash of the three corpus files.
std::uint64_t corpus_files_hash(const std::string& rides_path, const std::string& stations_path,
                                const std::string& snapshot_path);

// Field-wise hash of an in-memory corpus (padding-safe, deterministic).
std::uint64_t corpus_content_hash(const Corpus& corpus);

void save_rates_cache(const std::string& path, std::uint64_t key, const RateModel& model);
std::optional<RateModel> load_rates_cache(const std::string& path, std::uint64_t key);

void save_response_cache(const std::string& path, std::uint64_t key, const LinearResponse& response);
std::optional<LinearResponse> load_response_cache(const std::string& path, std::uint64_t key);

}  // namespace pbs
