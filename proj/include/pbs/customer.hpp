#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <vector>

#include "pbs/geometry.hpp"
#include "pbs/rng.hpp"

namespace pbs {

constexpr double default_c_max = 20.0;  // GBP per km

// Best offer by perceived value p_n - d~_n * c. Returns the neighbor-list index
// or -1. A customer at a full target always moves (argmax even at negative
// value); otherwise the best value must be strictly positive. Ties break to the
// lowest index.
int choose(std::span<const double> payout, std::span<const double> dist, double c, bool target_full);

// Payout vector for a station in neighbor-list order; empty when no prices are active.
using PayoutFn = std::function<std::span<const double>(int station)>;

struct WalkResult {
    int station = -1;            // final station with a free dock
    double extra_km = 0.0;       // effective distance ridden beyond the intended target
    double payout = 0.0;         // incentives collected along the walk
    std::vector<int> path;       // stations visited, starting with the full target
};

// Forced ride-on from a full station: repeatedly choose among unvisited
// neighbors (payouts re-read at each hop), expanding to the nearest unvisited
// station network-wide when the neighbor set is exhausted. Throws solver_error
// if every station is full (impossible while fleet < total capacity).
WalkResult overflow_walk(int target, std::span<const int> fill, std::span<const int> capacity,
                         const Geometry& geometry, const PayoutFn& payouts, double c);

// P over c ~ U[0, c_max] that neighbor n is chosen at a not-full station;
// Monte-Carlo with `draws` samples.
double acceptance_probability(std::span<const double> payout, std::span<const double> dist, int n,
                              double c_max, int draws, Rng& rng);

// Linear surrogate of the incentive response: row n of coeff[s] is pi~_{s,n},
// so that predicted fraction to neighbor n is pi~_{s,n} . p_s.
struct LinearResponse {
    int neighbor_count = 0;
    std::vector<Eigen::MatrixXd> coeff;  // per station, N x N

    double predict(int s, int n, std::span<const double> p) const {
        const auto& m = coeff[static_cast<std::size_t>(s)];
        double v = 0.0;
        for (int j = 0; j < neighbor_count; ++j) v += m(n, j) * p[static_cast<std::size_t>(j)];
        return v;
    }
};

struct FitConfig {
    double c_max = default_c_max;
    double p_max = 5.0;
    int payout_samples = 500;   // P
    int customer_samples = 400; // C
};

// Least-squares fit (no intercept) of acceptance fractions against random
// payout vectors for one station. Rank-deficient designs give zero
// coefficients with a warning.
Eigen::MatrixXd fit_station_response(std::span<const double> dist, const FitConfig& cfg, Rng& rng,
                                     std::vector<std::string>* warnings = nullptr);

LinearResponse fit_linear_response(const Geometry& geometry, const FitConfig& cfg, std::uint64_t seed,
                                   std::vector<std::string>* warnings = nullptr);

}  // namespace pbs
