#include "pbs/customer.hpp"

#include <algorithm>
#include <cmath>

namespace pbs {

int choose(std::span<const double> payout, std::span<const double> dist, double c, bool target_full) {
    int best = -1;
    double best_value = 0.0;
    for (std::size_t n = 0; n < payout.size(); ++n) {
        double value = payout[n] - dist[n] * c;
        if (best < 0 || value > best_value) {
            best = static_cast<int>(n);
            best_value = value;
        }
    }
    if (best < 0) return -1;
    if (!target_full && !(best_value > 0.0)) return -1;
    return best;
}

WalkResult overflow_walk(int target, std::span<const int> fill, std::span<const int> capacity,
                         const Geometry& geometry, const PayoutFn& payouts, double c) {
    WalkResult result;
    result.path.push_back(target);
    std::vector<char> visited(static_cast<std::size_t>(geometry.station_count), 0);
    visited[static_cast<std::size_t>(target)] = 1;
    int current = target;
    std::vector<double> cand_payout, cand_dist;
    std::vector<int> cand_station;
    while (true) {
        const auto& nbrs = geometry.neighbors[static_cast<std::size_t>(current)];
        std::span<const double> offers = payouts ? payouts(current) : std::span<const double>{};
        cand_payout.clear();
        cand_dist.clear();
        cand_station.clear();
        for (std::size_t k = 0; k < nbrs.size(); ++k) {
            int nb = nbrs[k];
            if (visited[static_cast<std::size_t>(nb)]) continue;
            cand_station.push_back(nb);
            cand_payout.push_back(k < offers.size() ? offers[k] : 0.0);
            cand_dist.push_back(geometry.effective_km(current, nb));
        }
        int next;
        double paid = 0.0;
        if (!cand_station.empty()) {
            int pick = choose(cand_payout, cand_dist, c, /*target_full=*/true);
            next = cand_station[static_cast<std::size_t>(pick)];
            paid = cand_payout[static_cast<std::size_t>(pick)];
        } else {
            // neighbor candidates exhausted: nearest unvisited station anywhere
            next = -1;
            double best = 0.0;
            for (int s = 0; s < geometry.station_count; ++s) {
                if (visited[static_cast<std::size_t>(s)]) continue;
                double d = geometry.effective_km(current, s);
                if (next < 0 || d < best) {
                    next = s;
                    best = d;
                }
            }
            if (next < 0) throw solver_error("overflow_walk: every station is full");
        }
        result.extra_km += geometry.effective_km(current, next);
        result.payout += paid;
        result.path.push_back(next);
        visited[static_cast<std::size_t>(next)] = 1;
        current = next;
        if (fill[static_cast<std::size_t>(current)] < capacity[static_cast<std::size_t>(current)]) {
            result.station = current;
            return result;
        }
    }
}

double acceptance_probability(std::span<const double> payout, std::span<const double> dist, int n,
                              double c_max, int draws, Rng& rng) {
    int hits = 0;
    for (int i = 0; i < draws; ++i) {
        double c = rng.uniform(0.0, c_max);
        if (choose(payout, dist, c, /*target_full=*/false) == n) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(draws);
}

Eigen::MatrixXd fit_station_response(std::span<const double> dist, const FitConfig& cfg, Rng& rng,
                                     std::vector<std::string>* warnings) {
    const int N = static_cast<int>(dist.size());
    Eigen::MatrixXd design(cfg.payout_samples, N);
    Eigen::MatrixXd fractions(cfg.payout_samples, N);
    std::vector<double> p(static_cast<std::size_t>(N));
    for (int i = 0; i < cfg.payout_samples; ++i) {
        for (int j = 0; j < N; ++j) {
            p[static_cast<std::size_t>(j)] = cfg.p_max * rng.uniform();
            design(i, j) = p[static_cast<std::size_t>(j)];
        }
        Eigen::RowVectorXd counts = Eigen::RowVectorXd::Zero(N);
        for (int c = 0; c < cfg.customer_samples; ++c) {
            double draw = rng.uniform(0.0, cfg.c_max);
            int chosen = choose(p, dist, draw, /*target_full=*/false);
            if (chosen >= 0) counts[chosen] += 1.0;
        }
        fractions.row(i) = counts / static_cast<double>(cfg.customer_samples);
    }

    Eigen::MatrixXd gram = design.transpose() * design;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    Eigen::MatrixXd coeff(N, N);
    double scale = gram.diagonal().maxCoeff();
    if (!(scale > 1e-9)) {
        if (warnings) warnings->push_back("rank-deficient payout design; response coefficients set to 0");
        return Eigen::MatrixXd::Zero(N, N);
    }
    for (int n = 0; n < N; ++n)
        coeff.row(n) = ldlt.solve(design.transpose() * fractions.col(n)).transpose();
    return coeff;
}

LinearResponse fit_linear_response(const Geometry& geometry, const FitConfig& cfg, std::uint64_t seed,
                                   std::vector<std::string>* warnings) {
    LinearResponse response;
    response.neighbor_count = geometry.neighbor_count;
    response.coeff.resize(static_cast<std::size_t>(geometry.station_count));
    std::vector<double> dist(static_cast<std::size_t>(geometry.neighbor_count));
    for (int s = 0; s < geometry.station_count; ++s) {
        const auto& nbrs = geometry.neighbors[static_cast<std::size_t>(s)];
        for (std::size_t k = 0; k < nbrs.size(); ++k) dist[k] = geometry.effective_km(s, nbrs[k]);
        Rng rng = Rng::derive(seed, "response-fit", static_cast<std::uint64_t>(s));
        response.coeff[static_cast<std::size_t>(s)] = fit_station_response(dist, cfg, rng, warnings);
    }
    return response;
}

}  // namespace pbs
