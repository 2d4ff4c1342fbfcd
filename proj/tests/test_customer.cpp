#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "pbs/customer.hpp"

using namespace pbs;

namespace {

// N = 1 analytic form used as the Monte-Carlo oracle
double analytic_single(double p, double d, double c_max) {
    if (d <= 0.0) return p > 0.0 ? 1.0 : 0.0;
    return std::min(1.0, p / (c_max * d));
}

Stations square_stations(int n) {
    std::vector<StationRecord> rows;
    for (int i = 0; i < n; ++i) {
        StationRecord s;
        s.id = i + 1;
        s.name = "S" + std::to_string(i + 1);
        s.lat = 51.50 + 0.006 * (i % 4);
        s.lon = -0.12 + 0.006 * (i / 4);
        s.size = 16;
        rows.push_back(s);
    }
    return Stations(rows);
}

}  // namespace

TEST_CASE("choose picks the best-value neighbor") {
    std::vector<double> d = {0.1, 0.1};
    SUBCASE("documented example") {
        std::vector<double> p = {2.0, 1.0};
        CHECK(choose(p, d, 5.0, false) == 0);  // values 1.5 vs 0.5
    }
    SUBCASE("zero payouts, not full: stays") {
        std::vector<double> p = {0.0, 0.0};
        CHECK(choose(p, d, 5.0, false) == -1);
    }
    SUBCASE("full station, zero payouts: nearest neighbor by effective distance") {
        std::vector<double> p = {0.0, 0.0, 0.0};
        std::vector<double> dist = {0.4, 0.2, 0.7};
        CHECK(choose(p, dist, 5.0, true) == 1);
    }
    SUBCASE("ties break to the lowest index") {
        std::vector<double> p = {1.0, 1.0};
        std::vector<double> dist = {0.2, 0.2};
        CHECK(choose(p, dist, 1.0, false) == 0);
    }
    SUBCASE("scale consistency") {
        std::vector<double> p = {1.4, 2.6, 0.3};
        std::vector<double> dist = {0.5, 0.9, 0.05};
        for (double c : {0.5, 3.0, 11.0}) {
            int base = choose(p, dist, c, false);
            std::vector<double> p2 = p;
            for (auto& v : p2) v *= 7.5;
            CHECK(choose(p2, dist, 7.5 * c, false) == base);
        }
    }
}

TEST_CASE("acceptance probability against the analytic single-neighbor form") {
    Rng rng(101);
    double c_max = default_c_max;
    for (double d : {0.2, 0.5, 1.0}) {
        for (int grid = 0; grid <= 10; ++grid) {
            double p = 0.5 * grid;  // 0 .. 5
            std::vector<double> pv = {p};
            std::vector<double> dv = {d};
            const int draws = 20000;
            double mc = acceptance_probability(pv, dv, 0, c_max, draws, rng);
            double truth = analytic_single(p, d, c_max);
            double sigma = std::sqrt(truth * (1.0 - truth) / draws);
            CHECK(std::abs(mc - truth) <= std::max(3.0 * sigma, 1e-9));
        }
    }
    SUBCASE("saturating payout accepts everyone") {
        std::vector<double> pv = {c_max * 0.5};
        std::vector<double> dv = {0.5};
        CHECK(acceptance_probability(pv, dv, 0, c_max, 5000, rng) == 1.0);
    }
    SUBCASE("zero payouts accept nobody") {
        std::vector<double> pv = {0.0, 0.0};
        std::vector<double> dv = {0.3, 0.6};
        CHECK(acceptance_probability(pv, dv, 0, c_max, 5000, rng) == 0.0);
        CHECK(acceptance_probability(pv, dv, 1, c_max, 5000, rng) == 0.0);
    }
}

TEST_CASE("acceptance probabilities are monotone and sum below one") {
    Rng rng(55);
    std::vector<double> dv = {0.3, 0.5, 0.8};
    std::vector<double> base = {1.0, 2.0, 0.5};
    double prev = 0.0;
    for (double bump = 0.0; bump <= 3.0; bump += 0.5) {
        std::vector<double> pv = base;
        pv[1] += bump;
        Rng local(909);  // common random numbers across the sweep
        double pr = acceptance_probability(pv, dv, 1, default_c_max, 20000, local);
        CHECK(pr >= prev - 1e-12);
        prev = pr;
        double total = 0.0;
        for (int n = 0; n < 3; ++n) {
            Rng r2(909);
            total += acceptance_probability(pv, dv, n, default_c_max, 20000, r2);
        }
        CHECK(total <= 1.0 + 1e-12);
    }
}

TEST_CASE("overflow walk") {
    auto stations = square_stations(8);
    auto geo = build_geometry(stations, 3);
    std::vector<int> caps(8, 16);
    PayoutFn no_prices;

    SUBCASE("nearest neighbor has space") {
        std::vector<int> fill(8, 4);
        int target = 0;
        fill[0] = 16;
        auto res = overflow_walk(target, fill, caps, geo, no_prices, 2.0);
        CHECK(res.station == geo.neighbors[0][0]);
        CHECK(res.path.size() == 2);
        CHECK(res.payout == 0.0);
    }
    SUBCASE("chain of full stations, never revisits") {
        std::vector<int> fill(8, 4);
        int target = 0;
        fill[0] = 16;
        int first = geo.neighbors[0][0];
        fill[static_cast<std::size_t>(first)] = 16;
        auto res = overflow_walk(target, fill, caps, geo, no_prices, 2.0);
        CHECK(res.station != 0);
        CHECK(res.station != first);
        // no repeats in the path
        auto path = res.path;
        std::sort(path.begin(), path.end());
        CHECK(std::adjacent_find(path.begin(), path.end()) == path.end());
    }
    SUBCASE("terminates whenever some dock is free") {
        std::vector<int> fill(8, 16);
        fill[7] = 15;
        auto res = overflow_walk(0, fill, caps, geo, no_prices, 2.0);
        CHECK(res.station == 7);
    }
}

TEST_CASE("linear response fit") {
    FitConfig cfg;
    Rng rng(7);

    SUBCASE("zero p_max gives zero coefficients with a warning") {
        cfg.p_max = 0.0;
        std::vector<double> dist = {0.4, 0.6};
        std::vector<std::string> warnings;
        auto coeff = fit_station_response(dist, cfg, rng, &warnings);
        CHECK(coeff.cwiseAbs().maxCoeff() == 0.0);
        CHECK(!warnings.empty());
    }

    SUBCASE("single neighbor recovers the analytic slope") {
        // for p_max <= c_max * d the true response is exactly linear
        cfg.p_max = 3.0;
        std::vector<double> dist = {0.5};  // c_max*d = 10 > p_max
        auto coeff = fit_station_response(dist, cfg, rng);
        double slope = 1.0 / (default_c_max * 0.5);
        CHECK(coeff(0, 0) == doctest::Approx(slope).epsilon(0.05));
    }

    SUBCASE("held-out prediction error below 0.05 on 2-neighbor fixtures") {
        std::vector<double> dist = {0.5, 0.8};
        cfg.p_max = 5.0;
        auto coeff = fit_station_response(dist, cfg, rng);
        Rng eval(1234);
        double total_err = 0.0;
        int count = 0;
        for (int i = 0; i < 200; ++i) {
            std::vector<double> p = {cfg.p_max * eval.uniform(), cfg.p_max * eval.uniform()};
            Eigen::Vector2d tally = Eigen::Vector2d::Zero();
            const int C = 2000;
            for (int c = 0; c < C; ++c) {
                int chosen = choose(p, dist, eval.uniform(0.0, cfg.c_max), false);
                if (chosen >= 0) tally[chosen] += 1.0;
            }
            for (int n = 0; n < 2; ++n) {
                double predicted = coeff(n, 0) * p[0] + coeff(n, 1) * p[1];
                double observed = tally[n] / C;
                total_err += std::abs(predicted - observed);
                ++count;
            }
        }
        CHECK(total_err / count <= 0.05);
    }
}

TEST_CASE("fit over a whole geometry is deterministic in the seed") {
    auto stations = square_stations(10);
    auto geo = build_geometry(stations, 4);
    FitConfig cfg;
    cfg.payout_samples = 60;
    cfg.customer_samples = 50;
    auto a = fit_linear_response(geo, cfg, 99);
    auto b = fit_linear_response(geo, cfg, 99);
    for (int s = 0; s < geo.station_count; ++s)
        CHECK(a.coeff[static_cast<std::size_t>(s)] == b.coeff[static_cast<std::size_t>(s)]);
}
