#pragma once

#include <span>
#include <vector>

#include "pbs/customer.hpp"
#include "pbs/geometry.hpp"
#include "pbs/qp.hpp"
#include "pbs/utility.hpp"

namespace pbs {

struct MpcConfig {
    bool enabled = true;
    double alpha = 1.0;        // payout-vs-deviation weight
    double p_max = 5.0;        // GBP
    int horizon_steps = 6;     // T_price
    int step_minutes = 20;
    double plateau_eps = 0.5;  // width floor for the deviation weight
    double r_floor = 1e-6;     // R floor factor (times alpha)
    double kkt_tol = 1e-6;
};

// Per-step aggregates feeding one MPC solve. Index layout: t * S + s.
struct MpcState {
    int stations = 0;
    int steps = 0;
    std::vector<double> fill0;          // S
    std::vector<double> lambda;         // expected arrivals per step
    std::vector<double> eta;            // expected net change per step
    std::vector<double> truck_delta;    // known repositioning per step
    std::vector<double> plateau_lower;  // plateau bounds at each step
    std::vector<double> plateau_upper;

    std::size_t idx(int t, int s) const { return static_cast<std::size_t>(t) * stations + s; }
};

MpcState make_mpc_state(Minute now, std::span<const double> fill, const EtaFn& eta_minute,
                        const EtaFn& lambda_minute, const PlateauTable& plateaus,
                        const std::vector<std::vector<std::pair<Minute, double>>>& truck_actions,
                        const MpcConfig& cfg);

// Assembled quadratic program in the canonical two-sided form. Variables are
// [p(t,s,n) for t<T | f(t,s) for 1<=t<=T].
struct MpcProblem {
    qp::SpMat H;
    qp::Vec g;
    qp::SpMat C;
    qp::Vec l, u;
    int stations = 0, steps = 0, neighbors = 0;

    std::size_t p_index(int t, int s, int n) const {
        return (static_cast<std::size_t>(t) * stations + s) * neighbors + static_cast<std::size_t>(n);
    }
    std::size_t f_index(int t, int s) const {  // t in 1..steps
        return static_cast<std::size_t>(steps) * stations * neighbors +
               static_cast<std::size_t>(t - 1) * stations + s;
    }
};

MpcProblem build_mpc(const MpcState& state, const LinearResponse& response, const Geometry& geometry,
                     const MpcConfig& cfg);

// Net fill change caused by incentive-takers, per station, for one step.
std::vector<double> incentive_gamma(const MpcState& state, int t, const LinearResponse& response,
                                    const Geometry& geometry,
                                    const std::vector<std::vector<double>>& prices);

// Open-loop forecast under the linear model; conserves total bikes exactly.
// prices[t][s][n] for t < state.steps. Returns (steps+1) x S fills.
std::vector<std::vector<double>> predict_open_loop(
    const MpcState& state, const LinearResponse& response, const Geometry& geometry,
    const std::vector<std::vector<std::vector<double>>>& prices);

struct PriceSchedule {
    Minute issued_at = 0;
    std::vector<std::vector<double>> payout;  // [s][n], neighbor-list order
};

struct MpcDiagnostics {
    qp::Status status = qp::Status::solved;
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    bool reused_previous = false;  // solver failure: previous prices re-issued
    bool skipped_trivial = false;  // no arrivals in the horizon: zeros issued
    int forecast_bound_exits = 0;  // open-loop forecast left [0, fmax]
};

// Receding-horizon price controller: one QP per tick, step-0 prices issued.
class MpcController {
public:
    MpcController(const Geometry& geometry, const LinearResponse& response,
                  std::vector<double> fmax, MpcConfig cfg);

    PriceSchedule tick(const MpcState& state, MpcDiagnostics* diag = nullptr);

    const MpcConfig& config() const { return cfg_; }

private:
    const Geometry* geometry_;
    const LinearResponse* response_;
    std::vector<double> fmax_;
    MpcConfig cfg_;
    qp::Solver solver_;
    bool solver_ready_ = false;
    qp::Vec last_x_, last_y_;
    bool have_warm_ = false;
    PriceSchedule last_issued_;
};

}  // namespace pbs
