#include "pbs/pricing.hpp"

#include <algorithm>
#include <cmath>

namespace pbs {

MpcState make_mpc_state(Minute now, std::span<const double> fill, const EtaFn& eta_minute,
                        const EtaFn& lambda_minute, const PlateauTable& plateaus,
                        const std::vector<std::vector<std::pair<Minute, double>>>& truck_actions,
                        const MpcConfig& cfg) {
    MpcState st;
    const int S = static_cast<int>(fill.size());
    st.stations = S;
    st.steps = cfg.horizon_steps;
    st.fill0.assign(fill.begin(), fill.end());
    st.lambda.assign(static_cast<std::size_t>(st.steps) * S, 0.0);
    st.eta.assign(static_cast<std::size_t>(st.steps) * S, 0.0);
    st.truck_delta.assign(static_cast<std::size_t>(st.steps) * S, 0.0);
    st.plateau_lower.assign(static_cast<std::size_t>(st.steps) * S, 0.0);
    st.plateau_upper.assign(static_cast<std::size_t>(st.steps) * S, 0.0);
    for (int t = 0; t < st.steps; ++t) {
        Minute step_begin = now + static_cast<Minute>(t) * cfg.step_minutes;
        for (int s = 0; s < S; ++s) {
            double lam = 0.0, net = 0.0;
            for (int m = 0; m < cfg.step_minutes; ++m) {
                lam += lambda_minute(s, step_begin + m);
                net += eta_minute(s, step_begin + m);
            }
            st.lambda[st.idx(t, s)] = lam;
            st.eta[st.idx(t, s)] = net;
            const Plateau& p = plateaus.at(s, step_begin + cfg.step_minutes);
            st.plateau_lower[st.idx(t, s)] = p.lower;
            st.plateau_upper[st.idx(t, s)] = p.upper;
        }
    }
    for (int s = 0; s < S && s < static_cast<int>(truck_actions.size()); ++s) {
        for (const auto& [minute, df] : truck_actions[static_cast<std::size_t>(s)]) {
            std::int64_t t = (minute - now) / cfg.step_minutes;
            if (t >= 0 && t < st.steps) st.truck_delta[st.idx(static_cast<int>(t), s)] += df;
        }
    }
    return st;
}

namespace {

// column sums of the response matrix: d(total predicted diversion)/d(p_m)
std::vector<double> response_colsum(const Eigen::MatrixXd& coeff) {
    std::vector<double> col(static_cast<std::size_t>(coeff.cols()), 0.0);
    for (int n = 0; n < coeff.rows(); ++n)
        for (int m = 0; m < coeff.cols(); ++m) col[static_cast<std::size_t>(m)] += coeff(n, m);
    return col;
}

}  // namespace

MpcProblem build_mpc(const MpcState& state, const LinearResponse& response, const Geometry& geometry,
                     const MpcConfig& cfg) {
    MpcProblem qp;
    const int S = state.stations;
    const int T = state.steps;
    const int N = response.neighbor_count;
    qp.stations = S;
    qp.steps = T;
    qp.neighbors = N;
    const int np = T * S * N;
    const int nf = T * S;
    const int nv = np + nf;

    std::vector<std::vector<double>> colsum(static_cast<std::size_t>(S));
    std::vector<double> grand(static_cast<std::size_t>(S), 0.0);
    for (int s = 0; s < S; ++s) {
        colsum[static_cast<std::size_t>(s)] = response_colsum(response.coeff[static_cast<std::size_t>(s)]);
        for (double v : colsum[static_cast<std::size_t>(s)]) grand[static_cast<std::size_t>(s)] += v;
    }

    std::vector<Eigen::Triplet<double>> ht;
    qp.g = qp::Vec::Zero(nv);
    for (int t = 0; t < T; ++t) {
        for (int s = 0; s < S; ++s) {
            double r = cfg.alpha * std::max(state.lambda[state.idx(t, s)] * grand[static_cast<std::size_t>(s)],
                                            cfg.r_floor);
            for (int n = 0; n < N; ++n) {
                auto j = static_cast<int>(qp.p_index(t, s, n));
                ht.emplace_back(j, j, 2.0 * r);
            }
            double width = state.plateau_upper[state.idx(t, s)] - state.plateau_lower[state.idx(t, s)];
            double q = 1.0 / std::max(cfg.plateau_eps, width);
            double center = 0.5 * (state.plateau_upper[state.idx(t, s)] + state.plateau_lower[state.idx(t, s)]);
            auto j = static_cast<int>(qp.f_index(t + 1, s));
            ht.emplace_back(j, j, 2.0 * q);
            qp.g[j] = -2.0 * q * center;
        }
    }
    qp.H.resize(nv, nv);
    qp.H.setFromTriplets(ht.begin(), ht.end());

    // rows: dynamics (T*S, equality), 100% caps (T*S), price boxes (np)
    const int mr = T * S + T * S + np;
    std::vector<Eigen::Triplet<double>> ct;
    qp.l = qp::Vec::Zero(mr);
    qp.u = qp::Vec::Zero(mr);
    int row = 0;
    for (int t = 0; t < T; ++t) {
        for (int s = 0; s < S; ++s) {
            double lam_s = state.lambda[state.idx(t, s)];
            ct.emplace_back(row, static_cast<int>(qp.f_index(t + 1, s)), 1.0);
            double rhs = state.eta[state.idx(t, s)] + state.truck_delta[state.idx(t, s)];
            if (t == 0) rhs += state.fill0[static_cast<std::size_t>(s)];
            else ct.emplace_back(row, static_cast<int>(qp.f_index(t, s)), -1.0);
            // outgoing diversions: mass leaving s toward its neighbors
            for (int m = 0; m < N; ++m)
                ct.emplace_back(row, static_cast<int>(qp.p_index(t, s, m)),
                                lam_s * colsum[static_cast<std::size_t>(s)][static_cast<std::size_t>(m)]);
            // incoming diversions from stations that list s as a neighbor
            for (int nb : geometry.reverse_neighbors[static_cast<std::size_t>(s)]) {
                const auto& nbrs = geometry.neighbors[static_cast<std::size_t>(nb)];
                int pos = static_cast<int>(std::find(nbrs.begin(), nbrs.end(), s) - nbrs.begin());
                double lam_nb = state.lambda[state.idx(t, nb)];
                const auto& coeff = response.coeff[static_cast<std::size_t>(nb)];
                for (int m = 0; m < N; ++m)
                    ct.emplace_back(row, static_cast<int>(qp.p_index(t, nb, m)), -lam_nb * coeff(pos, m));
            }
            qp.l[row] = rhs;
            qp.u[row] = rhs;
            ++row;
        }
    }
    for (int t = 0; t < T; ++t) {
        for (int s = 0; s < S; ++s) {
            for (int m = 0; m < N; ++m)
                ct.emplace_back(row, static_cast<int>(qp.p_index(t, s, m)),
                                colsum[static_cast<std::size_t>(s)][static_cast<std::size_t>(m)]);
            qp.l[row] = -qp::inf;
            qp.u[row] = 1.0;
            ++row;
        }
    }
    for (int j = 0; j < np; ++j) {
        ct.emplace_back(row, j, 1.0);
        qp.l[row] = 0.0;
        qp.u[row] = cfg.p_max;
        ++row;
    }
    qp.C.resize(mr, nv);
    qp.C.setFromTriplets(ct.begin(), ct.end());
    return qp;
}

std::vector<double> incentive_gamma(const MpcState& state, int t, const LinearResponse& response,
                                    const Geometry& geometry,
                                    const std::vector<std::vector<double>>& prices) {
    const int S = state.stations;
    std::vector<double> gamma(static_cast<std::size_t>(S), 0.0);
    for (int s = 0; s < S; ++s) {
        double lam = state.lambda[state.idx(t, s)];
        const auto& nbrs = geometry.neighbors[static_cast<std::size_t>(s)];
        for (std::size_t k = 0; k < nbrs.size(); ++k) {
            double frac = response.predict(s, static_cast<int>(k), prices[static_cast<std::size_t>(s)]);
            double mass = frac * lam;
            gamma[static_cast<std::size_t>(s)] -= mass;
            gamma[static_cast<std::size_t>(nbrs[k])] += mass;
        }
    }
    return gamma;
}

std::vector<std::vector<double>> predict_open_loop(
    const MpcState& state, const LinearResponse& response, const Geometry& geometry,
    const std::vector<std::vector<std::vector<double>>>& prices) {
    const int S = state.stations;
    std::vector<std::vector<double>> fills(static_cast<std::size_t>(state.steps) + 1,
                                           std::vector<double>(static_cast<std::size_t>(S)));
    fills[0] = state.fill0;
    for (int t = 0; t < state.steps; ++t) {
        auto gamma = incentive_gamma(state, t, response, geometry, prices[static_cast<std::size_t>(t)]);
        for (int s = 0; s < S; ++s) {
            fills[static_cast<std::size_t>(t) + 1][static_cast<std::size_t>(s)] =
                fills[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)] + state.eta[state.idx(t, s)] +
                state.truck_delta[state.idx(t, s)] + gamma[static_cast<std::size_t>(s)];
        }
    }
    return fills;
}

MpcController::MpcController(const Geometry& geometry, const LinearResponse& response,
                             std::vector<double> fmax, MpcConfig cfg)
    : geometry_(&geometry), response_(&response), fmax_(std::move(fmax)), cfg_(cfg) {
    last_issued_.payout.assign(static_cast<std::size_t>(geometry.station_count),
                               std::vector<double>(static_cast<std::size_t>(response.neighbor_count), 0.0));
}

PriceSchedule MpcController::tick(const MpcState& state, MpcDiagnostics* diag) {
    const int S = state.stations;
    const int N = response_->neighbor_count;
    MpcDiagnostics local;
    PriceSchedule schedule;
    schedule.payout.assign(static_cast<std::size_t>(S),
                           std::vector<double>(static_cast<std::size_t>(N), 0.0));

    double lambda_total = 0.0;
    for (double v : state.lambda) lambda_total += v;
    if (!cfg_.enabled || lambda_total <= 0.0) {
        local.skipped_trivial = true;
        if (diag) *diag = local;
        last_issued_ = schedule;
        return schedule;
    }

    MpcProblem problem = build_mpc(state, *response_, *geometry_, cfg_);
    qp::Settings settings;
    settings.tol = cfg_.kkt_tol;
    if (!solver_ready_) {
        solver_.setup(problem.H, problem.g, problem.C, problem.l, problem.u, settings);
        solver_ready_ = true;
    } else {
        solver_.update_values(problem.H, problem.g, problem.C, problem.l, problem.u);
    }

    qp::Result res = have_warm_ ? solver_.solve(&last_x_, &last_y_) : solver_.solve();
    local.status = res.status;
    local.iterations = res.iterations;
    local.primal_residual = res.primal_residual;
    local.dual_residual = res.dual_residual;

    if (res.status != qp::Status::solved) {
        local.reused_previous = true;
        if (diag) *diag = local;
        return last_issued_;
    }

    // warm start for the next tick: shift the price plan one step forward
    last_x_ = res.x;
    for (int t = 0; t + 1 < state.steps; ++t)
        for (int s = 0; s < S; ++s)
            for (int n = 0; n < N; ++n)
                last_x_[static_cast<Eigen::Index>(problem.p_index(t, s, n))] =
                    res.x[static_cast<Eigen::Index>(problem.p_index(t + 1, s, n))];
    last_y_ = res.y;
    have_warm_ = true;

    // issue step 0, projected exactly onto the constraint set
    for (int s = 0; s < S; ++s) {
        auto& row = schedule.payout[static_cast<std::size_t>(s)];
        for (int n = 0; n < N; ++n) {
            double v = res.x[static_cast<Eigen::Index>(problem.p_index(0, s, n))];
            row[static_cast<std::size_t>(n)] = std::clamp(v, 0.0, cfg_.p_max);
        }
        const auto& coeff = response_->coeff[static_cast<std::size_t>(s)];
        double total = 0.0;
        for (int n = 0; n < N; ++n)
            for (int m = 0; m < N; ++m) total += coeff(n, m) * row[static_cast<std::size_t>(m)];
        if (total > 1.0) {
            double scale = 1.0 / total;
            for (auto& v : row) v *= scale;
        }
    }

    // model-error telemetry: open-loop forecast leaving the physical range
    {
        std::vector<std::vector<std::vector<double>>> plan(static_cast<std::size_t>(state.steps));
        for (int t = 0; t < state.steps; ++t) {
            plan[static_cast<std::size_t>(t)].assign(static_cast<std::size_t>(S),
                                                     std::vector<double>(static_cast<std::size_t>(N)));
            for (int s = 0; s < S; ++s)
                for (int n = 0; n < N; ++n)
                    plan[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)][static_cast<std::size_t>(n)] =
                        std::clamp(res.x[static_cast<Eigen::Index>(problem.p_index(t, s, n))], 0.0, cfg_.p_max);
        }
        auto forecast = predict_open_loop(state, *response_, *geometry_, plan);
        for (const auto& step : forecast)
            for (int s = 0; s < S; ++s)
                if (step[static_cast<std::size_t>(s)] < -1e-9 ||
                    step[static_cast<std::size_t>(s)] > fmax_[static_cast<std::size_t>(s)] + 1e-9)
                    ++local.forecast_bound_exits;
    }

    last_issued_ = schedule;
    if (diag) *diag = local;
    return schedule;
}

}  // namespace pbs
