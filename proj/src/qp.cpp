#include "pbs/qp.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace pbs::qp {

namespace {

inline double clip(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

SpMat upper_kkt(const SpMat& H, const SpMat& C, double sigma, const Vec& rho_inv) {
    const int n = static_cast<int>(H.rows());
    const int m = static_cast<int>(C.rows());
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(H.nonZeros() + C.nonZeros() + n + m));
    for (int k = 0; k < H.outerSize(); ++k)
        for (SpMat::InnerIterator it(H, k); it; ++it)
            trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (int i = 0; i < n; ++i) trips.emplace_back(i, i, sigma);
    for (int k = 0; k < C.outerSize(); ++k)
        for (SpMat::InnerIterator it(C, k); it; ++it)
            trips.emplace_back(n + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (int i = 0; i < m; ++i) trips.emplace_back(n + i, n + i, -rho_inv[i]);
    SpMat K(n + m, n + m);
    K.setFromTriplets(trips.begin(), trips.end());
    return K;
}

}  // namespace

using SpMatR = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Solver::Impl {
    Settings cfg;
    SpMat H, C, Ct;
    SpMatR Cr;  // row-major view for active-row slicing in polish
    Vec g, l, u;
    int n = 0, m = 0;
    Vec rho, rho_inv;
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
    bool pattern_ready = false;

    void refactor() {
        SpMat K = upper_kkt(H, C, cfg.sigma, rho_inv);
        if (!pattern_ready) {
            ldlt.analyzePattern(K);
            pattern_ready = true;
        }
        ldlt.factorize(K);
    }

    void set_rho() {
        rho.resize(m);
        for (int i = 0; i < m; ++i) {
            bool eq = (l[i] > -inf && u[i] < inf && u[i] - l[i] < 1e-12);
            rho[i] = eq ? cfg.rho * cfg.rho_eq_scale : cfg.rho;
        }
        rho_inv = rho.cwiseInverse();
    }

    Vec project(const Vec& v) const {
        Vec z(m);
        for (int i = 0; i < m; ++i) z[i] = clip(v[i], l[i], u[i]);
        return z;
    }

    void residuals(const Vec& x, const Vec& y, Result& res) const {
        Vec Cx = C * x;
        double pr = 0.0, comp = 0.0;
        for (int i = 0; i < m; ++i) {
            double lo = l[i] - Cx[i];
            double hi = Cx[i] - u[i];
            pr = std::max({pr, lo, hi});
            double slack_l = l[i] > -inf ? std::abs(Cx[i] - l[i]) : inf;
            double slack_u = u[i] < inf ? std::abs(Cx[i] - u[i]) : inf;
            // y < 0 pairs with the lower bound, y > 0 with the upper
            double s = y[i] < 0.0 ? slack_l : (y[i] > 0.0 ? slack_u : 0.0);
            if (s < inf) comp = std::max(comp, std::abs(y[i]) * s);
            else comp = std::max(comp, std::abs(y[i]));
        }
        res.primal_residual = std::max(0.0, pr);
        res.dual_residual = (H * x + g + Ct * y).cwiseAbs().maxCoeff();
        res.comp_residual = comp;
        res.objective = 0.5 * x.dot(H * x) + g.dot(x);
    }

    bool primal_infeasible(const Vec& dy) const {
        double norm = dy.cwiseAbs().maxCoeff();
        if (norm < 1e-12) return false;
        Vec d = dy / norm;
        double atd = (Ct * d).cwiseAbs().maxCoeff();
        if (atd > 1e-7) return false;
        double support = 0.0;
        for (int i = 0; i < m; ++i) {
            if (d[i] > 1e-12) {
                if (u[i] >= inf) return false;
                support += u[i] * d[i];
            } else if (d[i] < -1e-12) {
                if (l[i] <= -inf) return false;
                support += l[i] * d[i];
            }
        }
        return support < -1e-7;
    }

    bool dual_infeasible(const Vec& dx) const {
        double norm = dx.cwiseAbs().maxCoeff();
        if (norm < 1e-12) return false;
        Vec d = dx / norm;
        if ((H * d).cwiseAbs().maxCoeff() > 1e-7) return false;
        if (g.dot(d) > -1e-7) return false;
        Vec Cd = C * d;
        for (int i = 0; i < m; ++i) {
            if (u[i] < inf && Cd[i] > 1e-7) return false;
            if (l[i] > -inf && Cd[i] < -1e-7) return false;
        }
        return true;
    }

    // Active-set polish: equality rows plus rows whose multiplier sign marks
    // them active. Solved with a small regularization and one round of
    // iterative refinement against the unregularized system.
    bool polish(Result& res) const {
        std::vector<int> act;
        std::vector<double> rhs_act;
        for (int i = 0; i < m; ++i) {
            bool eq = (l[i] > -inf && u[i] < inf && u[i] - l[i] < 1e-12);
            if (eq) {
                act.push_back(i);
                rhs_act.push_back(l[i]);
            } else if (res.y[i] < -cfg.tol * 1e-2 && l[i] > -inf) {
                act.push_back(i);
                rhs_act.push_back(l[i]);
            } else if (res.y[i] > cfg.tol * 1e-2 && u[i] < inf) {
                act.push_back(i);
                rhs_act.push_back(u[i]);
            }
        }
        const int ma = static_cast<int>(act.size());
        const double delta = 1e-8;
        std::vector<Eigen::Triplet<double>> trips;
        for (int k = 0; k < H.outerSize(); ++k)
            for (SpMat::InnerIterator it(H, k); it; ++it)
                trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        for (int i = 0; i < n; ++i) trips.emplace_back(i, i, delta);
        for (int a = 0; a < ma; ++a) {
            int row = act[static_cast<std::size_t>(a)];
            for (SpMatR::InnerIterator it(Cr, row); it; ++it)
                trips.emplace_back(n + a, static_cast<int>(it.col()), it.value());
            trips.emplace_back(n + a, n + a, -delta);
        }
        SpMat K(n + ma, n + ma);
        K.setFromTriplets(trips.begin(), trips.end());
        Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> fac;
        fac.compute(K);
        if (fac.info() != Eigen::Success) return false;

        Vec rhs(n + ma);
        rhs.head(n) = -g;
        for (int a = 0; a < ma; ++a) rhs[n + a] = rhs_act[static_cast<std::size_t>(a)];
        Vec sol = fac.solve(rhs);
        for (int refine = 0; refine < 3; ++refine) {
            // residual against the unregularized KKT system
            Vec r(n + ma);
            Vec xs = sol.head(n);
            Vec ys = sol.tail(ma);
            Vec hx = H * xs;
            for (int a = 0; a < ma; ++a) {
                int row = act[static_cast<std::size_t>(a)];
                double cx = 0.0;
                for (SpMatR::InnerIterator it(Cr, row); it; ++it) cx += it.value() * xs[it.col()];
                r[n + a] = rhs[n + a] - cx;
                for (SpMatR::InnerIterator it(Cr, row); it; ++it) hx[it.col()] += it.value() * ys[a];
            }
            r.head(n) = -g - hx;
            sol += fac.solve(r);
        }

        Result cand = res;
        cand.x = sol.head(n);
        cand.y.setZero(m);
        for (int a = 0; a < ma; ++a) cand.y[act[static_cast<std::size_t>(a)]] = sol[n + a];
        residuals(cand.x, cand.y, cand);
        if (cand.primal_residual <= std::max(res.primal_residual, cfg.tol) &&
            cand.dual_residual <= std::max(res.dual_residual, cfg.tol)) {
            cand.polished = true;
            cand.status = Status::solved;
            cand.iterations = res.iterations;
            res = cand;
            return true;
        }
        return false;
    }

    Result run(const Vec* x_warm, const Vec* y_warm) {
        Result res;
        Vec x = x_warm && x_warm->size() == n ? *x_warm : Vec::Zero(n);
        Vec y = y_warm && y_warm->size() == m ? *y_warm : Vec::Zero(m);
        Vec z = project(C * x);
        Vec x_prev = x, y_prev = y;

        int it = 0;
        int last_rho_update = 0;
        for (it = 1; it <= cfg.max_iterations; ++it) {
            Vec rhs(n + m);
            rhs.head(n) = cfg.sigma * x - g;
            rhs.tail(m) = z - rho_inv.cwiseProduct(y);
            Vec sol = ldlt.solve(rhs);
            Vec x_tilde = sol.head(n);
            Vec nu = sol.tail(m);
            Vec z_tilde = z + rho_inv.cwiseProduct(nu - y);

            x_prev = x;
            y_prev = y;
            x = cfg.relax * x_tilde + (1.0 - cfg.relax) * x;
            Vec z_relaxed = cfg.relax * z_tilde + (1.0 - cfg.relax) * z;
            Vec v = z_relaxed + rho_inv.cwiseProduct(y);
            z = project(v);
            y = rho.cwiseProduct(v - z);

            if (it % cfg.check_every == 0 || it == cfg.max_iterations) {
                Vec Cx = C * x;
                double rp = (Cx - z).cwiseAbs().maxCoeff();
                double rd = (H * x + g + Ct * y).cwiseAbs().maxCoeff();
                if (rp <= cfg.tol && rd <= cfg.tol) {
                    res.status = Status::solved;
                    break;
                }
                Vec dy = y - y_prev;
                Vec dx = x - x_prev;
                if (primal_infeasible(dy)) {
                    res.status = Status::infeasible;
                    res.x = x;
                    res.y = y;
                    res.iterations = it;
                    residuals(x, y, res);
                    return res;
                }
                if (dual_infeasible(dx)) {
                    res.status = Status::dual_infeasible;
                    res.x = x;
                    res.y = y;
                    res.iterations = it;
                    residuals(x, y, res);
                    return res;
                }
                // adaptive step: balance the scaled residuals
                if (it - last_rho_update >= 50) {
                    double prs = rp / std::max({Cx.cwiseAbs().maxCoeff(), z.cwiseAbs().maxCoeff(), 1.0});
                    double drs = rd / std::max({(H * x).cwiseAbs().maxCoeff(), (Ct * y).cwiseAbs().maxCoeff(),
                                                g.cwiseAbs().maxCoeff(), 1.0});
                    double ratio = std::sqrt(prs / std::max(drs, 1e-16));
                    if (ratio > 5.0 || ratio < 0.2) {
                        double scale = clip(ratio, 1e-3, 1e3);
                        cfg.rho = clip(cfg.rho * scale, 1e-6, 1e6);
                        set_rho();
                        refactor();
                        last_rho_update = it;
                    }
                }
            }
        }

        res.x = x;
        res.y = y;
        res.iterations = std::min(it, cfg.max_iterations);
        residuals(x, y, res);
        if (res.status != Status::solved &&
            res.primal_residual <= cfg.tol && res.dual_residual <= cfg.tol)
            res.status = Status::solved;
        if (cfg.polish && res.status == Status::solved) polish(res);
        return res;
    }
};

Solver::Solver() : impl_(new Impl) {}
Solver::~Solver() = default;
Solver::Solver(Solver&&) noexcept = default;
Solver& Solver::operator=(Solver&&) noexcept = default;

void Solver::setup(const SpMat& H, const Vec& g, const SpMat& C, const Vec& l, const Vec& u,
                   const Settings& settings) {
    impl_->cfg = settings;
    SpMat Hs = SpMat(0.5 * (SpMat(H.transpose()) + H));
    impl_->H = Hs;
    impl_->C = C;
    impl_->Ct = C.transpose();
    impl_->Cr = C;
    impl_->g = g;
    impl_->l = l;
    impl_->u = u;
    impl_->n = static_cast<int>(H.rows());
    impl_->m = static_cast<int>(C.rows());
    impl_->pattern_ready = false;
    impl_->set_rho();
    impl_->refactor();
}

void Solver::update_values(const SpMat& H, const Vec& g, const SpMat& C, const Vec& l, const Vec& u) {
    SpMat Hs = SpMat(0.5 * (SpMat(H.transpose()) + H));
    impl_->H = Hs;
    impl_->C = C;
    impl_->Ct = C.transpose();
    impl_->Cr = C;
    impl_->g = g;
    impl_->l = l;
    impl_->u = u;
    impl_->set_rho();
    impl_->refactor();
}

Result Solver::solve(const Vec* x_warm, const Vec* y_warm) { return impl_->run(x_warm, y_warm); }

Result solve(const Instance& instance, const Settings& settings) {
    const int n = static_cast<int>(instance.H.rows());
    const int ma = static_cast<int>(instance.A.rows());
    std::vector<Eigen::Triplet<double>> trips;
    for (int k = 0; k < instance.A.outerSize(); ++k)
        for (SpMat::InnerIterator it(instance.A, k); it; ++it)
            trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (int i = 0; i < n; ++i) trips.emplace_back(ma + i, i, 1.0);
    SpMat C(ma + n, n);
    C.setFromTriplets(trips.begin(), trips.end());
    Vec l(ma + n), u(ma + n);
    for (int i = 0; i < ma; ++i) {
        l[i] = -inf;
        u[i] = instance.b[i];
    }
    for (int i = 0; i < n; ++i) {
        l[ma + i] = instance.lb.size() ? instance.lb[i] : -inf;
        u[ma + i] = instance.ub.size() ? instance.ub[i] : inf;
    }
    Solver solver;
    solver.setup(instance.H, instance.g, C, l, u, settings);
    return solver.solve();
}

}  // namespace pbs::qp
