#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <memory>

namespace pbs::qp {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

constexpr double inf = 1e30;

// min 1/2 x'Hx + g'x  s.t.  A x <= b,  lb <= x <= ub.
// H is symmetrized on input and must be positive semidefinite.
struct Instance {
    SpMat H;
    Vec g;
    SpMat A;   // may have zero rows
    Vec b;
    Vec lb, ub;  // +-inf entries allowed
};

enum class Status { solved, max_iterations, infeasible, dual_infeasible };

struct Settings {
    double tol = 1e-6;
    int max_iterations = 20000;
    double sigma = 1e-6;
    double rho = 0.1;
    double rho_eq_scale = 1e3;
    double relax = 1.6;
    bool polish = true;
    int check_every = 10;
};

struct Result {
    Vec x;
    Vec y;  // multipliers for the stacked constraint rows
    Status status = Status::max_iterations;
    int iterations = 0;
    double primal_residual = 0.0;  // feasibility violation, inf-norm
    double dual_residual = 0.0;    // stationarity ||Hx + g + C'y||_inf
    double comp_residual = 0.0;    // complementary slackness, inf-norm
    double objective = 0.0;
    bool polished = false;
};

// Reusable solver over the canonical two-sided form l <= Cx <= u. The sparsity
// pattern of H and C is fixed at setup; update_values() refreshes numerics
// between solves (receding-horizon use).
class Solver {
public:
    Solver();
    ~Solver();
    Solver(Solver&&) noexcept;
    Solver& operator=(Solver&&) noexcept;

    void setup(const SpMat& H, const Vec& g, const SpMat& C, const Vec& l, const Vec& u,
               const Settings& settings = {});
    void update_values(const SpMat& H, const Vec& g, const SpMat& C, const Vec& l, const Vec& u);
    Result solve(const Vec* x_warm = nullptr, const Vec* y_warm = nullptr);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// One-shot solve of the boxed instance; box bounds become identity rows.
Result solve(const Instance& instance, const Settings& settings = {});

}  // namespace pbs::qp
