#pragma once

#include <Eigen/Dense>
#include <array>
#include <atomic>
#include <vector>

#include "d2du/analytic.hpp"
#include "d2du/model.hpp"

namespace d2du {

// Maximize total throughput over the four user densities, subject to the two
// budget couplings, five QoS floors and nonnegativity.
struct P1Instance {
    NetworkConfig cfg;
    double lambda_all_C = 0.0;  // LTE + LTE-U density budget
    double lambda_all_D = 0.0;  // D2D + D2D-U density budget
    double lambda_W = 0.0;      // fixed Wi-Fi AP density
};

struct P1Options {
    int max_iters = 200;
    double quad_rel_tol = 1e-5;  // engine tolerance while optimizing
    int grid_n = 20;             // grid-search oracle resolution per axis
    double greedy_step = 0.0;    // density per greedy increment; 0: one user
};

// residual order: licensed budget, D2D budget, QoS C/CU/D/DU/W, then the
// four nonnegativity rows; feasible iff all <= 0
constexpr int kNumConstraints = 11;

struct P1Eval {
    double f = 0.0;                           // -R_total in Mbps
    std::array<double, kNumConstraints> g{};  // scaled residuals
    ThroughputReport report;
};

// Scaled view of the problem over one frozen analytic engine, so every
// objective/constraint evaluation along an optimization run differentiates
// the same smooth function.
class P1Problem {
public:
    explicit P1Problem(const P1Instance& inst, P1Options opts = {});

    P1Eval eval(const DensityVector& lam) const;
    // Central differences, one-sided against the nonnegativity boundary.
    void fd_gradient(const DensityVector& lam, const P1Eval& at,
                     Eigen::Vector4d& grad_f,
                     Eigen::Matrix<double, kNumConstraints, 4>& jac_g) const;

    bool feasible(const P1Eval& e, double slack = 1e-9) const;
    double max_violation(const P1Eval& e) const;

    const P1Instance& instance() const { return inst_; }
    const P1Options& options() const { return opts_; }
    const AnalyticEngine& engine() const { return engine_; }
    double lambda_scale() const { return scale_; }
    long eval_count() const { return evals_.load(); }

private:
    P1Instance inst_;
    P1Options opts_;
    AnalyticEngine engine_;
    double scale_;
    mutable std::atomic<long> evals_{0};
};

// min c'S + 1/2 S'HS  s.t.  A S + b <= 0, H positive definite. Dual
// active-set iteration starting from the unconstrained minimizer; an
// inconsistent linearization falls back to an elastic big-M relaxation
// (relaxed = true).
struct QpResult {
    Eigen::VectorXd direction;
    Eigen::VectorXd multipliers;  // one per row of A, zero when inactive
    bool relaxed = false;
};
QpResult solve_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& c,
                  const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

// Quasi-Newton update of the objective-Hessian approximation with Powell
// damping; the result stays symmetric positive definite (eigenvalues
// floored at 1e-8).
Eigen::Matrix4d bfgs_update(const Eigen::Matrix4d& H, const Eigen::Vector4d& dx,
                            const Eigen::Vector4d& dq);

struct SqpIterate {
    int iter;
    double f;              // Mbps-scale objective
    double step_norm;      // scaled step length ||beta * S||
    double beta;
    double max_violation;  // scaled constraint violation
};

enum class SolveStatus { converged, iteration_cap, infeasible, line_search_stall };
const char* to_string(SolveStatus s);

struct P1Solution {
    SolveStatus status = SolveStatus::converged;
    DensityVector lambda;
    ThroughputReport report;
    double r_total = 0.0;
    bool feasible = false;
    double kkt_stationarity = 0.0;
    double kkt_complementarity = 0.0;
    int iterations = 0;
    std::vector<SqpIterate> trajectory;
};

// One-user-at-a-time greedy warm start: alternate LTE-class and D2D-class
// increments onto whichever band raises total throughput, skipping
// placements that break a constraint or lower the total.
DensityVector greedy_init(const P1Problem& prob);

struct BaselineResult {
    DensityVector lambda;
    double r_total = 0.0;
    bool feasible = false;
};
// Split both budgets evenly across the bands; shrink uniformly until the
// QoS constraints hold.
BaselineResult baseline_equal_proportion(const P1Problem& prob);

P1Solution solve_p1(const P1Problem& prob);
P1Solution solve_p1(const P1Instance& inst, P1Options opts = {});

struct GridSearchResult {
    DensityVector lambda;
    double r_total = 0.0;
    bool found = false;
};
// Exhaustive oracle over an n^4 grid of the budget box. The licensed rates
// depend only on (lambda_C, lambda_D) and the unlicensed ones only on
// (lambda_CU, lambda_DU), so the search tabulates two n^2 rate tables and
// combines them.
GridSearchResult grid_search_p1(const P1Problem& prob);

}  // namespace d2du
