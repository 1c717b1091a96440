#include "d2du/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "d2du/mac.hpp"

namespace d2du {

namespace {

constexpr double kMbps = 1e6;

std::vector<DensityVector> probe_corners(const P1Instance& inst) {
    const double bc = inst.lambda_all_C, bd = inst.lambda_all_D;
    return {
        DensityVector{0, 0, 0, 0},
        DensityVector{bc, bd, 0, 0},
        DensityVector{0, 0, bc, bd},
        DensityVector{0.5 * bc, 0.5 * bd, 0.5 * bc, 0.5 * bd},
        DensityVector{bc, 0, 0, bd},
        DensityVector{0, bd, bc, 0},
    };
}

}  // namespace

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::converged: return "converged";
        case SolveStatus::iteration_cap: return "iteration_cap";
        case SolveStatus::infeasible: return "infeasible";
        case SolveStatus::line_search_stall: return "line_search_stall";
    }
    return "unknown";
}

P1Problem::P1Problem(const P1Instance& inst, P1Options opts)
    : inst_(inst),
      opts_(opts),
      engine_(inst.cfg, QuadratureOptions{opts.quad_rel_tol, 4}) {
    if (inst_.lambda_all_C < 0.0 || inst_.lambda_all_D < 0.0 || inst_.lambda_W < 0.0)
        throw ConfigError("P1Instance: budgets and lambda_W must be >= 0");
    const double S_cell = std::numbers::pi * inst_.cfg.r_cell * inst_.cfg.r_cell;
    scale_ = std::max({inst_.lambda_all_C, inst_.lambda_all_D, 1.0 / S_cell});
    const auto probes = probe_corners(inst_);
    engine_.calibrate(std::span<const DensityVector>(probes.data(), probes.size()),
                      inst_.lambda_W);
}

P1Eval P1Problem::eval(const DensityVector& lam) const {
    for (int i = 0; i < 4; ++i)
        if (!std::isfinite(lam[i]))
            throw NumericalError("P1 eval: non-finite density component " +
                                 std::to_string(i));
    evals_.fetch_add(1, std::memory_order_relaxed);
    P1Eval out;
    out.report = engine_.report(lam, inst_.lambda_W);
    out.f = -out.report.R_total.value / kMbps;
    const auto& cfg = inst_.cfg;
    out.g[0] = (lam.lambda_C + lam.lambda_CU - inst_.lambda_all_C) / scale_;
    out.g[1] = (lam.lambda_D + lam.lambda_DU - inst_.lambda_all_D) / scale_;
    out.g[2] = (cfg.R_th_C - out.report.R_C.value) / kMbps;
    out.g[3] = (cfg.R_th_C - out.report.R_CU.value) / kMbps;
    out.g[4] = (cfg.R_th_D - out.report.R_D.value) / kMbps;
    out.g[5] = (cfg.R_th_D - out.report.R_DU.value) / kMbps;
    out.g[6] = (cfg.R_th_W - out.report.R_W.value) / kMbps;
    for (int i = 0; i < 4; ++i) out.g[7 + i] = -lam[i] / scale_;
    return out;
}

namespace {

// A per-user QoS row binds only while its class is populated.
bool qos_row_applies(int row, const DensityVector& lam, double lambda_W) {
    switch (row) {
        case 2: return lam.lambda_C > 0.0;
        case 3: return lam.lambda_CU > 0.0;
        case 4: return lam.lambda_D > 0.0;
        case 5: return lam.lambda_DU > 0.0;
        case 6: return lambda_W > 0.0;
        default: return true;
    }
}

}  // namespace

bool P1Problem::feasible(const P1Eval& e, double slack) const {
    const DensityVector& lam = [&]() -> const DensityVector& {
        static thread_local DensityVector dummy;
        dummy.lambda_C = -scale_ * e.g[7];
        dummy.lambda_D = -scale_ * e.g[8];
        dummy.lambda_CU = -scale_ * e.g[9];
        dummy.lambda_DU = -scale_ * e.g[10];
        return dummy;
    }();
    for (int i = 0; i < kNumConstraints; ++i) {
        if (!qos_row_applies(i, lam, inst_.lambda_W)) continue;
        if (e.g[i] > slack) return false;
    }
    return true;
}

double P1Problem::max_violation(const P1Eval& e) const {
    const DensityVector lam{-scale_ * e.g[7], -scale_ * e.g[8], -scale_ * e.g[9],
                            -scale_ * e.g[10]};
    double v = 0.0;
    for (int i = 0; i < kNumConstraints; ++i) {
        if (!qos_row_applies(i, lam, inst_.lambda_W)) continue;
        v = std::max(v, e.g[i]);
    }
    return v;
}

void P1Problem::fd_gradient(const DensityVector& lam, const P1Eval& at,
                            Eigen::Vector4d& grad_f,
                            Eigen::Matrix<double, kNumConstraints, 4>& jac_g) const {
    for (int i = 0; i < 4; ++i) {
        const double h = std::max(1e-8, 1e-4 * std::fabs(lam[i]));
        DensityVector hi = lam;
        hi[i] += h;
        const P1Eval ehi = eval(hi);
        if (lam[i] - h < 0.0) {
            // one-sided against the nonnegativity boundary
            grad_f[i] = (ehi.f - at.f) / h * scale_;
            for (int r = 0; r < kNumConstraints; ++r)
                jac_g(r, i) = (ehi.g[r] - at.g[r]) / h * scale_;
        } else {
            DensityVector lo = lam;
            lo[i] -= h;
            const P1Eval elo = eval(lo);
            grad_f[i] = (ehi.f - elo.f) / (2.0 * h) * scale_;
            for (int r = 0; r < kNumConstraints; ++r)
                jac_g(r, i) = (ehi.g[r] - elo.g[r]) / (2.0 * h) * scale_;
        }
        if (!std::isfinite(grad_f[i]))
            throw NumericalError("fd_gradient: non-finite derivative for component " +
                                 std::to_string(i));
    }
}

// ---------------------------------------------------------------------------
// QP subproblem

namespace {

struct KktOut {
    Eigen::VectorXd S;
    Eigen::VectorXd mu;  // one per working-set row
    bool ok = false;
};

KktOut solve_kkt(const Eigen::MatrixXd& H, const Eigen::VectorXd& c,
                 const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                 const std::vector<int>& working) {
    const long n = H.cols();
    const long k = static_cast<long>(working.size());
    Eigen::MatrixXd K(n + k, n + k);
    K.setZero();
    K.topLeftCorner(n, n) = H;
    for (long j = 0; j < k; ++j) {
        K.block(0, n + j, n, 1) = A.row(working[j]).transpose();
        K.block(n + j, 0, 1, n) = A.row(working[j]);
    }
    Eigen::VectorXd rhs(n + k);
    rhs.head(n) = -c;
    for (long j = 0; j < k; ++j) rhs(n + j) = -b(working[j]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    KktOut out;
    if (!lu.isInvertible()) return out;
    const Eigen::VectorXd x = lu.solve(rhs);
    out.S = x.head(n);
    out.mu = x.tail(k);
    out.ok = true;
    return out;
}

bool active_set_core(const Eigen::MatrixXd& H, const Eigen::VectorXd& c,
                     const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                     QpResult& result) {
    const long n = H.cols();
    const long m = A.rows();
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() != Eigen::Success) return false;
    Eigen::VectorXd S = -llt.solve(c);
    std::vector<int> working;
    Eigen::VectorXd mu_w;

    const int cap = 60 * static_cast<int>(m + 1);
    for (int iter = 0; iter < cap; ++iter) {
        // most violated constraint outside the working set
        int worst = -1;
        double worst_v = 1e-10;
        for (long i = 0; i < m; ++i) {
            if (std::find(working.begin(), working.end(), static_cast<int>(i)) !=
                working.end())
                continue;
            const double v = A.row(i).dot(S) + b(i);
            if (v > worst_v * std::max(1.0, std::fabs(b(i)))) {
                worst = static_cast<int>(i);
                worst_v = v / std::max(1.0, std::fabs(b(i)));
            }
        }
        if (worst < 0) {
            result.direction = S;
            result.multipliers = Eigen::VectorXd::Zero(m);
            for (std::size_t j = 0; j < working.size(); ++j)
                result.multipliers(working[j]) = mu_w(j);
            return true;
        }
        working.push_back(worst);

        // re-solve on the working set, dropping negative multipliers
        for (int inner = 0; inner <= m + 1; ++inner) {
            KktOut kkt = solve_kkt(H, c, A, b, working);
            if (!kkt.ok) {
                // linearly dependent row: discard the newcomer
                working.pop_back();
                if (inner == 0 && !working.empty()) return false;
                break;
            }
            long drop = -1;
            double most_neg = -1e-9;
            for (long j = 0; j < kkt.mu.size(); ++j) {
                if (kkt.mu(j) < most_neg) {
                    most_neg = kkt.mu(j);
                    drop = j;
                }
            }
            if (drop < 0) {
                S = kkt.S;
                mu_w = kkt.mu;
                break;
            }
            working.erase(working.begin() + drop);
        }
    }
    return false;
}

}  // namespace

QpResult solve_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& c,
                  const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
    if (H.rows() != H.cols() || H.cols() != c.size() || A.rows() != b.size() ||
        (A.rows() > 0 && A.cols() != c.size()))
        throw ConfigError("solve_qp: inconsistent dimensions");
    QpResult result;
    if (active_set_core(H, c, A, b, result)) return result;

    // elastic relaxation: minimize the model plus big-M slack on violations
    const long n = H.cols();
    const long m = A.rows();
    const double big_m = 1e5 * (1.0 + c.lpNorm<Eigen::Infinity>());
    const double ridge = 1e-8 * (1.0 + H.trace());
    Eigen::MatrixXd He = Eigen::MatrixXd::Zero(n + m, n + m);
    He.topLeftCorner(n, n) = H;
    He.bottomRightCorner(m, m) = ridge * Eigen::MatrixXd::Identity(m, m);
    Eigen::VectorXd ce(n + m);
    ce.head(n) = c;
    ce.tail(m).setConstant(big_m);
    Eigen::MatrixXd Ae = Eigen::MatrixXd::Zero(2 * m, n + m);
    Eigen::VectorXd be = Eigen::VectorXd::Zero(2 * m);
    Ae.topLeftCorner(m, n) = A;
    Ae.topRightCorner(m, m) = -Eigen::MatrixXd::Identity(m, m);
    Ae.bottomRightCorner(m, m) = -Eigen::MatrixXd::Identity(m, m);
    be.head(m) = b;

    QpResult relaxed;
    if (!active_set_core(He, ce, Ae, be, relaxed))
        throw NumericalError("solve_qp: elastic relaxation failed to converge");
    result.direction = relaxed.direction.head(n);
    result.multipliers = relaxed.multipliers.head(m);
    result.relaxed = true;
    return result;
}

Eigen::Matrix4d bfgs_update(const Eigen::Matrix4d& H, const Eigen::Vector4d& dx,
                            const Eigen::Vector4d& dq) {
    if (dx.squaredNorm() == 0.0) return H;
    const Eigen::Vector4d Hdx = H * dx;
    const double sHs = dx.dot(Hdx);
    if (!(sHs > 0.0)) return Eigen::Matrix4d::Identity();
    double sy = dq.dot(dx);
    Eigen::Vector4d q = dq;
    if (sy < 0.2 * sHs) {
        // Powell damping keeps the curvature condition positive
        const double theta = 0.8 * sHs / (sHs - sy);
        q = theta * dq + (1.0 - theta) * Hdx;
        sy = q.dot(dx);
    }
    Eigen::Matrix4d out = H + (q * q.transpose()) / sy -
                          (Hdx * Hdx.transpose()) / sHs;
    out = 0.5 * (out + out.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(out);
    const Eigen::Vector4d vals = es.eigenvalues().cwiseMax(1e-8);
    return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
}

// ---------------------------------------------------------------------------
// Greedy warm start and baselines

DensityVector greedy_init(const P1Problem& prob) {
    const P1Instance& inst = prob.instance();
    const double S_cell = std::numbers::pi * inst.cfg.r_cell * inst.cfg.r_cell;
    const double step = prob.options().greedy_step > 0.0 ? prob.options().greedy_step
                                                         : 1.0 / S_cell;
    DensityVector lam{};
    P1Eval cur = prob.eval(lam);
    if (!prob.feasible(cur)) return lam;

    bool can_place[2] = {true, true};  // LTE-class, D2D-class
    const int max_rounds =
        static_cast<int>((inst.lambda_all_C + inst.lambda_all_D) / step) + 4;
    for (int round = 0; round < max_rounds && (can_place[0] || can_place[1]); ++round) {
        for (int cls = 0; cls < 2; ++cls) {
            if (!can_place[cls]) continue;
            const int licensed = cls == 0 ? 0 : 1;
            const int unlicensed = cls == 0 ? 2 : 3;
            const double budget = cls == 0 ? inst.lambda_all_C : inst.lambda_all_D;
            const double used = cls == 0 ? lam.lambda_C + lam.lambda_CU
                                         : lam.lambda_D + lam.lambda_DU;
            bool placed = false;
            if (budget - used >= step * (1.0 - 1e-9)) {
                double best_total = cur.report.R_total.value;
                DensityVector best_lam;
                P1Eval best_eval;
                for (int idx : {licensed, unlicensed}) {
                    DensityVector cand = lam;
                    cand[idx] += step;
                    P1Eval e = prob.eval(cand);
                    if (!prob.feasible(e)) continue;
                    if (e.report.R_total.value > best_total) {
                        best_total = e.report.R_total.value;
                        best_lam = cand;
                        best_eval = e;
                        placed = true;
                    }
                }
                if (placed) {
                    lam = best_lam;
                    cur = best_eval;
                }
            }
            if (!placed) can_place[cls] = false;
        }
    }
    return lam;
}

BaselineResult baseline_equal_proportion(const P1Problem& prob) {
    const P1Instance& inst = prob.instance();
    const DensityVector full{0.5 * inst.lambda_all_C, 0.5 * inst.lambda_all_D,
                             0.5 * inst.lambda_all_C, 0.5 * inst.lambda_all_D};
    auto at = [&](double t) {
        return DensityVector{t * full.lambda_C, t * full.lambda_D, t * full.lambda_CU,
                             t * full.lambda_DU};
    };
    BaselineResult res;
    P1Eval e = prob.eval(full);
    if (prob.feasible(e)) {
        res.lambda = full;
        res.r_total = e.report.R_total.value;
        res.feasible = true;
        return res;
    }
    P1Eval zero = prob.eval(at(0.0));
    if (!prob.feasible(zero)) return res;  // not even the empty split works
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 50; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (prob.feasible(prob.eval(at(mid))))
            lo = mid;
        else
            hi = mid;
    }
    res.lambda = at(lo);
    P1Eval fe = prob.eval(res.lambda);
    res.r_total = fe.report.R_total.value;
    res.feasible = prob.feasible(fe);
    return res;
}

// ---------------------------------------------------------------------------
// SQP driver

namespace {

Eigen::VectorXd g_vector(const P1Eval& e) {
    Eigen::VectorXd g(kNumConstraints);
    for (int i = 0; i < kNumConstraints; ++i) g(i) = e.g[i];
    return g;
}

double merit_violation(const P1Eval& e) {
    double v = 0.0;
    for (int i = 0; i < kNumConstraints; ++i) v += std::max(0.0, e.g[i]);
    return v;
}

}  // namespace

P1Solution solve_p1(const P1Problem& prob) {
    const P1Instance& inst = prob.instance();
    const P1Options& opts = prob.options();
    const double tau = inst.cfg.tau;
    const double scale = prob.lambda_scale();

    P1Solution sol;
    DensityVector lam = greedy_init(prob);
    P1Eval cur = prob.eval(lam);
    if (!prob.feasible(cur)) {
        sol.status = SolveStatus::infeasible;
        sol.lambda = lam;
        sol.report = cur.report;
        return sol;
    }

    DensityVector best_lam = lam;
    P1Eval best = cur;

    Eigen::Matrix4d H = Eigen::Matrix4d::Identity();
    double mu_pen = 1.0;
    Eigen::Vector4d grad;
    Eigen::Matrix<double, kNumConstraints, 4> jac;
    prob.fd_gradient(lam, cur, grad, jac);

    bool reset_used = false;
    sol.status = SolveStatus::iteration_cap;
    QpResult qp;
    int k = 0;
    for (; k < opts.max_iters; ++k) {
        qp = solve_qp(H, grad, jac, g_vector(cur));
        const Eigen::Vector4d S = qp.direction;
        mu_pen = std::max(mu_pen, 1.5 * qp.multipliers.lpNorm<Eigen::Infinity>() + 1e-3);

        const double viol = merit_violation(cur);
        if (S.norm() < 1e-10 && viol < 1e-9) {
            sol.status = SolveStatus::converged;
            break;
        }
        const double descent = grad.dot(S) - mu_pen * viol;
        if (descent >= 0.0) {
            if (!reset_used) {
                H = Eigen::Matrix4d::Identity();
                reset_used = true;
                continue;
            }
            sol.status = SolveStatus::line_search_stall;
            break;
        }

        const double phi0 = cur.f + mu_pen * viol;
        double beta = 1.0;
        bool accepted = false;
        DensityVector trial;
        P1Eval trial_eval;
        for (int bs = 0; bs <= 20; ++bs, beta *= 0.5) {
            trial = lam;
            for (int i = 0; i < 4; ++i)
                trial[i] = std::max(0.0, lam[i] + beta * scale * S(i));
            trial_eval = prob.eval(trial);
            const double phi = trial_eval.f + mu_pen * merit_violation(trial_eval);
            if (phi <= phi0 + 1e-4 * beta * descent) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (!reset_used) {
                H = Eigen::Matrix4d::Identity();
                reset_used = true;
                continue;
            }
            sol.status = SolveStatus::line_search_stall;
            break;
        }
        reset_used = false;

        Eigen::Vector4d grad_next;
        Eigen::Matrix<double, kNumConstraints, 4> jac_next;
        prob.fd_gradient(trial, trial_eval, grad_next, jac_next);
        H = bfgs_update(H, beta * S, grad_next - grad);

        const double df = std::fabs(trial_eval.f - cur.f);
        lam = trial;
        cur = trial_eval;
        grad = grad_next;
        jac = jac_next;
        sol.trajectory.push_back(
            {k, cur.f, beta * S.norm(), beta, prob.max_violation(cur)});
        if (prob.feasible(cur) && cur.f < best.f) {
            best = cur;
            best_lam = lam;
        }
        if (df < tau) {
            sol.status = SolveStatus::converged;
            break;
        }
    }
    sol.iterations = std::min(k + 1, opts.max_iters);

    // KKT residuals at the terminal iterate
    {
        QpResult fin = solve_qp(H, grad, jac, g_vector(cur));
        Eigen::Vector4d station = grad;
        for (int i = 0; i < kNumConstraints; ++i)
            station += fin.multipliers(i) * jac.row(i).transpose();
        sol.kkt_stationarity = station.lpNorm<Eigen::Infinity>() /
                               std::max(1.0, grad.lpNorm<Eigen::Infinity>());
        double compl_max = 0.0;
        for (int i = 0; i < kNumConstraints; ++i)
            compl_max = std::max(compl_max, std::fabs(fin.multipliers(i) * cur.g[i]));
        sol.kkt_complementarity = compl_max / std::max(1.0, std::fabs(cur.f));
    }

    // snap droplet densities to exact zero when it costs nothing
    DensityVector snapped = best_lam;
    bool changed = false;
    for (int i = 0; i < 4; ++i)
        if (snapped[i] > 0.0 && snapped[i] < 1e-10) {
            snapped[i] = 0.0;
            changed = true;
        }
    if (changed) {
        P1Eval se = prob.eval(snapped);
        if (prob.feasible(se) && se.f <= best.f + tau) {
            best = se;
            best_lam = snapped;
        }
    }

    sol.lambda = best_lam;
    sol.report = best.report;
    sol.r_total = best.report.R_total.value;
    sol.feasible = prob.feasible(best);
    return sol;
}

P1Solution solve_p1(const P1Instance& inst, P1Options opts) {
    P1Problem prob(inst, opts);
    return solve_p1(prob);
}

GridSearchResult grid_search_p1(const P1Problem& prob) {
    const P1Instance& inst = prob.instance();
    const int n = prob.options().grid_n;
    if (n < 2) throw ConfigError("grid_search_p1: grid_n must be >= 2");
    const auto& eng = prob.engine();
    const auto& cfg = inst.cfg;
    const double S_cell = std::numbers::pi * cfg.r_cell * cfg.r_cell;

    auto axis = [n](double hi) {
        std::vector<double> v(n);
        for (int i = 0; i < n; ++i) v[i] = hi * i / (n - 1);
        return v;
    };
    const auto lc = axis(inst.lambda_all_C), ld = axis(inst.lambda_all_D);
    const auto lcu = axis(inst.lambda_all_C), ldu = axis(inst.lambda_all_D);

    // licensed rates depend on (lambda_C, lambda_D) only
    std::vector<double> RC(n * n), RD(n * n);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const DensityVector v{lc[i], ld[j], 0, 0};
            RC[i * n + j] = eng.throughput_lte(v);
            RD[i * n + j] = eng.throughput_d2d(v);
        }
    // unlicensed rates depend on (lambda_CU, lambda_DU) only
    std::vector<double> RCU(n * n), RDU(n * n), RW(n * n);
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
            const DensityVector v{0, 0, lcu[k], ldu[l]};
            const MapSet maps = compute_maps(v, inst.lambda_W, cfg);
            RCU[k * n + l] = eng.throughput_lteu(v, inst.lambda_W, maps);
            RDU[k * n + l] = eng.throughput_d2du(v, inst.lambda_W, maps);
            RW[k * n + l] = eng.throughput_wifi(v, inst.lambda_W, maps);
        }

    GridSearchResult res;
    const double tol = 1e-12;
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            if (lc[i] + lcu[k] > inst.lambda_all_C * (1.0 + tol) + tol) continue;
            for (int j = 0; j < n; ++j)
                for (int l = 0; l < n; ++l) {
                    if (ld[j] + ldu[l] > inst.lambda_all_D * (1.0 + tol) + tol) continue;
                    if (lc[i] > 0 && RC[i * n + j] < cfg.R_th_C) continue;
                    if (ld[j] > 0 && RD[i * n + j] < cfg.R_th_D) continue;
                    if (lcu[k] > 0 && RCU[k * n + l] < cfg.R_th_C) continue;
                    if (ldu[l] > 0 && RDU[k * n + l] < cfg.R_th_D) continue;
                    if (inst.lambda_W > 0 && RW[k * n + l] < cfg.R_th_W) continue;
                    const double total =
                        S_cell * (lc[i] * RC[i * n + j] + ld[j] * RD[i * n + j] +
                                  lcu[k] * RCU[k * n + l] + ldu[l] * RDU[k * n + l]);
                    if (!res.found || total > res.r_total) {
                        res.found = true;
                        res.r_total = total;
                        res.lambda = DensityVector{lc[i], ld[j], lcu[k], ldu[l]};
                    }
                }
        }
    return res;
}

}  // namespace d2du
