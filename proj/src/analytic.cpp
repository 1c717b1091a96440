#include "d2du/analytic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "d2du/quadrature.hpp"

namespace d2du {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLn2 = std::numbers::ln2;

}  // namespace

double arc_angle_in_disk(double t, double l, double R) {
    if (t < 0.0) return 0.0;
    if (l <= 1e-12 * R) return t <= R ? 2.0 * kPi : 0.0;
    if (t <= R - l) return 2.0 * kPi;
    if (t >= R + l) return 0.0;
    const double c = std::clamp((t * t + l * l - R * R) / (2.0 * t * l), -1.0, 1.0);
    return 2.0 * std::acos(c);
}

namespace {

// J(w, l) = int t * ang(t; l, R) / (1 + t^alpha / w) dt over the cell disk,
// the exponent integral of the Laplace factor, reduced to one dimension by
// integrating over circles of equal distance to the observer.
double interference_exponent(double w, double l, const NetworkConfig& cfg,
                             double rel_tol) {
    if (w <= 0.0) return 0.0;
    const double R = cfg.r_cell;
    const double a = cfg.alpha;
    auto f = [&](double t) {
        return t * arc_angle_in_disk(t, l, R) / (1.0 + std::pow(t, a) / w);
    };
    const double abs_tol = 1e-13 * kPi * R * R;
    if (l <= 1e-12 * R)
        return quad::integrate_adaptive(f, 0.0, R, rel_tol, abs_tol, 4000,
                                        "laplace exponent");
    return quad::integrate_adaptive(f, 0.0, R - l, rel_tol, abs_tol, 4000,
                                    "laplace exponent (inner)") +
           quad::integrate_adaptive(f, R - l, R + l, rel_tol, abs_tol, 4000,
                                    "laplace exponent (rim)");
}

}  // namespace

double laplace_factor_Q(double s, double lam, double P, double l,
                        const NetworkConfig& cfg, double rel_tol) {
    if (s < 0.0 || lam < 0.0) throw ConfigError("laplace_factor_Q: s, lam must be >= 0");
    if (!(P > 0.0)) throw ConfigError("laplace_factor_Q: P must be > 0");
    if (l < 0.0 || l > cfg.r_cell) throw ConfigError("laplace_factor_Q: l outside cell");
    if (s == 0.0 || lam == 0.0) return 1.0;
    return std::exp(-lam * interference_exponent(s * P, l, cfg, rel_tol));
}

double single_lte_factor_A1(double s, double y, const NetworkConfig& cfg, double rel_tol) {
    if (s < 0.0) throw ConfigError("single_lte_factor_A1: s must be >= 0");
    if (y < 0.0 || y > cfg.r_cell) throw ConfigError("single_lte_factor_A1: y outside cell");
    if (s == 0.0) return 1.0;
    const double R = cfg.r_cell;
    const double a = cfg.alpha;
    const double w = s * cfg.P_C;
    auto f = [&](double t) {
        const double ta = std::pow(t, a);
        return t * arc_angle_in_disk(t, y, R) * (ta / (ta + w));
    };
    double v;
    if (y <= 1e-12 * R) {
        v = quad::integrate_adaptive(f, 0.0, R, rel_tol, 0.0, 4000, "A1");
    } else {
        v = quad::integrate_adaptive(f, 0.0, R - y, rel_tol, 0.0, 4000, "A1 (inner)") +
            quad::integrate_adaptive(f, R - y, R + y, rel_tol, 0.0, 4000, "A1 (rim)");
    }
    return std::clamp(v / (kPi * R * R), 0.0, 1.0);
}

double gated_lte_factor_A2(double s, double y, double p_CU, const NetworkConfig& cfg,
                           double rel_tol) {
    if (p_CU < 0.0 || p_CU > 1.0) throw ConfigError("gated_lte_factor_A2: p_CU not in [0,1]");
    if (p_CU == 0.0) return 1.0;
    return p_CU * single_lte_factor_A1(s, y, cfg, rel_tol) + (1.0 - p_CU);
}

double vartheta(double P, const std::function<double(double, double)>& kernel,
                const RadialWeight& g, const RadialWeight& f, double sigma2,
                const NetworkConfig& cfg, double rel_tol) {
    if (P <= 0.0) return 0.0;
    if (f.kind != RadialWeight::Kind::uniform_disk)
        throw ConfigError("vartheta: signal-distance weight must be a disk density");
    if (!(sigma2 > 0.0)) throw ConfigError("vartheta: sigma2 must be > 0");
    const double a = cfg.alpha;

    auto kernel_avg = [&](double s) {
        if (g.kind == RadialWeight::Kind::dirac_zero) return kernel(s, 0.0);
        return quad::integrate_adaptive(
            [&](double y) { return kernel(s, y) * g.pdf(y); }, 0.0, g.radius,
            0.2 * rel_tol, 1e-12, 4000, "vartheta y-average");
    };
    auto signal_avg = [&](double s) {
        return quad::integrate_adaptive(
            [&](double r) { return f.pdf(r) / (s + std::pow(r, a) / P); }, 0.0, f.radius,
            0.2 * rel_tol, 0.0, 4000, "vartheta r-average");
    };

    // s = (u/(1-u))^alpha / sigma2: unbounded range mapped to (0,1) with the
    // exponent chosen so the s->0 algebraic singularity flattens out.
    const double scale = 1.0 / sigma2;
    auto integrand = [&](double u) {
        const double ratio = u / (1.0 - u);
        const double s = scale * std::pow(ratio, a);
        const double dsdu = scale * a * std::pow(ratio, a - 1.0) /
                            ((1.0 - u) * (1.0 - u));
        const double damp = std::exp(-s * sigma2);
        if (damp == 0.0) return 0.0;
        return damp * kernel_avg(s) * signal_avg(s) * dsdu / kLn2;
    };
    return quad::integrate_adaptive(integrand, 0.0, 1.0, rel_tol, 0.0, 2000,
                                    "vartheta s-integral");
}

// ---------------------------------------------------------------------------
// Table-backed engine

struct AnalyticEngine::Tables {
    int level = 0;
    long Ns = 0, Ny = 0;
    std::vector<double> s, sw;  // mapped s-nodes and weights
    std::vector<double> y;      // off-center distances (l-buckets)
    std::vector<double> gw;     // y-quadrature weight times disk pdf 2y/R^2
    // J[p][j*Ns + i]: exponent integral at w = s_i * P_p, observer row j
    // (row 0: cell center, row j>0: y[j-1]). A1 aligned the same way.
    std::array<std::vector<double>, 3> J;
    std::vector<double> A1;
    // F[c][i]: signal-distance averages for (P_C, r_cell), (P_D, L_d), (P_W, L_w)
    std::array<std::vector<double>, 3> F;
};

AnalyticEngine::AnalyticEngine(const NetworkConfig& cfg, QuadratureOptions opts)
    : cfg_(cfg), opts_(opts) {
    cfg_.validate();
    if (opts_.max_level < 1 || opts_.max_level > 8)
        throw ConfigError("QuadratureOptions: max_level must be in [1, 8]");
    tables_.resize(opts_.max_level + 1);
}

AnalyticEngine::~AnalyticEngine() = default;
AnalyticEngine::AnalyticEngine(AnalyticEngine&&) noexcept = default;
AnalyticEngine& AnalyticEngine::operator=(AnalyticEngine&&) noexcept = default;

const AnalyticEngine::Tables& AnalyticEngine::build_level(int level) {
    if (level < 0 || level > opts_.max_level)
        throw ConfigError("AnalyticEngine: level out of range");
    if (tables_[level]) return *tables_[level];

    auto T = std::make_unique<Tables>();
    T->level = level;
    const double R = cfg_.r_cell;
    const double a = cfg_.alpha;

    // s-rule: mapped rational grid, graded into both endpoints
    {
        const auto mesh = quad::refine_breakpoints(
            quad::graded_breakpoints(0.0, 1.0, 6, 12), 1 + level);
        const auto rule = quad::panel_rule_gl8(mesh);
        const double scale = 1.0 / (cfg_.noise_psd * cfg_.B_u);
        T->Ns = static_cast<long>(rule.x.size());
        T->s.resize(T->Ns);
        T->sw.resize(T->Ns);
        for (long i = 0; i < T->Ns; ++i) {
            const double u = rule.x[i];
            const double ratio = u / (1.0 - u);
            T->s[i] = scale * std::pow(ratio, a);
            T->sw[i] = rule.w[i] * scale * a * std::pow(ratio, a - 1.0) /
                       ((1.0 - u) * (1.0 - u));
        }
    }

    // y-rule over the cell disk
    {
        const auto rule = quad::panel_rule_gl8(
            quad::refine_breakpoints(quad::graded_breakpoints(0.0, R, 1, 1), level));
        T->Ny = static_cast<long>(rule.x.size());
        T->y = rule.x;
        T->gw.resize(T->Ny);
        for (long j = 0; j < T->Ny; ++j)
            T->gw[j] = rule.w[j] * 2.0 * rule.x[j] / (R * R);
    }

    const long Ns = T->Ns, Ny = T->Ny;
    for (auto& Jp : T->J) Jp.assign((Ny + 1) * Ns, 0.0);
    T->A1.assign((Ny + 1) * Ns, 0.0);
    const std::array<double, 3> powers{cfg_.P_C, cfg_.P_D, cfg_.P_W};

#pragma omp parallel for schedule(dynamic)
    for (long j = 0; j <= Ny; ++j) {
        const double l = j == 0 ? 0.0 : T->y[j - 1];
        std::vector<double> tb;
        if (l <= 1e-12 * R) {
            tb = quad::refine_breakpoints(quad::graded_breakpoints(0.0, R, 8, 2), level);
        } else {
            tb = quad::refine_breakpoints(quad::graded_breakpoints(0.0, R - l, 8, 2), level);
            const auto rim = quad::refine_breakpoints(
                quad::graded_breakpoints(R - l, R + l, 2, 6), level);
            tb.insert(tb.end(), rim.begin() + 1, rim.end());
        }
        const auto rule = quad::panel_rule_gl8(tb);
        const long Nt = static_cast<long>(rule.x.size());
        std::vector<double> base(Nt), ta(Nt);
        for (long k = 0; k < Nt; ++k) {
            const double t = rule.x[k];
            base[k] = rule.w[k] * t * arc_angle_in_disk(t, l, R);
            ta[k] = std::pow(t, a);
        }
        for (int p = 0; p < 3; ++p) {
            double* row = &T->J[p][j * Ns];
            for (long i = 0; i < Ns; ++i) {
                const double w = T->s[i] * powers[p];
                double acc = 0.0;
                for (long k = 0; k < Nt; ++k) acc += base[k] * w / (w + ta[k]);
                row[i] = acc;
            }
        }
        double* a1row = &T->A1[j * Ns];
        const double inv_area = 1.0 / (kPi * R * R);
        for (long i = 0; i < Ns; ++i) {
            const double w = T->s[i] * cfg_.P_C;
            double acc = 0.0;
            for (long k = 0; k < Nt; ++k) acc += base[k] * ta[k] / (w + ta[k]);
            a1row[i] = acc * inv_area;
        }
    }

    // signal-distance averages
    const std::array<std::pair<double, double>, 3> combos{
        std::pair{cfg_.P_C, R}, std::pair{cfg_.P_D, cfg_.L_d}, std::pair{cfg_.P_W, cfg_.L_w}};
    for (int c = 0; c < 3; ++c) {
        const auto [P, Rf] = combos[c];
        const auto rule = quad::panel_rule_gl8(
            quad::refine_breakpoints(quad::graded_breakpoints(0.0, Rf, 8, 0, 4), level));
        const long Nr = static_cast<long>(rule.x.size());
        std::vector<double> fa(Nr), ra(Nr);
        for (long k = 0; k < Nr; ++k) {
            fa[k] = rule.w[k] * 2.0 * rule.x[k] / (Rf * Rf);
            ra[k] = std::pow(rule.x[k], a) / P;
        }
        T->F[c].resize(Ns);
        for (long i = 0; i < Ns; ++i) {
            double acc = 0.0;
            for (long k = 0; k < Nr; ++k) acc += fa[k] / (T->s[i] + ra[k]);
            T->F[c][i] = acc;
        }
    }

    tables_[level] = std::move(T);
    return *tables_[level];
}

const AnalyticEngine::Tables& AnalyticEngine::frozen() const {
    if (frozen_level_ < 0)
        throw std::logic_error("AnalyticEngine: calibrate() or set_level() first");
    return *tables_[frozen_level_];
}

void AnalyticEngine::set_level(int level) {
    build_level(level);
    frozen_level_ = level;
}

int AnalyticEngine::level() const { return frozen_level_; }

namespace {

enum Prop { kLte = 0, kD2d, kLteU, kD2dU, kWifi };

}  // namespace

// Single dispatch point for the five propositions over a fixed table level.
struct PropEval {
    const AnalyticEngine::Tables& T;
    const NetworkConfig& cfg;
    const DensityVector& lam;
    double lambda_W;
    const MapSet& maps;

    double operator()(int prop) const {
        const DerivedQuantities d = derived_quantities(cfg, lam);
        const double S_cell = d.S_cell;
        const long Ns = T.Ns, Ny = T.Ny;
        std::vector<double> kbar;

        double sigma2 = 0.0, bandwidth = 0.0, prefactor = 1.0;
        int fcombo = 0;
        switch (prop) {
            case kLte: {
                const double lamp = lam.lambda_D / d.K_l;
                const double* JD = &T.J[1][0];
                sigma2 = d.sigma2_l;
                double acc = 0.0;
                for (long i = 0; i < Ns; ++i)
                    acc += T.sw[i] * std::exp(-T.s[i] * sigma2 - lamp * JD[i]) * T.F[0][i];
                return d.B_l_sub * acc / kLn2;
            }
            case kLteU: {
                const double lamp = maps.p_DU * lam.lambda_DU / d.K_u;
                const double lw = maps.p_W * lambda_W;
                const double* JD = &T.J[1][0];
                const double* JW = &T.J[2][0];
                sigma2 = d.sigma2_u;
                double acc = 0.0;
                for (long i = 0; i < Ns; ++i)
                    acc += T.sw[i] *
                           std::exp(-T.s[i] * sigma2 - lamp * JD[i] - lw * JW[i]) *
                           T.F[0][i];
                return maps.p_CU * d.B_u_sub * acc / kLn2;
            }
            case kD2d: {
                const double lamp = std::max(0.0, lam.lambda_D - 1.0 / S_cell) / d.K_l;
                sigma2 = d.sigma2_l;
                bandwidth = d.B_l_sub;
                fcombo = 1;
                kbar.assign(Ns, 0.0);
                for (long j = 0; j < Ny; ++j) {
                    const double g = T.gw[j];
                    const double* JD = &T.J[1][(j + 1) * Ns];
                    const double* A1 = &T.A1[(j + 1) * Ns];
                    for (long i = 0; i < Ns; ++i)
                        kbar[i] += g * A1[i] * std::exp(-lamp * JD[i]);
                }
                break;
            }
            case kD2dU: {
                const double lamp =
                    maps.p_DU * std::max(0.0, lam.lambda_DU - 1.0 / S_cell) / d.K_u;
                const double lw = maps.p_W * lambda_W;
                sigma2 = d.sigma2_u;
                bandwidth = d.B_u_sub;
                prefactor = maps.p_DU;
                fcombo = 1;
                kbar.assign(Ns, 0.0);
                for (long j = 0; j < Ny; ++j) {
                    const double g = T.gw[j];
                    const double* JD = &T.J[1][(j + 1) * Ns];
                    const double* JW = &T.J[2][(j + 1) * Ns];
                    const double* A1 = &T.A1[(j + 1) * Ns];
                    for (long i = 0; i < Ns; ++i)
                        kbar[i] += g * (maps.p_CU * A1[i] + (1.0 - maps.p_CU)) *
                                   std::exp(-lamp * JD[i] - lw * JW[i]);
                }
                break;
            }
            case kWifi: {
                const double lcu = maps.p_CU * lam.lambda_CU;
                const double ldu = maps.p_DU * lam.lambda_DU;
                const double lw = maps.p_W * std::max(0.0, lambda_W - 1.0 / S_cell);
                sigma2 = d.sigma2_w;
                bandwidth = cfg.B_u;
                prefactor = maps.p_W;
                fcombo = 2;
                kbar.assign(Ns, 0.0);
                for (long j = 0; j < Ny; ++j) {
                    const double g = T.gw[j];
                    const double* JC = &T.J[0][(j + 1) * Ns];
                    const double* JD = &T.J[1][(j + 1) * Ns];
                    const double* JW = &T.J[2][(j + 1) * Ns];
                    for (long i = 0; i < Ns; ++i)
                        kbar[i] += g * std::exp(-lcu * JC[i] - ldu * JD[i] - lw * JW[i]);
                }
                break;
            }
        }
        double acc = 0.0;
        for (long i = 0; i < Ns; ++i)
            acc += T.sw[i] * std::exp(-T.s[i] * sigma2) * kbar[i] * T.F[fcombo][i];
        return prefactor * bandwidth * acc / kLn2;
    }
};

void AnalyticEngine::calibrate(const DensityVector& point, double lambda_W) {
    calibrate(std::span<const DensityVector>(&point, 1), lambda_W);
}

void AnalyticEngine::calibrate(std::span<const DensityVector> probe_points,
                               double lambda_W) {
    if (probe_points.empty()) throw ConfigError("calibrate: need at least one probe point");
    static const char* names[5] = {"R_C", "R_D", "R_CU", "R_DU", "R_W"};

    std::vector<MapSet> maps;
    maps.reserve(probe_points.size());
    for (const auto& p : probe_points) maps.push_back(compute_maps(p, lambda_W, cfg_));

    double worst = 0.0;
    const char* worst_name = names[0];
    for (int L = 0; L + 1 <= opts_.max_level; ++L) {
        const Tables& coarse = build_level(L);
        const Tables& fine = build_level(L + 1);
        bool ok = true;
        worst = 0.0;
        const double floor = 1e-12 * cfg_.B_u;
        for (std::size_t k = 0; k < probe_points.size(); ++k) {
            PropEval ec{coarse, cfg_, probe_points[k], lambda_W, maps[k]};
            PropEval ef{fine, cfg_, probe_points[k], lambda_W, maps[k]};
            for (int prop = 0; prop < 5; ++prop) {
                const double va = ec(prop);
                const double vb = ef(prop);
                const double rel = std::fabs(vb - va) / std::max(std::fabs(vb), floor);
                if (rel > worst) {
                    worst = rel;
                    worst_name = names[prop];
                }
                if (rel > opts_.rel_tol) ok = false;
            }
        }
        if (ok) {
            frozen_level_ = L + 1;
            return;
        }
    }
    throw NumericalError(std::string("AnalyticEngine: ") + worst_name +
                             " not self-consistent at max refinement level",
                         0.0, worst);
}

double AnalyticEngine::throughput_lte(const DensityVector& lam) const {
    lam.validate();
    MapSet none;
    return PropEval{frozen(), cfg_, lam, 0.0, none}(kLte);
}

double AnalyticEngine::throughput_d2d(const DensityVector& lam) const {
    lam.validate();
    MapSet none;
    return PropEval{frozen(), cfg_, lam, 0.0, none}(kD2d);
}

double AnalyticEngine::throughput_lteu(const DensityVector& lam, double lambda_W,
                                       const MapSet& maps) const {
    lam.validate();
    return PropEval{frozen(), cfg_, lam, lambda_W, maps}(kLteU);
}

double AnalyticEngine::throughput_d2du(const DensityVector& lam, double lambda_W,
                                       const MapSet& maps) const {
    lam.validate();
    return PropEval{frozen(), cfg_, lam, lambda_W, maps}(kD2dU);
}

double AnalyticEngine::throughput_wifi(const DensityVector& lam, double lambda_W,
                                       const MapSet& maps) const {
    lam.validate();
    return PropEval{frozen(), cfg_, lam, lambda_W, maps}(kWifi);
}

double AnalyticEngine::total_throughput(const DensityVector& lam, double lambda_W) const {
    const MapSet maps = compute_maps(lam, lambda_W, cfg_);
    return compose_total(cfg_, lam, throughput_lte(lam), throughput_d2d(lam),
                         throughput_lteu(lam, lambda_W, maps),
                         throughput_d2du(lam, lambda_W, maps));
}

ThroughputReport AnalyticEngine::report(const DensityVector& lam, double lambda_W) const {
    const MapSet maps = compute_maps(lam, lambda_W, cfg_);
    ThroughputReport rep;
    rep.source = ReportSource::analytic;
    rep.R_C.value = throughput_lte(lam);
    rep.R_D.value = throughput_d2d(lam);
    rep.R_CU.value = throughput_lteu(lam, lambda_W, maps);
    rep.R_DU.value = throughput_d2du(lam, lambda_W, maps);
    rep.R_W.value = throughput_wifi(lam, lambda_W, maps);
    rep.p_CU.value = maps.p_CU;
    rep.p_DU.value = maps.p_DU;
    rep.p_W.value = maps.p_W;
    rep.R_total.value = compose_total(cfg_, lam, rep.R_C.value, rep.R_D.value,
                                      rep.R_CU.value, rep.R_DU.value);
    return rep;
}

namespace {

AnalyticEngine one_shot(const DensityVector& lam, double lambda_W,
                        const NetworkConfig& cfg, QuadratureOptions opts) {
    AnalyticEngine eng(cfg, opts);
    eng.calibrate(lam, lambda_W);
    return eng;
}

}  // namespace

double throughput_lte(const DensityVector& lam, const NetworkConfig& cfg,
                      QuadratureOptions opts) {
    return one_shot(lam, 0.0, cfg, opts).throughput_lte(lam);
}

double throughput_d2d(const DensityVector& lam, const NetworkConfig& cfg,
                      QuadratureOptions opts) {
    return one_shot(lam, 0.0, cfg, opts).throughput_d2d(lam);
}

double throughput_lteu(const DensityVector& lam, double lambda_W, const NetworkConfig& cfg,
                       QuadratureOptions opts) {
    const auto eng = one_shot(lam, lambda_W, cfg, opts);
    return eng.throughput_lteu(lam, lambda_W, compute_maps(lam, lambda_W, cfg));
}

double throughput_d2du(const DensityVector& lam, double lambda_W, const NetworkConfig& cfg,
                       QuadratureOptions opts) {
    const auto eng = one_shot(lam, lambda_W, cfg, opts);
    return eng.throughput_d2du(lam, lambda_W, compute_maps(lam, lambda_W, cfg));
}

double throughput_wifi(const DensityVector& lam, double lambda_W, const NetworkConfig& cfg,
                       QuadratureOptions opts) {
    const auto eng = one_shot(lam, lambda_W, cfg, opts);
    return eng.throughput_wifi(lam, lambda_W, compute_maps(lam, lambda_W, cfg));
}

double total_throughput(const DensityVector& lam, double lambda_W, const NetworkConfig& cfg,
                        QuadratureOptions opts) {
    return one_shot(lam, lambda_W, cfg, opts).total_throughput(lam, lambda_W);
}

}  // namespace d2du
