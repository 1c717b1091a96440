#include "d2du/mac.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "d2du/quadrature.hpp"

namespace d2du {

namespace {

constexpr double kPi = std::numbers::pi;

// Inner attenuation average E(zeta) = int_0^1 exp(-zeta * eps^(-alpha/2)) deps.
// The integrand vanishes smoothly at eps -> 0 and forms a boundary layer at
// eps -> 1 for large zeta, so the panel mesh is graded toward both ends.
struct EpsRule {
    std::vector<double> w;
    std::vector<double> pow_neg;  // eps^(-alpha/2) at the nodes
    double inv_p;                 // 2/alpha
    double gamma_c;               // Gamma(1 - 2/alpha), small-zeta expansion

    explicit EpsRule(double alpha) {
        auto rule = quad::panel_rule_gl8(quad::graded_breakpoints(0.0, 1.0, 12, 12));
        w = rule.w;
        pow_neg.resize(rule.x.size());
        for (std::size_t i = 0; i < rule.x.size(); ++i)
            pow_neg[i] = std::pow(rule.x[i], -0.5 * alpha);
        inv_p = 2.0 / alpha;
        gamma_c = std::tgamma(1.0 - inv_p);
    }

    double operator()(double zeta) const {
        if (zeta < 1e-8) return 1.0 - gamma_c * std::pow(zeta, inv_p);
        if (zeta > 745.0) return 0.0;
        double acc = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i)
            acc += w[i] * std::exp(-zeta * pow_neg[i]);
        return acc;
    }
};

}  // namespace

double map_kernel_unclamped(double P_th, double lam1, double lam2, double lam3,
                            const NetworkConfig& cfg) {
    if (!(P_th > 0.0)) throw ConfigError("map_kernel: P_th must be > 0");
    if (lam1 < 0.0 || lam2 < 0.0 || lam3 < 0.0)
        throw ConfigError("map_kernel: densities must be >= 0");
    const double alpha = cfg.alpha;
    const double two_over_a = 2.0 / alpha;
    const double c = lam1 * std::pow(cfg.P_C, two_over_a) +
                     lam2 * std::pow(cfg.P_D, two_over_a) +
                     lam3 * std::pow(cfg.P_W, two_over_a);
    if (c <= 0.0) return 1.0;  // empty contention field: channel never busy

    const double S = std::sin(2.0 * kPi / alpha);
    const double C = std::cos(2.0 * kPi / alpha);
    const double b = P_th * std::pow(alpha * S / (2.0 * kPi * kPi * c), 0.5 * alpha);
    if (!std::isfinite(b)) return 1.0;  // P_th overwhelming any field

    const EpsRule eps_avg(alpha);
    auto integrand = [&](double z) {
        return std::sin(z * S) / (z * std::exp(z * C)) * eps_avg(b * std::pow(z, 0.5 * alpha));
    };

    // Half-period windows of sin(zS); alternating window sums with pairwise
    // (Euler) averaging of the partial sums to accelerate the slow-decay
    // regime b -> 0.
    const double win = kPi / S;
    const int max_windows = 200000;
    double partial = 0.0;
    double avg_prev = 0.0;
    double peak = 0.0;
    int small_streak = 0;
    for (int k = 0; k < max_windows; ++k) {
        const double wv = quad::gl16(integrand, k * win, (k + 1) * win);
        const double prev_partial = partial;
        partial += wv;
        peak = std::max(peak, std::fabs(wv));
        const double avg = 0.5 * (partial + prev_partial);
        const bool decayed = std::fabs(wv) <= 0.5 * peak;  // past the envelope peak
        if (k > 2 && decayed &&
            std::fabs(avg - avg_prev) < 1e-9 * (std::fabs(avg) + 1e-3)) {
            if (++small_streak >= 2)
                return 1.0 - alpha / (2.0 * kPi) * avg;
        } else {
            small_streak = 0;
        }
        avg_prev = avg;
    }
    throw NumericalError("map_kernel: oscillatory z-integral did not converge",
                         1.0 - alpha / (2.0 * kPi) * avg_prev, std::fabs(peak));
}

double map_kernel(double P_th, double lam1, double lam2, double lam3,
                  const NetworkConfig& cfg) {
    const double raw = map_kernel_unclamped(P_th, lam1, lam2, lam3, cfg);
    return std::min(1.0, std::max(0.0, raw));
}

MapSet compute_maps(const DensityVector& lam, double lambda_W, const NetworkConfig& cfg) {
    lam.validate();
    if (lambda_W < 0.0) throw ConfigError("lambda_W must be >= 0");
    const DerivedQuantities d = derived_quantities(cfg, lam);
    MapSet m;
    m.p_CU = map_kernel(cfg.P_th_CU, lam.lambda_CU / d.K_u, lam.lambda_DU / d.K_u,
                        lambda_W, cfg);
    m.p_DU = map_kernel(cfg.P_th_DU, lam.lambda_CU / d.K_u, lam.lambda_DU / d.K_u,
                        lambda_W, cfg);
    m.p_W = map_kernel(cfg.P_th_W, lam.lambda_CU, lam.lambda_DU, lambda_W, cfg);
    m.lambda_act_CU = m.p_CU * lam.lambda_CU;
    m.lambda_act_DU = m.p_DU * lam.lambda_DU;
    m.lambda_act_W = m.p_W * lambda_W;
    return m;
}

}  // namespace d2du
