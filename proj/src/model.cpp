#include "d2du/model.hpp"

#include <numbers>

namespace d2du {

void NetworkConfig::validate() const {
    auto require = [](bool ok, const char* msg) {
        if (!ok) throw ConfigError(msg);
    };
    require(r_cell > 0.0, "r_cell must be > 0");
    require(L_d > 0.0 && L_d < r_cell, "L_d must be in (0, r_cell)");
    require(L_w > 0.0 && L_w < r_cell, "L_w must be in (0, r_cell)");
    require(P_C > 0.0 && P_D > 0.0 && P_W > 0.0, "transmit powers must be > 0");
    require(P_D < P_C, "P_D must be < P_C");
    require(B_l > 0.0 && B_u > 0.0, "bandwidths must be > 0");
    require(alpha > 2.0 && alpha <= 6.0, "alpha must be in (2, 6]");
    require(P_th_CU > 0.0 && P_th_DU > 0.0 && P_th_W > 0.0,
            "detection thresholds must be > 0");
    require(R_th_C >= 0.0 && R_th_D >= 0.0 && R_th_W >= 0.0, "QoS floors must be >= 0");
    require(noise_psd > 0.0, "noise_psd must be > 0");
    require(tau > 0.0, "tau must be > 0");
}

DerivedQuantities derived_quantities(const NetworkConfig& cfg, const DensityVector& lam) {
    DerivedQuantities d;
    d.S_cell = std::numbers::pi * cfg.r_cell * cfg.r_cell;
    d.K_l = std::max(1.0, lam.lambda_C * d.S_cell);
    d.K_u = std::max(1.0, lam.lambda_CU * d.S_cell);
    d.B_l_sub = cfg.B_l / d.K_l;
    d.B_u_sub = cfg.B_u / d.K_u;
    d.sigma2_l = cfg.noise_psd * d.B_l_sub;
    d.sigma2_u = cfg.noise_psd * d.B_u_sub;
    d.sigma2_w = cfg.noise_psd * cfg.B_u;
    return d;
}

SignalingOverhead signaling_overhead(const NetworkConfig& cfg, const DensityVector& lam,
                                     double M_si, double M_sa) {
    if (M_si < 0.0 || M_sa < 0.0) throw ConfigError("message counts must be >= 0");
    const double users = (lam.lambda_CU + lam.lambda_DU) * std::numbers::pi *
                         cfg.r_cell * cfg.r_cell;
    return {M_si * users, M_sa * users};
}

double compose_total(const NetworkConfig& cfg, const DensityVector& lam,
                     double R_C, double R_D, double R_CU, double R_DU) {
    const double S_cell = std::numbers::pi * cfg.r_cell * cfg.r_cell;
    return S_cell * (lam.lambda_C * R_C + lam.lambda_D * R_D +
                     lam.lambda_CU * R_CU + lam.lambda_DU * R_DU);
}

}  // namespace d2du
