#pragma once

#include "d2du/model.hpp"

namespace d2du {

// Medium access probabilities of the three unlicensed contender classes,
// plus the resulting active densities (lambda_act = p * lambda).
struct MapSet {
    double p_CU = 1.0;
    double p_DU = 1.0;
    double p_W = 1.0;
    double lambda_act_CU = 0.0;
    double lambda_act_DU = 0.0;
    double lambda_act_W = 0.0;
};

// Hard-core contention kernel: probability that a contender with energy
// detection threshold P_th wins access against interferer classes with
// densities lam1/lam2/lam3 transmitting at P_C/P_D/P_W. Result clamped to
// [0, 1]. All-zero densities return 1 (nothing is ever sensed busy).
double map_kernel(double P_th, double lam1, double lam2, double lam3,
                  const NetworkConfig& cfg);

// Same, without the final clamp; used to sanity-check quadrature quality.
double map_kernel_unclamped(double P_th, double lam1, double lam2, double lam3,
                            const NetworkConfig& cfg);

// LTE-U and D2D-U sense one subchannel, so they see per-subchannel
// co-class densities; Wi-Fi senses the whole band and sees full densities.
MapSet compute_maps(const DensityVector& lam, double lambda_W, const NetworkConfig& cfg);

}  // namespace d2du
