#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace d2du {

// Bad scenario/parameter input. The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A numerical routine failed to converge. Carries the best estimate it
// reached and the residual error bound. The CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
    double estimate = 0.0;
    double error_bound = 0.0;
    NumericalError(const std::string& what, double est, double bound)
        : std::runtime_error(what), estimate(est), error_bound(bound) {}
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

inline double dbm_to_watts(double dbm) { return std::pow(10.0, dbm / 10.0) / 1000.0; }
inline double watts_to_dbm(double watts) { return 10.0 * std::log10(watts * 1000.0); }

// Decision variable: user densities per class, users/m^2.
struct DensityVector {
    double lambda_C = 0.0;   // LTE users on the licensed band
    double lambda_D = 0.0;   // D2D pairs on the licensed band
    double lambda_CU = 0.0;  // LTE users on the unlicensed band
    double lambda_DU = 0.0;  // D2D pairs on the unlicensed band

    double operator[](int i) const {
        switch (i) {
            case 0: return lambda_C;
            case 1: return lambda_D;
            case 2: return lambda_CU;
            default: return lambda_DU;
        }
    }
    double& operator[](int i) {
        switch (i) {
            case 0: return lambda_C;
            case 1: return lambda_D;
            case 2: return lambda_CU;
            default: return lambda_DU;
        }
    }
    static constexpr int size() { return 4; }

    void validate() const {
        for (int i = 0; i < 4; ++i) {
            if (!(((*this)[i]) >= 0.0) || !std::isfinite((*this)[i]))
                throw ConfigError("density component " + std::to_string(i) +
                                  " must be finite and >= 0");
        }
    }
};

// Physical and protocol constants of one scenario. All values SI.
// Defaults follow common LTE-Advanced evaluation assumptions.
struct NetworkConfig {
    double r_cell = 200.0;  // cell radius, m
    double L_d = 20.0;      // D2D link radius, m
    double L_w = 25.0;      // Wi-Fi association radius, m

    double P_C = dbm_to_watts(17.0);  // LTE/LTE-U transmit power, W
    double P_D = dbm_to_watts(10.0);  // D2D/D2D-U transmit power, W
    double P_W = dbm_to_watts(23.0);  // Wi-Fi transmit power, W

    double B_l = 40e6;   // licensed bandwidth, Hz
    double B_u = 500e6;  // unlicensed bandwidth, Hz

    double alpha = 4.0;  // path-loss exponent

    double P_th_CU = dbm_to_watts(-62.0);  // LTE-U energy-detection threshold, W
    double P_th_DU = dbm_to_watts(-62.0);  // D2D-U energy-detection threshold, W
    double P_th_W = dbm_to_watts(-62.0);   // Wi-Fi energy-detection threshold, W

    double R_th_C = 100e6;  // LTE/LTE-U QoS floor, bit/s
    double R_th_D = 100e6;  // D2D/D2D-U QoS floor, bit/s
    double R_th_W = 54e6;   // Wi-Fi QoS floor, bit/s

    double noise_psd = 3.98e-18;  // thermal noise density, W/Hz
    double tau = 0.01;            // optimizer termination tolerance, Mbps scale

    void validate() const;
};

struct DerivedQuantities {
    double S_cell;    // cell area, m^2
    double K_l;       // licensed subchannel count (continuous, clamped >= 1)
    double K_u;       // unlicensed subchannel count (continuous, clamped >= 1)
    double B_l_sub;   // licensed subchannel bandwidth, Hz
    double B_u_sub;   // unlicensed subchannel bandwidth, Hz
    double sigma2_l;  // noise power over one licensed subchannel, W
    double sigma2_u;  // noise power over one unlicensed subchannel, W
    double sigma2_w;  // noise power over the whole unlicensed band, W
};

// Subchannel counts are kept continuous (lambda * area) and clamped below at
// one so subchannel bandwidth stays defined when a class is empty; this also
// keeps the quantities smooth for the density optimizer.
DerivedQuantities derived_quantities(const NetworkConfig& cfg, const DensityVector& lam);

struct SignalingOverhead {
    double inform;    // messages from unlicensed users reporting sensing results
    double allocate;  // messages from the BS announcing subchannel allocations
};
SignalingOverhead signaling_overhead(const NetworkConfig& cfg, const DensityVector& lam,
                                     double M_si, double M_sa);

enum class ReportSource { analytic, montecarlo };

// A point estimate with a 99% confidence halfwidth (zero for analytic
// results). `absent` marks a Monte Carlo class that never materialized.
struct Estimate {
    double value = 0.0;
    double ci99 = 0.0;
    bool absent = false;
};

struct ThroughputReport {
    Estimate R_C, R_D, R_CU, R_DU, R_W;  // per-user throughput, bit/s
    Estimate p_CU, p_DU, p_W;            // medium access probabilities
    Estimate R_total;                    // cell total, bit/s
    ReportSource source = ReportSource::analytic;
    long trials = 0;  // montecarlo only
};

// R_total = S_cell * (lC*R_C + lD*R_D + lCU*R_CU + lDU*R_DU); Wi-Fi rate is
// tracked but never part of the objective total.
double compose_total(const NetworkConfig& cfg, const DensityVector& lam,
                     double R_C, double R_D, double R_CU, double R_DU);

}  // namespace d2du
