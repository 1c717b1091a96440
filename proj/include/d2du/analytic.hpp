#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "d2du/mac.hpp"
#include "d2du/model.hpp"

namespace d2du {

// Squared distance between a point at polar radius x and a point at distance
// l from the origin, separated by angle theta (law of cosines).
inline double hcore_dist_sq(double x, double theta, double l) {
    return std::max(0.0, x * x + l * l - 2.0 * x * l * std::cos(theta));
}

// Angular measure of the circle of radius t around a point at distance l
// from the cell center that lies inside the cell disk of radius R. Turns the
// 2-D interferer-disk integrals into 1-D radial integrals.
double arc_angle_in_disk(double t, double l, double R);

// Weight over a radial coordinate: point mass at zero, or the distance
// density 2r/R^2 of a uniformly placed node in a disk.
struct RadialWeight {
    enum class Kind { dirac_zero, uniform_disk };
    Kind kind = Kind::dirac_zero;
    double radius = 0.0;

    static RadialWeight dirac() { return {Kind::dirac_zero, 0.0}; }
    static RadialWeight disk(double R) {
        if (!(R > 0.0)) throw ConfigError("RadialWeight: disk radius must be > 0");
        return {Kind::uniform_disk, R};
    }
    double pdf(double r) const { return 2.0 * r / (radius * radius); }
};

// Laplace-transform attenuation of the interference from a PPP of density
// lam transmitting at power P, observed from distance l off-center.
// Equals exp(-lam * J(s*P, l)) with J the radial interference integral.
double laplace_factor_Q(double s, double lam, double P, double l,
                        const NetworkConfig& cfg, double rel_tol = 1e-9);

// Attenuation from the single co-channel LTE interferer, averaged over its
// uniform position in the cell, seen from distance y off-center.
double single_lte_factor_A1(double s, double y, const NetworkConfig& cfg,
                            double rel_tol = 1e-9);

// LTE-U interferer present only with probability p_CU.
double gated_lte_factor_A2(double s, double y, double p_CU, const NetworkConfig& cfg,
                           double rel_tol = 1e-9);

// Spectral efficiency factor (bit/s/Hz): the iterated rate integral with an
// arbitrary interference kernel K(s, y) in [0, 1]. Reference path: nested
// adaptive quadrature, no tables. The integrand factorizes per s-node into a
// y-average of K and an r-average of the signal term.
double vartheta(double P, const std::function<double(double, double)>& kernel,
                const RadialWeight& g, const RadialWeight& f, double sigma2,
                const NetworkConfig& cfg, double rel_tol = 1e-6);

struct QuadratureOptions {
    double rel_tol = 1e-4;  // throughput self-consistency target
    int max_level = 4;      // dyadic mesh refinements available
};

// Evaluates the five per-user throughputs by quadrature over precomputed
// kernel tables. Tables depend only on the configuration, never on the
// densities, so one calibrated engine serves whole density sweeps; densities
// enter through cheap exponent combinations. calibrate() refines the mesh
// until doubling it moves every rate at every probe point by less than
// rel_tol, then freezes; a frozen engine is immutable and is a smooth
// function of the densities (safe to finite-difference).
class AnalyticEngine {
public:
    explicit AnalyticEngine(const NetworkConfig& cfg, QuadratureOptions opts = {});
    ~AnalyticEngine();
    AnalyticEngine(AnalyticEngine&&) noexcept;
    AnalyticEngine& operator=(AnalyticEngine&&) noexcept;

    void calibrate(std::span<const DensityVector> probe_points, double lambda_W);
    void calibrate(const DensityVector& point, double lambda_W);
    void set_level(int level);  // manual freeze, mainly for tests
    int level() const;

    double throughput_lte(const DensityVector& lam) const;
    double throughput_d2d(const DensityVector& lam) const;
    double throughput_lteu(const DensityVector& lam, double lambda_W,
                           const MapSet& maps) const;
    double throughput_d2du(const DensityVector& lam, double lambda_W,
                           const MapSet& maps) const;
    double throughput_wifi(const DensityVector& lam, double lambda_W,
                           const MapSet& maps) const;

    double total_throughput(const DensityVector& lam, double lambda_W) const;
    ThroughputReport report(const DensityVector& lam, double lambda_W) const;

    const NetworkConfig& config() const { return cfg_; }

private:
    struct Tables;
    const Tables& frozen() const;
    const Tables& build_level(int level);

    NetworkConfig cfg_;
    QuadratureOptions opts_;
    std::vector<std::unique_ptr<Tables>> tables_;
    int frozen_level_ = -1;
};

// One-shot conveniences; each builds and calibrates a throwaway engine.
double throughput_lte(const DensityVector& lam, const NetworkConfig& cfg,
                      QuadratureOptions opts = {});
double throughput_d2d(const DensityVector& lam, const NetworkConfig& cfg,
                      QuadratureOptions opts = {});
double throughput_lteu(const DensityVector& lam, double lambda_W, const NetworkConfig& cfg,
                       QuadratureOptions opts = {});
double throughput_d2du(const DensityVector& lam, double lambda_W, const NetworkConfig& cfg,
                       QuadratureOptions opts = {});
double throughput_wifi(const DensityVector& lam, double lambda_W, const NetworkConfig& cfg,
                       QuadratureOptions opts = {});
double total_throughput(const DensityVector& lam, double lambda_W, const NetworkConfig& cfg,
                        QuadratureOptions opts = {});

}  // namespace d2du
