#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "d2du/model.hpp"

namespace d2du::mc {

// Derive an independent substream seed from a root seed, a stream name and
// an index. Every consumer of randomness goes through this, so one 64-bit
// seed reproduces a whole run.
std::uint64_t split_seed(std::uint64_t root, std::string_view stream, std::uint64_t index);

// xoshiro256** with hand-rolled samplers; self-contained so that identical
// seeds give bit-identical streams on any platform we build on.
class Rng {
public:
    explicit Rng(std::uint64_t seed);
    std::uint64_t next_u64();
    double uniform();          // [0, 1)
    double exp1();             // unit-mean exponential
    long poisson(double mean); // exact (Knuth product, halved recursively)
    long uniform_int(long n);  // {0, ..., n-1}

private:
    std::uint64_t s_[4];
};

struct Point {
    double x = 0.0, y = 0.0;
};
double dist(const Point& a, const Point& b);

// Uplink cellular user (LTE or LTE-U); transmits to the BS at the origin.
struct LteNode {
    Point pos;
    int subchannel = -1;  // -1: queued out, no subchannel this realization
    double mark = 0.0;
    bool active = true;
};

// D2D pair; TX is the PPP point, RX uniform within L_d of it.
struct D2dNode {
    Point tx, rx;
    int subchannel = -1;
    double mark = 0.0;
    bool active = true;
};

// Wi-Fi AP with its single associated user; the user transmits to the AP.
struct WifiNode {
    Point ap, user;
    double mark = 0.0;
    bool active = true;
};

struct ScenarioRealization {
    std::vector<LteNode> lte, lteu;
    std::vector<D2dNode> d2d, d2du;
    std::vector<WifiNode> wifi;
    int K_l = 1, K_u = 1;  // integer subchannel counts used for assignment
    int queued_out_lte = 0, queued_out_lteu = 0;
};

struct SimOptions {
    // Sensing draws a fresh fade per link (instantaneous energy detection).
    // Set false for fading-averaged sensing (pure path loss).
    bool fading_in_sensing = true;
    int threads = 0;  // 0: OpenMP default; 1: serial reference path
};

std::vector<Point> sample_ppp_disk(double lam, double r_cell, Rng& rng);

// Full draw: PPP positions, pair/user placement, integer subchannel counts
// (rounded from the continuous model values), assignment and contention
// marks. Draw order is fixed; it is part of what a seed means.
ScenarioRealization sample_realization(const DensityVector& lam, double lambda_W,
                                       const NetworkConfig& cfg, Rng& rng);

// Orthogonal subchannels for LTE/LTE-U (surplus users queued out, counted),
// one uniformly random subchannel per D2D/D2D-U pair.
void assign_subchannels(ScenarioRealization& real, int K_l, int K_u, Rng& rng);

// Matern type-II style thinning in increasing mark order: a contender is
// active iff the aggregate received power from already-active lower-mark
// contenders stays below its class threshold. LTE-U/D2D-U sense their own
// subchannel (Wi-Fi transmissions occupy every subchannel); Wi-Fi senses the
// whole band.
void lbt_contention(ScenarioRealization& real, const NetworkConfig& cfg, Rng& rng,
                    const SimOptions& opts = {});

struct McEstimate {
    double mean = 0.0;
    double halfwidth99 = 0.0;
    long samples = 0;  // contributing trials
    bool absent = true;
};

// Monte Carlo throughput/MAP estimates with 99% confidence halfwidths.
// One uniformly chosen tagged user per class per realization; a tagged
// contender that loses contention contributes a zero-rate sample, so class
// means already include the access probability.
ThroughputReport estimate_throughputs(const DensityVector& lam, double lambda_W,
                                      const NetworkConfig& cfg, long trials,
                                      std::uint64_t seed, const SimOptions& opts = {});

struct MapEstimate {
    McEstimate p_CU, p_DU, p_W;
    // mean pairwise correlation between class active-fractions across trials;
    // diagnostic for the independence assumption, never asserted on
    double corr_CU_DU = 0.0, corr_CU_W = 0.0, corr_DU_W = 0.0;
};
MapEstimate estimate_maps(const DensityVector& lam, double lambda_W,
                          const NetworkConfig& cfg, long trials, std::uint64_t seed,
                          const SimOptions& opts = {});

// Oracle for the interference Laplace transform E{exp(-s I)} over PPP draws
// of density lam, observed from a point at distance l from the cell center.
McEstimate estimate_laplace(double s, double lam, double P, double l,
                            const NetworkConfig& cfg, long trials, std::uint64_t seed);

void dump_realization_csv(const ScenarioRealization& real, std::ostream& os);

}  // namespace d2du::mc
