#include "d2du/sim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace d2du::mc {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kZ99 = 2.5758293035489004;  // 99% two-sided normal quantile

std::uint64_t splitmix_next(std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

std::uint64_t split_seed(std::uint64_t root, std::string_view stream, std::uint64_t index) {
    std::uint64_t x = root ^ (fnv1a(stream) * 0x9E3779B97F4A7C15ull);
    const std::uint64_t h = splitmix_next(x);
    x ^= (index + 1) * 0xBF58476D1CE4E5B9ull;
    return splitmix_next(x) ^ h;
}

Rng::Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& s : s_) s = splitmix_next(x);
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::exp1() { return -std::log1p(-uniform()); }

long Rng::poisson(double mean) {
    if (!(mean > 0.0)) return 0;
    if (mean > 30.0) {
        const double half = 0.5 * mean;
        return poisson(half) + poisson(mean - half);
    }
    const double limit = std::exp(-mean);
    long k = 0;
    double p = 1.0;
    do {
        ++k;
        p *= uniform();
    } while (p > limit);
    return k - 1;
}

long Rng::uniform_int(long n) {
    return std::min<long>(n - 1, static_cast<long>(uniform() * static_cast<double>(n)));
}

double dist(const Point& a, const Point& b) {
    const double dx = a.x - b.x, dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

namespace {

Point uniform_in_disk(const Point& center, double radius, Rng& rng) {
    const double r = radius * std::sqrt(rng.uniform());
    const double phi = 2.0 * kPi * rng.uniform();
    return {center.x + r * std::cos(phi), center.y + r * std::sin(phi)};
}

}  // namespace

std::vector<Point> sample_ppp_disk(double lam, double r_cell, Rng& rng) {
    if (lam < 0.0) throw ConfigError("sample_ppp_disk: lam must be >= 0");
    const long n = rng.poisson(lam * kPi * r_cell * r_cell);
    std::vector<Point> pts(n);
    for (auto& p : pts) p = uniform_in_disk({0.0, 0.0}, r_cell, rng);
    return pts;
}

void assign_subchannels(ScenarioRealization& real, int K_l, int K_u, Rng& rng) {
    if (K_l < 1 || K_u < 1) throw ConfigError("assign_subchannels: K_l, K_u must be >= 1");
    real.K_l = K_l;
    real.K_u = K_u;

    auto assign_orthogonal = [&rng](std::vector<LteNode>& users, int K, int& queued) {
        const long n = static_cast<long>(users.size());
        std::vector<int> perm(n);
        for (long i = 0; i < n; ++i) perm[i] = static_cast<int>(i);
        for (long i = n - 1; i >= 1; --i) std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
        queued = 0;
        for (long i = 0; i < n; ++i) {
            if (i < K) {
                users[perm[i]].subchannel = static_cast<int>(i);
            } else {
                users[perm[i]].subchannel = -1;
                ++queued;
            }
        }
    };
    assign_orthogonal(real.lte, K_l, real.queued_out_lte);
    assign_orthogonal(real.lteu, K_u, real.queued_out_lteu);
    for (auto& p : real.d2d) p.subchannel = static_cast<int>(rng.uniform_int(K_l));
    for (auto& p : real.d2du) p.subchannel = static_cast<int>(rng.uniform_int(K_u));
}

ScenarioRealization sample_realization(const DensityVector& lam, double lambda_W,
                                       const NetworkConfig& cfg, Rng& rng) {
    lam.validate();
    if (lambda_W < 0.0) throw ConfigError("lambda_W must be >= 0");

    ScenarioRealization real;
    for (const auto& p : sample_ppp_disk(lam.lambda_C, cfg.r_cell, rng))
        real.lte.push_back({p, -1, 0.0, true});
    for (const auto& p : sample_ppp_disk(lam.lambda_CU, cfg.r_cell, rng))
        real.lteu.push_back({p, -1, 0.0, true});
    for (const auto& p : sample_ppp_disk(lam.lambda_D, cfg.r_cell, rng))
        real.d2d.push_back({p, uniform_in_disk(p, cfg.L_d, rng), -1, 0.0, true});
    for (const auto& p : sample_ppp_disk(lam.lambda_DU, cfg.r_cell, rng))
        real.d2du.push_back({p, uniform_in_disk(p, cfg.L_d, rng), -1, 0.0, true});
    for (const auto& p : sample_ppp_disk(lambda_W, cfg.r_cell, rng))
        real.wifi.push_back({p, uniform_in_disk(p, cfg.L_w, rng), 0.0, true});

    const double S_cell = kPi * cfg.r_cell * cfg.r_cell;
    const int K_l = static_cast<int>(std::max(1.0, std::round(lam.lambda_C * S_cell)));
    const int K_u = static_cast<int>(std::max(1.0, std::round(lam.lambda_CU * S_cell)));
    assign_subchannels(real, K_l, K_u, rng);

    for (auto& n : real.lteu) n.mark = rng.uniform();
    for (auto& n : real.d2du) n.mark = rng.uniform();
    for (auto& n : real.wifi) n.mark = rng.uniform();
    return real;
}

void lbt_contention(ScenarioRealization& real, const NetworkConfig& cfg, Rng& rng,
                    const SimOptions& opts) {
    // Contender table: class 0 = LTE-U user, 1 = D2D-U TX, 2 = Wi-Fi user.
    struct Contender {
        int cls;
        int idx;
        double mark;
        Point pos;
        int subchannel;  // -1: occupies/senses the whole band
        double power;
        double threshold;
        bool active = false;
    };
    std::vector<Contender> cs;
    cs.reserve(real.lteu.size() + real.d2du.size() + real.wifi.size());
    for (std::size_t i = 0; i < real.lteu.size(); ++i) {
        auto& n = real.lteu[i];
        n.active = false;
        if (n.subchannel < 0) continue;  // queued out: never transmits
        cs.push_back({0, static_cast<int>(i), n.mark, n.pos, n.subchannel, cfg.P_C,
                      cfg.P_th_CU});
    }
    for (std::size_t i = 0; i < real.d2du.size(); ++i) {
        auto& n = real.d2du[i];
        n.active = false;
        cs.push_back({1, static_cast<int>(i), n.mark, n.tx, n.subchannel, cfg.P_D,
                      cfg.P_th_DU});
    }
    for (std::size_t i = 0; i < real.wifi.size(); ++i) {
        auto& n = real.wifi[i];
        n.active = false;
        cs.push_back({2, static_cast<int>(i), n.mark, n.user, -1, cfg.P_W, cfg.P_th_W});
    }
    std::stable_sort(cs.begin(), cs.end(),
                     [](const Contender& a, const Contender& b) { return a.mark < b.mark; });

    for (std::size_t i = 0; i < cs.size(); ++i) {
        auto& me = cs[i];
        double received = 0.0;
        for (std::size_t j = 0; j < i; ++j) {
            const auto& other = cs[j];
            if (!other.active) continue;
            const bool audible = me.subchannel < 0 || other.subchannel < 0 ||
                                 other.subchannel == me.subchannel;
            if (!audible) continue;
            const double h = opts.fading_in_sensing ? rng.exp1() : 1.0;
            received += other.power * std::pow(dist(me.pos, other.pos), -cfg.alpha) * h;
            if (received >= me.threshold) break;
        }
        me.active = received < me.threshold;
        if (me.cls == 0)
            real.lteu[me.idx].active = me.active;
        else if (me.cls == 1)
            real.d2du[me.idx].active = me.active;
        else
            real.wifi[me.idx].active = me.active;
    }
}

namespace {

struct TrialOut {
    double rate[5] = {0, 0, 0, 0, 0};  // C, D, CU, DU, W
    bool has_rate[5] = {false, false, false, false, false};
    double frac[3] = {0, 0, 0};  // active fraction CU, DU, W
    bool has_frac[3] = {false, false, false};
};

TrialOut run_one_trial(std::uint64_t trial_seed, const DensityVector& lam, double lambda_W,
                       const NetworkConfig& cfg, const SimOptions& opts) {
    Rng rng(trial_seed);
    ScenarioRealization real = sample_realization(lam, lambda_W, cfg, rng);
    lbt_contention(real, cfg, rng, opts);

    const double B_l_sub = cfg.B_l / real.K_l;
    const double B_u_sub = cfg.B_u / real.K_u;
    const double sigma2_l = cfg.noise_psd * B_l_sub;
    const double sigma2_u = cfg.noise_psd * B_u_sub;
    const double sigma2_w = cfg.noise_psd * cfg.B_u;
    const Point bs{0.0, 0.0};
    const double a = cfg.alpha;

    TrialOut out;

    // LTE: interference from co-channel D2D TXs, received at the BS.
    {
        std::vector<int> eligible;
        for (std::size_t i = 0; i < real.lte.size(); ++i)
            if (real.lte[i].subchannel >= 0) eligible.push_back(static_cast<int>(i));
        if (!eligible.empty()) {
            const auto& u = real.lte[eligible[rng.uniform_int(eligible.size())]];
            const double sig = cfg.P_C * std::pow(dist(u.pos, bs), -a) * rng.exp1();
            double interf = 0.0;
            for (const auto& v : real.d2d)
                if (v.subchannel == u.subchannel)
                    interf += cfg.P_D * std::pow(dist(v.tx, bs), -a) * rng.exp1();
            out.rate[0] = B_l_sub * std::log2(1.0 + sig / (sigma2_l + interf));
            out.has_rate[0] = true;
        }
    }

    // D2D: interference from its subchannel's LTE user and co-channel D2D
    // TXs, received at the pair RX with exact distances.
    if (!real.d2d.empty()) {
        const long ti = rng.uniform_int(real.d2d.size());
        const auto& v = real.d2d[ti];
        const double sig = cfg.P_D * std::pow(dist(v.tx, v.rx), -a) * rng.exp1();
        double interf = 0.0;
        for (const auto& u : real.lte)
            if (u.subchannel == v.subchannel)
                interf += cfg.P_C * std::pow(dist(u.pos, v.rx), -a) * rng.exp1();
        for (long j = 0; j < static_cast<long>(real.d2d.size()); ++j)
            if (j != ti && real.d2d[j].subchannel == v.subchannel)
                interf += cfg.P_D * std::pow(dist(real.d2d[j].tx, v.rx), -a) * rng.exp1();
        out.rate[1] = B_l_sub * std::log2(1.0 + sig / (sigma2_l + interf));
        out.has_rate[1] = true;
    }

    // LTE-U: active co-channel D2D-U TXs plus every active Wi-Fi user, at
    // the BS. A tagged user that lost contention transmits nothing.
    {
        std::vector<int> eligible;
        for (std::size_t i = 0; i < real.lteu.size(); ++i)
            if (real.lteu[i].subchannel >= 0) eligible.push_back(static_cast<int>(i));
        if (!eligible.empty()) {
            const auto& u = real.lteu[eligible[rng.uniform_int(eligible.size())]];
            out.has_rate[2] = true;
            if (u.active) {
                const double sig = cfg.P_C * std::pow(dist(u.pos, bs), -a) * rng.exp1();
                double interf = 0.0;
                for (const auto& v : real.d2du)
                    if (v.active && v.subchannel == u.subchannel)
                        interf += cfg.P_D * std::pow(dist(v.tx, bs), -a) * rng.exp1();
                for (const auto& w : real.wifi)
                    if (w.active)
                        interf += cfg.P_W * std::pow(dist(w.user, bs), -a) * rng.exp1();
                out.rate[2] = B_u_sub * std::log2(1.0 + sig / (sigma2_u + interf));
            }
        }
    }

    // D2D-U: active co-channel LTE-U user, active co-channel D2D-U TXs and
    // every active Wi-Fi user, at the pair RX.
    if (!real.d2du.empty()) {
        const long ti = rng.uniform_int(real.d2du.size());
        const auto& v = real.d2du[ti];
        out.has_rate[3] = true;
        if (v.active) {
            const double sig = cfg.P_D * std::pow(dist(v.tx, v.rx), -a) * rng.exp1();
            double interf = 0.0;
            for (const auto& u : real.lteu)
                if (u.active && u.subchannel == v.subchannel)
                    interf += cfg.P_C * std::pow(dist(u.pos, v.rx), -a) * rng.exp1();
            for (long j = 0; j < static_cast<long>(real.d2du.size()); ++j)
                if (j != ti && real.d2du[j].active &&
                    real.d2du[j].subchannel == v.subchannel)
                    interf += cfg.P_D * std::pow(dist(real.d2du[j].tx, v.rx), -a) * rng.exp1();
            for (const auto& w : real.wifi)
                if (w.active)
                    interf += cfg.P_W * std::pow(dist(w.user, v.rx), -a) * rng.exp1();
            out.rate[3] = B_u_sub * std::log2(1.0 + sig / (sigma2_u + interf));
        }
    }

    // Wi-Fi: uplink user -> AP over the whole band; every active unlicensed
    // transmitter interferes at the AP.
    if (!real.wifi.empty()) {
        const long ti = rng.uniform_int(real.wifi.size());
        const auto& w = real.wifi[ti];
        out.has_rate[4] = true;
        if (w.active) {
            const double sig = cfg.P_W * std::pow(dist(w.user, w.ap), -a) * rng.exp1();
            double interf = 0.0;
            for (const auto& u : real.lteu)
                if (u.active) interf += cfg.P_C * std::pow(dist(u.pos, w.ap), -a) * rng.exp1();
            for (const auto& v : real.d2du)
                if (v.active) interf += cfg.P_D * std::pow(dist(v.tx, w.ap), -a) * rng.exp1();
            for (long j = 0; j < static_cast<long>(real.wifi.size()); ++j)
                if (j != ti && real.wifi[j].active)
                    interf += cfg.P_W * std::pow(dist(real.wifi[j].user, w.ap), -a) * rng.exp1();
            out.rate[4] = cfg.B_u * std::log2(1.0 + sig / (sigma2_w + interf));
        }
    }

    // Empirical access fractions per class.
    {
        long present = 0, act = 0;
        for (const auto& u : real.lteu)
            if (u.subchannel >= 0) {
                ++present;
                act += u.active ? 1 : 0;
            }
        if (present > 0) {
            out.frac[0] = static_cast<double>(act) / present;
            out.has_frac[0] = true;
        }
        present = act = 0;
        for (const auto& v : real.d2du) {
            ++present;
            act += v.active ? 1 : 0;
        }
        if (present > 0) {
            out.frac[1] = static_cast<double>(act) / present;
            out.has_frac[1] = true;
        }
        present = act = 0;
        for (const auto& w : real.wifi) {
            ++present;
            act += w.active ? 1 : 0;
        }
        if (present > 0) {
            out.frac[2] = static_cast<double>(act) / present;
            out.has_frac[2] = true;
        }
    }
    return out;
}

std::vector<TrialOut> run_trials(const DensityVector& lam, double lambda_W,
                                 const NetworkConfig& cfg, long trials, std::uint64_t seed,
                                 const SimOptions& opts) {
    if (trials < 1) throw ConfigError("trials must be >= 1");
    cfg.validate();
    std::vector<TrialOut> outs(trials);
    if (opts.threads == 1) {
        for (long t = 0; t < trials; ++t)
            outs[t] = run_one_trial(split_seed(seed, "trial", t), lam, lambda_W, cfg, opts);
    } else {
#ifdef _OPENMP
        const int nt = opts.threads > 0 ? opts.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 16) num_threads(nt)
#endif
        for (long t = 0; t < trials; ++t)
            outs[t] = run_one_trial(split_seed(seed, "trial", t), lam, lambda_W, cfg, opts);
    }
    return outs;
}

// Welford accumulation in trial order: results do not depend on thread count.
template <class Pick>
McEstimate reduce(const std::vector<TrialOut>& outs, Pick pick) {
    McEstimate e;
    double mean = 0.0, m2 = 0.0;
    long n = 0;
    for (const auto& o : outs) {
        const auto [ok, v] = pick(o);
        if (!ok) continue;
        ++n;
        const double d = v - mean;
        mean += d / n;
        m2 += d * (v - mean);
    }
    e.samples = n;
    e.absent = n == 0;
    if (n > 0) e.mean = mean;
    if (n > 1) e.halfwidth99 = kZ99 * std::sqrt(m2 / (n - 1) / n);
    return e;
}

}  // namespace

ThroughputReport estimate_throughputs(const DensityVector& lam, double lambda_W,
                                      const NetworkConfig& cfg, long trials,
                                      std::uint64_t seed, const SimOptions& opts) {
    const auto outs = run_trials(lam, lambda_W, cfg, trials, seed, opts);

    auto rate = [&](int k) {
        return reduce(outs, [k](const TrialOut& o) {
            return std::pair<bool, double>(o.has_rate[k], o.rate[k]);
        });
    };
    auto frac = [&](int k) {
        return reduce(outs, [k](const TrialOut& o) {
            return std::pair<bool, double>(o.has_frac[k], o.frac[k]);
        });
    };

    ThroughputReport rep;
    rep.source = ReportSource::montecarlo;
    rep.trials = trials;
    auto to_est = [](const McEstimate& m) {
        return Estimate{m.mean, m.halfwidth99, m.absent};
    };
    const McEstimate eC = rate(0), eD = rate(1), eCU = rate(2), eDU = rate(3), eW = rate(4);
    rep.R_C = to_est(eC);
    rep.R_D = to_est(eD);
    rep.R_CU = to_est(eCU);
    rep.R_DU = to_est(eDU);
    rep.R_W = to_est(eW);
    rep.p_CU = to_est(frac(0));
    rep.p_DU = to_est(frac(1));
    rep.p_W = to_est(frac(2));

    rep.R_total.value = compose_total(cfg, lam, eC.mean, eD.mean, eCU.mean, eDU.mean);
    const double S_cell = kPi * cfg.r_cell * cfg.r_cell;
    // classes are sampled from the same trials; treating them as independent
    // makes this halfwidth slightly approximate
    rep.R_total.ci99 =
        S_cell * std::sqrt(std::pow(lam.lambda_C * eC.halfwidth99, 2) +
                           std::pow(lam.lambda_D * eD.halfwidth99, 2) +
                           std::pow(lam.lambda_CU * eCU.halfwidth99, 2) +
                           std::pow(lam.lambda_DU * eDU.halfwidth99, 2));
    rep.R_total.absent = (eC.absent && lam.lambda_C > 0) || (eD.absent && lam.lambda_D > 0) ||
                         (eCU.absent && lam.lambda_CU > 0) ||
                         (eDU.absent && lam.lambda_DU > 0);
    return rep;
}

MapEstimate estimate_maps(const DensityVector& lam, double lambda_W,
                          const NetworkConfig& cfg, long trials, std::uint64_t seed,
                          const SimOptions& opts) {
    const auto outs = run_trials(lam, lambda_W, cfg, trials, seed, opts);
    MapEstimate est;
    auto frac = [&](int k) {
        return reduce(outs, [k](const TrialOut& o) {
            return std::pair<bool, double>(o.has_frac[k], o.frac[k]);
        });
    };
    est.p_CU = frac(0);
    est.p_DU = frac(1);
    est.p_W = frac(2);

    auto corr = [&](int a, int b) {
        double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
        long n = 0;
        for (const auto& o : outs) {
            if (!o.has_frac[a] || !o.has_frac[b]) continue;
            ++n;
            sa += o.frac[a];
            sb += o.frac[b];
            saa += o.frac[a] * o.frac[a];
            sbb += o.frac[b] * o.frac[b];
            sab += o.frac[a] * o.frac[b];
        }
        if (n < 2) return 0.0;
        const double va = saa - sa * sa / n, vb = sbb - sb * sb / n;
        if (va <= 0.0 || vb <= 0.0) return 0.0;
        return (sab - sa * sb / n) / std::sqrt(va * vb);
    };
    est.corr_CU_DU = corr(0, 1);
    est.corr_CU_W = corr(0, 2);
    est.corr_DU_W = corr(1, 2);
    return est;
}

McEstimate estimate_laplace(double s, double lam, double P, double l,
                            const NetworkConfig& cfg, long trials, std::uint64_t seed) {
    if (s < 0.0) throw ConfigError("estimate_laplace: s must be >= 0");
    if (lam < 0.0) throw ConfigError("estimate_laplace: lam must be >= 0");
    const Point ref{l, 0.0};
    McEstimate e;
    double mean = 0.0, m2 = 0.0;
    Rng rng(split_seed(seed, "laplace", 0));
    for (long t = 0; t < trials; ++t) {
        double interf = 0.0;
        for (const auto& p : sample_ppp_disk(lam, cfg.r_cell, rng))
            interf += P * std::pow(dist(p, ref), -cfg.alpha) * rng.exp1();
        const double v = std::exp(-s * interf);
        const double d = v - mean;
        mean += d / (t + 1);
        m2 += d * (v - mean);
    }
    e.mean = mean;
    e.samples = trials;
    e.absent = trials == 0;
    if (trials > 1) e.halfwidth99 = kZ99 * std::sqrt(m2 / (trials - 1) / trials);
    return e;
}

void dump_realization_csv(const ScenarioRealization& real, std::ostream& os) {
    os << "class,x_m,y_m,subchannel,mark,active\n";
    os << std::setprecision(17);
    auto row = [&os](const char* cls, const Point& p, int sub, double mark, bool active) {
        os << cls << ',' << p.x << ',' << p.y << ',' << sub << ',' << mark << ','
           << (active ? 1 : 0) << '\n';
    };
    for (const auto& n : real.lte) row("lte", n.pos, n.subchannel, n.mark, n.active);
    for (const auto& n : real.lteu) row("lteu", n.pos, n.subchannel, n.mark, n.active);
    for (const auto& n : real.d2d) {
        row("d2d_tx", n.tx, n.subchannel, n.mark, n.active);
        row("d2d_rx", n.rx, n.subchannel, n.mark, n.active);
    }
    for (const auto& n : real.d2du) {
        row("d2du_tx", n.tx, n.subchannel, n.mark, n.active);
        row("d2du_rx", n.rx, n.subchannel, n.mark, n.active);
    }
    for (const auto& n : real.wifi) {
        row("wifi_ap", n.ap, -1, n.mark, n.active);
        row("wifi_user", n.user, -1, n.mark, n.active);
    }
}

}  // namespace d2du::mc
