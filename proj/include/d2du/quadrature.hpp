#pragma once

#include <cstddef>
#include <vector>

#include "d2du/model.hpp"

namespace d2du::quad {

// 15-point Gauss-Kronrod rule with embedded 7-point Gauss error estimate.
struct GkResult {
    double value;
    double error;
};

template <class F>
GkResult gk15(F&& f, double a, double b) {
    // QUADPACK abscissae/weights, positive half; node 0 is the midpoint.
    static constexpr double xk[8] = {
        0.0,
        0.405845151377397166906606412076961,
        0.741531185599394439863864773280788,
        0.949107912342758524526189684047851,
        0.207784955007898467600689403773245,
        0.586087235467691130294144838258730,
        0.864864423359769072789712788640926,
        0.991455371120812639206854697526329};
    static constexpr double wk[8] = {
        0.209482141084727828012999174891714,
        0.190350578064785409913256402421014,
        0.140653259715525918745189590510238,
        0.063092092629978553290700663189204,
        0.204432940075298892414161999234649,
        0.169004726639267902826583426598550,
        0.104790010322250183839876322541518,
        0.022935322010529224963732008058970};
    static constexpr double wg[4] = {
        0.417959183673469387755102040816327,
        0.381830050505118944950369775488975,
        0.279705391489276667901467771423780,
        0.129484966168869693270611432679082};

    const double mid = 0.5 * (a + b);
    const double hl = 0.5 * (b - a);
    const double f0 = f(mid);
    double k15 = wk[0] * f0;
    double g7 = wg[0] * f0;
    for (int i = 1; i < 8; ++i) {
        const double dx = hl * xk[i];
        const double fs = f(mid + dx) + f(mid - dx);
        k15 += wk[i] * fs;
        if (i < 4) g7 += wg[i] * fs;
    }
    k15 *= hl;
    g7 *= hl;
    const double diff = std::fabs(k15 - g7);
    // QUADPACK-style sharpened estimate, floored by the raw difference scale.
    const double err = std::min(diff, std::pow(200.0 * diff, 1.5));
    return {k15, std::max(err, 1e-300)};
}

// Adaptive bisection over [a, b]. Converges when the summed error estimate
// drops below rel_tol*|I| + abs_tol; otherwise throws NumericalError carrying
// the best estimate and the achieved bound.
template <class F>
double integrate_adaptive(F&& f, double a, double b, double rel_tol = 1e-8,
                          double abs_tol = 0.0, int max_intervals = 4000,
                          const char* label = "integral") {
    struct Seg {
        double a, b, value, error;
    };
    std::vector<Seg> segs;
    auto r0 = gk15(f, a, b);
    segs.push_back({a, b, r0.value, r0.error});
    for (int iter = 0; iter < max_intervals; ++iter) {
        double total = 0.0, err = 0.0;
        std::size_t worst = 0;
        for (std::size_t i = 0; i < segs.size(); ++i) {
            total += segs[i].value;
            err += segs[i].error;
            if (segs[i].error > segs[worst].error) worst = i;
        }
        if (err <= rel_tol * std::fabs(total) + abs_tol) return total;
        Seg s = segs[worst];
        const double m = 0.5 * (s.a + s.b);
        auto rl = gk15(f, s.a, m);
        auto rr = gk15(f, m, s.b);
        segs[worst] = {s.a, m, rl.value, rl.error};
        segs.push_back({m, s.b, rr.value, rr.error});
    }
    double total = 0.0, err = 0.0;
    for (const auto& s : segs) {
        total += s.value;
        err += s.error;
    }
    throw NumericalError(std::string(label) + ": adaptive quadrature did not reach " +
                             "tolerance after max subdivisions",
                         total, err);
}

// Flattened composite Gauss-Legendre rule: nodes and weights over a panel
// mesh, for building reusable integrand tables.
struct PanelRule {
    std::vector<double> x;
    std::vector<double> w;
};

// Geometric mesh on [a, b]: `levels_*` halvings grade panel widths toward an
// endpoint (for integrable endpoint singularities or boundary layers), with
// `mid` panels of uniform width across the remainder.
std::vector<double> graded_breakpoints(double a, double b, int levels_a, int levels_b,
                                       int mid = 1);

// Split every panel of `bp` into 2^level equal parts.
std::vector<double> refine_breakpoints(const std::vector<double>& bp, int level);

PanelRule panel_rule_gl8(const std::vector<double>& breakpoints);

template <class F>
double integrate_rule(F&& f, const PanelRule& rule) {
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.x.size(); ++i) acc += rule.w[i] * f(rule.x[i]);
    return acc;
}

// 16-point Gauss-Legendre on [a, b]; enough for smooth single-panel use.
template <class F>
double gl16(F&& f, double a, double b) {
    static constexpr double xg[8] = {
        0.0950125098376374401853193, 0.2816035507792589132304605,
        0.4580167776572273863424194, 0.6178762444026437484466718,
        0.7554044083550030338951012, 0.8656312023878317438804679,
        0.9445750230732325760779884, 0.9894009349916499325961542};
    static constexpr double wg[8] = {
        0.1894506104550684962853967, 0.1826034150449235888667637,
        0.1691565193950025381893121, 0.1495959888165767320815017,
        0.1246289712555338720524763, 0.0951585116824927848099251,
        0.0622535239386478928628438, 0.0271524594117540948517806};
    const double mid = 0.5 * (a + b);
    const double hl = 0.5 * (b - a);
    double acc = 0.0;
    for (int i = 0; i < 8; ++i) {
        const double dx = hl * xg[i];
        acc += wg[i] * (f(mid + dx) + f(mid - dx));
    }
    return acc * hl;
}

}  // namespace d2du::quad
