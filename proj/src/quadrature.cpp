#include "d2du/quadrature.hpp"

#include <algorithm>
#include <cmath>

namespace d2du::quad {

std::vector<double> graded_breakpoints(double a, double b, int levels_a, int levels_b,
                                       int mid) {
    // Fractional edge positions: dyadic grading into [0, 1/2] from the left,
    // mirrored on the right; `mid` uniform panels across whatever is left.
    std::vector<double> fracs;
    for (int k = levels_a; k >= 1; --k) fracs.push_back(std::ldexp(0.5, -k));
    if (levels_a > 0 || levels_b > 0) fracs.push_back(0.5);
    for (int k = 1; k <= levels_b; ++k) fracs.push_back(1.0 - std::ldexp(0.5, -k));
    const double mid_lo = levels_a > 0 ? 0.5 : 0.0;
    const double mid_hi = levels_b > 0 ? 0.5 : 1.0;
    for (int j = 1; j < mid; ++j)
        if (mid_hi > mid_lo)
            fracs.push_back(mid_lo + (mid_hi - mid_lo) * j / mid);
    std::sort(fracs.begin(), fracs.end());
    fracs.erase(std::unique(fracs.begin(), fracs.end()), fracs.end());

    std::vector<double> bp;
    bp.reserve(fracs.size() + 2);
    bp.push_back(a);
    for (double fr : fracs)
        if (fr > 0.0 && fr < 1.0) bp.push_back(a + (b - a) * fr);
    bp.push_back(b);
    return bp;
}

std::vector<double> refine_breakpoints(const std::vector<double>& bp, int level) {
    if (level <= 0) return bp;
    const int parts = 1 << level;
    std::vector<double> out;
    out.reserve((bp.size() - 1) * parts + 1);
    for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
        for (int j = 0; j < parts; ++j)
            out.push_back(bp[i] + (bp[i + 1] - bp[i]) * j / parts);
    }
    out.push_back(bp.back());
    return out;
}

PanelRule panel_rule_gl8(const std::vector<double>& breakpoints) {
    static constexpr double xg[4] = {0.1834346424956498049394761, 0.5255324099163289858177390,
                                     0.7966664774136267395915539, 0.9602898564975362316835609};
    static constexpr double wg[4] = {0.3626837833783619829651504, 0.3137066458778872873379622,
                                     0.2223810344533744705443560, 0.1012285362903762591525314};
    PanelRule rule;
    rule.x.reserve((breakpoints.size() - 1) * 8);
    rule.w.reserve((breakpoints.size() - 1) * 8);
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        const double mid = 0.5 * (breakpoints[i] + breakpoints[i + 1]);
        const double hl = 0.5 * (breakpoints[i + 1] - breakpoints[i]);
        for (int j = 0; j < 4; ++j) {
            rule.x.push_back(mid - hl * xg[j]);
            rule.w.push_back(wg[j] * hl);
            rule.x.push_back(mid + hl * xg[j]);
            rule.w.push_back(wg[j] * hl);
        }
    }
    return rule;
}

}  // namespace d2du::quad
