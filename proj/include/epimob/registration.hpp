#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "epimob/smoothing.hpp"

namespace epimob {

struct RegistrationResult {
    std::vector<double> shifts;   // per-unit delta in days, |delta| <= cap
    double common_start = 0.0;    // intersection of all shifted domains
    double common_end = 0.0;
    double cap = 20.0;
};

/// Mean squared L2 distance between curve(t - delta) and target(t) over the
/// overlap of their domains, normalized by overlap length. Trapezoid rule on
/// a fine grid.
inline double shift_distance(const SmoothedCurve& curve, const SmoothedCurve& target, double delta,
                             double grid_step = 0.1) {
    double lo = std::max(curve.domain_start + delta, target.domain_start);
    double hi = std::min(curve.domain_end + delta, target.domain_end);
    if (hi <= lo) return std::numeric_limits<double>::infinity();
    const int n = std::max(2, static_cast<int>(std::ceil((hi - lo) / grid_step)) + 1);
    double sum = 0.0;
    double h = (hi - lo) / (n - 1);
    for (int i = 0; i < n; ++i) {
        double t = lo + h * i;
        double d = curve.eval(t - delta) - target.eval(t);
        double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
        sum += w * d * d;
    }
    return sum * h / (hi - lo);
}

/// Grid search for the shift minimizing the normalized L2 distance, over
/// delta in [-cap, cap] with 0.5-day steps. Ties break toward 0.
inline double estimate_shift(const SmoothedCurve& curve, const SmoothedCurve& target,
                             double cap = 20.0, double step = 0.5) {
    if (cap < 0) throw std::invalid_argument("cap must be >= 0");
    double best_delta = 0.0;
    double best_dist = std::numeric_limits<double>::infinity();
    bool any_overlap = false;
    const int n_steps = static_cast<int>(std::lround(cap / step));
    for (int i = -n_steps; i <= n_steps; ++i) {
        double delta = i * step;
        double dist = shift_distance(curve, target, delta);
        if (std::isinf(dist)) continue;
        any_overlap = true;
        if (dist < best_dist ||
            (dist == best_dist && std::abs(delta) < std::abs(best_delta))) {
            best_dist = dist;
            best_delta = delta;
        }
    }
    if (!any_overlap)
        throw std::invalid_argument("no shift in [-cap, cap] gives overlapping domains");
    return best_delta;
}

/// Applies one shift to an R/M curve pair (time consistency: both move
/// together). Domain restriction to the common window happens afterwards in
/// restrict_common_domain.
inline std::pair<SmoothedCurve, SmoothedCurve> register_pair(const SmoothedCurve& r,
                                                             const SmoothedCurve& m, double delta,
                                                             double cap = 20.0) {
    if (std::abs(delta) > cap + 1e-12)
        throw std::invalid_argument("shift exceeds the registration cap");
    return {r.shifted(delta), m.shifted(delta)};
}

/// Intersects the domains of all curves and restricts each to the common
/// window. Throws naming the offending units when the intersection is empty.
inline std::pair<double, double> restrict_common_domain(std::vector<SmoothedCurve>& curves) {
    if (curves.empty()) throw std::invalid_argument("no curves to restrict");
    double lo = curves[0].domain_start;
    double hi = curves[0].domain_end;
    std::string lo_unit = curves[0].unit_id, hi_unit = curves[0].unit_id;
    for (const auto& c : curves) {
        if (c.domain_start > lo) {
            lo = c.domain_start;
            lo_unit = c.unit_id;
        }
        if (c.domain_end < hi) {
            hi = c.domain_end;
            hi_unit = c.unit_id;
        }
    }
    if (hi <= lo)
        throw std::invalid_argument("empty common domain after registration (units " + lo_unit +
                                    " and " + hi_unit + ")");
    for (auto& c : curves) {
        c.domain_start = lo;
        c.domain_end = hi;
    }
    return {lo, hi};
}

/// Normalizes a curve by its own maximum over the domain; used before FCC and
/// registration because R and M live on incommensurable scales.
inline SmoothedCurve normalize_by_max(const SmoothedCurve& c) {
    double m = c.max_on_grid();
    if (m <= 0) throw std::invalid_argument("cannot normalize a non-positive curve: " + c.unit_id);
    SmoothedCurve out = c;
    out.coefficients /= m;
    return out;
}

}  // namespace epimob
