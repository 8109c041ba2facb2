#pragma once

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "epimob/renewal.hpp"
#include "epimob/series.hpp"

namespace epimob {

/// Per-unit delay between the first supercritical day and the first day of a
/// >= 20% mobility reduction.
struct DelayRecord {
    std::string unit_id;
    std::optional<Date> first_supercritical;   // first day R_t > 1
    std::optional<Date> mobility_reduction;    // first day M_t <= threshold * baseline
    std::optional<int> delay_days;             // empty if either date is undefined
    bool mobility_never_dropped = false;       // unbounded delay
    double incidence_per_100k = 0.0;
    double total_cases = 0.0;
};

/// Scans R_t for its first crossing above 1, then M_t for its first
/// subsequent-or-equal drop to <= reduction_fraction * baseline. If mobility
/// dropped before R_t became supercritical the delay is 0 by definition.
inline DelayRecord delay_in_mobility_reduction(const DailySeries& rt, const DailySeries& mobility,
                                               double baseline,
                                               double reduction_fraction = 0.8) {
    if (baseline <= 0) throw std::invalid_argument("baseline must be positive");
    DelayRecord rec;
    rec.unit_id = rt.unit_id;

    for (Date d = rt.start_date; d < rt.end_date(); ++d) {
        double v = rt.at(d);
        if (!DailySeries::is_missing(v) && v > 1.0) {
            rec.first_supercritical = d;
            break;
        }
    }
    if (!rec.first_supercritical) return rec;  // delay undefined

    const double threshold = reduction_fraction * baseline;
    Date scan_from = std::max(*rec.first_supercritical, mobility.start_date);
    for (Date d = scan_from; d < mobility.end_date(); ++d) {
        double v = mobility.at(d);
        if (!DailySeries::is_missing(v) && v <= threshold) {
            rec.mobility_reduction = d;
            break;
        }
    }
    if (!rec.mobility_reduction) {
        rec.mobility_never_dropped = true;
        return rec;
    }
    rec.delay_days = std::max(0, *rec.mobility_reduction - *rec.first_supercritical);
    return rec;
}

/// Cumulative cases per 100k inhabitants up to and including as_of.
inline double incidence_per_100k(const CaseSeries& cases, double population, Date as_of) {
    if (population <= 0) throw std::invalid_argument("population must be positive");
    if (as_of < cases.start_date)
        throw std::invalid_argument("as_of date precedes the case series");
    double total = 0.0;
    int last = std::min(as_of - cases.start_date, static_cast<int>(cases.counts.size()) - 1);
    for (int i = 0; i <= last; ++i) total += cases.counts[i];
    return 100000.0 * total / population;
}

struct PearsonFit {
    double r = 0.0;
    double p_value = 1.0;
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    int n = 0;
};

/// Pearson correlation with two-sided p from the t-transform (n-2 df) and the
/// least-squares line.
inline PearsonFit pearson_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw std::invalid_argument("x/y length mismatch");
    const auto n = static_cast<int>(xs.size());
    if (n < 3) throw std::invalid_argument("need at least 3 points");
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx <= 0 || syy <= 0) throw std::invalid_argument("constant input to pearson_fit");
    PearsonFit f;
    f.n = n;
    f.r = sxy / std::sqrt(sxx * syy);
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_squared = f.r * f.r;
    if (std::abs(f.r) >= 1.0) {
        f.p_value = 0.0;
    } else {
        double t = f.r * std::sqrt((n - 2) / (1.0 - f.r * f.r));
        boost::math::students_t_distribution<double> dist(n - 2);
        f.p_value = 2.0 * boost::math::cdf(dist, -std::abs(t));
    }
    return f;
}

}  // namespace epimob
