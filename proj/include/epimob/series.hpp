#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "epimob/date.hpp"

namespace epimob {

enum class SeriesKind { mobility, cases, rt_mean };

/// One real value per calendar day for one spatial unit. Missing days are
/// stored explicitly as NaN, never skipped.
struct DailySeries {
    std::string unit_id;
    Date start_date;
    std::vector<double> values;
    SeriesKind kind = SeriesKind::mobility;

    static constexpr double missing() { return std::numeric_limits<double>::quiet_NaN(); }
    static bool is_missing(double v) { return std::isnan(v); }

    std::size_t size() const { return values.size(); }
    Date end_date() const { return start_date + static_cast<int>(values.size()); }  // exclusive

    bool covers(Date d) const { return d >= start_date && d < end_date(); }

    double at(Date d) const {
        if (!covers(d))
            throw std::out_of_range("date " + d.to_string() + " outside series for unit " + unit_id);
        return values[static_cast<std::size_t>(d - start_date)];
    }

    double& at(Date d) {
        if (!covers(d))
            throw std::out_of_range("date " + d.to_string() + " outside series for unit " + unit_id);
        return values[static_cast<std::size_t>(d - start_date)];
    }

    bool has_missing() const {
        for (double v : values)
            if (is_missing(v)) return true;
        return false;
    }
};

/// Centered moving average with truncated (renormalized) windows at the edges.
/// half_width 0 is the identity. Missing values inside a window are skipped;
/// a window with no observed value yields missing.
inline std::vector<double> moving_average(const std::vector<double>& v, int half_width) {
    if (half_width < 0) throw std::invalid_argument("half_width must be >= 0");
    const int n = static_cast<int>(v.size());
    std::vector<double> out(v.size());
    for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        int cnt = 0;
        for (int j = std::max(0, i - half_width); j <= std::min(n - 1, i + half_width); ++j) {
            if (!DailySeries::is_missing(v[j])) {
                sum += v[j];
                ++cnt;
            }
        }
        out[i] = cnt > 0 ? sum / cnt : DailySeries::missing();
    }
    return out;
}

}  // namespace epimob
