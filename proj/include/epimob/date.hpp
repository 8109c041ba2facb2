#pragma once

#include <chrono>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace epimob {

/// Calendar day stored as days since the Unix epoch.
class Date {
public:
    Date() = default;
    explicit Date(int days_since_epoch) : days_(days_since_epoch) {}

    static Date from_ymd(int y, unsigned m, unsigned d) {
        using namespace std::chrono;
        year_month_day ymd{year{y}, month{m}, day{d}};
        if (!ymd.ok())
            throw std::invalid_argument("invalid calendar date " + std::to_string(y) + "-" +
                                        std::to_string(m) + "-" + std::to_string(d));
        return Date{static_cast<int>(sys_days{ymd}.time_since_epoch().count())};
    }

    /// Parses "YYYY-MM-DD".
    static Date parse(const std::string& s) {
        int y = 0;
        unsigned m = 0, d = 0;
        char dash1 = 0, dash2 = 0;
        if (std::sscanf(s.c_str(), "%d%c%u%c%u", &y, &dash1, &m, &dash2, &d) != 5 ||
            dash1 != '-' || dash2 != '-')
            throw std::invalid_argument("cannot parse date '" + s + "' (expected YYYY-MM-DD)");
        return from_ymd(y, m, d);
    }

    std::string to_string() const {
        using namespace std::chrono;
        year_month_day ymd{sys_days{days{days_}}};
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(ymd.year()),
                      unsigned(ymd.month()), unsigned(ymd.day()));
        return buf;
    }

    int days_since_epoch() const { return days_; }

    Date operator+(int n) const { return Date{days_ + n}; }
    Date operator-(int n) const { return Date{days_ - n}; }
    int operator-(Date o) const { return days_ - o.days_; }
    Date& operator++() { ++days_; return *this; }

    auto operator<=>(const Date&) const = default;

private:
    int days_ = 0;
};

}  // namespace epimob
