#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>
#include <string>

#include "epimob/analysis.hpp"
#include "epimob/renewal.hpp"
#include "epimob/smoothing.hpp"

namespace epimob {

/// Round-trip-safe number formatting shared by every CSV writer, so repeated
/// runs emit byte-identical files.
inline std::string fmt_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// SmoothedCurve <-> JSON

inline nlohmann::json curve_to_json(const SmoothedCurve& c) {
    nlohmann::json j;
    j["unit_id"] = c.unit_id;
    j["order"] = c.basis->order();
    j["knots"] = c.basis->knots();
    std::vector<double> coef(c.coefficients.begin(), c.coefficients.end());
    j["coefficients"] = coef;
    j["domain"] = {c.domain_start, c.domain_end};
    return j;
}

inline SmoothedCurve curve_from_json(const nlohmann::json& j) {
    SmoothedCurve c;
    c.unit_id = j.at("unit_id").get<std::string>();
    auto knots = j.at("knots").get<std::vector<double>>();
    c.basis = std::make_shared<BSplineBasis>(knots, j.at("order").get<int>());
    auto coef = j.at("coefficients").get<std::vector<double>>();
    if (static_cast<int>(coef.size()) != c.basis->n_basis())
        throw std::invalid_argument("coefficient count does not match the basis");
    c.coefficients = Eigen::Map<const Eigen::VectorXd>(coef.data(), coef.size());
    c.domain_start = j.at("domain").at(0).get<double>();
    c.domain_end = j.at("domain").at(1).get<double>();
    return c;
}

/// Dense daily sampling of a curve, anchored at the given epoch date.
inline DailySeries curve_daily_series(const SmoothedCurve& c, Date epoch, SeriesKind kind) {
    DailySeries s;
    s.unit_id = c.unit_id;
    s.kind = kind;
    int first = static_cast<int>(std::ceil(c.domain_start - 1e-9));
    int last = static_cast<int>(std::floor(c.domain_end + 1e-9));
    s.start_date = epoch + first;
    for (int t = first; t <= last; ++t) s.values.push_back(c.eval(t));
    return s;
}

// ---------------------------------------------------------------------------
// CSV writers/readers (formats shared by the CLI stages)

inline std::string series_to_csv(const DailySeries& s) {
    std::ostringstream out;
    out << "date,value\n";
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        out << (s.start_date + static_cast<int>(i)).to_string() << ',';
        if (DailySeries::is_missing(s.values[i]))
            out << "\n";
        else
            out << fmt_num(s.values[i]) << '\n';
    }
    return out.str();
}

inline DailySeries series_from_csv_text(const std::string& text, SeriesKind kind,
                                        const std::string& unit_id = "") {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("date,value", 0) != 0)
        throw std::invalid_argument("series CSV must start with the header date,value");
    DailySeries s;
    s.kind = kind;
    s.unit_id = unit_id;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos) throw std::invalid_argument("bad series row: " + line);
        Date d = Date::parse(line.substr(0, comma));
        std::string val = line.substr(comma + 1);
        if (first) {
            s.start_date = d;
            first = false;
        } else if (d - s.start_date != static_cast<int>(s.values.size())) {
            throw std::invalid_argument("series CSV dates are not consecutive at " +
                                        d.to_string());
        }
        s.values.push_back(val.empty() ? DailySeries::missing() : std::stod(val));
    }
    if (first) throw std::invalid_argument("series CSV has no rows");
    return s;
}

inline std::string cases_to_csv(const CaseSeries& c) {
    std::ostringstream out;
    out << "date,count\n";
    for (std::size_t i = 0; i < c.counts.size(); ++i)
        out << (c.start_date + static_cast<int>(i)).to_string() << ',' << fmt_num(c.counts[i])
            << '\n';
    return out.str();
}

inline CaseSeries cases_from_csv_text(const std::string& text, const std::string& unit_id = "") {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("date,count", 0) != 0)
        throw std::invalid_argument("cases CSV must start with the header date,count");
    CaseSeries c;
    c.unit_id = unit_id;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos) throw std::invalid_argument("bad cases row: " + line);
        Date d = Date::parse(line.substr(0, comma));
        if (first) {
            c.start_date = d;
            first = false;
        } else if (d - c.start_date != static_cast<int>(c.counts.size())) {
            throw std::invalid_argument("cases CSV dates are not consecutive at " + d.to_string());
        }
        c.counts.push_back(std::stod(line.substr(comma + 1)));
    }
    if (first) throw std::invalid_argument("cases CSV has no rows");
    return c;
}

inline std::string rt_to_csv(const RtPosterior& post) {
    std::ostringstream out;
    out << "date,mean,sd,q2.5,q25,q50,q75,q97.5,acceptance\n";
    for (std::size_t i = 0; i < post.days.size(); ++i) {
        const RtDaySummary& d = post.days[i];
        out << (post.start_date + static_cast<int>(i)).to_string() << ',';
        if (d.defined)
            out << fmt_num(d.mean) << ',' << fmt_num(d.sd) << ',' << fmt_num(d.q025) << ','
                << fmt_num(d.q25) << ',' << fmt_num(d.q50) << ',' << fmt_num(d.q75) << ','
                << fmt_num(d.q975) << ',' << fmt_num(d.acceptance);
        else
            out << ",,,,,,,";
        out << '\n';
    }
    return out.str();
}

/// Reads back just the posterior-mean column as a daily series.
inline DailySeries rt_mean_from_csv_text(const std::string& text, const std::string& unit_id) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("date,mean", 0) != 0)
        throw std::invalid_argument("rt CSV must start with the header date,mean,...");
    DailySeries s;
    s.kind = SeriesKind::rt_mean;
    s.unit_id = unit_id;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto c1 = line.find(',');
        auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw std::invalid_argument("bad rt row: " + line);
        Date d = Date::parse(line.substr(0, c1));
        if (first) {
            s.start_date = d;
            first = false;
        }
        std::string mean = line.substr(c1 + 1, c2 - c1 - 1);
        s.values.push_back(mean.empty() ? DailySeries::missing() : std::stod(mean));
    }
    if (first) throw std::invalid_argument("rt CSV has no rows");
    return s;
}

inline std::string delay_to_csv(const std::vector<DelayRecord>& records) {
    std::ostringstream out;
    out << "unit,first_supercritical,mr_date,delay_days,incidence_100k,total_cases\n";
    for (const DelayRecord& r : records) {
        out << r.unit_id << ',';
        out << (r.first_supercritical ? r.first_supercritical->to_string() : "") << ',';
        out << (r.mobility_reduction ? r.mobility_reduction->to_string() : "") << ',';
        if (r.delay_days)
            out << *r.delay_days;
        else if (r.mobility_never_dropped)
            out << "unbounded";
        out << ',' << fmt_num(r.incidence_per_100k) << ',' << fmt_num(r.total_cases) << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// File helpers

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Writes via a sibling temp file and an atomic rename, so partially written
/// artifacts never appear under the final name.
inline void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

/// FNV-1a 64-bit content digest, for the run manifest.
inline std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string fnv1a64_hex(const std::string& data) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(data)));
    return buf;
}

}  // namespace epimob
