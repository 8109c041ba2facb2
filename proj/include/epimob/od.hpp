#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "epimob/csv.hpp"
#include "epimob/date.hpp"
#include "epimob/series.hpp"

namespace epimob {

enum class SpatialLevel { municipality = 0, province = 1, region = 2 };

inline const char* level_name(SpatialLevel l) {
    switch (l) {
        case SpatialLevel::municipality: return "municipality";
        case SpatialLevel::province: return "province";
        case SpatialLevel::region: return "region";
    }
    return "?";
}

inline SpatialLevel parse_level(const std::string& s) {
    if (s == "municipality") return SpatialLevel::municipality;
    if (s == "province") return SpatialLevel::province;
    if (s == "region") return SpatialLevel::region;
    throw std::invalid_argument("unknown spatial level '" + s + "'");
}

struct SpatialUnit {
    std::string name;
    std::string parent_id;  // empty for regions
    SpatialLevel level = SpatialLevel::municipality;
    double population = 0.0;
};

/// Municipality -> province -> region tree with populations.
class SpatialHierarchy {
public:
    void add(const std::string& unit_id, SpatialUnit u) {
        if (units_.count(unit_id))
            throw std::invalid_argument("duplicate unit_id '" + unit_id + "'");
        if (u.population <= 0)
            throw std::invalid_argument("unit '" + unit_id + "' has non-positive population");
        if (u.level != SpatialLevel::region && u.parent_id.empty())
            throw std::invalid_argument("unit '" + unit_id + "' below region level needs a parent");
        units_.emplace(unit_id, std::move(u));
    }

    const SpatialUnit& get(const std::string& unit_id) const {
        auto it = units_.find(unit_id);
        if (it == units_.end()) throw std::invalid_argument("unknown unit_id '" + unit_id + "'");
        return it->second;
    }

    bool contains(const std::string& unit_id) const { return units_.count(unit_id) != 0; }

    /// Ancestor of `unit_id` at `level` (identity if already there).
    std::string ancestor_at(const std::string& unit_id, SpatialLevel level) const {
        std::string cur = unit_id;
        for (int hops = 0; hops < 3; ++hops) {
            const SpatialUnit& u = get(cur);
            if (u.level == level) return cur;
            if (u.level > level)
                throw std::invalid_argument("unit '" + unit_id + "' is coarser than requested level");
            cur = u.parent_id;
        }
        throw std::logic_error("hierarchy deeper than three levels");
    }

    std::vector<std::string> units_at(SpatialLevel level) const {
        std::vector<std::string> out;
        for (const auto& [id, u] : units_)
            if (u.level == level) out.push_back(id);
        return out;
    }

    /// Validates parent links: every non-region parent must exist and sit one
    /// level up. Throws listing all offenders.
    void validate() const {
        std::vector<std::string> bad;
        for (const auto& [id, u] : units_) {
            if (u.level == SpatialLevel::region) continue;
            auto it = units_.find(u.parent_id);
            if (it == units_.end() ||
                static_cast<int>(it->second.level) != static_cast<int>(u.level) + 1)
                bad.push_back(id);
        }
        if (!bad.empty()) {
            std::string msg = "hierarchy units with missing or mis-leveled parents:";
            for (const auto& id : bad) msg += " " + id;
            throw std::invalid_argument(msg);
        }
    }

    static SpatialHierarchy read_csv(const std::string& path) {
        SpatialHierarchy h;
        csv::read_file(path, {"unit_id", "name", "parent_id", "level", "population"},
                       [&](int lineno, const std::vector<std::string>& f) {
                           if (f.size() != 5)
                               throw std::runtime_error("line " + std::to_string(lineno) +
                                                        ": expected 5 fields");
                           SpatialUnit u;
                           u.name = f[1];
                           u.parent_id = f[2];
                           u.level = parse_level(f[3]);
                           u.population = csv::parse_double(f[4], lineno, "population");
                           h.add(f[0], std::move(u));
                       });
        h.validate();
        return h;
    }

private:
    std::map<std::string, SpatialUnit> units_;
};

struct FlowKey {
    Date date;
    std::string origin;
    std::string destination;
    auto operator<=>(const FlowKey&) const = default;
};

/// Dated origin->destination trip counts at one spatial level.
struct FlowTable {
    SpatialLevel level = SpatialLevel::municipality;
    std::map<FlowKey, long long> trips;
    long long suppression_threshold = 0;
    long long suppressed_records = 0;
    std::string provenance;

    long long total_trips_on(Date d) const {
        long long t = 0;
        for (const auto& [k, v] : trips)
            if (k.date == d) t += v;
        return t;
    }

    std::set<Date> dates() const {
        std::set<Date> out;
        for (const auto& [k, v] : trips) out.insert(k.date);
        return out;
    }
};

struct IngestReport {
    long long parsed = 0;
    long long suppressed = 0;
    std::vector<std::string> row_errors;  // per-record problems with line numbers
};

/// Streams raw (date, origin, destination, trips) rows into a FlowTable,
/// dropping municipality-level records with trips < threshold. Duplicate keys
/// are a hard error; malformed rows are collected per line.
class FlowIngester {
public:
    FlowIngester(SpatialLevel level, long long threshold) : table_{}, threshold_(threshold) {
        if (threshold < 0) throw std::invalid_argument("suppression threshold must be >= 0");
        table_.level = level;
        table_.suppression_threshold = threshold;
    }

    void add(Date date, const std::string& origin, const std::string& destination,
             long long trips) {
        if (trips < 0) throw std::invalid_argument("negative trip count");
        ++report_.parsed;
        if (table_.level == SpatialLevel::municipality && trips < threshold_) {
            ++report_.suppressed;
            return;
        }
        FlowKey key{date, origin, destination};
        auto [it, inserted] = table_.trips.emplace(std::move(key), trips);
        if (!inserted)
            throw std::runtime_error("duplicate flow record (" + date.to_string() + ", " + origin +
                                     ", " + destination + ")");
    }

    void add_row(int lineno, const std::vector<std::string>& fields) {
        try {
            if (fields.size() != 4)
                throw std::runtime_error("line " + std::to_string(lineno) + ": expected 4 fields");
            Date d = Date::parse(fields[0]);
            long long trips = csv::parse_int(fields[3], lineno, "trips");
            add(d, fields[1], fields[2], trips);
        } catch (const std::runtime_error& e) {
            if (std::string(e.what()).find("duplicate flow record") != std::string::npos) throw;
            report_.row_errors.push_back(e.what());
        } catch (const std::invalid_argument& e) {
            report_.row_errors.push_back("line " + std::to_string(lineno) + ": " + e.what());
        }
    }

    FlowTable finish() {
        table_.suppressed_records = report_.suppressed;
        return std::move(table_);
    }

    const IngestReport& report() const { return report_; }

private:
    FlowTable table_;
    long long threshold_;
    IngestReport report_;
};

inline FlowTable ingest_flows_csv(const std::string& path, SpatialLevel level, long long threshold,
                                  IngestReport* report = nullptr) {
    FlowIngester ing(level, threshold);
    csv::read_file(path, {"date", "origin", "destination", "trips"},
                   [&](int lineno, const std::vector<std::string>& f) { ing.add_row(lineno, f); });
    if (report) *report = ing.report();
    FlowTable t = ing.finish();
    t.provenance = path;
    return t;
}

/// Sums flows up the hierarchy: trips(d, A, B) = sum over child pairs.
/// Daily totals are conserved exactly (integer arithmetic).
inline FlowTable aggregate(const FlowTable& flows, const SpatialHierarchy& hierarchy,
                           SpatialLevel target_level) {
    if (static_cast<int>(flows.level) >= static_cast<int>(target_level))
        throw std::invalid_argument("aggregation target must be coarser than the table level");
    std::vector<std::string> unresolved;
    FlowTable out;
    out.level = target_level;
    out.suppression_threshold = flows.suppression_threshold;
    out.suppressed_records = flows.suppressed_records;
    out.provenance = flows.provenance;
    for (const auto& [key, trips] : flows.trips) {
        if (!hierarchy.contains(key.origin)) {
            unresolved.push_back(key.origin);
            continue;
        }
        if (!hierarchy.contains(key.destination)) {
            unresolved.push_back(key.destination);
            continue;
        }
        FlowKey agg{key.date, hierarchy.ancestor_at(key.origin, target_level),
                    hierarchy.ancestor_at(key.destination, target_level)};
        out.trips[agg] += trips;
    }
    if (!unresolved.empty()) {
        std::sort(unresolved.begin(), unresolved.end());
        unresolved.erase(std::unique(unresolved.begin(), unresolved.end()), unresolved.end());
        std::string msg = "unresolvable unit_ids:";
        for (const auto& id : unresolved) msg += " " + id;
        throw std::invalid_argument(msg);
    }
    return out;
}

/// Daily mobility M_t for one unit: in-flows plus self-flow. Days inside the
/// table's date span with no record for this unit become 0 only when the day
/// has records at all; days absent from the table entirely are missing.
inline DailySeries mobility_series(const FlowTable& flows, const std::string& unit) {
    bool seen = false;
    for (const auto& [k, v] : flows.trips)
        if (k.origin == unit || k.destination == unit) {
            seen = true;
            break;
        }
    if (!seen) throw std::invalid_argument("unit '" + unit + "' not present in flow table");

    auto table_dates = flows.dates();
    if (table_dates.empty()) throw std::invalid_argument("empty flow table");
    Date first = *table_dates.begin();
    Date last = *table_dates.rbegin();

    DailySeries s;
    s.unit_id = unit;
    s.start_date = first;
    s.kind = SeriesKind::mobility;
    s.values.assign(static_cast<std::size_t>(last - first) + 1, DailySeries::missing());
    for (Date d : table_dates) s.at(d) = 0.0;
    for (const auto& [k, v] : flows.trips)
        if (k.destination == unit) s.at(k.date) += static_cast<double>(v);
    return s;
}

/// Mean of M_t over [window_start, window_end] inclusive — the pre-epidemic
/// reference level. Missing days in the window are a hard error.
inline double baseline_mobility(const DailySeries& series, Date window_start, Date window_end) {
    if (window_end < window_start) throw std::invalid_argument("empty baseline window");
    if (!series.covers(window_start) || !series.covers(window_end))
        throw std::invalid_argument("baseline window not covered by the series");
    double sum = 0.0;
    int n = 0;
    for (Date d = window_start; d <= window_end; ++d) {
        double v = series.at(d);
        if (DailySeries::is_missing(v))
            throw std::invalid_argument("missing day " + d.to_string() + " in baseline window");
        sum += v;
        ++n;
    }
    return sum / n;
}

}  // namespace epimob
