#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "epimob/od.hpp"

using namespace epimob;

namespace {

SpatialHierarchy toy_hierarchy() {
    SpatialHierarchy h;
    h.add("R1", {"North", "", SpatialLevel::region, 5e6});
    h.add("R2", {"South", "", SpatialLevel::region, 3e6});
    h.add("P1", {"Alfa", "R1", SpatialLevel::province, 2e6});
    h.add("P2", {"Beta", "R1", SpatialLevel::province, 3e6});
    h.add("P3", {"Gamma", "R2", SpatialLevel::province, 3e6});
    h.add("M1", {"a", "P1", SpatialLevel::municipality, 1e5});
    h.add("M2", {"b", "P1", SpatialLevel::municipality, 2e5});
    h.add("M3", {"c", "P2", SpatialLevel::municipality, 3e5});
    h.add("M4", {"d", "P3", SpatialLevel::municipality, 4e5});
    h.add("M5", {"e", "P3", SpatialLevel::municipality, 5e5});
    h.validate();
    return h;
}

Date day0() { return Date::from_ymd(2020, 2, 1); }

}  // namespace

TEST_CASE("suppression removes strictly sub-threshold municipality flows") {
    FlowIngester ing(SpatialLevel::municipality, 15);
    ing.add(day0(), "M1", "M2", 14);  // suppressed
    ing.add(day0(), "M1", "M3", 15);  // retained at the boundary
    ing.add(day0(), "M2", "M3", 100);
    FlowTable t = ing.finish();
    CHECK(t.trips.size() == 2);
    CHECK(t.suppressed_records == 1);
    CHECK(t.trips.at({day0(), "M1", "M3"}) == 15);
}

TEST_CASE("threshold zero keeps every well-formed row") {
    FlowIngester ing(SpatialLevel::municipality, 0);
    ing.add(day0(), "M1", "M2", 0);
    ing.add(day0(), "M1", "M3", 3);
    FlowTable t = ing.finish();
    CHECK(t.trips.size() == 2);
    CHECK(t.suppressed_records == 0);
}

TEST_CASE("duplicate keys are a hard error") {
    FlowIngester ing(SpatialLevel::municipality, 0);
    ing.add(day0(), "M1", "M2", 5);
    CHECK_THROWS_WITH(ing.add(day0(), "M1", "M2", 7),
                      Catch::Matchers::ContainsSubstring("duplicate"));
}

TEST_CASE("malformed rows are collected with line numbers") {
    FlowIngester ing(SpatialLevel::municipality, 0);
    ing.add_row(7, {"2020-02-01", "M1", "M2", "not-a-number"});
    ing.add_row(8, {"2020-02-01", "M1", "M3", "5"});
    REQUIRE(ing.report().row_errors.size() == 1);
    CHECK(ing.report().row_errors[0].find("line 7") != std::string::npos);
    CHECK(ing.finish().trips.size() == 1);
}

TEST_CASE("aggregation sums over child pairs") {
    auto h = toy_hierarchy();
    FlowIngester ing(SpatialLevel::municipality, 0);
    // two municipalities of P1 each sending 20 trips into M4 (province P3)
    ing.add(day0(), "M1", "M4", 20);
    ing.add(day0(), "M2", "M4", 20);
    FlowTable prov = aggregate(ing.finish(), h, SpatialLevel::province);
    CHECK(prov.trips.at({day0(), "P1", "P3"}) == 40);
}

TEST_CASE("single-province region aggregates to a relabeled table") {
    auto h = toy_hierarchy();  // R2 has only P3
    FlowIngester ing(SpatialLevel::province, 0);
    ing.add(day0(), "P3", "P3", 33);
    ing.add(day0() + 1, "P3", "P3", 44);
    FlowTable reg = aggregate(ing.finish(), h, SpatialLevel::region);
    CHECK(reg.trips.at({day0(), "R2", "R2"}) == 33);
    CHECK(reg.trips.at({day0() + 1, "R2", "R2"}) == 44);
}

TEST_CASE("unresolvable unit ids are listed") {
    auto h = toy_hierarchy();
    FlowIngester ing(SpatialLevel::municipality, 0);
    ing.add(day0(), "M1", "MX", 5);
    CHECK_THROWS_WITH(aggregate(ing.finish(), h, SpatialLevel::province),
                      Catch::Matchers::ContainsSubstring("MX"));
}

TEST_CASE("random tables: aggregation equals brute force and conserves totals") {
    auto h = toy_hierarchy();
    std::vector<std::string> munis{"M1", "M2", "M3", "M4", "M5"};
    std::mt19937 rng(42);
    std::uniform_int_distribution<int> trips(0, 50);
    for (int rep = 0; rep < 50; ++rep) {
        FlowIngester ing(SpatialLevel::municipality, 0);
        for (int d = 0; d < 5; ++d)
            for (const auto& o : munis)
                for (const auto& dst : munis) ing.add(day0() + d, o, dst, trips(rng));
        FlowTable fine = ing.finish();
        FlowTable coarse = aggregate(fine, h, SpatialLevel::province);

        // brute-force double loop over child pairs
        std::map<FlowKey, long long> expect;
        for (const auto& [k, v] : fine.trips)
            expect[{k.date, h.ancestor_at(k.origin, SpatialLevel::province),
                    h.ancestor_at(k.destination, SpatialLevel::province)}] += v;
        CHECK(coarse.trips == expect);
        for (int d = 0; d < 5; ++d)
            CHECK(coarse.total_trips_on(day0() + d) == fine.total_trips_on(day0() + d));
    }
}

TEST_CASE("suppression never increases aggregated flows") {
    auto h = toy_hierarchy();
    std::vector<std::string> munis{"M1", "M2", "M3", "M4", "M5"};
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> trips(0, 30);
    FlowIngester plain(SpatialLevel::municipality, 0);
    FlowIngester suppressed(SpatialLevel::municipality, 15);
    for (const auto& o : munis)
        for (const auto& d : munis) {
            int v = trips(rng);
            plain.add(day0(), o, d, v);
            suppressed.add(day0(), o, d, v);
        }
    FlowTable a = aggregate(plain.finish(), h, SpatialLevel::province);
    FlowTable b = aggregate(suppressed.finish(), h, SpatialLevel::province);
    for (const auto& [k, v] : a.trips) {
        auto it = b.trips.find(k);
        long long bv = it == b.trips.end() ? 0 : it->second;
        CHECK(bv <= v);
    }
}

TEST_CASE("mobility series: in-flows plus self-flow") {
    FlowIngester ing(SpatialLevel::province, 0);
    ing.add(day0(), "P2", "P1", 10);
    ing.add(day0(), "P3", "P1", 5);
    ing.add(day0(), "P1", "P1", 100);
    ing.add(day0(), "P1", "P2", 999);  // out-flow, excluded
    DailySeries m = mobility_series(ing.finish(), "P1");
    CHECK(m.at(day0()) == 115.0);
}

TEST_CASE("day with only out-flows counts zero") {
    FlowIngester ing(SpatialLevel::province, 0);
    ing.add(day0(), "P1", "P2", 50);
    DailySeries m = mobility_series(ing.finish(), "P1");
    CHECK(m.at(day0()) == 0.0);
}

TEST_CASE("days absent from the table are explicitly missing") {
    FlowIngester ing(SpatialLevel::province, 0);
    ing.add(day0(), "P1", "P1", 10);
    ing.add(day0() + 2, "P1", "P1", 20);
    DailySeries m = mobility_series(ing.finish(), "P1");
    REQUIRE(m.size() == 3);
    CHECK(DailySeries::is_missing(m.at(day0() + 1)));
}

TEST_CASE("unknown unit is a hard error") {
    FlowIngester ing(SpatialLevel::province, 0);
    ing.add(day0(), "P1", "P1", 10);
    CHECK_THROWS(mobility_series(ing.finish(), "P9"));
}

TEST_CASE("mobility series equals the column-sum plus diagonal oracle") {
    std::vector<std::string> units{"A", "B", "C"};
    std::mt19937 rng(99);
    std::uniform_int_distribution<int> trips(0, 40);
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<std::vector<std::vector<long long>>> mat(
            4, std::vector<std::vector<long long>>(3, std::vector<long long>(3)));
        FlowIngester ing(SpatialLevel::region, 0);
        for (int d = 0; d < 4; ++d)
            for (int o = 0; o < 3; ++o)
                for (int dd = 0; dd < 3; ++dd) {
                    mat[d][o][dd] = trips(rng);
                    ing.add(day0() + d, units[o], units[dd], mat[d][o][dd]);
                }
        FlowTable t = ing.finish();
        for (int u = 0; u < 3; ++u) {
            DailySeries m = mobility_series(t, units[u]);
            for (int d = 0; d < 4; ++d) {
                long long expect = 0;
                for (int o = 0; o < 3; ++o) expect += mat[d][o][u];  // column sum incl. diagonal
                CHECK(m.at(day0() + d) == static_cast<double>(expect));
            }
        }
    }
}

TEST_CASE("mobility series is permutation invariant") {
    std::vector<std::tuple<int, std::string, std::string, long long>> rows = {
        {0, "A", "B", 4}, {0, "B", "A", 9}, {1, "A", "A", 7}, {1, "B", "A", 3}, {0, "A", "A", 2}};
    auto build = [&](const auto& order) {
        FlowIngester ing(SpatialLevel::region, 0);
        for (int i : order) {
            auto& [d, o, dd, v] = rows[i];
            ing.add(day0() + d, o, dd, v);
        }
        return mobility_series(ing.finish(), "A");
    };
    auto a = build(std::vector<int>{0, 1, 2, 3, 4});
    auto b = build(std::vector<int>{4, 2, 0, 3, 1});
    CHECK(a.values == b.values);
}

TEST_CASE("baseline mobility") {
    DailySeries s;
    s.unit_id = "U";
    s.start_date = day0();

    SECTION("constant series") {
        s.values.assign(20, 5.5);
        CHECK(baseline_mobility(s, day0(), day0() + 13) == 5.5);
    }
    SECTION("1..14 averages to 7.5") {
        for (int i = 1; i <= 14; ++i) s.values.push_back(i);
        CHECK(baseline_mobility(s, day0(), day0() + 13) == Catch::Approx(7.5));
    }
    SECTION("random window matches the arithmetic oracle") {
        std::mt19937 rng(1);
        std::uniform_real_distribution<double> u(0, 100);
        double sum = 0;
        for (int i = 0; i < 14; ++i) {
            s.values.push_back(u(rng));
            sum += s.values.back();
        }
        CHECK(baseline_mobility(s, day0(), day0() + 13) == Catch::Approx(sum / 14));
    }
    SECTION("missing day is a hard error") {
        s.values.assign(14, 1.0);
        s.values[3] = DailySeries::missing();
        CHECK_THROWS(baseline_mobility(s, day0(), day0() + 13));
    }
}
