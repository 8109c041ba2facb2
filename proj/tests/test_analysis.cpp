#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "epimob/analysis.hpp"

using namespace epimob;

namespace {

Date day0() { return Date::from_ymd(2020, 2, 1); }

DailySeries series_of(std::vector<double> v, SeriesKind kind, int offset = 0) {
    DailySeries s;
    s.unit_id = "U";
    s.start_date = day0() + offset;
    s.values = std::move(v);
    s.kind = kind;
    return s;
}

}  // namespace

TEST_CASE("delay metric") {
    SECTION("constructed 32-day gap") {
        // R_t exceeds 1 on day 10; mobility drops below 80% of baseline on day 42
        std::vector<double> rt(80, 0.8), mob(80, 100.0);
        for (int i = 10; i < 60; ++i) rt[i] = 1.5;
        for (int i = 42; i < 80; ++i) mob[i] = 70.0;
        DelayRecord rec = delay_in_mobility_reduction(series_of(rt, SeriesKind::rt_mean),
                                                      series_of(mob, SeriesKind::mobility), 100.0);
        REQUIRE(rec.delay_days.has_value());
        CHECK(*rec.delay_days == 32);
        CHECK(*rec.first_supercritical == day0() + 10);
        CHECK(*rec.mobility_reduction == day0() + 42);
    }
    SECTION("same-day crossings give zero") {
        std::vector<double> rt(30, 0.5), mob(30, 100.0);
        for (int i = 5; i < 30; ++i) {
            rt[i] = 2.0;
            mob[i] = 50.0;
        }
        DelayRecord rec = delay_in_mobility_reduction(series_of(rt, SeriesKind::rt_mean),
                                                      series_of(mob, SeriesKind::mobility), 100.0);
        CHECK(*rec.delay_days == 0);
    }
    SECTION("mobility dropping first still gives zero") {
        std::vector<double> rt(30, 0.5), mob(30, 50.0);  // mobility low from day 0
        for (int i = 10; i < 30; ++i) rt[i] = 2.0;
        DelayRecord rec = delay_in_mobility_reduction(series_of(rt, SeriesKind::rt_mean),
                                                      series_of(mob, SeriesKind::mobility), 100.0);
        CHECK(*rec.delay_days == 0);
    }
    SECTION("subcritical forever leaves the delay undefined") {
        std::vector<double> rt(30, 0.7), mob(30, 10.0);
        DelayRecord rec = delay_in_mobility_reduction(series_of(rt, SeriesKind::rt_mean),
                                                      series_of(mob, SeriesKind::mobility), 100.0);
        CHECK_FALSE(rec.delay_days.has_value());
        CHECK_FALSE(rec.mobility_never_dropped);
    }
    SECTION("mobility never dropping is an unbounded-delay marker") {
        std::vector<double> rt(30, 1.5), mob(30, 100.0);
        DelayRecord rec = delay_in_mobility_reduction(series_of(rt, SeriesKind::rt_mean),
                                                      series_of(mob, SeriesKind::mobility), 100.0);
        CHECK_FALSE(rec.delay_days.has_value());
        CHECK(rec.mobility_never_dropped);
    }
    SECTION("random step series match the linear-scan oracle") {
        std::mt19937 rng(77);
        std::uniform_real_distribution<double> ur(0.5, 2.0);
        std::uniform_real_distribution<double> um(50, 150);
        for (int rep = 0; rep < 100; ++rep) {
            std::vector<double> rt(40), mob(40);
            for (auto& v : rt) v = ur(rng);
            for (auto& v : mob) v = um(rng);
            const double baseline = 110.0;
            DelayRecord rec = delay_in_mobility_reduction(
                series_of(rt, SeriesKind::rt_mean), series_of(mob, SeriesKind::mobility), baseline);
            int first_sc = -1;
            for (int i = 0; i < 40; ++i)
                if (rt[i] > 1.0) {
                    first_sc = i;
                    break;
                }
            if (first_sc < 0) {
                CHECK_FALSE(rec.delay_days.has_value());
                continue;
            }
            int mr = -1;
            for (int i = first_sc; i < 40; ++i)
                if (mob[i] <= 0.8 * baseline) {
                    mr = i;
                    break;
                }
            if (mr < 0) {
                CHECK(rec.mobility_never_dropped);
            } else {
                REQUIRE(rec.delay_days.has_value());
                CHECK(*rec.delay_days == mr - first_sc);
            }
        }
    }
    SECTION("delay is invariant under joint time translation") {
        std::vector<double> rt(60, 0.9), mob(60, 100.0);
        for (int i = 12; i < 60; ++i) rt[i] = 1.3;
        for (int i = 30; i < 60; ++i) mob[i] = 60.0;
        auto base = delay_in_mobility_reduction(series_of(rt, SeriesKind::rt_mean),
                                                series_of(mob, SeriesKind::mobility), 100.0);
        auto shifted = delay_in_mobility_reduction(series_of(rt, SeriesKind::rt_mean, 17),
                                                   series_of(mob, SeriesKind::mobility, 17), 100.0);
        CHECK(*base.delay_days == *shifted.delay_days);
    }
}

TEST_CASE("incidence per 100k") {
    CaseSeries c;
    c.unit_id = "U";
    c.start_date = day0();
    SECTION("500 cases in a population of 100k") {
        c.counts.assign(50, 10.0);
        CHECK(incidence_per_100k(c, 100000, day0() + 49) == Catch::Approx(500.0));
    }
    SECTION("zero cases") {
        c.counts.assign(50, 0.0);
        CHECK(incidence_per_100k(c, 100000, day0() + 49) == 0.0);
    }
    SECTION("random series equals the prefix-sum oracle") {
        std::mt19937 rng(31);
        std::uniform_real_distribution<double> u(0, 30);
        c.counts.resize(60);
        for (auto& v : c.counts) v = std::floor(u(rng));
        for (int asof : {0, 10, 30, 59}) {
            double expect = 0;
            for (int i = 0; i <= asof; ++i) expect += c.counts[i];
            expect *= 100000.0 / 54321.0;
            CHECK(incidence_per_100k(c, 54321, day0() + asof) == Catch::Approx(expect));
        }
    }
    SECTION("as_of past the series end counts everything") {
        c.counts.assign(10, 5.0);
        CHECK(incidence_per_100k(c, 100000, day0() + 100) == Catch::Approx(50.0));
    }
    SECTION("bad inputs") {
        c.counts.assign(10, 5.0);
        CHECK_THROWS(incidence_per_100k(c, 0.0, day0()));
        CHECK_THROWS(incidence_per_100k(c, 1000.0, day0() - 5));
    }
}

TEST_CASE("pearson fit") {
    SECTION("perfect line") {
        std::vector<double> xs = {1, 2, 3, 4, 5}, ys;
        for (double x : xs) ys.push_back(2 * x + 1);
        PearsonFit f = pearson_fit(xs, ys);
        CHECK(f.r == Catch::Approx(1.0).margin(1e-12));
        CHECK(f.slope == Catch::Approx(2.0).margin(1e-12));
        CHECK(f.intercept == Catch::Approx(1.0).margin(1e-12));
        CHECK(f.r_squared == Catch::Approx(1.0).margin(1e-12));
        CHECK(f.p_value < 1e-10);
    }
    SECTION("fixed 5-point dataset matches the closed-form ratio") {
        std::vector<double> xs = {1.0, 2.0, 4.0, 5.0, 8.0};
        std::vector<double> ys = {2.0, 1.0, 5.0, 4.0, 9.0};
        PearsonFit f = pearson_fit(xs, ys);
        // hand-computed: mx=4, my=4.2, sxy=29.2*... via covariance/variance ratio
        double mx = 4.0, my = 4.2, sxy = 0, sxx = 0, syy = 0;
        for (int i = 0; i < 5; ++i) {
            sxy += (xs[i] - mx) * (ys[i] - my);
            sxx += (xs[i] - mx) * (xs[i] - mx);
            syy += (ys[i] - my) * (ys[i] - my);
        }
        CHECK(f.r == Catch::Approx(sxy / std::sqrt(sxx * syy)).margin(1e-12));
        CHECK(f.slope == Catch::Approx(sxy / sxx).margin(1e-12));
    }
    SECTION("r^2 equals 1 - SSE/SST of the fitted line") {
        std::mt19937 rng(41);
        std::normal_distribution<double> noise(0, 1);
        std::vector<double> xs(25), ys(25);
        for (int i = 0; i < 25; ++i) {
            xs[i] = i;
            ys[i] = 0.5 * i + noise(rng);
        }
        PearsonFit f = pearson_fit(xs, ys);
        double my = 0;
        for (double y : ys) my += y / 25;
        double sse = 0, sst = 0;
        for (int i = 0; i < 25; ++i) {
            double pred = f.intercept + f.slope * xs[i];
            sse += (ys[i] - pred) * (ys[i] - pred);
            sst += (ys[i] - my) * (ys[i] - my);
        }
        CHECK(f.r_squared == Catch::Approx(1 - sse / sst).margin(1e-10));
    }
    SECTION("permutation null keeps |r| below 0.45 in at least 95% of shuffles") {
        std::mt19937 rng(53);
        std::uniform_real_distribution<double> u(0, 1);
        std::vector<double> xs(20), ys(20);
        for (int i = 0; i < 20; ++i) {
            xs[i] = u(rng);
            ys[i] = xs[i];
        }
        int below = 0;
        const int reps = 1000;
        for (int rep = 0; rep < reps; ++rep) {
            std::shuffle(ys.begin(), ys.end(), rng);
            if (std::abs(pearson_fit(xs, ys).r) < 0.45) ++below;
        }
        CHECK(below >= static_cast<int>(0.95 * reps));
    }
    SECTION("constant input is a hard error") {
        CHECK_THROWS(pearson_fit({1, 1, 1}, {1, 2, 3}));
        CHECK_THROWS(pearson_fit({1, 2, 3}, {4, 4, 4}));
        CHECK_THROWS(pearson_fit({1, 2}, {3, 4}));
    }
}
