#include <catch2/catch_amalgamated.hpp>

#include "epimob/synth.hpp"

using namespace epimob;
using synth::RTrajectory;
using synth::Scenario;

namespace {

Scenario base_scenario() {
    Scenario sc;
    sc.r_trajectory.breakpoints = {{0, 1.0}};
    return sc;
}

}  // namespace

TEST_CASE("R trajectory interpolation") {
    RTrajectory tr;
    tr.breakpoints = {{10, 2.0}, {30, 0.5}};
    SECTION("step mode holds the previous value") {
        tr.mode = RTrajectory::Mode::step;
        CHECK(tr.at(0) == 2.0);
        CHECK(tr.at(29) == 2.0);
        CHECK(tr.at(30) == 0.5);
        CHECK(tr.at(100) == 0.5);
    }
    SECTION("linear mode interpolates") {
        tr.mode = RTrajectory::Mode::linear;
        CHECK(tr.at(20) == Catch::Approx(1.25));
        CHECK(tr.at(10) == 2.0);
        CHECK(tr.at(40) == 0.5);
    }
    SECTION("empty trajectory throws") {
        RTrajectory empty;
        CHECK_THROWS(empty.at(0));
    }
}

TEST_CASE("deterministic mode follows the exact recursion") {
    Scenario sc = base_scenario();
    sc.r_trajectory.breakpoints = {{0, 1.4}};
    sc.case_noise = 0.0;
    sc.n_days = 80;
    CaseSeries cs = synth::simulate_renewal(sc);
    GenerationTimeDist gt = discretize_generation_time(sc.gamma_shape, sc.gamma_rate);
    for (int t = sc.seed_days; t < sc.n_days; ++t) {
        double lambda = infection_pressure(cs, gt, t);
        CHECK(cs.counts[t] == Catch::Approx(1.4 * lambda).margin(1e-9));
    }
}

TEST_CASE("R = 1 plateaus at the deterministic expectation") {
    // the critical process plateaus slightly below the seed level because the
    // pre-seed history is empty; expectation mode gives that plateau exactly
    // and the Poisson ensemble mean must match it
    Scenario sc = base_scenario();
    sc.n_days = 60;
    Scenario det = sc;
    det.case_noise = 0.0;
    CaseSeries expect = synth::simulate_renewal(det);
    double target = 0;
    for (int t = 40; t < 60; ++t) target += expect.counts[t] / 20.0;
    // the plateau is flat and in the same ballpark as the seeds
    CHECK(std::abs(expect.counts[59] - expect.counts[40]) < 0.05 * target);
    CHECK(target > 0.5 * sc.seed_cases);
    CHECK(target < 1.5 * sc.seed_cases);

    std::vector<double> finals;
    for (int rep = 0; rep < 200; ++rep) {
        sc.rng_seed = 1000 + rep;
        CaseSeries cs = synth::simulate_renewal(sc);
        double tail = 0;
        for (int t = 40; t < 60; ++t) tail += cs.counts[t] / 20.0;
        finals.push_back(tail);
    }
    double mean = 0, var = 0;
    for (double v : finals) mean += v / finals.size();
    for (double v : finals) var += (v - mean) * (v - mean) / (finals.size() - 1);
    double se = std::sqrt(var / finals.size());
    CHECK(std::abs(mean - target) <= 3 * se + 1e-9);
}

TEST_CASE("R = 0 extinguishes the outbreak after the seeds") {
    Scenario sc = base_scenario();
    sc.r_trajectory.breakpoints = {{0, 0.0}};
    sc.n_days = 60;
    CaseSeries cs = synth::simulate_renewal(sc);
    for (int t = sc.seed_days; t < sc.n_days; ++t) CHECK(cs.counts[t] == 0.0);
}

TEST_CASE("step trajectory round-trips through the estimator") {
    Scenario sc = base_scenario();
    sc.r_trajectory.breakpoints = {{0, 2.0}, {60, 0.7}};
    sc.n_days = 120;
    sc.rng_seed = 42;
    CaseSeries cs = synth::simulate_renewal(sc);
    GenerationTimeDist gt = discretize_generation_time(sc.gamma_shape, sc.gamma_rate);
    McmcConfig cfg;
    cfg.rng_seed = 7;
    RtPosterior post = estimate_rt(smooth_cases(cs), gt, cfg);
    // compare windows well inside each regime, away from the seed ramp, the
    // switch and the smoothing window
    double high = 0, low = 0;
    for (int t = 35; t < 50; ++t) high += post.days[t].mean / 15.0;
    for (int t = 90; t < 110; ++t) low += post.days[t].mean / 20.0;
    CHECK(high == Catch::Approx(2.0).margin(0.1));
    CHECK(low == Catch::Approx(0.7).margin(0.1));
}

TEST_CASE("mobility switch levels and timing") {
    Scenario sc = base_scenario();
    sc.n_days = 120;
    DailySeries m = synth::simulate_mobility(sc);
    SECTION("pre level before the switch") {
        for (int t = 0; t < 20; ++t)
            CHECK(m.values[t] == Catch::Approx(sc.mobility_pre_level).epsilon(0.01));
    }
    SECTION("post level settles at the prescribed fraction within 1%") {
        for (int t = 70; t < 120; ++t)
            CHECK(m.values[t] ==
                  Catch::Approx(sc.mobility_post_fraction * sc.mobility_pre_level).epsilon(0.01));
    }
    SECTION("10-90% transition takes about 7 days") {
        double span = (1 - sc.mobility_post_fraction) * sc.mobility_pre_level;
        double hi = sc.mobility_post_fraction * sc.mobility_pre_level + 0.9 * span;
        double lo = sc.mobility_post_fraction * sc.mobility_pre_level + 0.1 * span;
        int t_hi = -1, t_lo = -1;
        for (int t = 0; t < 120; ++t) {
            if (t_hi < 0 && m.values[t] <= hi) t_hi = t;
            if (t_lo < 0 && m.values[t] <= lo) t_lo = t;
        }
        REQUIRE(t_hi >= 0);
        REQUIRE(t_lo >= 0);
        CHECK(std::abs((t_lo - t_hi) - 7) <= 2);
    }
    SECTION("weekly modulation averages out over a week") {
        Scenario wk = sc;
        wk.weekly_amplitude = 0.15;
        DailySeries mw = synth::simulate_mobility(wk);
        double avg = 0;
        for (int t = 0; t < 7; ++t) avg += mw.values[t] / 7.0;
        CHECK(avg == Catch::Approx(sc.mobility_pre_level).epsilon(0.02));
    }
}

TEST_CASE("simulators are bit-reproducible for a fixed seed") {
    Scenario sc = base_scenario();
    sc.r_trajectory.breakpoints = {{0, 1.3}};
    sc.rng_seed = 99;
    sc.mobility_noise_sd = 0.05;
    CaseSeries a = synth::simulate_renewal(sc);
    CaseSeries b = synth::simulate_renewal(sc);
    CHECK(a.counts == b.counts);
    DailySeries ma = synth::simulate_mobility(sc);
    DailySeries mb = synth::simulate_mobility(sc);
    CHECK(ma.values == mb.values);
    sc.rng_seed = 100;
    CaseSeries c = synth::simulate_renewal(sc);
    CHECK(a.counts != c.counts);
}

TEST_CASE("explosive trajectories are refused") {
    Scenario sc = base_scenario();
    sc.r_trajectory.breakpoints = {{0, 6.0}};
    sc.n_days = 150;
    sc.case_noise = 0.0;
    CHECK_THROWS(synth::simulate_renewal(sc));
}

TEST_CASE("scenario validation") {
    Scenario sc = base_scenario();
    sc.mobility_post_fraction = 1.5;
    CHECK_THROWS(sc.validate());
    sc = base_scenario();
    sc.mobility_switch_day = 500;
    CHECK_THROWS(sc.validate());
    sc = base_scenario();
    sc.transition_half_life = 0.0;
    CHECK_THROWS(sc.validate());
}

TEST_CASE("epi-mob ensemble peak geometry") {
    Scenario sc = base_scenario();
    sc.n_days = 150;
    sc.mobility_noise_sd = 0.02;
    auto ens = synth::make_epimob_ensemble(12, sc);
    REQUIRE(ens.r_series.size() == 12);
    REQUIRE(ens.m_series.size() == 12);
    CHECK(ens.r_peak_day - ens.mobility_peak_day == sc.lag_days);
    // smoothed per-unit argmax differences should scatter around the lag
    auto basis = std::make_shared<BSplineBasis>(0.0, 149.0, 25, 4);
    double mean_diff = 0;
    for (int i = 0; i < 12; ++i) {
        SmoothedCurve r = penalized_smooth(ens.r_series[i], basis, 10.0);
        SmoothedCurve m = penalized_smooth(ens.m_series[i], basis, 10.0);
        mean_diff += (r.argmax_on_grid() - m.argmax_on_grid()) / 12.0;
    }
    CHECK(mean_diff == Catch::Approx(sc.lag_days).margin(2.0));
}

TEST_CASE("surface projection reproduces representable surfaces") {
    BSplineBasis bs(0.0, 50.0, 8, 4);
    BSplineBasis bt(0.0, 50.0, 8, 4);
    SECTION("a bilinear surface is exact") {
        auto f = [](double s, double t) { return 0.3 * s - 0.1 * t + 2.0; };
        Eigen::MatrixXd coef = synth::project_surface(bs, bt, f);
        for (double s : {0.0, 12.5, 37.0, 50.0})
            for (double t : {0.0, 25.0, 50.0}) {
                double v = bs.eval_row(s).transpose() * coef * bt.eval_row(t);
                CHECK(v == Catch::Approx(f(s, t)).margin(1e-8));
            }
    }
    SECTION("a smooth ridge is reproduced closely") {
        BSplineBasis fs(0.0, 50.0, 14, 4);
        BSplineBasis ft(0.0, 50.0, 14, 4);
        auto f = [](double s, double t) {
            return std::exp(-(t - s - 13.0) * (t - s - 13.0) / 60.0);
        };
        Eigen::MatrixXd coef = synth::project_surface(fs, ft, f);
        double worst = 0;
        for (double s = 5; s <= 45; s += 5)
            for (double t = 5; t <= 45; t += 5) {
                double v = fs.eval_row(s).transpose() * coef * ft.eval_row(t);
                worst = std::max(worst, std::abs(v - f(s, t)));
            }
        CHECK(worst < 0.05);
    }
}

TEST_CASE("fof dataset obeys the constructed model") {
    auto basis_x = std::make_shared<BSplineBasis>(0.0, 100.0, 12, 4);
    auto basis_s = std::make_shared<BSplineBasis>(0.0, 100.0, 8, 4);
    auto basis_t = std::make_shared<BSplineBasis>(0.0, 100.0, 8, 4);
    Eigen::MatrixXd beta0 = Eigen::MatrixXd::Random(8, 8);
    SECTION("noise-free responses equal the integral operator output") {
        auto ds = synth::make_fof_dataset(6, basis_x, basis_s, basis_t, beta0, 0.0, 5);
        Eigen::MatrixXd j_cross = basis_s->cross_gram(*basis_x);
        for (int i = 0; i < 6; ++i) {
            Eigen::VectorXd expect = beta0.transpose() * (j_cross * ds.xs[i].coefficients);
            CHECK((ds.ys[i].coefficients - expect).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
    SECTION("null surface gives identically zero responses") {
        auto ds = synth::make_fof_dataset(4, basis_x, basis_s, basis_t,
                                          Eigen::MatrixXd::Zero(8, 8), 0.0, 6);
        for (const auto& y : ds.ys) CHECK(y.coefficients.cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("wrong beta0 shape throws") {
        CHECK_THROWS(synth::make_fof_dataset(4, basis_x, basis_s, basis_t,
                                             Eigen::MatrixXd::Zero(5, 8), 0.0, 7));
    }
    SECTION("same seed reproduces the dataset") {
        auto a = synth::make_fof_dataset(3, basis_x, basis_s, basis_t, beta0, 0.2, 9);
        auto b = synth::make_fof_dataset(3, basis_x, basis_s, basis_t, beta0, 0.2, 9);
        for (int i = 0; i < 3; ++i) {
            CHECK(a.xs[i].coefficients == b.xs[i].coefficients);
            CHECK(a.ys[i].coefficients == b.ys[i].coefficients);
        }
    }
}
