#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <vector>

#include "epimob/generation_time.hpp"
#include "epimob/renewal.hpp"
#include "epimob/smoothing.hpp"

namespace epimob::synth {

/// A prescribed R trajectory given by breakpoints; values are held (step) or
/// interpolated (piecewise-linear) between them.
struct RTrajectory {
    enum class Mode { step, linear };
    Mode mode = Mode::step;
    std::vector<std::pair<int, double>> breakpoints;  // (day, R), sorted by day

    double at(int t) const {
        if (breakpoints.empty()) throw std::invalid_argument("empty R trajectory");
        if (t <= breakpoints.front().first) return breakpoints.front().second;
        for (std::size_t i = 1; i < breakpoints.size(); ++i) {
            if (t < breakpoints[i].first) {
                if (mode == Mode::step) return breakpoints[i - 1].second;
                double f = double(t - breakpoints[i - 1].first) /
                           (breakpoints[i].first - breakpoints[i - 1].first);
                return breakpoints[i - 1].second * (1 - f) + breakpoints[i].second * f;
            }
        }
        return breakpoints.back().second;
    }
};

struct Scenario {
    int n_days = 150;
    RTrajectory r_trajectory;
    double seed_cases = 50.0;       // daily seeds at the start
    int seed_days = 10;
    double gamma_shape = 1.87;
    double gamma_rate = 0.28;
    // mobility regime
    double mobility_pre_level = 1000.0;
    double mobility_post_fraction = 0.4;   // new regime as a fraction of pre
    int mobility_switch_day = 40;
    double transition_half_life = 1.75;    // days; ~7-day 10-90% transition
    double weekly_amplitude = 0.0;         // relative weekday modulation
    int lag_days = 13;                     // mobility peak -> R peak
    double case_noise = 1.0;               // 1 = Poisson draws, 0 = expectation mode
    double mobility_noise_sd = 0.0;        // relative
    std::uint64_t rng_seed = 0;
    double explosion_cap = 1e9;

    void validate() const {
        if (mobility_post_fraction <= 0 || mobility_post_fraction > 1)
            throw std::invalid_argument("mobility_post_fraction must be in (0,1]");
        if (transition_half_life <= 0)
            throw std::invalid_argument("transition_half_life must be positive");
        if (mobility_switch_day < 0 || mobility_switch_day >= n_days)
            throw std::invalid_argument("switch day outside the domain");
    }
};

inline Date default_epoch() { return Date::from_ymd(2020, 2, 1); }

/// Forward renewal process: C(t) ~ Poisson(R(t) * Lambda(t)), seeded with
/// seed_cases/day over the first seed_days. case_noise 0 switches to the
/// deterministic expectation recursion C(t) = R(t) * Lambda(t).
inline CaseSeries simulate_renewal(const Scenario& sc, const std::string& unit_id = "synthetic") {
    sc.validate();
    if (sc.seed_cases <= 0 || sc.seed_days < 1)
        throw std::invalid_argument("scenario needs positive seed cases");
    GenerationTimeDist gt = discretize_generation_time(sc.gamma_shape, sc.gamma_rate);
    std::mt19937_64 rng(sc.rng_seed);
    CaseSeries cs;
    cs.unit_id = unit_id;
    cs.start_date = default_epoch();
    cs.counts.resize(sc.n_days, 0.0);
    for (int t = 0; t < std::min(sc.seed_days, sc.n_days); ++t) cs.counts[t] = sc.seed_cases;
    for (int t = sc.seed_days; t < sc.n_days; ++t) {
        double lambda = infection_pressure(cs, gt, t);
        double mean = sc.r_trajectory.at(t) * lambda;
        if (mean > sc.explosion_cap)
            throw std::runtime_error(
                "explosive case trajectory; lower R or shorten the domain");
        if (sc.case_noise > 0) {
            std::poisson_distribution<long long> pois(mean);
            cs.counts[t] = static_cast<double>(mean > 0 ? pois(rng) : 0);
        } else {
            cs.counts[t] = mean;
        }
    }
    return cs;
}

/// Logistic switch from the pre level to post_fraction * pre, centered on the
/// switch day, with optional weekly modulation and relative Gaussian noise.
inline DailySeries simulate_mobility(const Scenario& sc, const std::string& unit_id = "synthetic") {
    sc.validate();
    if (sc.mobility_pre_level <= 0) throw std::invalid_argument("pre level must be positive");
    std::mt19937_64 rng(sc.rng_seed ^ 0x6d6f62ULL);
    std::normal_distribution<double> noise(0.0, sc.mobility_noise_sd);
    // logistic scale chosen so the drop is three-quarters done one half-life
    // past the switch; 10-90% then takes ~4x the half-life
    const double tau = sc.transition_half_life / std::log(3.0);
    DailySeries s;
    s.unit_id = unit_id;
    s.start_date = default_epoch();
    s.kind = SeriesKind::mobility;
    s.values.resize(sc.n_days);
    for (int t = 0; t < sc.n_days; ++t) {
        double drop = 1.0 / (1.0 + std::exp((t - sc.mobility_switch_day) / tau));
        double level = sc.mobility_pre_level *
                       (sc.mobility_post_fraction + (1.0 - sc.mobility_post_fraction) * drop);
        if (sc.weekly_amplitude > 0)
            level *= 1.0 + sc.weekly_amplitude * std::sin(2 * M_PI * t / 7.0);
        if (sc.mobility_noise_sd > 0) level *= 1.0 + noise(rng);
        s.values[t] = std::max(level, 0.0);
    }
    return s;
}

/// Paired (R, M) daily series with a constructed mobility-peak -> R-peak lag,
/// for the peak-distance and regression checks. Each unit gets a small
/// symmetric jitter of the peak day plus amplitude and daily noise.
struct EpiMobEnsemble {
    std::vector<DailySeries> r_series;
    std::vector<DailySeries> m_series;
    double mobility_peak_day = 0.0;  // ensemble-level truth
    double r_peak_day = 0.0;
};

inline EpiMobEnsemble make_epimob_ensemble(int n_units, const Scenario& sc) {
    sc.validate();
    EpiMobEnsemble out;
    const double p_m = sc.mobility_switch_day;
    const double p_r = p_m + sc.lag_days;
    out.mobility_peak_day = p_m;
    out.r_peak_day = p_r;
    std::mt19937_64 rng(sc.rng_seed ^ 0x65706dULL);
    std::uniform_real_distribution<double> jitter(-2.0, 2.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int i = 0; i < n_units; ++i) {
        double dj = jitter(rng);
        double amp_r = 2.0 + 0.3 * jitter(rng);
        double amp_m = 1.0 + 0.1 * jitter(rng);
        DailySeries r, m;
        r.unit_id = "unit" + std::to_string(i);
        m.unit_id = r.unit_id;
        r.start_date = default_epoch();
        m.start_date = default_epoch();
        r.kind = SeriesKind::rt_mean;
        m.kind = SeriesKind::mobility;
        r.values.resize(sc.n_days);
        m.values.resize(sc.n_days);
        for (int t = 0; t < sc.n_days; ++t) {
            // slow rise, fast fall around each peak; argmax sits at the peak
            double dm = t - (p_m + dj);
            double wm = dm < 0 ? 22.0 : 7.0;
            double dr = t - (p_r + dj);
            double wr = dr < 0 ? 14.0 : 10.0;
            double mv = sc.mobility_pre_level *
                        (sc.mobility_post_fraction +
                         (1 - sc.mobility_post_fraction) * std::exp(-dm * dm / (2 * wm * wm)));
            double rv = 0.5 + amp_r * std::exp(-dr * dr / (2 * wr * wr));
            m.values[t] = std::max(
                mv * amp_m * (1.0 + sc.mobility_noise_sd * noise(rng)), 0.0);
            r.values[t] = std::max(rv + 0.03 * noise(rng), 0.01);
        }
        out.r_series.push_back(std::move(r));
        out.m_series.push_back(std::move(m));
    }
    return out;
}

/// Least-squares projection of an analytic surface onto a tensor-product
/// spline basis (fine-grid separable fit). Used to pin down a spline "truth".
inline Eigen::MatrixXd project_surface(const BSplineBasis& basis_s, const BSplineBasis& basis_t,
                                       const std::function<double(double, double)>& f,
                                       int grid_per_day = 2) {
    std::vector<double> sg, tg;
    const double step = 1.0 / grid_per_day;
    for (double s = basis_s.domain_start(); s <= basis_s.domain_end() + 1e-9; s += step)
        sg.push_back(s);
    for (double t = basis_t.domain_start(); t <= basis_t.domain_end() + 1e-9; t += step)
        tg.push_back(t);
    Eigen::MatrixXd bs = basis_s.design_matrix(sg);
    Eigen::MatrixXd bt = basis_t.design_matrix(tg);
    Eigen::MatrixXd fv(sg.size(), tg.size());
    for (std::size_t i = 0; i < sg.size(); ++i)
        for (std::size_t j = 0; j < tg.size(); ++j) fv(i, j) = f(sg[i], tg[j]);
    Eigen::MatrixXd left = (bs.transpose() * bs).ldlt().solve(bs.transpose() * fv);
    return (bt.transpose() * bt).ldlt().solve(bt.transpose() * left.transpose()).transpose();
}

/// Known-coefficient function-on-function data: x_i random spline curves,
/// y_i(t) = int beta0(s,t) x_i(s) ds + functional noise. Exact in the spline
/// algebra, so noise_sd = 0 is perfectly representable by the fitted model.
struct FofDataset {
    std::vector<SmoothedCurve> xs;
    std::vector<SmoothedCurve> ys;
};

inline FofDataset make_fof_dataset(int n_units, std::shared_ptr<const BSplineBasis> basis_x,
                                   std::shared_ptr<const BSplineBasis> basis_s,
                                   std::shared_ptr<const BSplineBasis> basis_t,
                                   const Eigen::MatrixXd& beta0, double noise_sd,
                                   std::uint64_t seed) {
    if (beta0.rows() != basis_s->n_basis() || beta0.cols() != basis_t->n_basis())
        throw std::invalid_argument("beta0 shape must match the tensor bases");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd j_cross = basis_s->cross_gram(*basis_x);
    FofDataset out;
    for (int i = 0; i < n_units; ++i) {
        SmoothedCurve x;
        x.basis = basis_x;
        x.domain_start = basis_x->domain_start();
        x.domain_end = basis_x->domain_end();
        x.unit_id = "unit" + std::to_string(i);
        x.coefficients.resize(basis_x->n_basis());
        for (int j = 0; j < basis_x->n_basis(); ++j) x.coefficients[j] = gauss(rng);

        Eigen::VectorXd w = j_cross * x.coefficients;
        SmoothedCurve y;
        y.basis = basis_t;
        y.domain_start = basis_t->domain_start();
        y.domain_end = basis_t->domain_end();
        y.unit_id = x.unit_id;
        y.coefficients = beta0.transpose() * w;
        if (noise_sd > 0)
            for (int l = 0; l < y.coefficients.size(); ++l)
                y.coefficients[l] += noise_sd * gauss(rng);
        out.xs.push_back(std::move(x));
        out.ys.push_back(std::move(y));
    }
    return out;
}

/// Copies of a template curve translated by the given shifts, with optional
/// observation noise re-smoothed onto each shifted domain.
inline std::vector<SmoothedCurve> make_shifted_set(const SmoothedCurve& tmpl,
                                                   const std::vector<double>& shifts,
                                                   double relative_noise_sd, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<SmoothedCurve> out;
    for (std::size_t i = 0; i < shifts.size(); ++i) {
        SmoothedCurve shifted = tmpl.shifted(shifts[i]);
        shifted.unit_id = "unit" + std::to_string(i);
        if (relative_noise_sd > 0) {
            // sample daily, perturb, refit on the shifted domain
            DailySeries obs;
            obs.unit_id = shifted.unit_id;
            obs.start_date = default_epoch();
            double scale = std::abs(shifted.max_on_grid());
            int n = static_cast<int>(std::floor(shifted.domain_end - shifted.domain_start)) + 1;
            obs.values.resize(n);
            for (int t = 0; t < n; ++t)
                obs.values[t] = shifted.eval(shifted.domain_start + t) +
                                relative_noise_sd * scale * gauss(rng);
            // smoothing indexes days from the series start; fit on [0, n-1]
            // and shift the knots back into absolute time afterwards
            auto basis = std::make_shared<BSplineBasis>(0.0, n - 1.0, shifted.basis->n_basis(),
                                                       shifted.basis->order());
            SmoothedCurve fit = penalized_smooth(obs, basis, 1.0);
            fit = fit.shifted(shifted.domain_start);
            fit.unit_id = shifted.unit_id;
            out.push_back(std::move(fit));
        } else {
            out.push_back(std::move(shifted));
        }
    }
    return out;
}

}  // namespace epimob::synth
