#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "epimob/generation_time.hpp"
#include "epimob/series.hpp"

namespace epimob {

/// Daily case counts. Counts may be non-integer after smoothing.
struct CaseSeries {
    std::string unit_id;
    Date start_date;
    std::vector<double> counts;
    bool raw = true;

    std::size_t size() const { return counts.size(); }
};

/// 9-day centered mean by default (half_width 4), truncated at the edges.
inline CaseSeries smooth_cases(const CaseSeries& raw, int half_width = 4) {
    if (raw.counts.empty()) throw std::invalid_argument("empty case series");
    CaseSeries out = raw;
    out.counts = moving_average(raw.counts, half_width);
    out.raw = false;
    return out;
}

/// Infection pressure Lambda(t) = sum_s phi(s) C(t-s); lags before the series
/// start contribute 0.
inline double infection_pressure(const CaseSeries& cases, const GenerationTimeDist& gt, int t) {
    if (t < 1) throw std::invalid_argument("infection pressure needs t >= 1");
    double lambda = 0.0;
    for (int s = 1; s <= gt.horizon(); ++s) {
        int idx = t - s;
        if (idx < 0) break;
        if (idx < static_cast<int>(cases.counts.size())) lambda += gt.pmf[s - 1] * cases.counts[idx];
    }
    return lambda;
}

/// Poisson log-pmf with continuous counts: x log m - m - lgamma(x+1).
inline double poisson_log_pmf(double x, double m) {
    if (m <= 0) return x == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
    return x * std::log(m) - m - std::lgamma(x + 1.0);
}

/// Renewal-equation log-likelihood over days with Lambda(t) > 0. Days with
/// cases but no pressure are skipped (the model cannot explain them); their
/// indices are reported through `flagged` when given.
inline double log_likelihood(const CaseSeries& cases, const GenerationTimeDist& gt,
                             const std::vector<double>& r_per_day,
                             std::vector<int>* flagged = nullptr) {
    if (r_per_day.size() != cases.counts.size())
        throw std::invalid_argument("R vector length must match the case series");
    double ll = 0.0;
    for (int t = 1; t < static_cast<int>(cases.counts.size()); ++t) {
        if (r_per_day[t] <= 0) throw std::invalid_argument("R must be positive on evaluated days");
        double lambda = infection_pressure(cases, gt, t);
        if (lambda <= 0) {
            if (cases.counts[t] > 0 && flagged) flagged->push_back(t);
            continue;
        }
        ll += poisson_log_pmf(cases.counts[t], r_per_day[t] * lambda);
    }
    return ll;
}

struct McmcConfig {
    int iterations = 12000;
    int burn_in = 2000;
    int thinning = 5;
    double proposal_sd = 0.3;  // random-walk scale on log R
    double r_max = 12.0;       // flat prior upper bound
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (iterations <= burn_in) throw std::invalid_argument("iterations must exceed burn_in");
        if (proposal_sd <= 0) throw std::invalid_argument("proposal_sd must be positive");
        if (r_max <= 0) throw std::invalid_argument("r_max must be positive");
        if (thinning < 1) throw std::invalid_argument("thinning must be >= 1");
    }
};

struct RtDaySummary {
    bool defined = false;     // false where Lambda(t) = 0
    double mean = 0.0;
    double sd = 0.0;
    double q025 = 0.0, q25 = 0.0, q50 = 0.0, q75 = 0.0, q975 = 0.0;
    double acceptance = 0.0;
    bool flagged_seed_day = false;  // C(t) > 0 with Lambda(t) = 0
};

struct RtPosterior {
    std::string unit_id;
    Date start_date;
    std::vector<RtDaySummary> days;
    std::vector<std::string> warnings;

    DailySeries mean_series() const {
        DailySeries s;
        s.unit_id = unit_id;
        s.start_date = start_date;
        s.kind = SeriesKind::rt_mean;
        s.values.reserve(days.size());
        for (const auto& d : days)
            s.values.push_back(d.defined ? d.mean : DailySeries::missing());
        return s;
    }
};

namespace detail {

// splitmix64: deterministic per-day stream derivation from (seed, t)
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t t) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (t + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d4a77c95d0f88dULL;
    return z ^ (z >> 31);
}

inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) return 0.0;
    double pos = p * (sorted.size() - 1);
    auto lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    double frac = pos - lo;
    return sorted[lo] * (1 - frac) + sorted[lo + 1] * frac;
}

/// One-day MH chain on R with target Poisson(c; R * lambda) and flat prior on
/// (0, r_max]. Gaussian random walk on log R with Jacobian correction.
inline RtDaySummary run_day_chain(double c, double lambda, const McmcConfig& cfg,
                                  std::uint64_t stream_seed) {
    std::mt19937_64 rng(stream_seed);
    std::normal_distribution<double> step(0.0, cfg.proposal_sd);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    auto log_target = [&](double r) { return c * std::log(r * lambda) - r * lambda; };

    double log_r = std::log(std::clamp(c > 0 ? c / lambda : 0.5, 1e-6, cfg.r_max));
    double lt = log_target(std::exp(log_r));
    long accepted = 0, proposed = 0;
    std::vector<double> samples;
    samples.reserve((cfg.iterations - cfg.burn_in) / cfg.thinning + 1);

    for (int it = 0; it < cfg.iterations; ++it) {
        double log_r_new = log_r + step(rng);
        double u = unif(rng);
        ++proposed;
        double r_new = std::exp(log_r_new);
        if (r_new > 0 && r_new <= cfg.r_max) {
            // log-scale walk: Jacobian contributes (log_r_new - log_r)
            double lt_new = log_target(r_new);
            double log_alpha = lt_new - lt + (log_r_new - log_r);
            if (std::log(u) < log_alpha) {
                log_r = log_r_new;
                lt = lt_new;
                ++accepted;
            }
        }
        if (it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thinning == 0)
            samples.push_back(std::exp(log_r));
    }

    RtDaySummary s;
    s.defined = true;
    s.acceptance = static_cast<double>(accepted) / proposed;
    double mean = 0.0;
    for (double v : samples) mean += v;
    mean /= samples.size();
    double var = 0.0;
    for (double v : samples) var += (v - mean) * (v - mean);
    var /= (samples.size() - 1);
    std::sort(samples.begin(), samples.end());
    s.mean = mean;
    s.sd = std::sqrt(var);
    s.q025 = quantile_sorted(samples, 0.025);
    s.q25 = quantile_sorted(samples, 0.25);
    s.q50 = quantile_sorted(samples, 0.50);
    s.q75 = quantile_sorted(samples, 0.75);
    s.q975 = quantile_sorted(samples, 0.975);
    return s;
}

}  // namespace detail

/// Estimates the daily net reproduction number by per-day MH chains. The
/// likelihood factorizes over days given the case history, so each day is an
/// independent one-parameter chain with its own RNG stream derived from
/// (seed, t); parallel and serial runs agree.
inline RtPosterior estimate_rt(const CaseSeries& cases, const GenerationTimeDist& gt,
                               const McmcConfig& cfg) {
    cfg.validate();
    if (static_cast<int>(cases.counts.size()) <= gt.horizon())
        throw std::invalid_argument("case series shorter than the generation-time horizon");
    RtPosterior post;
    post.unit_id = cases.unit_id;
    post.start_date = cases.start_date;
    post.days.resize(cases.counts.size());
    for (int t = 1; t < static_cast<int>(cases.counts.size()); ++t) {
        double lambda = infection_pressure(cases, gt, t);
        if (lambda <= 0) {
            post.days[t].defined = false;
            post.days[t].flagged_seed_day = cases.counts[t] > 0;
            continue;
        }
        post.days[t] =
            detail::run_day_chain(cases.counts[t], lambda, cfg, detail::mix_seed(cfg.rng_seed, t));
        double acc = post.days[t].acceptance;
        if (acc < 0.1 || acc > 0.9)
            post.warnings.push_back("day " + std::to_string(t) + ": acceptance rate " +
                                    std::to_string(acc) + " outside [0.1, 0.9]");
    }
    return post;
}

/// 7-day (by default) centered moving average of posterior means, for display
/// and the delay metric. Window must be odd.
inline DailySeries rt_mean_series(const RtPosterior& post, int ma_window = 7) {
    if (ma_window < 1 || ma_window % 2 == 0)
        throw std::invalid_argument("moving-average window must be odd and >= 1");
    DailySeries s = post.mean_series();
    s.values = moving_average(s.values, ma_window / 2);
    return s;
}

}  // namespace epimob
