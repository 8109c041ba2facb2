#pragma once

#include <boost/math/distributions/gamma.hpp>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace epimob {

/// Discretized generation-interval distribution phi(1..S).
struct GenerationTimeDist {
    double shape = 0.0;
    double rate = 0.0;       // 1/day
    std::vector<double> pmf;  // pmf[s-1] = phi(s), s = 1..S

    int horizon() const { return static_cast<int>(pmf.size()); }

    double mean() const {
        double m = 0.0;
        for (std::size_t i = 0; i < pmf.size(); ++i) m += (i + 1.0) * pmf[i];
        return m;
    }
};

/// Bins a gamma(shape, rate) density onto integer days:
/// phi(s) proportional to F(s+1/2) - F(max(s-1/2, 0)), s = 1..S, where S is the
/// smallest horizon whose cumulative mass reaches mass_cutoff. Renormalized to
/// sum exactly 1.
inline GenerationTimeDist discretize_generation_time(double shape, double rate,
                                                     double mass_cutoff = 0.999) {
    if (shape <= 0 || rate <= 0) throw std::invalid_argument("gamma parameters must be positive");
    if (mass_cutoff <= 0 || mass_cutoff >= 1)
        throw std::invalid_argument("mass_cutoff must be in (0,1)");
    boost::math::gamma_distribution<double> g(shape, 1.0 / rate);  // boost uses scale
    GenerationTimeDist out;
    out.shape = shape;
    out.rate = rate;
    double cum = 0.0;
    for (int s = 1; cum < mass_cutoff; ++s) {
        double lo = std::max(s - 0.5, 0.0);
        double hi_cdf = boost::math::cdf(g, s + 0.5);
        out.pmf.push_back(hi_cdf - boost::math::cdf(g, lo));
        cum = hi_cdf;  // cumulative mass covered up to the bin edge
        if (s > 100000) throw std::runtime_error("generation-time horizon did not converge");
    }
    double total = std::accumulate(out.pmf.begin(), out.pmf.end(), 0.0);
    for (double& p : out.pmf) p /= total;
    return out;
}

}  // namespace epimob
