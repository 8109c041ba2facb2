#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "epimob/bspline.hpp"
#include "epimob/series.hpp"

namespace epimob {

/// A function represented in a B-spline basis, restricted to [domain_start,
/// domain_end] (which may be narrower than the basis support after
/// registration).
struct SmoothedCurve {
    std::shared_ptr<const BSplineBasis> basis;
    Eigen::VectorXd coefficients;
    double domain_start = 0.0;
    double domain_end = 0.0;
    std::string unit_id;

    double eval(double x, int deriv = 0) const {
        return basis->eval_row(x, deriv).dot(coefficients);
    }

    std::vector<double> eval_grid(const std::vector<double>& xs, int deriv = 0) const {
        std::vector<double> out(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) out[i] = eval(xs[i], deriv);
        return out;
    }

    /// Translates the curve in time by delta days: result(x) = this(x - delta).
    SmoothedCurve shifted(double delta) const {
        std::vector<double> knots = basis->knots();
        for (double& t : knots) t += delta;
        SmoothedCurve out;
        out.basis = std::make_shared<BSplineBasis>(std::move(knots), basis->order());
        out.coefficients = coefficients;
        out.domain_start = domain_start + delta;
        out.domain_end = domain_end + delta;
        out.unit_id = unit_id;
        return out;
    }

    double max_on_grid(double step = 0.25) const {
        double m = eval(domain_start);
        for (double x = domain_start; x <= domain_end; x += step) m = std::max(m, eval(x));
        return std::max(m, eval(domain_end));
    }

    double argmax_on_grid(double step = 0.25) const {
        double best_x = domain_start;
        double best_v = eval(domain_start);
        for (double x = domain_start; x <= domain_end; x += step) {
            double v = eval(x);
            if (v > best_v) {
                best_v = v;
                best_x = x;
            }
        }
        return best_x;
    }
};

namespace detail {

struct SmoothingSystem {
    Eigen::MatrixXd design;        // n x K basis values at observation times
    Eigen::MatrixXd penalty;       // K x K second-derivative Gram
    Eigen::VectorXd response;      // observed values (missing dropped)
    std::vector<double> times;     // observation times kept
};

inline SmoothingSystem build_system(const DailySeries& series, const BSplineBasis& basis) {
    SmoothingSystem sys;
    std::vector<double> ys;
    for (std::size_t i = 0; i < series.values.size(); ++i) {
        if (DailySeries::is_missing(series.values[i])) continue;
        double t = static_cast<double>(i);
        if (t < basis.domain_start() || t > basis.domain_end()) continue;
        sys.times.push_back(t);
        ys.push_back(series.values[i]);
    }
    if (static_cast<int>(sys.times.size()) < basis.n_basis())
        throw std::invalid_argument("need at least n_basis non-missing points to smooth (" +
                                    std::to_string(sys.times.size()) + " < " +
                                    std::to_string(basis.n_basis()) + ")");
    sys.design = basis.design_matrix(sys.times);
    sys.penalty = basis.gram_matrix(2);
    sys.response = Eigen::Map<const Eigen::VectorXd>(ys.data(), ys.size());
    return sys;
}

}  // namespace detail

/// Minimizes sum (y_i - f(t_i))^2 + lambda * int f''^2 over spline
/// coefficients. Observation times are day offsets from series.start_date.
inline SmoothedCurve penalized_smooth(const DailySeries& series,
                                      std::shared_ptr<const BSplineBasis> basis, double lambda) {
    if (lambda < 0) throw std::invalid_argument("lambda must be >= 0");
    auto sys = detail::build_system(series, *basis);
    // augmented least squares: stack sqrt(lambda) * sqrt(P) under the design
    // and QR-solve, which stays accurate for very stiff penalties where the
    // normal equations lose half the digits
    const int k = basis->n_basis();
    const auto n = static_cast<int>(sys.times.size());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> peig(sys.penalty);
    // clip roundoff-level eigenvalues so the penalty null space (straight
    // lines) stays exactly unpenalized no matter how large lambda gets
    const double eig_floor = 1e-12 * peig.eigenvalues().cwiseAbs().maxCoeff();
    Eigen::VectorXd clipped = peig.eigenvalues().unaryExpr(
        [eig_floor](double e) { return e > eig_floor ? e : 0.0; });
    Eigen::VectorXd sq = clipped.cwiseSqrt();
    Eigen::MatrixXd penalty_root = sq.asDiagonal() * peig.eigenvectors().transpose();
    Eigen::MatrixXd aug(n + k, k);
    aug.topRows(n) = sys.design;
    aug.bottomRows(k) = std::sqrt(lambda) * penalty_root;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + k);
    rhs.head(n) = sys.response;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(aug);
    if (qr.rank() < k)
        throw std::runtime_error("singular smoothing system for unit " + series.unit_id);
    Eigen::VectorXd coef = qr.solve(rhs);
    if (!coef.allFinite())
        throw std::runtime_error("singular smoothing system for unit " + series.unit_id);
    SmoothedCurve out;
    out.basis = std::move(basis);
    out.coefficients = std::move(coef);
    out.domain_start = out.basis->domain_start();
    out.domain_end = out.basis->domain_end();
    out.unit_id = series.unit_id;
    return out;
}

struct GcvPoint {
    double lambda = 0.0;
    double gcv = 0.0;
    double effective_df = 0.0;
    bool excluded = false;  // df >= n
};

/// GCV(lambda) = n * SSE / (n - trace(Hat))^2 for one series.
inline GcvPoint gcv_score(const detail::SmoothingSystem& sys, double lambda) {
    const auto n = static_cast<double>(sys.response.size());
    Eigen::MatrixXd lhs = sys.design.transpose() * sys.design + lambda * sys.penalty;
    Eigen::LDLT<Eigen::MatrixXd> solver(lhs);
    Eigen::MatrixXd smoother = solver.solve(sys.design.transpose());  // K x n
    Eigen::VectorXd fitted = sys.design * (smoother * sys.response);
    double trace = (sys.design * smoother).trace();
    double sse = (sys.response - fitted).squaredNorm();
    GcvPoint p;
    p.lambda = lambda;
    p.effective_df = trace;
    p.excluded = trace >= n;
    p.gcv = p.excluded ? std::numeric_limits<double>::infinity()
                       : n * sse / ((n - trace) * (n - trace));
    return p;
}

/// Grid lambda minimizing the mean GCV over the given series. Ties break
/// toward larger lambda; lambdas with df >= n for any series are excluded.
inline double gcv_select(const std::vector<DailySeries>& serieses, const BSplineBasis& basis,
                         const std::vector<double>& lambda_grid,
                         std::vector<std::string>* warnings = nullptr) {
    if (lambda_grid.empty()) throw std::invalid_argument("empty lambda grid");
    if (serieses.empty()) throw std::invalid_argument("no series given");
    for (double l : lambda_grid)
        if (l < 0) throw std::invalid_argument("lambda grid must be non-negative");

    std::vector<detail::SmoothingSystem> systems;
    systems.reserve(serieses.size());
    for (const auto& s : serieses) systems.push_back(detail::build_system(s, basis));

    double best_lambda = -1.0;
    double best_score = std::numeric_limits<double>::infinity();
    for (double lambda : lambda_grid) {
        double mean = 0.0;
        bool excluded = false;
        for (const auto& sys : systems) {
            GcvPoint p = gcv_score(sys, lambda);
            if (p.excluded) {
                excluded = true;
                break;
            }
            mean += p.gcv;
        }
        if (excluded) {
            if (warnings)
                warnings->push_back("lambda " + std::to_string(lambda) +
                                    " excluded: effective df >= n");
            continue;
        }
        mean /= static_cast<double>(systems.size());
        if (mean < best_score || (mean == best_score && lambda > best_lambda)) {
            best_score = mean;
            best_lambda = lambda;
        }
    }
    if (best_lambda < 0) throw std::runtime_error("all lambdas excluded by the df check");
    return best_lambda;
}

/// Logarithmic lambda grid, default 1e-2 .. 1e6 with 33 points.
inline std::vector<double> log_lambda_grid(double lo = 1e-2, double hi = 1e6, int n = 33) {
    std::vector<double> grid(n);
    for (int i = 0; i < n; ++i)
        grid[i] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (n - 1));
    return grid;
}

}  // namespace epimob
