#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "epimob/bspline.hpp"
#include "epimob/smoothing.hpp"

namespace epimob {

/// Fitted functional linear model
///   y_i(t) = alpha(t) + int beta(s,t) x_i(s) ds [+ z_i beta_pc(t)] + eps_i(t)
/// with beta expanded on a K_s x K_t tensor-product cubic B-spline basis and
/// estimated by penalized least squares on a daily grid.
struct FoFFit {
    std::shared_ptr<const BSplineBasis> basis_s;
    std::shared_ptr<const BSplineBasis> basis_t;
    Eigen::VectorXd alpha;               // K_t intercept coefficients
    Eigen::MatrixXd beta;                // K_s x K_t surface coefficients
    Eigen::VectorXd beta_pc;             // K_t, empty without a scalar covariate
    Eigen::MatrixXd coef_covariance;     // full sandwich covariance (alpha+beta[+pc])
    Eigen::MatrixXd residuals;           // n x G residual values on the grid
    std::vector<double> grid;            // daily evaluation grid
    double r_squared = 0.0;
    double lambda_s = 0.0, lambda_t = 0.0;
    std::optional<double> partial_r2_mobility;
    std::optional<double> partial_r2_pc;
    std::vector<std::string> warnings;

    int ks() const { return static_cast<int>(beta.rows()); }
    int kt() const { return static_cast<int>(beta.cols()); }

    double eval_alpha(double t) const { return basis_t->eval_row(t).dot(alpha); }

    double eval_beta(double s, double t) const {
        return basis_s->eval_row(s).transpose() * beta * basis_t->eval_row(t);
    }

    double eval_beta_pc(double t) const {
        if (beta_pc.size() == 0) throw std::logic_error("fit has no scalar-covariate term");
        return basis_t->eval_row(t).dot(beta_pc);
    }

    /// Pointwise standard error of beta(s,t) from the sandwich covariance.
    double se_beta(double s, double t) const {
        Eigen::VectorXd rs = basis_s->eval_row(s);
        Eigen::VectorXd rt = basis_t->eval_row(t);
        Eigen::VectorXd phi(ks() * kt());
        for (int j = 0; j < ks(); ++j)
            for (int l = 0; l < kt(); ++l) phi[j * kt() + l] = rs[j] * rt[l];
        const int off = kt();  // beta block starts after alpha
        double v = phi.transpose() * coef_covariance.block(off, off, phi.size(), phi.size()) * phi;
        return std::sqrt(std::max(v, 0.0));
    }

    double se_beta_pc(double t) const {
        if (beta_pc.size() == 0) throw std::logic_error("fit has no scalar-covariate term");
        Eigen::VectorXd rt = basis_t->eval_row(t);
        const int off = kt() + ks() * kt();
        double v = rt.transpose() * coef_covariance.block(off, off, kt(), kt()) * rt;
        return std::sqrt(std::max(v, 0.0));
    }
};

struct LagSlice {
    double lag = 13.0;
    std::vector<double> s;       // valid sub-domain sample points
    std::vector<double> value;   // beta(s, s+lag)
    std::vector<double> lower;   // pointwise band
    std::vector<double> upper;
    std::vector<std::pair<double, double>> significant_intervals;  // band excludes 0
};

namespace fof_detail {

struct Assembled {
    Eigen::MatrixXd xtx;       // per-block-accumulated normal matrix
    Eigen::VectorXd xty;
    Eigen::MatrixXd penalty;
    std::vector<Eigen::MatrixXd> unit_design;  // X_i, G x P
    Eigen::MatrixXd response;                  // n x G
    std::vector<double> grid;
    Eigen::VectorXd w_mean;    // mean predictor scores, centered out of the design
    int k_t = 0;               // response-basis dimension, for the residual df correction
};

inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline void check_paired(const std::vector<SmoothedCurve>& ys,
                         const std::vector<SmoothedCurve>& xs) {
    if (ys.size() != xs.size()) throw std::invalid_argument("response/predictor sets must pair up");
    if (ys.size() < 3) throw std::invalid_argument("need at least 3 curve pairs");
    for (std::size_t i = 1; i < ys.size(); ++i) {
        if (std::abs(ys[i].domain_start - ys[0].domain_start) > 1e-9 ||
            std::abs(ys[i].domain_end - ys[0].domain_end) > 1e-9 ||
            std::abs(xs[i].domain_start - ys[0].domain_start) > 1e-9 ||
            std::abs(xs[i].domain_end - ys[0].domain_end) > 1e-9)
            throw std::invalid_argument("all curves must share one common domain (register first)");
    }
}

inline Assembled assemble(const std::vector<SmoothedCurve>& ys,
                          const std::vector<SmoothedCurve>& xs, const BSplineBasis& basis_s,
                          const BSplineBasis& basis_t, double lambda_s, double lambda_t,
                          const std::vector<double>* z) {
    const auto n = static_cast<int>(ys.size());
    const int ks = basis_s.n_basis();
    const int kt = basis_t.n_basis();
    const int p = kt + ks * kt + (z ? kt : 0);

    Assembled a;
    a.k_t = kt;
    const double t0 = ys[0].domain_start;
    const double t1 = ys[0].domain_end;
    for (double t = t0; t <= t1 + 1e-9; t += 1.0) a.grid.push_back(t);
    const auto g = static_cast<int>(a.grid.size());

    // integral of basis_s against each predictor curve
    Eigen::MatrixXd theta_t(g, kt);
    for (int r = 0; r < g; ++r) theta_t.row(r) = basis_t.eval_row(a.grid[r]).transpose();

    // predictor scores are centered across units: curves sharing a dominant
    // common shape would otherwise confound the intercept with beta applied
    // to the mean curve. The reparameterization leaves beta and the fitted
    // values unchanged; the caller folds the mean back into alpha.
    Eigen::MatrixXd scores(n, ks);
    for (int i = 0; i < n; ++i) {
        Eigen::MatrixXd j_cross = basis_s.cross_gram(*xs[i].basis);  // ks x Kx
        scores.row(i) = (j_cross * xs[i].coefficients).transpose();
    }
    a.w_mean = scores.colwise().mean().transpose();
    scores.rowwise() -= a.w_mean.transpose();

    a.response.resize(n, g);
    a.unit_design.reserve(n);
    a.xtx = Eigen::MatrixXd::Zero(p, p);
    a.xty = Eigen::VectorXd::Zero(p);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd w = scores.row(i).transpose();               // ks, centered
        Eigen::MatrixXd xi(g, p);
        for (int r = 0; r < g; ++r) {
            xi.block(r, 0, 1, kt) = theta_t.row(r);
            for (int j = 0; j < ks; ++j)
                xi.block(r, kt + j * kt, 1, kt) = w[j] * theta_t.row(r);
            if (z) xi.block(r, kt + ks * kt, 1, kt) = (*z)[i] * theta_t.row(r);
            a.response(i, r) = ys[i].eval(a.grid[r]);
        }
        a.xtx.noalias() += xi.transpose() * xi;
        a.xty.noalias() += xi.transpose() * a.response.row(i).transpose();
        a.unit_design.push_back(std::move(xi));
    }

    Eigen::MatrixXd gram_s = basis_s.gram_matrix(0);
    Eigen::MatrixXd gram_t = basis_t.gram_matrix(0);
    Eigen::MatrixXd pen_s = basis_s.gram_matrix(2);
    Eigen::MatrixXd pen_t = basis_t.gram_matrix(2);
    a.penalty = Eigen::MatrixXd::Zero(p, p);
    a.penalty.block(0, 0, kt, kt) = lambda_t * pen_t;
    a.penalty.block(kt, kt, ks * kt, ks * kt) =
        lambda_s * kron(pen_s, gram_t) + lambda_t * kron(gram_s, pen_t);
    if (z) a.penalty.block(kt + ks * kt, kt + ks * kt, kt, kt) = lambda_t * pen_t;
    return a;
}

struct Solved {
    Eigen::VectorXd coef;
    Eigen::MatrixXd cov;
    Eigen::MatrixXd residuals;
    double r_squared = 0.0;
};

inline Solved solve(const Assembled& a, int n_units, bool allow_near_singular = false) {
    Eigen::MatrixXd lhs = a.xtx + a.penalty;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lhs);
    const Eigen::VectorXd& ev = eig.eigenvalues();
    double emax = ev.maxCoeff();
    int rank = 0;
    for (int i = 0; i < ev.size(); ++i)
        if (ev[i] > 1e-10 * emax) ++rank;
    if (rank < ev.size() && !allow_near_singular)
        throw std::runtime_error("rank-deficient design after penalization: rank " +
                                 std::to_string(rank) + " of " + std::to_string(ev.size()) +
                                 " coefficients identifiable");
    // near-singular solves clamp the spectrum from below; the sandwich then
    // reports the inflated uncertainty of the confounded directions
    Eigen::VectorXd ev_clamped = ev.cwiseMax(1e-12 * emax);
    Eigen::MatrixXd lhs_inv = eig.eigenvectors() * ev_clamped.cwiseInverse().asDiagonal() *
                              eig.eigenvectors().transpose();

    Solved s;
    s.coef = lhs_inv * a.xty;

    const auto g = static_cast<int>(a.grid.size());
    s.residuals.resize(n_units, g);
    double sse = 0.0;
    for (int i = 0; i < n_units; ++i) {
        Eigen::VectorXd fitted = a.unit_design[i] * s.coef;
        s.residuals.row(i) = a.response.row(i) - fitted.transpose();
        sse += s.residuals.row(i).squaredNorm();
    }
    Eigen::RowVectorXd ybar = a.response.colwise().mean();
    double sst = (a.response.rowwise() - ybar).squaredNorm();
    s.r_squared = sst > 0 ? 1.0 - sse / sst : 0.0;

    // sandwich covariance under homoscedastic functional residuals:
    // Sigma estimated across units on the grid. Each unit's fitted curve lies
    // in the k_t-dimensional response-basis span, so the fit consumes
    // edf / k_t degrees of freedom per unit; dividing by n - edf/k_t removes
    // the shrinkage bias that plain 1/(n-1) leaves in small samples
    double edf = (lhs_inv * a.xtx).trace();
    double denom = std::max(1.0, n_units - edf / std::max(1, a.k_t));
    Eigen::MatrixXd sigma = s.residuals.transpose() * s.residuals / denom;
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(lhs.rows(), lhs.cols());
    for (int i = 0; i < n_units; ++i)
        meat.noalias() += a.unit_design[i].transpose() * sigma * a.unit_design[i];
    s.cov = lhs_inv * meat * lhs_inv;
    return s;
}

}  // namespace fof_detail

inline FoFFit fit_fof_impl(const std::vector<SmoothedCurve>& ys,
                           const std::vector<SmoothedCurve>& xs, int k_s, int k_t,
                           double lambda_s, double lambda_t, const std::vector<double>* z_raw) {
    fof_detail::check_paired(ys, xs);
    if (lambda_s < 0 || lambda_t < 0) throw std::invalid_argument("penalties must be >= 0");
    const auto n = static_cast<int>(ys.size());

    std::optional<std::vector<double>> z;
    if (z_raw) {
        if (static_cast<int>(z_raw->size()) != n)
            throw std::invalid_argument("scalar covariate needs one value per unit");
        double mean = 0.0;
        for (double v : *z_raw) {
            if (!std::isfinite(v)) throw std::invalid_argument("scalar covariate must be finite");
            mean += v;
        }
        mean /= n;
        double var = 0.0;
        for (double v : *z_raw) var += (v - mean) * (v - mean);
        var /= (n - 1);
        if (var <= 1e-24)
            throw std::invalid_argument("scalar covariate is constant; its effect is indeterminate");
        z.emplace(z_raw->size());
        for (int i = 0; i < n; ++i) (*z)[i] = ((*z_raw)[i] - mean) / std::sqrt(var);
    }

    auto basis_s = std::make_shared<BSplineBasis>(ys[0].domain_start, ys[0].domain_end, k_s, 4);
    auto basis_t = std::make_shared<BSplineBasis>(ys[0].domain_start, ys[0].domain_end, k_t, 4);

    // a scalar covariate that is (nearly) a linear functional of the
    // predictors confounds beta_pc with beta; detect it up front so the solve
    // can fall back to a clamped spectrum instead of failing outright
    bool z_collinear = false;
    double z_rho2 = 0.0;
    if (z) {
        Eigen::MatrixXd w(n, k_s);
        for (int i = 0; i < n; ++i)
            w.row(i) = (basis_s->cross_gram(*xs[i].basis) * xs[i].coefficients).transpose();
        Eigen::MatrixXd wc = w.rowwise() - w.colwise().mean();
        Eigen::VectorXd zv = Eigen::Map<const Eigen::VectorXd>(z->data(), n);
        Eigen::VectorXd zfit = wc * (wc.completeOrthogonalDecomposition().solve(zv));
        z_rho2 = zv.squaredNorm() > 0 ? zfit.squaredNorm() / zv.squaredNorm() : 0.0;
        z_collinear = z_rho2 > 0.99;
    }

    auto a = fof_detail::assemble(ys, xs, *basis_s, *basis_t, lambda_s, lambda_t,
                                  z ? &*z : nullptr);
    auto solved = fof_detail::solve(a, n, z_collinear);

    FoFFit fit;
    fit.basis_s = basis_s;
    fit.basis_t = basis_t;
    fit.beta.resize(k_s, k_t);
    for (int j = 0; j < k_s; ++j) fit.beta.row(j) = solved.coef.segment(k_t + j * k_t, k_t).transpose();
    // undo the predictor centering: alpha_raw(t) = alpha_c(t) - int beta(s,t) xbar(s) ds
    fit.alpha = solved.coef.head(k_t) - fit.beta.transpose() * a.w_mean;
    if (z) fit.beta_pc = solved.coef.tail(k_t);
    fit.coef_covariance = std::move(solved.cov);
    fit.residuals = std::move(solved.residuals);
    fit.grid = std::move(a.grid);
    fit.r_squared = solved.r_squared;
    fit.lambda_s = lambda_s;
    fit.lambda_t = lambda_t;

    if (z_collinear)
        fit.warnings.push_back("scalar covariate nearly collinear with mobility scores (R^2 " +
                               std::to_string(z_rho2) + "); standard errors are inflated");
    return fit;
}

inline FoFFit fit_fof(const std::vector<SmoothedCurve>& ys, const std::vector<SmoothedCurve>& xs,
                      int k_s = 10, int k_t = 10, double lambda_s = 1e-2, double lambda_t = 1e-2) {
    return fit_fof_impl(ys, xs, k_s, k_t, lambda_s, lambda_t, nullptr);
}

/// Intercept-plus-scalar-only model, used for the mobility partial R^2 refit.
inline double r2_without_mobility(const std::vector<SmoothedCurve>& ys, int k_t, double lambda_t,
                                  const std::vector<double>* z);

/// Adds a per-unit scalar covariate term z_i * beta_pc(t) (z standardized
/// internally) and reports partial R^2 for both terms by refit-drop.
inline FoFFit fit_fof_with_scalar(const std::vector<SmoothedCurve>& ys,
                                  const std::vector<SmoothedCurve>& xs,
                                  const std::vector<double>& z, int k_s = 10, int k_t = 10,
                                  double lambda_s = 1e-2, double lambda_t = 1e-2) {
    FoFFit full = fit_fof_impl(ys, xs, k_s, k_t, lambda_s, lambda_t, &z);
    FoFFit no_scalar = fit_fof_impl(ys, xs, k_s, k_t, lambda_s, lambda_t, nullptr);
    double no_mobility = r2_without_mobility(ys, k_t, lambda_t, &z);
    full.partial_r2_pc = full.r_squared - no_scalar.r_squared;
    full.partial_r2_mobility = full.r_squared - no_mobility;
    return full;
}

/// Evaluates beta and its band along t = s + lag on {s : s, s+lag in domain}.
inline LagSlice lag_slice(const FoFFit& fit, double lag, double level = 0.95,
                          double step = 1.0) {
    if (lag < 0) throw std::invalid_argument("lag must be >= 0");
    const double a = fit.basis_t->domain_start();
    const double b = fit.basis_t->domain_end();
    if (a + lag > b) throw std::invalid_argument("lag exceeds the domain length");
    boost::math::normal_distribution<double> nd;
    const double zq = boost::math::quantile(nd, 0.5 + level / 2);
    LagSlice out;
    out.lag = lag;
    bool in_sig = false;
    double sig_start = 0.0;
    for (double s = a; s + lag <= b + 1e-9; s += step) {
        double v = fit.eval_beta(s, s + lag);
        double se = fit.se_beta(s, s + lag);
        out.s.push_back(s);
        out.value.push_back(v);
        out.lower.push_back(v - zq * se);
        out.upper.push_back(v + zq * se);
        bool sig = v - zq * se > 0 || v + zq * se < 0;
        if (sig && !in_sig) {
            in_sig = true;
            sig_start = s;
        } else if (!sig && in_sig) {
            in_sig = false;
            out.significant_intervals.emplace_back(sig_start, s - step);
        }
    }
    if (in_sig) out.significant_intervals.emplace_back(sig_start, out.s.back());
    return out;
}

struct BandSurface {
    std::vector<double> s_grid, t_grid;
    Eigen::MatrixXd value, se, lower, upper;  // indexed (s, t)
};

/// Pointwise bands beta_hat +- z * SE over a (s, t) grid.
inline BandSurface confidence_band(const FoFFit& fit, double level = 0.95, double step = 1.0) {
    if (level <= 0 || level >= 1) throw std::invalid_argument("level must be in (0,1)");
    if (fit.residuals.rows() < 3)
        throw std::invalid_argument("covariance inestimable with fewer than 3 units");
    boost::math::normal_distribution<double> nd;
    const double zq = boost::math::quantile(nd, 0.5 + level / 2);
    BandSurface out;
    for (double s = fit.basis_s->domain_start(); s <= fit.basis_s->domain_end() + 1e-9; s += step)
        out.s_grid.push_back(s);
    for (double t = fit.basis_t->domain_start(); t <= fit.basis_t->domain_end() + 1e-9; t += step)
        out.t_grid.push_back(t);
    const auto ns = static_cast<int>(out.s_grid.size());
    const auto nt = static_cast<int>(out.t_grid.size());
    out.value.resize(ns, nt);
    out.se.resize(ns, nt);
    out.lower.resize(ns, nt);
    out.upper.resize(ns, nt);
    for (int i = 0; i < ns; ++i)
        for (int j = 0; j < nt; ++j) {
            double v = fit.eval_beta(out.s_grid[i], out.t_grid[j]);
            double se = fit.se_beta(out.s_grid[i], out.t_grid[j]);
            out.value(i, j) = v;
            out.se(i, j) = se;
            out.lower(i, j) = v - zq * se;
            out.upper(i, j) = v + zq * se;
        }
    return out;
}

/// First principal-component score per unit from standardized covariate
/// columns; sign fixed so the first covariate loads non-negatively.
inline std::vector<double> compute_pc1(const std::vector<std::vector<double>>& covariates,
                                       double* explained_fraction = nullptr) {
    const auto n = covariates.size();
    if (n < 2) throw std::invalid_argument("need at least 2 units");
    const auto p = covariates[0].size();
    if (p < 2) throw std::invalid_argument("need at least 2 covariates");
    Eigen::MatrixXd m(n, p);
    for (std::size_t i = 0; i < n; ++i) {
        if (covariates[i].size() != p)
            throw std::invalid_argument("ragged covariate matrix");
        for (std::size_t j = 0; j < p; ++j) {
            if (!std::isfinite(covariates[i][j]))
                throw std::invalid_argument("missing or non-finite covariate value");
            m(i, j) = covariates[i][j];
        }
    }
    Eigen::RowVectorXd mean = m.colwise().mean();
    m.rowwise() -= mean;
    for (std::size_t j = 0; j < p; ++j) {
        double sd = std::sqrt(m.col(j).squaredNorm() / (n - 1));
        if (sd <= 1e-24) throw std::invalid_argument("constant covariate column " + std::to_string(j));
        m.col(j) /= sd;
    }
    Eigen::MatrixXd corr = m.transpose() * m / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
    Eigen::VectorXd loading = eig.eigenvectors().col(p - 1);  // largest eigenvalue last
    if (loading[0] < 0) loading = -loading;
    if (explained_fraction)
        *explained_fraction = eig.eigenvalues()[p - 1] / eig.eigenvalues().sum();
    Eigen::VectorXd scores = m * loading;
    return {scores.data(), scores.data() + scores.size()};
}

inline double r2_without_mobility(const std::vector<SmoothedCurve>& ys, int k_t, double lambda_t,
                                  const std::vector<double>* z) {
    // intercept (+ optional scalar) model on the same grid and basis
    const auto n = static_cast<int>(ys.size());
    BSplineBasis basis_t(ys[0].domain_start, ys[0].domain_end, k_t, 4);
    std::vector<double> grid;
    for (double t = ys[0].domain_start; t <= ys[0].domain_end + 1e-9; t += 1.0) grid.push_back(t);
    const auto g = static_cast<int>(grid.size());
    Eigen::MatrixXd theta(g, k_t);
    for (int r = 0; r < g; ++r) theta.row(r) = basis_t.eval_row(grid[r]).transpose();

    std::vector<double> zstd;
    if (z) {
        double mean = 0.0;
        for (double v : *z) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : *z) var += (v - mean) * (v - mean);
        var /= (n - 1);
        for (double v : *z) zstd.push_back((v - mean) / std::sqrt(var));
    }
    const int p = z ? 2 * k_t : k_t;
    Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd xty = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd resp(n, g);
    std::vector<Eigen::MatrixXd> designs;
    for (int i = 0; i < n; ++i) {
        Eigen::MatrixXd xi(g, p);
        xi.block(0, 0, g, k_t) = theta;
        if (z) xi.block(0, k_t, g, k_t) = zstd[i] * theta;
        for (int r = 0; r < g; ++r) resp(i, r) = ys[i].eval(grid[r]);
        xtx.noalias() += xi.transpose() * xi;
        xty.noalias() += xi.transpose() * resp.row(i).transpose();
        designs.push_back(std::move(xi));
    }
    Eigen::MatrixXd pen = Eigen::MatrixXd::Zero(p, p);
    pen.block(0, 0, k_t, k_t) = lambda_t * basis_t.gram_matrix(2);
    if (z) pen.block(k_t, k_t, k_t, k_t) = lambda_t * basis_t.gram_matrix(2);
    Eigen::VectorXd coef = (xtx + pen).ldlt().solve(xty);
    double sse = 0.0;
    for (int i = 0; i < n; ++i)
        sse += (resp.row(i).transpose() - designs[i] * coef).squaredNorm();
    Eigen::RowVectorXd ybar = resp.colwise().mean();
    double sst = (resp.rowwise() - ybar).squaredNorm();
    return sst > 0 ? 1.0 - sse / sst : 0.0;
}

}  // namespace epimob
