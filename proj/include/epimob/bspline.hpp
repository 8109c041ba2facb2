#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace epimob {

/// B-spline basis of a given order (4 = cubic) on [a,b] with equally spaced
/// interior knots and order-fold endpoint knots. n_basis = #interior + order.
class BSplineBasis {
public:
    BSplineBasis(double a, double b, int n_basis, int order = 4)
        : a_(a), b_(b), order_(order), n_basis_(n_basis) {
        if (order < 1) throw std::invalid_argument("order must be >= 1");
        if (n_basis < order) throw std::invalid_argument("n_basis must be >= order");
        if (!(b > a)) throw std::invalid_argument("domain must be non-degenerate");
        const int n_interior = n_basis - order;
        knots_.reserve(static_cast<std::size_t>(n_basis + order));
        for (int i = 0; i < order; ++i) knots_.push_back(a);
        for (int i = 1; i <= n_interior; ++i)
            knots_.push_back(a + (b - a) * i / (n_interior + 1));
        for (int i = 0; i < order; ++i) knots_.push_back(b);
    }

    /// Basis from an explicit knot vector (size n_basis + order, non-decreasing,
    /// order-fold end knots assumed). Used when deserializing curves.
    BSplineBasis(std::vector<double> knots, int order) : order_(order), knots_(std::move(knots)) {
        if (order < 1) throw std::invalid_argument("order must be >= 1");
        n_basis_ = static_cast<int>(knots_.size()) - order;
        if (n_basis_ < order) throw std::invalid_argument("knot vector too short");
        if (!std::is_sorted(knots_.begin(), knots_.end()))
            throw std::invalid_argument("knots must be non-decreasing");
        a_ = knots_.front();
        b_ = knots_.back();
    }

    double domain_start() const { return a_; }
    double domain_end() const { return b_; }
    int order() const { return order_; }
    int n_basis() const { return n_basis_; }
    const std::vector<double>& knots() const { return knots_; }

    bool same_layout(const BSplineBasis& o) const {
        return order_ == o.order_ && knots_ == o.knots_;
    }

    /// Index of the knot span containing x (clamped to the domain).
    int span(double x) const {
        const int k = order_;
        const int hi = n_basis_;  // knots_[hi] is the first copy of b
        if (x >= knots_[hi]) return hi - 1;
        if (x <= knots_[k - 1]) return k - 1;
        auto it = std::upper_bound(knots_.begin() + k, knots_.begin() + hi, x);
        return static_cast<int>(it - knots_.begin()) - 1;
    }

    /// Cox–de Boor: values (and optionally derivatives up to `nderiv`) of the
    /// `order` basis functions that are non-zero at x. Row d of the result is
    /// the d-th derivative; the functions are span(x)-order+1 .. span(x).
    Eigen::MatrixXd nonzero_basis(double x, int nderiv = 0) const {
        const int k = order_;
        const int i = span(x);
        x = std::clamp(x, a_, b_);

        // ndu triangle from the standard recursion
        std::vector<double> left(k), right(k);
        Eigen::MatrixXd ndu = Eigen::MatrixXd::Zero(k, k);
        ndu(0, 0) = 1.0;
        for (int j = 1; j < k; ++j) {
            left[j] = x - knots_[i + 1 - j];
            right[j] = knots_[i + j] - x;
            double saved = 0.0;
            for (int r = 0; r < j; ++r) {
                ndu(j, r) = right[r + 1] + left[j - r];
                double temp = ndu(r, j - 1) / ndu(j, r);
                ndu(r, j) = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu(j, j) = saved;
        }

        Eigen::MatrixXd ders = Eigen::MatrixXd::Zero(nderiv + 1, k);
        for (int j = 0; j < k; ++j) ders(0, j) = ndu(j, k - 1);

        if (nderiv > 0) {
            Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, k);
            for (int r = 0; r < k; ++r) {
                int s1 = 0, s2 = 1;
                a.setZero();
                a(0, 0) = 1.0;
                for (int d = 1; d <= nderiv; ++d) {
                    double dv = 0.0;
                    const int rk = r - d;
                    const int pk = k - 1 - d;
                    if (r >= d) {
                        double den = ndu(pk + 1, rk);
                        a(s2, 0) = den == 0.0 ? 0.0 : a(s1, 0) / den;
                        dv = a(s2, 0) * ndu(rk, pk);
                    }
                    const int j1 = rk >= -1 ? 1 : -rk;
                    const int j2 = r - 1 <= pk ? d - 1 : k - 1 - r;
                    for (int j = j1; j <= j2; ++j) {
                        double den = ndu(pk + 1, rk + j);
                        a(s2, j) = den == 0.0 ? 0.0 : (a(s1, j) - a(s1, j - 1)) / den;
                        dv += a(s2, j) * ndu(rk + j, pk);
                    }
                    if (r <= pk) {
                        double den = ndu(pk + 1, r);
                        a(s2, d) = den == 0.0 ? 0.0 : -a(s1, d - 1) / den;
                        dv += a(s2, d) * ndu(r, pk);
                    }
                    ders(d, r) = dv;
                    std::swap(s1, s2);
                }
            }
            double factor = k - 1;
            for (int d = 1; d <= nderiv; ++d) {
                for (int j = 0; j < k; ++j) ders(d, j) *= factor;
                factor *= k - 1 - d;
            }
        }
        return ders;
    }

    /// Dense row of all n_basis values (d-th derivative) at x.
    Eigen::VectorXd eval_row(double x, int deriv = 0) const {
        Eigen::MatrixXd local = nonzero_basis(x, deriv);
        Eigen::VectorXd row = Eigen::VectorXd::Zero(n_basis_);
        const int first = span(x) - order_ + 1;
        for (int j = 0; j < order_; ++j) row[first + j] = local(deriv, j);
        return row;
    }

    /// Design matrix: rows are basis evaluations at the given points.
    Eigen::MatrixXd design_matrix(const std::vector<double>& xs, int deriv = 0) const {
        Eigen::MatrixXd B(xs.size(), n_basis_);
        for (std::size_t r = 0; r < xs.size(); ++r) B.row(r) = eval_row(xs[r], deriv).transpose();
        return B;
    }

    /// Gram matrix of integrals of products of d-th derivatives over [a,b].
    /// Gauss–Legendre per knot span; the integrands are piecewise polynomials,
    /// so the quadrature is exact.
    Eigen::MatrixXd gram_matrix(int deriv = 0) const {
        static constexpr std::array<double, 5> nodes = {
            -0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
            0.9061798459386640};
        static constexpr std::array<double, 5> weights = {
            0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
            0.2369268850561891};
        Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n_basis_, n_basis_);
        for (int i = order_ - 1; i < n_basis_; ++i) {
            const double lo = knots_[i];
            const double hi = knots_[i + 1];
            if (hi <= lo) continue;
            const double mid = 0.5 * (lo + hi);
            const double half = 0.5 * (hi - lo);
            for (std::size_t q = 0; q < nodes.size(); ++q) {
                const double x = mid + half * nodes[q];
                Eigen::VectorXd row = eval_row(x, deriv);
                G.noalias() += (half * weights[q]) * row * row.transpose();
            }
        }
        return G;
    }

    /// Cross-Gram with another basis on the overlap of their domains:
    /// C(i,j) = integral of this_i(x) * other_j(x) dx.
    Eigen::MatrixXd cross_gram(const BSplineBasis& other) const {
        static constexpr std::array<double, 5> nodes = {
            -0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
            0.9061798459386640};
        static constexpr std::array<double, 5> weights = {
            0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
            0.2369268850561891};
        const double lo_all = std::max(a_, other.a_);
        const double hi_all = std::min(b_, other.b_);
        Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n_basis_, other.n_basis_);
        if (hi_all <= lo_all) return C;
        // break at every knot of either basis so integrands stay polynomial
        std::vector<double> breaks;
        for (double t : knots_)
            if (t > lo_all && t < hi_all) breaks.push_back(t);
        for (double t : other.knots_)
            if (t > lo_all && t < hi_all) breaks.push_back(t);
        breaks.push_back(lo_all);
        breaks.push_back(hi_all);
        std::sort(breaks.begin(), breaks.end());
        breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
        for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
            const double lo = breaks[s];
            const double hi = breaks[s + 1];
            if (hi <= lo) continue;
            const double mid = 0.5 * (lo + hi);
            const double half = 0.5 * (hi - lo);
            for (std::size_t q = 0; q < nodes.size(); ++q) {
                const double x = mid + half * nodes[q];
                C.noalias() += (half * weights[q]) * eval_row(x) * other.eval_row(x).transpose();
            }
        }
        return C;
    }

private:
    double a_ = 0.0, b_ = 1.0;
    int order_ = 4;
    int n_basis_ = 4;
    std::vector<double> knots_;
};

}  // namespace epimob
