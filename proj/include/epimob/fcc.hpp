#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <stdexcept>
#include <vector>

#include "epimob/smoothing.hpp"

namespace epimob {

/// Leading mode of covariation between two paired curve sets: the first
/// singular pair of the sample cross-covariance operator in the L2 metric.
struct FccResult {
    SmoothedCurve weight_first;    // unit-L2-norm weight function for the first set
    SmoothedCurve weight_second;   // same for the second set
    SmoothedCurve mean_first;
    SmoothedCurve mean_second;
    std::vector<double> scores_first;
    std::vector<double> scores_second;
    double explained_fraction = 0.0;  // sigma_1^2 / sum sigma_k^2
};

enum class FccSet { first, second };

namespace detail {

inline Eigen::MatrixXd coefficient_matrix(const std::vector<SmoothedCurve>& set) {
    Eigen::MatrixXd C(set.size(), set[0].coefficients.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (!set[i].basis->same_layout(*set[0].basis))
            throw std::invalid_argument("curves in an FCC set must share one basis");
        C.row(i) = set[i].coefficients.transpose();
    }
    return C;
}

}  // namespace detail

/// Both sets must be paired by unit (same order) and live on a common basis
/// each. The metric is the basis Gram matrix, so scores and norms are true L2
/// inner products.
inline FccResult first_fcc(const std::vector<SmoothedCurve>& set_first,
                           const std::vector<SmoothedCurve>& set_second) {
    if (set_first.size() != set_second.size())
        throw std::invalid_argument("FCC sets must be paired");
    const auto n = set_first.size();
    if (n < 3) throw std::invalid_argument("FCC needs at least 3 curve pairs");

    Eigen::MatrixXd cf = detail::coefficient_matrix(set_first);
    Eigen::MatrixXd cs = detail::coefficient_matrix(set_second);
    Eigen::RowVectorXd mean_f = cf.colwise().mean();
    Eigen::RowVectorXd mean_s = cs.colwise().mean();
    cf.rowwise() -= mean_f;
    cs.rowwise() -= mean_s;

    Eigen::MatrixXd gram_f = set_first[0].basis->gram_matrix();
    Eigen::MatrixXd gram_s = set_second[0].basis->gram_matrix();
    Eigen::LLT<Eigen::MatrixXd> llt_f(gram_f), llt_s(gram_s);
    if (llt_f.info() != Eigen::Success || llt_s.info() != Eigen::Success)
        throw std::runtime_error("basis Gram matrix not positive definite");
    Eigen::MatrixXd lf = llt_f.matrixL();
    Eigen::MatrixXd ls = llt_s.matrixL();

    // Whitened cross-covariance: its SVD gives the singular functions in L2.
    Eigen::MatrixXd a =
        lf.transpose() * cf.transpose() * cs * ls / static_cast<double>(n - 1);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::VectorXd u = lf.transpose().triangularView<Eigen::Upper>().solve(svd.matrixU().col(0));
    Eigen::VectorXd v = ls.transpose().triangularView<Eigen::Upper>().solve(svd.matrixV().col(0));

    FccResult res;
    res.weight_first = set_first[0];
    res.weight_first.unit_id = "fcc_weight";
    res.weight_first.coefficients = u;
    res.weight_second = set_second[0];
    res.weight_second.unit_id = "fcc_weight";
    res.weight_second.coefficients = v;
    res.mean_first = set_first[0];
    res.mean_first.unit_id = "mean";
    res.mean_first.coefficients = mean_f.transpose();
    res.mean_second = set_second[0];
    res.mean_second.unit_id = "mean";
    res.mean_second.coefficients = mean_s.transpose();

    double total = svd.singularValues().squaredNorm();
    res.explained_fraction = total > 0 ? svd.singularValues()[0] * svd.singularValues()[0] / total : 0.0;

    res.scores_first.resize(n);
    res.scores_second.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        res.scores_first[i] = cf.row(i) * gram_f * u;
        res.scores_second[i] = cs.row(i) * gram_s * v;
    }
    // the SVD already makes the paired scores covary non-negatively; the joint
    // sign is fixed so the first weight has non-negative integral
    Eigen::VectorXd ones_coef = Eigen::VectorXd::Ones(u.size());
    double integral = ones_coef.transpose() * gram_f * u;
    if (integral < 0) {
        res.weight_first.coefficients = -res.weight_first.coefficients;
        res.weight_second.coefficients = -res.weight_second.coefficients;
        for (auto& s : res.scores_first) s = -s;
        for (auto& s : res.scores_second) s = -s;
    }
    return res;
}

/// Rank-one reconstruction: mean curve + score * weight function.
inline SmoothedCurve project_fcc(const SmoothedCurve& curve, const FccResult& fcc, FccSet which) {
    const SmoothedCurve& mean = which == FccSet::first ? fcc.mean_first : fcc.mean_second;
    const SmoothedCurve& weight = which == FccSet::first ? fcc.weight_first : fcc.weight_second;
    if (!curve.basis->same_layout(*mean.basis))
        throw std::invalid_argument("curve basis does not match the FCC basis");
    Eigen::MatrixXd gram = curve.basis->gram_matrix();
    Eigen::VectorXd centered = curve.coefficients - mean.coefficients;
    double score = centered.transpose() * gram * weight.coefficients;
    SmoothedCurve out = curve;
    out.coefficients = mean.coefficients + score * weight.coefficients;
    return out;
}

}  // namespace epimob
