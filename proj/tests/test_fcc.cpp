#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "epimob/fcc.hpp"

using namespace epimob;

namespace {

std::vector<SmoothedCurve> random_set(std::shared_ptr<const BSplineBasis> basis, int n,
                                      unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<SmoothedCurve> out;
    for (int i = 0; i < n; ++i) {
        SmoothedCurve c;
        c.basis = basis;
        c.domain_start = basis->domain_start();
        c.domain_end = basis->domain_end();
        c.unit_id = "u" + std::to_string(i);
        c.coefficients.resize(basis->n_basis());
        for (int j = 0; j < basis->n_basis(); ++j) c.coefficients[j] = gauss(rng);
        out.push_back(std::move(c));
    }
    return out;
}

double l2_inner(const SmoothedCurve& a, const SmoothedCurve& b) {
    Eigen::MatrixXd g = a.basis->gram_matrix();
    return a.coefficients.transpose() * g * b.coefficients;
}

}  // namespace

TEST_CASE("fewer than 3 pairs is a hard error") {
    auto basis = std::make_shared<BSplineBasis>(0.0, 10.0, 6, 4);
    auto set = random_set(basis, 2, 1);
    CHECK_THROWS(first_fcc(set, set));
}

TEST_CASE("identical sets degenerate to functional PCA") {
    auto basis = std::make_shared<BSplineBasis>(0.0, 10.0, 6, 4);
    auto set = random_set(basis, 8, 2);
    FccResult fcc = first_fcc(set, set);

    // FPCA oracle: leading eigenpair of the metric-whitened covariance
    Eigen::MatrixXd c(8, 6);
    for (int i = 0; i < 8; ++i) c.row(i) = set[i].coefficients.transpose();
    c.rowwise() -= c.colwise().mean().eval();
    Eigen::MatrixXd g = basis->gram_matrix();
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    Eigen::MatrixXd l = llt.matrixL();
    Eigen::MatrixXd cov = l.transpose() * c.transpose() * c * l / 7.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    Eigen::VectorXd lead =
        l.transpose().triangularView<Eigen::Upper>().solve(eig.eigenvectors().col(5));

    double dot = std::abs(lead.transpose() * g * fcc.weight_first.coefficients);
    CHECK(dot == Catch::Approx(1.0).margin(1e-8));  // same unit-norm function up to sign
    CHECK(fcc.explained_fraction ==
          Catch::Approx(eig.eigenvalues()[5] * eig.eigenvalues()[5] /
                        eig.eigenvalues().cwiseAbs2().sum())
              .margin(1e-10));
    // both weight functions coincide in the symmetric case
    double cross = std::abs(l2_inner(fcc.weight_first, fcc.weight_second));
    CHECK(cross == Catch::Approx(1.0).margin(1e-8));
}

TEST_CASE("rank-one structure is recovered exactly") {
    auto basis = std::make_shared<BSplineBasis>(0.0, 10.0, 6, 4);
    std::mt19937 rng(3);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd u(6), v(6);
    for (int j = 0; j < 6; ++j) {
        u[j] = gauss(rng);
        v[j] = gauss(rng);
    }
    std::vector<double> scores = {1.5, -0.7, 0.2, 2.1, -1.0};
    std::vector<SmoothedCurve> xs, ys;
    for (double s : scores) {
        SmoothedCurve x, y;
        x.basis = basis;
        y.basis = basis;
        x.domain_start = y.domain_start = 0.0;
        x.domain_end = y.domain_end = 10.0;
        x.coefficients = s * u;
        y.coefficients = s * v;
        xs.push_back(x);
        ys.push_back(y);
    }
    FccResult fcc = first_fcc(xs, ys);
    CHECK(fcc.explained_fraction == Catch::Approx(1.0).margin(1e-10));
    // weights proportional to u and v
    Eigen::MatrixXd g = basis->gram_matrix();
    double norm_u = std::sqrt(double(u.transpose() * g * u));
    double align = std::abs(double(u.transpose() * g * fcc.weight_first.coefficients)) / norm_u;
    CHECK(align == Catch::Approx(1.0).margin(1e-8));
    // projection reproduces the rank-one curves exactly
    SmoothedCurve rec = project_fcc(xs[3], fcc, FccSet::first);
    CHECK((rec.coefficients - xs[3].coefficients).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("random sets match the dense SVD oracle") {
    auto basis = std::make_shared<BSplineBasis>(0.0, 10.0, 6, 4);
    auto xs = random_set(basis, 5, 10);
    auto ys = random_set(basis, 5, 11);
    FccResult fcc = first_fcc(xs, ys);

    Eigen::MatrixXd cx(5, 6), cy(5, 6);
    for (int i = 0; i < 5; ++i) {
        cx.row(i) = xs[i].coefficients.transpose();
        cy.row(i) = ys[i].coefficients.transpose();
    }
    cx.rowwise() -= cx.colwise().mean().eval();
    cy.rowwise() -= cy.colwise().mean().eval();
    Eigen::MatrixXd g = basis->gram_matrix();
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    Eigen::MatrixXd l = llt.matrixL();
    Eigen::MatrixXd a = l.transpose() * cx.transpose() * cy * l / 4.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);

    double expl = svd.singularValues()[0] * svd.singularValues()[0] /
                  svd.singularValues().squaredNorm();
    CHECK(fcc.explained_fraction == Catch::Approx(expl).margin(1e-10));
    Eigen::VectorXd u_oracle =
        l.transpose().triangularView<Eigen::Upper>().solve(svd.matrixU().col(0));
    double align = std::abs(double(u_oracle.transpose() * g * fcc.weight_first.coefficients));
    CHECK(align == Catch::Approx(1.0).margin(1e-8));
}

TEST_CASE("weight functions have unit L2 norm and scores covary non-negatively") {
    auto basis = std::make_shared<BSplineBasis>(0.0, 30.0, 8, 4);
    auto xs = random_set(basis, 7, 20);
    auto ys = random_set(basis, 7, 21);
    FccResult fcc = first_fcc(xs, ys);
    CHECK(l2_inner(fcc.weight_first, fcc.weight_first) == Catch::Approx(1.0).margin(1e-10));
    CHECK(l2_inner(fcc.weight_second, fcc.weight_second) == Catch::Approx(1.0).margin(1e-10));
    double cross = 0;
    for (std::size_t i = 0; i < 7; ++i) cross += fcc.scores_first[i] * fcc.scores_second[i];
    CHECK(cross >= -1e-10);
}

TEST_CASE("FCC weights are invariant to unit relabeling up to sign") {
    auto basis = std::make_shared<BSplineBasis>(0.0, 10.0, 6, 4);
    auto xs = random_set(basis, 6, 30);
    auto ys = random_set(basis, 6, 31);
    FccResult a = first_fcc(xs, ys);
    std::vector<SmoothedCurve> xs2 = {xs[3], xs[0], xs[5], xs[1], xs[4], xs[2]};
    std::vector<SmoothedCurve> ys2 = {ys[3], ys[0], ys[5], ys[1], ys[4], ys[2]};
    FccResult b = first_fcc(xs2, ys2);
    double align = std::abs(l2_inner(a.weight_first, b.weight_first));
    CHECK(align == Catch::Approx(1.0).margin(1e-8));
}

TEST_CASE("projection of the mean curve is the mean curve") {
    auto basis = std::make_shared<BSplineBasis>(0.0, 10.0, 6, 4);
    auto xs = random_set(basis, 5, 40);
    auto ys = random_set(basis, 5, 41);
    FccResult fcc = first_fcc(xs, ys);
    SmoothedCurve rec = project_fcc(fcc.mean_first, fcc, FccSet::first);
    CHECK((rec.coefficients - fcc.mean_first.coefficients).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("projection residual is orthogonal to the weight function") {
    auto basis = std::make_shared<BSplineBasis>(0.0, 10.0, 6, 4);
    auto xs = random_set(basis, 6, 50);
    auto ys = random_set(basis, 6, 51);
    FccResult fcc = first_fcc(xs, ys);
    SmoothedCurve proj = project_fcc(xs[2], fcc, FccSet::first);
    SmoothedCurve resid = xs[2];
    resid.coefficients -= proj.coefficients;
    CHECK(std::abs(l2_inner(resid, fcc.weight_first)) < 1e-8);
}

TEST_CASE("basis mismatch is a hard error") {
    auto basis = std::make_shared<BSplineBasis>(0.0, 10.0, 6, 4);
    auto other = std::make_shared<BSplineBasis>(0.0, 10.0, 7, 4);
    auto xs = random_set(basis, 5, 60);
    auto ys = random_set(basis, 5, 61);
    FccResult fcc = first_fcc(xs, ys);
    auto odd = random_set(other, 1, 62);
    CHECK_THROWS(project_fcc(odd[0], fcc, FccSet::first));
}
