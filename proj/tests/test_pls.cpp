#include <cmath>

#include "doctest.h"
#include "rcrbm/error.hpp"
#include "rcrbm/pls.hpp"
#include "rcrbm/rng.hpp"

using namespace rcrbm;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::vector<std::string> names_for(Eigen::Index p) {
    std::vector<std::string> n;
    for (Eigen::Index j = 0; j < p; ++j) n.push_back("f" + std::to_string(j));
    return n;
}

struct Problem {
    MatrixXd x;
    std::vector<double> y;
};

Problem random_problem(Rng& rng, Eigen::Index n, Eigen::Index p) {
    Problem pr{MatrixXd(n, p), std::vector<double>(static_cast<std::size_t>(n))};
    for (Eigen::Index i = 0; i < n; ++i) {
        pr.y[static_cast<std::size_t>(i)] = i % 2 ? 1.0 : 0.0;
        for (Eigen::Index j = 0; j < p; ++j)
            pr.x(i, j) = rng.normal() + (j % 3 == 0 ? 0.8 * pr.y[static_cast<std::size_t>(i)] : 0.0) + 0.1 * j;
    }
    return pr;
}

MatrixXd zscore(const MatrixXd& x) {
    MatrixXd z = x;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double mu = x.col(j).mean();
        const double sd = std::sqrt((x.col(j).array() - mu).square().sum() / static_cast<double>(x.rows() - 1));
        z.col(j) = (x.col(j).array() - mu) / sd;
    }
    return z;
}

// Textbook NIPALS PLS1 on already standardized data; returns the score matrix.
MatrixXd nipals_scores(MatrixXd x, VectorXd y, Eigen::Index a) {
    MatrixXd t(x.rows(), a);
    for (Eigen::Index k = 0; k < a; ++k) {
        VectorXd w = x.transpose() * y;
        w.normalize();
        Eigen::Index arg = 0;
        w.cwiseAbs().maxCoeff(&arg);
        if (w(arg) < 0) w = -w;
        const VectorXd tk = x * w;
        const double tt = tk.squaredNorm();
        const VectorXd pk = x.transpose() * tk / tt;
        const double qk = tk.dot(y) / tt;
        x -= tk * pk.transpose();
        y -= qk * tk;
        t.col(k) = tk;
    }
    return t;
}

}  // namespace

TEST_CASE("a column equal to y takes the whole first weight") {
    Rng rng(1);
    const Eigen::Index n = 40, p = 5;
    VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = i % 2;
    const VectorXd yc = y.array() - y.mean();
    MatrixXd x(n, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        VectorXd col(n);
        for (Eigen::Index i = 0; i < n; ++i) col(i) = rng.normal();
        col = col.array() - col.mean();
        col -= yc * (yc.dot(col) / yc.squaredNorm());
        x.col(j) = col;
    }
    x.col(2) = y;
    const auto names = names_for(p);
    const std::vector<double> yv(y.data(), y.data() + n);
    const auto m = fit_pls(x, names, yv, 1);
    CHECK(std::abs(m.weights(2, 0)) == doctest::Approx(1.0).epsilon(1e-12));
    for (Eigen::Index j = 0; j < p; ++j)
        if (j != 2) CHECK(std::abs(m.weights(j, 0)) < 1e-10);
    const MatrixXd t = pls_transform(m, x, names);
    const VectorXd residual = yc - m.y_loadings(0) * t.col(0);
    CHECK(residual.norm() < 1e-10);
}

TEST_CASE("the first weight maximizes covariance over random unit directions") {
    Rng rng(2);
    const auto pr = random_problem(rng, 60, 8);
    const auto names = names_for(8);
    const auto m = fit_pls(pr.x, names, pr.y, 1);
    const MatrixXd z = zscore(pr.x);
    VectorXd y = Eigen::Map<const VectorXd>(pr.y.data(), 60);
    y = y.array() - y.mean();
    const double best = std::abs((z * m.weights.col(0)).dot(y));
    for (int t = 0; t < 1000; ++t) {
        VectorXd u(8);
        for (Eigen::Index j = 0; j < 8; ++j) u(j) = rng.normal();
        u.normalize();
        CHECK(std::abs((z * u).dot(y)) <= best + 1e-9);
    }
}

TEST_CASE("a duplicated column gets equal weights") {
    Rng rng(3);
    auto pr = random_problem(rng, 30, 4);
    MatrixXd x(30, 5);
    x << pr.x, pr.x.col(0);
    const auto m = fit_pls(x, names_for(5), pr.y, 2);
    for (Eigen::Index a = 0; a < 2; ++a) CHECK(m.weights(0, a) == doctest::Approx(m.weights(4, a)).epsilon(1e-12));
}

TEST_CASE("transform reproduces NIPALS training scores and they are orthogonal") {
    Rng rng(4);
    const auto pr = random_problem(rng, 50, 12);
    const auto names = names_for(12);
    const auto m = fit_pls(pr.x, names, pr.y, 6);
    const MatrixXd t = pls_transform(m, pr.x, names);
    VectorXd y = Eigen::Map<const VectorXd>(pr.y.data(), 50);
    const MatrixXd ref = nipals_scores(zscore(pr.x), y.array() - y.mean(), 6);
    CHECK((t - ref).cwiseAbs().maxCoeff() < 1e-8);
    for (Eigen::Index a = 0; a < 6; ++a) {
        CHECK(t.col(a).squaredNorm() == doctest::Approx(m.score_norms2(a)).epsilon(1e-10));
        for (Eigen::Index b = a + 1; b < 6; ++b)
            CHECK(std::abs(t.col(a).dot(t.col(b))) < 1e-8 * t.col(a).norm() * t.col(b).norm() + 1e-8);
    }
}

TEST_CASE("deflation to full rank leaves no residual") {
    Rng rng(5);
    const auto pr = random_problem(rng, 7, 3);
    const auto m = fit_pls(pr.x, names_for(3), pr.y, 3);
    CHECK(m.x_residual_norm < 1e-8);
}

TEST_CASE("positive column scaling leaves scores unchanged") {
    Rng rng(6);
    const auto pr = random_problem(rng, 40, 6);
    const auto names = names_for(6);
    const MatrixXd t = pls_transform(fit_pls(pr.x, names, pr.y, 3), pr.x, names);
    MatrixXd scaled = pr.x;
    scaled.col(1) *= 7.3;
    scaled.col(4) *= 0.02;
    const MatrixXd u = pls_transform(fit_pls(scaled, names, pr.y, 3), scaled, names);
    CHECK((t - u).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("transform examples") {
    Rng rng(7);
    const auto pr = random_problem(rng, 80, 30);
    const auto names = names_for(30);
    const auto m = fit_pls(pr.x, names, pr.y, 20);
    const MatrixXd t = pls_transform(m, pr.x, names);
    CHECK(t.cols() == 20);
    CHECK(t.rows() == 80);

    MatrixXd centre(1, 30);
    for (Eigen::Index j = 0; j < 30; ++j) centre(0, j) = pr.x.col(j).mean();
    CHECK(pls_transform(m, centre, names).cwiseAbs().maxCoeff() < 1e-10);

    auto wrong = names;
    wrong[3] = "other";
    CHECK_THROWS_AS(pls_transform(m, pr.x, wrong), Error);
    CHECK_THROWS_AS(pls_transform(m, pr.x.leftCols(29), names_for(29)), Error);
    MatrixXd bad = pr.x;
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(pls_transform(m, bad, names), Error);
}

TEST_CASE("zero-variance columns are dropped by name") {
    Rng rng(8);
    auto pr = random_problem(rng, 20, 4);
    pr.x.col(2).setConstant(3.0);
    const auto names = names_for(4);
    const auto m = fit_pls(pr.x, names, pr.y, 2);
    REQUIRE(m.dropped_names.size() == 1);
    CHECK(m.dropped_names[0] == "f2");
    CHECK(m.retained == std::vector<std::size_t>{0, 1, 3});
    CHECK((m.column_sds.array() > 0).all());
    CHECK(pls_transform(m, pr.x, names).cols() == 2);
}

TEST_CASE("fit_pls errors") {
    Rng rng(9);
    const auto pr = random_problem(rng, 10, 4);
    const auto names = names_for(4);
    std::vector<double> one_class(10, 1.0);
    CHECK_THROWS_AS(fit_pls(pr.x, names, one_class, 1), Error);
    CHECK_THROWS_AS(fit_pls(pr.x, names, pr.y, 5), Error);
    CHECK_THROWS_AS(fit_pls(MatrixXd::Zero(10, 4), names, pr.y, 1), Error);
    CHECK_THROWS_AS(fit_pls(pr.x.topRows(1), names, std::vector<double>{1.0}, 1), Error);
}

TEST_CASE("VIP scores square-sum to the column count; top ranking is stable") {
    Rng rng(10);
    const auto pr = random_problem(rng, 60, 9);
    const auto names = names_for(9);
    const auto m = fit_pls(pr.x, names, pr.y, 4);
    const VectorXd vip = vip_scores(m);
    CHECK(vip.squaredNorm() == doctest::Approx(9.0).epsilon(1e-10));
    const auto top = vip_top(m, 3);
    REQUIRE(top.size() == 3);
    for (std::size_t k = 1; k < top.size(); ++k) CHECK(vip(static_cast<Eigen::Index>(top[k - 1])) >= vip(static_cast<Eigen::Index>(top[k])));
    const MatrixXd sel = pls_select_columns(m, pr.x, names, top);
    CHECK(sel.cols() == 3);
    CHECK(std::abs(sel.col(0).mean()) < 1e-10);
}

TEST_CASE("PLS model persistence round trips") {
    Rng rng(11);
    const auto pr = random_problem(rng, 30, 5);
    const auto names = names_for(5);
    const auto m = fit_pls(pr.x, names, pr.y, 3);
    const auto back = pls_from_json(pls_to_json(m));
    CHECK(pls_to_json(back) == pls_to_json(m));
    CHECK(pls_transform(back, pr.x, names) == pls_transform(m, pr.x, names));
}
