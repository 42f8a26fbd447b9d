#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "rcrbm/classifiers.hpp"
#include "rcrbm/error.hpp"
#include "rcrbm/evaluation.hpp"

using namespace rcrbm;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Data {
    MatrixXd x;
    std::vector<int> y;
};

Data gaussian_clouds(Rng& rng, Eigen::Index n, Eigen::Index p, double gap) {
    Data d{MatrixXd(n, p), std::vector<int>(static_cast<std::size_t>(n))};
    for (Eigen::Index i = 0; i < n; ++i) {
        const int label = i % 2;
        d.y[static_cast<std::size_t>(i)] = label;
        for (Eigen::Index j = 0; j < p; ++j) d.x(i, j) = rng.normal() + (label ? gap : -gap) * (j == 0 ? 1.0 : 0.3);
    }
    return d;
}

std::vector<int> to_pm1(const std::vector<int>& y) {
    std::vector<int> out;
    for (int v : y) out.push_back(v ? 1 : -1);
    return out;
}

double auc_of(const VectorXd& s, const std::vector<int>& y) {
    return auc_mann_whitney(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())), y);
}

}  // namespace

TEST_CASE("LR gradient matches central finite differences") {
    Rng rng(1);
    for (int t = 0; t < 20; ++t) {
        const auto d = gaussian_clouds(rng, 30, 5, 0.5);
        VectorXd w(5);
        for (Eigen::Index j = 0; j < 5; ++j) w(j) = rng.normal();
        const double b = rng.normal();
        const double l2 = 0.1;
        const auto g = lr_gradient(w, b, d.x, d.y, l2);
        std::vector<double> x0(w.data(), w.data() + 5);
        x0.push_back(b);
        auto f = [&](const std::vector<double>& p) {
            return lr_loss(Eigen::Map<const VectorXd>(p.data(), 5), p[5], d.x, d.y, l2);
        };
        for (std::size_t i = 0; i < 6; ++i) {
            const double fd = oracle::central_difference(f, x0, i, 1e-5);
            const double an = i < 5 ? g.w(static_cast<Eigen::Index>(i)) : g.b;
            CHECK(std::abs(fd - an) <= 1e-4 * std::max(std::abs(an), 1e-3));
        }
    }
}

TEST_CASE("LR separates 1-D separable data") {
    MatrixXd x(20, 1);
    std::vector<int> y(20);
    for (int i = 0; i < 20; ++i) {
        x(i, 0) = i < 10 ? -1.0 - 0.1 * i : 1.0 + 0.1 * i;
        y[static_cast<std::size_t>(i)] = i < 10 ? 0 : 1;
    }
    LrConfig cfg;
    cfg.l2 = 0.01;
    const auto m = lr_fit(x, y, cfg);
    const VectorXd p = lr_predict_proba(m, x);
    for (int i = 0; i < 20; ++i) CHECK((p(i) >= 0.5) == (y[static_cast<std::size_t>(i)] == 1));
}

TEST_CASE("LR loss decreases along its own steps") {
    Rng rng(2);
    const auto d = gaussian_clouds(rng, 100, 4, 0.4);
    LrConfig cfg;
    cfg.tolerance = 0;
    cfg.max_steps = 100;
    const auto m = lr_fit(d.x, d.y, cfg);
    REQUIRE(m.loss_history.size() >= 2);
    for (std::size_t i = 1; i < m.loss_history.size(); ++i) CHECK(m.loss_history[i] <= m.loss_history[i - 1] + 1e-15);
}

TEST_CASE("LR prediction examples and errors") {
    LrModel zero{VectorXd::Zero(3), 0.0, 0.0, 0, {}};
    const VectorXd p = lr_predict_proba(zero, MatrixXd::Random(4, 3));
    for (Eigen::Index i = 0; i < 4; ++i) CHECK(p(i) == 0.5);

    LrModel one{VectorXd::Ones(1), 0.0, 0.0, 0, {}};
    CHECK(lr_predict_proba(one, MatrixXd::Zero(1, 1))(0) == 0.5);

    MatrixXd grid(11, 2);
    for (int i = 0; i < 11; ++i) grid(i, 0) = i - 5.0, grid(i, 1) = 0.3;
    LrModel pos{(VectorXd(2) << 0.7, -1.0).finished(), 0.2, 0.0, 0, {}};
    const VectorXd q = lr_predict_proba(pos, grid);
    for (int i = 1; i < 11; ++i) CHECK(q(i) >= q(i - 1));

    CHECK_THROWS_AS(lr_predict_proba(zero, MatrixXd::Zero(2, 2)), Error);
    const std::vector<int> same(4, 1);
    CHECK_THROWS_AS(lr_fit(MatrixXd::Random(4, 2), same), Error);
    MatrixXd nan_x = MatrixXd::Random(4, 2);
    nan_x(1, 1) = std::nan("");
    CHECK_THROWS_AS(lr_fit(nan_x, std::vector<int>{0, 1, 0, 1}), Error);
}

TEST_CASE("SVM separates two Gaussian clouds") {
    Rng rng(3);
    const auto d = gaussian_clouds(rng, 200, 3, 3.0);
    const auto y = to_pm1(d.y);
    SvmConfig cfg;
    cfg.seed = 5;
    const auto m = svm_fit(d.x, y, cfg);
    const VectorXd s = svm_decision(m, d.x);
    for (Eigen::Index i = 0; i < s.size(); ++i) CHECK(y[static_cast<std::size_t>(i)] * s(i) >= 0.0);
}

TEST_CASE("SVM label flip negates decisions") {
    Rng rng(4);
    const auto d = gaussian_clouds(rng, 120, 3, 0.8);
    const auto y = to_pm1(d.y);
    std::vector<int> flipped;
    for (int v : y) flipped.push_back(-v);
    SvmConfig cfg;
    cfg.seed = 9;
    const VectorXd a = svm_decision(svm_fit(d.x, y, cfg), d.x);
    const VectorXd b = svm_decision(svm_fit(d.x, flipped, cfg), d.x);
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    CHECK((a + b).cwiseAbs().maxCoeff() <= 1e-3 * scale);
}

TEST_CASE("SVM weights shrink as C goes to zero") {
    Rng rng(5);
    const auto d = gaussian_clouds(rng, 100, 3, 1.0);
    const auto y = to_pm1(d.y);
    double previous = std::numeric_limits<double>::infinity();
    for (double c : {1.0, 1e-2, 1e-4, 1e-6}) {
        SvmConfig cfg;
        cfg.c = c;
        const double norm = svm_fit(d.x, y, cfg).weights.norm();
        CHECK(norm <= previous + 1e-12);
        previous = norm;
    }
    CHECK(previous < 1e-3);
}

TEST_CASE("SVM epoch-mean objective does not increase") {
    Rng rng(6);
    const auto d = gaussian_clouds(rng, 150, 4, 0.7);
    SvmConfig cfg;
    cfg.seed = 1;
    const auto m = svm_fit(d.x, to_pm1(d.y), cfg);
    REQUIRE(m.objective_history.size() >= 2);
    CHECK(m.objective_history.size() <= cfg.epochs);
    for (std::size_t e = 1; e < m.objective_history.size(); ++e)
        CHECK(m.objective_history[e] <= m.objective_history[e - 1] * (1.0 + 1e-12));
}

TEST_CASE("SVM decision examples and errors") {
    SvmModel zero{VectorXd::Zero(2), 0.0, 1.0, {}};
    CHECK(svm_decision(zero, MatrixXd::Random(3, 2)).cwiseAbs().maxCoeff() == 0.0);

    SvmModel m{(VectorXd(2) << 2.0, -1.0).finished(), 0.5, 1.0, {}};
    MatrixXd x(3, 2);
    x << 0, 0, 1, 0, 2, 0;
    const VectorXd s = svm_decision(m, x);
    CHECK(s(1) - s(0) == doctest::Approx(s(2) - s(1)));

    Rng rng(7);
    const auto d = gaussian_clouds(rng, 60, 2, 0.5);
    const VectorXd raw = svm_decision(svm_fit(d.x, to_pm1(d.y)), d.x);
    const VectorXd moved = (2.0 * raw).array() + 7.0;
    CHECK(auc_of(raw, d.y) == auc_of(moved, d.y));

    CHECK_THROWS_AS(svm_decision(zero, MatrixXd::Zero(2, 3)), Error);
    CHECK_THROWS_AS(svm_fit(d.x, std::vector<int>(60, 1)), Error);
    CHECK_THROWS_AS(svm_fit(d.x, d.y), Error);  // labels must be -1/+1
}

TEST_CASE("RF reaches high held-out AUC on a noiseless threshold rule") {
    Rng rng(8);
    auto make = [&](Eigen::Index n) {
        Data d{MatrixXd(n, 5), std::vector<int>(static_cast<std::size_t>(n))};
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < 5; ++j) d.x(i, j) = rng.uniform();
            d.y[static_cast<std::size_t>(i)] = d.x(i, 1) > 0.4 ? 1 : 0;
        }
        return d;
    };
    const auto train = make(400), test = make(400);
    RfConfig cfg;
    cfg.n_trees = 50;
    cfg.max_depth = 5;
    cfg.seed = 3;
    const auto m = rf_fit(train.x, train.y, cfg);
    const VectorXd p = rf_predict_proba(m, test.x);
    CHECK(auc_of(p, test.y) >= 0.95);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        CHECK(p(i) >= 0.0);
        CHECK(p(i) <= 1.0);
    }
    for (const auto& tree : m.trees) CHECK(tree.oob_count > 0);
}

TEST_CASE("RF stopping and split rules") {
    SUBCASE("pure data gives single leaves") {
        MatrixXd x = MatrixXd::Random(10, 2);
        std::vector<int> y(10, 1);
        y[0] = 0;
        RfConfig cfg;
        cfg.n_trees = 1;
        cfg.max_depth = 0;
        const auto m = rf_fit(x, y, cfg);
        REQUIRE(m.trees[0].nodes.size() == 1);
        CHECK(m.trees[0].nodes[0].feature == -1);
    }
    SUBCASE("a perfectly separating feature is chosen when sampled") {
        // Feature 0 alternates, so no bootstrap draw of 40 rows can be split by it.
        MatrixXd x(40, 2);
        std::vector<int> y(40);
        for (int i = 0; i < 40; ++i) {
            x(i, 0) = i % 2;
            x(i, 1) = i;
            y[static_cast<std::size_t>(i)] = i >= 20;
        }
        RfConfig cfg;
        cfg.n_trees = 5;
        cfg.max_depth = 1;
        cfg.features_per_split = 2;
        const auto m = rf_fit(x, y, cfg);
        for (const auto& tree : m.trees) {
            REQUIRE(tree.nodes.size() == 3);
            CHECK(tree.nodes[0].feature == 1);
            CHECK(tree.nodes[1].probability == 0.0);
            CHECK(tree.nodes[2].probability == 1.0);
        }
    }
}

TEST_CASE("RF determinism, identical stumps and persistence") {
    Rng rng(9);
    const auto d = gaussian_clouds(rng, 80, 4, 0.5);
    RfConfig cfg;
    cfg.n_trees = 10;
    cfg.seed = 4;
    const auto a = rf_fit(d.x, d.y, cfg);
    const auto b = rf_fit(d.x, d.y, cfg);
    CHECK(rf_to_json(a) == rf_to_json(b));
    cfg.seed = 5;
    CHECK(rf_to_json(rf_fit(d.x, d.y, cfg)) != rf_to_json(a));

    const auto back = rf_from_json(rf_to_json(a));
    CHECK(rf_predict_proba(back, d.x) == rf_predict_proba(a, d.x));

    RfModel stumps = a;
    stumps.trees.assign(4, a.trees[0]);
    CHECK((rf_predict_proba(stumps, d.x) - [&] {
              RfModel one = a;
              one.trees.assign(1, a.trees[0]);
              return rf_predict_proba(one, d.x);
          }()).cwiseAbs().maxCoeff() < 1e-15);

    CHECK_THROWS_AS(rf_predict_proba(a, MatrixXd::Zero(2, 3)), Error);
    CHECK_THROWS_AS(rf_fit(d.x, std::vector<int>(80, 0), cfg), Error);
}

TEST_CASE("heads are deterministic on their training features") {
    Rng rng(10);
    const auto d = gaussian_clouds(rng, 60, 3, 0.6);
    const auto lr = lr_fit(d.x, d.y);
    CHECK(lr_predict_proba(lr, d.x) == lr_predict_proba(lr, d.x));
    CHECK(lr_to_json(lr_fit(d.x, d.y)) == lr_to_json(lr));
    const auto svm = svm_fit(d.x, to_pm1(d.y));
    CHECK(svm_to_json(svm_fit(d.x, to_pm1(d.y))) == svm_to_json(svm));
}
