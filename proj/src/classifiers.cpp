#include "rcrbm/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json_util.hpp"
#include "rcrbm/error.hpp"
#include "rcrbm/rng.hpp"

namespace rcrbm {

namespace {

void require_rows(const Eigen::MatrixXd& x, std::size_t n_labels) {
    if (static_cast<std::size_t>(x.rows()) != n_labels) throw Error("feature rows and labels differ in length");
    if (x.rows() == 0) throw Error("classifier needs at least one sample");
    if (!x.allFinite()) throw Error("classifier features contain non-finite values");
}

void require_both_classes(std::span<const int> y, int neg, int pos) {
    bool has_pos = false, has_neg = false;
    for (int v : y) {
        if (v == pos) {
            has_pos = true;
        } else if (v == neg) {
            has_neg = true;
        } else {
            throw Error("unexpected label " + std::to_string(v));
        }
    }
    if (!has_pos || !has_neg) throw Error("classifier needs both classes in the training labels");
}

void require_width(Eigen::Index expected, const Eigen::MatrixXd& x) {
    if (x.cols() != expected) {
        throw Error("feature width " + std::to_string(x.cols()) + " does not match the model's " +
                    std::to_string(expected));
    }
}

// Column z-scoring; constant columns keep unit scale.
struct Standardizer {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd sd;

    explicit Standardizer(const Eigen::MatrixXd& x) {
        mean = x.colwise().mean();
        sd = ((x.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(x.rows())).sqrt();
        for (Eigen::Index c = 0; c < sd.size(); ++c)
            if (!(sd(c) > 1e-12)) sd(c) = 1.0;
    }

    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
        return (x.rowwise() - mean).array().rowwise() / sd.array();
    }

    // Maps standardized-space (w, b) to raw-space parameters.
    void unscale(Eigen::VectorXd& w, double& b) const {
        w = w.array() / sd.transpose().array();
        b -= mean.dot(w);
    }
};

double log1p_exp(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Largest eigenvalue of [x 1]^T [x 1] / n by power iteration.
double design_spectral_bound(const Eigen::MatrixXd& x) {
    const auto n = static_cast<double>(x.rows());
    Eigen::VectorXd v = Eigen::VectorXd::Ones(x.cols() + 1);
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < 200; ++it) {
        const Eigen::VectorXd xv = x * v.head(x.cols()) + Eigen::VectorXd::Constant(x.rows(), v(x.cols()));
        Eigen::VectorXd next(x.cols() + 1);
        next.head(x.cols()) = x.transpose() * xv / n;
        next(x.cols()) = xv.sum() / n;
        const double norm = next.norm();
        if (norm == 0.0) break;
        const double prev = lambda;
        lambda = norm;
        v = next / norm;
        if (std::abs(lambda - prev) <= 1e-10 * lambda) break;
    }
    // Power iteration approaches from below; pad to keep 1/L a safe step.
    return 1.05 * lambda;
}

}  // namespace

double lr_loss(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& x, std::span<const int> y, double l2) {
    const Eigen::VectorXd z = (x * w).array() + b;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        // -[y log s + (1-y) log(1-s)] = log(1+e^z) - y z
        loss += log1p_exp(z(i)) - y[static_cast<std::size_t>(i)] * z(i);
    }
    return loss / static_cast<double>(z.size()) + 0.5 * l2 * w.squaredNorm();
}

LrGradient lr_gradient(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& x, std::span<const int> y,
                       double l2) {
    const Eigen::VectorXd z = (x * w).array() + b;
    Eigen::VectorXd r(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) r(i) = sigm(z(i)) - y[static_cast<std::size_t>(i)];
    const auto n = static_cast<double>(z.size());
    return {x.transpose() * r / n + l2 * w, r.sum() / n};
}

LrModel lr_fit(const Eigen::MatrixXd& x, std::span<const int> y, const LrConfig& cfg) {
    require_rows(x, y.size());
    require_both_classes(y, 0, 1);
    if (cfg.l2 < 0) throw Error("LR l2 must be >= 0");

    const Standardizer st(x);
    const Eigen::MatrixXd z = st.apply(x);
    const double step = cfg.step_size > 0 ? cfg.step_size : 1.0 / (0.25 * design_spectral_bound(z) + cfg.l2);

    LrModel m;
    m.l2 = cfg.l2;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(x.cols());
    double b = 0.0;
    for (m.steps = 0; m.steps < cfg.max_steps; ++m.steps) {
        const auto g = lr_gradient(w, b, z, y, cfg.l2);
        m.loss_history.push_back(lr_loss(w, b, z, y, cfg.l2));
        if (std::sqrt(g.w.squaredNorm() + g.b * g.b) < cfg.tolerance) break;
        w -= step * g.w;
        b -= step * g.b;
    }
    st.unscale(w, b);
    m.weights = std::move(w);
    m.bias = b;
    return m;
}

Eigen::VectorXd lr_predict_proba(const LrModel& model, const Eigen::MatrixXd& x) {
    require_width(model.weights.size(), x);
    Eigen::VectorXd z = (x * model.weights).array() + model.bias;
    return z.unaryExpr([](double v) { return sigm(v); });
}

double svm_objective(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& x, std::span<const int> y, double c) {
    const Eigen::VectorXd s = (x * w).array() + b;
    double hinge = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        hinge += std::max(0.0, 1.0 - y[static_cast<std::size_t>(i)] * s(i));
    }
    return 0.5 * w.squaredNorm() + c * hinge;
}

SvmModel svm_fit(const Eigen::MatrixXd& x, std::span<const int> y, const SvmConfig& cfg) {
    require_rows(x, y.size());
    require_both_classes(y, -1, 1);
    if (!(cfg.c > 0)) throw Error("SVM C must be > 0");
    if (cfg.epochs == 0 || cfg.batch_size == 0) throw Error("SVM needs epochs >= 1 and batch_size >= 1");

    const Standardizer st(x);
    const Eigen::MatrixXd z = st.apply(x);
    const auto n = static_cast<std::size_t>(z.rows());
    // Equivalent scaled objective: (lambda/2)||w||^2 + mean hinge with lambda = 1/(C n).
    const double lambda = 1.0 / (cfg.c * static_cast<double>(n));

    SvmModel m;
    m.c = cfg.c;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(z.cols());
    double b = 0.0;
    Eigen::VectorXd best_w = w;
    double best_b = b, best_obj = svm_objective(w, b, z, y, cfg.c);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(cfg.seed, "svm-shuffle"));
    double step_scale = 1.0;
    double last_mean = std::numeric_limits<double>::infinity();
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order.begin(), order.end());
        const double step =
            std::min(step_scale * cfg.initial_step / (1.0 + static_cast<double>(epoch)), 1.0 / lambda);
        const Eigen::VectorXd w_start = w;
        const double b_start = b;
        double obj_sum = 0.0;
        std::size_t iterates = 0;
        for (std::size_t lo = 0; lo < n; lo += cfg.batch_size) {
            const auto hi = std::min(n, lo + cfg.batch_size);
            Eigen::VectorXd gw = lambda * w;
            double gb = 0.0;
            const double inv = 1.0 / static_cast<double>(hi - lo);
            for (auto k = lo; k < hi; ++k) {
                const auto i = static_cast<Eigen::Index>(order[k]);
                const double yi = y[order[k]];
                if (yi * (z.row(i).dot(w) + b) < 1.0) {
                    gw -= inv * yi * z.row(i).transpose();
                    gb -= inv * yi;
                }
            }
            w -= step * gw;
            b -= step * gb;
            obj_sum += svm_objective(w, b, z, y, cfg.c);
            ++iterates;
        }
        const double mean = obj_sum / static_cast<double>(iterates);
        if (mean > last_mean) {
            // Roll the epoch back and retry later with half the step.
            w = w_start;
            b = b_start;
            step_scale *= 0.5;
            continue;
        }
        last_mean = mean;
        m.objective_history.push_back(mean);
        const double obj = svm_objective(w, b, z, y, cfg.c);
        if (obj < best_obj) {
            best_obj = obj;
            best_w = w;
            best_b = b;
        }
    }
    st.unscale(best_w, best_b);
    m.weights = std::move(best_w);
    m.bias = best_b;
    return m;
}

Eigen::VectorXd svm_decision(const SvmModel& model, const Eigen::MatrixXd& x) {
    require_width(model.weights.size(), x);
    return (x * model.weights).array() + model.bias;
}

double DecisionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    std::size_t i = 0;
    while (nodes[i].feature >= 0) {
        i = row(nodes[i].feature) <= nodes[i].threshold ? i + 1 : nodes[i].right;
    }
    return nodes[i].probability;
}

namespace {

struct TreeBuilder {
    const Eigen::MatrixXd& x;
    std::span<const int> y;
    std::size_t max_depth;
    std::size_t features_per_split;
    Rng& rng;
    std::vector<TreeNode> nodes;

    static double gini(double pos, double total) {
        if (total == 0) return 0.0;
        const double p = pos / total;
        return 2.0 * p * (1.0 - p);
    }

    std::size_t build(std::vector<std::size_t>& rows, std::size_t depth) {
        const auto total = static_cast<double>(rows.size());
        double pos = 0;
        for (auto r : rows) pos += y[r];
        const std::size_t id = nodes.size();
        nodes.push_back({-1, 0.0, pos / total, 0});
        if (depth >= max_depth || pos == 0 || pos == total || rows.size() < 2) return id;

        // Random feature subset, scanned in ascending index order so ties go
        // to the lowest feature, then the lowest threshold.
        std::vector<std::size_t> feats(static_cast<std::size_t>(x.cols()));
        std::iota(feats.begin(), feats.end(), std::size_t{0});
        for (std::size_t k = 0; k < features_per_split; ++k) {
            const auto j = k + rng.below(feats.size() - k);
            std::swap(feats[k], feats[j]);
        }
        feats.resize(features_per_split);
        std::sort(feats.begin(), feats.end());

        int best_feature = -1;
        double best_threshold = 0.0, best_impurity = std::numeric_limits<double>::infinity();
        std::vector<std::pair<double, int>> col(rows.size());
        for (auto f : feats) {
            for (std::size_t k = 0; k < rows.size(); ++k) {
                col[k] = {x(static_cast<Eigen::Index>(rows[k]), static_cast<Eigen::Index>(f)), y[rows[k]]};
            }
            std::sort(col.begin(), col.end());
            double left_pos = 0;
            for (std::size_t k = 0; k + 1 < col.size(); ++k) {
                left_pos += col[k].second;
                if (col[k].first == col[k + 1].first) continue;
                const auto nl = static_cast<double>(k + 1), nr = total - nl;
                const double impurity = (nl * gini(left_pos, nl) + nr * gini(pos - left_pos, nr)) / total;
                if (impurity < best_impurity) {
                    best_impurity = impurity;
                    best_feature = static_cast<int>(f);
                    best_threshold = 0.5 * (col[k].first + col[k + 1].first);
                    // Midpoint rounding can collapse onto the upper value.
                    if (!(best_threshold < col[k + 1].first)) best_threshold = col[k].first;
                }
            }
        }
        if (best_feature < 0) return id;  // every sampled feature is constant here

        std::vector<std::size_t> left, right;
        for (auto r : rows) {
            (x(static_cast<Eigen::Index>(r), best_feature) <= best_threshold ? left : right).push_back(r);
        }
        nodes[id].feature = best_feature;
        nodes[id].threshold = best_threshold;
        rows.clear();
        rows.shrink_to_fit();
        build(left, depth + 1);
        nodes[id].right = nodes.size();
        build(right, depth + 1);
        return id;
    }
};

// Rebuilds right-child links of a preorder node list; returns one past the subtree.
std::size_t link_preorder(std::vector<TreeNode>& nodes, std::size_t i) {
    if (i >= nodes.size()) throw Error("truncated tree in model file");
    if (nodes[i].feature < 0) return i + 1;
    const auto after_left = link_preorder(nodes, i + 1);
    nodes[i].right = after_left;
    return link_preorder(nodes, after_left);
}

}  // namespace

RfModel rf_fit(const Eigen::MatrixXd& x, std::span<const int> y, const RfConfig& cfg) {
    require_rows(x, y.size());
    require_both_classes(y, 0, 1);
    if (cfg.n_trees == 0) throw Error("random forest needs n_trees >= 1");
    const auto p = static_cast<std::size_t>(x.cols());
    if (p == 0) throw Error("random forest needs at least one feature");

    RfModel m;
    m.n_features = p;
    m.max_depth = cfg.max_depth;
    m.features_per_split =
        cfg.features_per_split > 0 ? std::min(cfg.features_per_split, p)
                                   : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p))));
    m.seed = cfg.seed;
    const auto n = static_cast<std::size_t>(x.rows());
    for (std::size_t t = 0; t < cfg.n_trees; ++t) {
        Rng rng(derive_seed(cfg.seed, "tree", t));
        std::vector<std::size_t> rows(n);
        std::vector<char> drawn(n, 0);
        for (auto& r : rows) {
            r = rng.below(n);
            drawn[r] = 1;
        }
        TreeBuilder builder{x, y, cfg.max_depth, m.features_per_split, rng, {}};
        builder.build(rows, 0);
        DecisionTree tree;
        tree.nodes = std::move(builder.nodes);
        tree.oob_count = static_cast<std::size_t>(std::count(drawn.begin(), drawn.end(), 0));
        m.trees.push_back(std::move(tree));
    }
    return m;
}

Eigen::VectorXd rf_predict_proba(const RfModel& model, const Eigen::MatrixXd& x) {
    require_width(static_cast<Eigen::Index>(model.n_features), x);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double acc = 0.0;
        for (const auto& t : model.trees) acc += t.predict(x.row(i));
        out(i) = acc / static_cast<double>(model.trees.size());
    }
    return out;
}

std::string lr_to_json(const LrModel& m) {
    detail::ordered_json j;
    j["type"] = "lr";
    j["weights"] = detail::to_json(m.weights);
    j["bias"] = m.bias;
    j["l2"] = m.l2;
    return j.dump(1) + "\n";
}

std::string svm_to_json(const SvmModel& m) {
    detail::ordered_json j;
    j["type"] = "svm";
    j["weights"] = detail::to_json(m.weights);
    j["bias"] = m.bias;
    j["c"] = m.c;
    return j.dump(1) + "\n";
}

std::string rf_to_json(const RfModel& m) {
    detail::ordered_json j;
    j["type"] = "rf";
    j["n_features"] = m.n_features;
    j["max_depth"] = m.max_depth;
    j["features_per_split"] = m.features_per_split;
    j["seed"] = m.seed;
    auto trees = detail::ordered_json::array();
    for (const auto& t : m.trees) {
        auto nodes = detail::ordered_json::array();
        for (const auto& nd : t.nodes) nodes.push_back({nd.feature, nd.threshold, nd.probability});
        trees.push_back({{"oob_count", t.oob_count}, {"nodes", std::move(nodes)}});
    }
    j["trees"] = std::move(trees);
    return j.dump(1) + "\n";
}

RfModel rf_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("type") != "rf") throw Error("not a random forest model");
        RfModel m;
        m.n_features = j.at("n_features").get<std::size_t>();
        m.max_depth = j.at("max_depth").get<std::size_t>();
        m.features_per_split = j.at("features_per_split").get<std::size_t>();
        m.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& jt : j.at("trees")) {
            DecisionTree t;
            t.oob_count = jt.at("oob_count").get<std::size_t>();
            for (const auto& jn : jt.at("nodes")) {
                t.nodes.push_back({jn.at(0).get<int>(), jn.at(1).get<double>(), jn.at(2).get<double>(), 0});
            }
            if (link_preorder(t.nodes, 0) != t.nodes.size()) throw Error("trailing nodes in tree");
            m.trees.push_back(std::move(t));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed random forest model: ") + e.what());
    }
}

}  // namespace rcrbm
