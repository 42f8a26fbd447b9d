#pragma once

// Binary prediction heads. Each exposes a continuous score for ROC analysis.
// LR and SVM z-score their inputs internally and fold the scaling back into
// the returned weights, so predictions apply directly to raw features.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rcrbm {

// ---- logistic regression ---------------------------------------------------

struct LrConfig {
    double l2 = 1e-3;
    std::size_t max_steps = 500;
    double tolerance = 1e-6;  // on the gradient norm
    double step_size = 0.0;   // 0 selects 1/L from the loss's smoothness bound
};

struct LrModel {
    Eigen::VectorXd weights;
    double bias = 0.0;
    double l2 = 0.0;
    std::size_t steps = 0;
    std::vector<double> loss_history;  // standardized-space objective before each step
};

// mean cross-entropy + (l2/2)||w||^2, labels in {0,1}
double lr_loss(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& x, std::span<const int> y, double l2);

struct LrGradient {
    Eigen::VectorXd w;
    double b = 0.0;
};

LrGradient lr_gradient(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& x, std::span<const int> y, double l2);

LrModel lr_fit(const Eigen::MatrixXd& x, std::span<const int> y, const LrConfig& cfg = {});
Eigen::VectorXd lr_predict_proba(const LrModel& model, const Eigen::MatrixXd& x);

// ---- linear SVM -------------------------------------------------------------

struct SvmConfig {
    double c = 1.0;
    std::size_t epochs = 200;
    std::size_t batch_size = 16;
    double initial_step = 1.0;
    std::uint64_t seed = 0;
};

struct SvmModel {
    Eigen::VectorXd weights;
    double bias = 0.0;
    double c = 1.0;
    // Accepted epochs only: mean (standardized-space) objective over the epoch's iterates.
    std::vector<double> objective_history;
};

// (1/2)||w||^2 + C sum_i max(0, 1 - y_i (x_i w + b)), labels in {-1,+1}
double svm_objective(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& x, std::span<const int> y, double c);

// Mini-batch subgradient descent with decaying step over seeded shuffles. An
// epoch whose mean objective exceeds the last accepted epoch's is rolled back
// and later steps are halved. Returns the accepted epoch-end iterate with the
// lowest objective.
SvmModel svm_fit(const Eigen::MatrixXd& x, std::span<const int> y_pm1, const SvmConfig& cfg = {});
Eigen::VectorXd svm_decision(const SvmModel& model, const Eigen::MatrixXd& x);

// ---- random forest ----------------------------------------------------------

struct RfConfig {
    std::size_t n_trees = 100;
    std::size_t max_depth = 10;
    std::size_t features_per_split = 0;  // 0 selects ceil(sqrt(n_features))
    std::uint64_t seed = 0;
};

struct TreeNode {
    int feature = -1;          // -1 marks a leaf
    double threshold = 0.0;    // go left when x[feature] <= threshold
    double probability = 0.0;  // class-1 fraction of the node's bootstrap rows
    std::size_t right = 0;     // index of the right child; the left child follows the node
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // preorder
    std::size_t oob_count = 0;    // rows never drawn by this tree's bootstrap

    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
};

struct RfModel {
    std::vector<DecisionTree> trees;
    std::size_t n_features = 0;
    std::size_t max_depth = 0;
    std::size_t features_per_split = 0;
    std::uint64_t seed = 0;
};

RfModel rf_fit(const Eigen::MatrixXd& x, std::span<const int> y, const RfConfig& cfg = {});
Eigen::VectorXd rf_predict_proba(const RfModel& model, const Eigen::MatrixXd& x);

// ---- persistence ------------------------------------------------------------

std::string lr_to_json(const LrModel& m);
std::string svm_to_json(const SvmModel& m);
// Trees as preorder node lists of [feature, threshold, leaf_probability].
std::string rf_to_json(const RfModel& m);
RfModel rf_from_json(const std::string& text);

}  // namespace rcrbm
