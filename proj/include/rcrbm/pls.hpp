#pragma once

// PLS1 (single response) via NIPALS for supervised dimension reduction.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rcrbm {

struct PlsModel {
    std::size_t n_components = 0;
    std::vector<std::string> input_names;     // columns expected by transform
    std::vector<std::size_t> retained;        // input column indices kept
    std::vector<std::string> dropped_names;   // zero-variance columns
    Eigen::VectorXd column_means;             // retained columns
    Eigen::VectorXd column_sds;
    Eigen::MatrixXd weights;                  // p x A, unit-norm columns
    Eigen::MatrixXd loadings;                 // p x A
    Eigen::MatrixXd rotation;                 // W (P^T W)^-1
    Eigen::VectorXd y_loadings;               // A
    double y_mean = 0.0;
    double x_residual_norm = 0.0;             // Frobenius norm of X after the last deflation
    Eigen::VectorXd score_norms2;             // t_a^T t_a on the training data
};

// X: n x p, y: n labels (0/1 as reals). Columns are z-scored; y is centered.
PlsModel fit_pls(const Eigen::MatrixXd& x, std::span<const std::string> names, std::span<const double> y,
                 std::size_t n_components);

// n x A latent scores.
Eigen::MatrixXd pls_transform(const PlsModel& model, const Eigen::MatrixXd& x, std::span<const std::string> names);

// Variable importance in projection, one value per retained column.
Eigen::VectorXd vip_scores(const PlsModel& model);

// Retained-column positions (into input columns) of the `count` highest VIP
// scores, ties to the lower index.
std::vector<std::size_t> vip_top(const PlsModel& model, std::size_t count);

// z-scored input columns listed by `columns` (input column indices).
Eigen::MatrixXd pls_select_columns(const PlsModel& model, const Eigen::MatrixXd& x, std::span<const std::string> names,
                                   std::span<const std::size_t> columns);

std::string pls_to_json(const PlsModel& model);
PlsModel pls_from_json(const std::string& text);

}  // namespace rcrbm
