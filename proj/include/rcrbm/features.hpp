#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rcrbm {

// Rows are samples, columns are named features.
struct FeatureMatrix {
    std::vector<std::string> sample_ids;
    std::vector<std::string> names;
    Eigen::MatrixXd values;
    std::vector<int> labels;

    std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
};

// CSV with header `sample_id,<names...>,label`; values at round-trip precision.
void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& fm);
FeatureMatrix read_feature_csv(const std::filesystem::path& path);

}  // namespace rcrbm
