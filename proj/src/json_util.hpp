#pragma once

#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "rcrbm/error.hpp"

namespace rcrbm::detail {

using ordered_json = nlohmann::ordered_json;

inline ordered_json to_json(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

// Row-major nested arrays.
inline ordered_json to_json(const Eigen::MatrixXd& m) {
    auto rows = ordered_json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
        rows.push_back(row);
    }
    return rows;
}

template <typename Json>
Eigen::VectorXd vector_from_json(const Json& j) {
    const auto xs = j.template get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

template <typename Json>
Eigen::MatrixXd matrix_from_json(const Json& j, Eigen::Index cols) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const auto row = j.at(static_cast<std::size_t>(r)).template get<std::vector<double>>();
        if (static_cast<Eigen::Index>(row.size()) != cols) throw Error("ragged matrix in model file");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
    }
    return m;
}

}  // namespace rcrbm::detail

namespace rcrbm {
struct ConfusionMetrics;
struct EvalReport;
}  // namespace rcrbm

namespace rcrbm::detail {
ordered_json to_json(const ConfusionMetrics& m);
ordered_json report_to_json(const EvalReport& r);
}  // namespace rcrbm::detail
