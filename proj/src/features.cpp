#include "rcrbm/features.hpp"

#include <fstream>
#include <sstream>

#include "json_util.hpp"
#include "rcrbm/error.hpp"

namespace rcrbm {

void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& fm) {
    if (fm.sample_ids.size() != fm.rows() || fm.labels.size() != fm.rows() || fm.names.size() != fm.cols()) {
        throw Error("feature matrix parts disagree in size");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << "sample_id";
    for (const auto& n : fm.names) out << ',' << n;
    out << ",label\n";
    for (std::size_t r = 0; r < fm.rows(); ++r) {
        out << fm.sample_ids[r];
        for (std::size_t c = 0; c < fm.cols(); ++c) {
            // Shortest round-trip decimal.
            out << ',' << detail::ordered_json(fm.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))).dump();
        }
        out << ',' << fm.labels[r] << '\n';
    }
    if (!out) throw Error("write failed: " + path.string());
}

FeatureMatrix read_feature_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ss(line);
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        return cells;
    };
    std::string line;
    if (!std::getline(in, line)) throw Error(path.string() + ": missing header");
    auto header = split(line);
    if (header.size() < 2 || header.front() != "sample_id" || header.back() != "label") {
        throw Error(path.string() + ": header must be sample_id,<features...>,label");
    }
    FeatureMatrix fm;
    fm.names.assign(header.begin() + 1, header.end() - 1);
    std::vector<std::vector<double>> rows;
    std::size_t row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != header.size()) throw Error(path.string() + " row " + std::to_string(row_no) + ": wrong field count");
        fm.sample_ids.push_back(cells.front());
        std::vector<double> vals;
        for (std::size_t c = 1; c + 1 < cells.size(); ++c) vals.push_back(std::stod(cells[c]));
        rows.push_back(std::move(vals));
        fm.labels.push_back(std::stoi(cells.back()));
    }
    fm.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(fm.names.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < fm.names.size(); ++c)
            fm.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return fm;
}

}  // namespace rcrbm
