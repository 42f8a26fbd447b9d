#include "rcrbm/pls.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json_util.hpp"
#include "rcrbm/error.hpp"

namespace rcrbm {

namespace {

constexpr double kMinSd = 1e-12;

void require_names(const PlsModel& model, const Eigen::MatrixXd& x, std::span<const std::string> names) {
    if (static_cast<std::size_t>(x.cols()) != names.size()) throw Error("feature matrix width does not match its names");
    if (!std::equal(names.begin(), names.end(), model.input_names.begin(), model.input_names.end())) {
        throw Error("feature columns do not match the PLS model's training columns");
    }
    if (!x.allFinite()) throw Error("PLS input contains non-finite values");
}

Eigen::MatrixXd standardize(const PlsModel& model, const Eigen::MatrixXd& x) {
    Eigen::MatrixXd z(x.rows(), static_cast<Eigen::Index>(model.retained.size()));
    for (std::size_t k = 0; k < model.retained.size(); ++k) {
        const auto c = static_cast<Eigen::Index>(k);
        z.col(c) = (x.col(static_cast<Eigen::Index>(model.retained[k])).array() - model.column_means(c)) /
                   model.column_sds(c);
    }
    return z;
}

}  // namespace

PlsModel fit_pls(const Eigen::MatrixXd& x, std::span<const std::string> names, std::span<const double> y,
                 std::size_t n_components) {
    const auto n = static_cast<std::size_t>(x.rows());
    if (static_cast<std::size_t>(x.cols()) != names.size()) throw Error("feature matrix width does not match its names");
    if (y.size() != n) throw Error("PLS response length does not match the number of rows");
    if (n < 2) throw Error("PLS needs at least two samples");
    if (!x.allFinite()) throw Error("PLS input contains non-finite values");
    if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) {
        throw Error("PLS needs both classes in the response");
    }
    if (n_components == 0) throw Error("PLS needs at least one component");

    PlsModel model;
    model.n_components = n_components;
    model.input_names.assign(names.begin(), names.end());
    const Eigen::RowVectorXd means = x.colwise().mean();
    std::vector<double> kept_means, kept_sds;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double sd = std::sqrt((x.col(c).array() - means(c)).square().sum() / static_cast<double>(n - 1));
        if (sd < kMinSd) {
            model.dropped_names.push_back(names[static_cast<std::size_t>(c)]);
            continue;
        }
        model.retained.push_back(static_cast<std::size_t>(c));
        kept_means.push_back(means(c));
        kept_sds.push_back(sd);
    }
    const std::size_t p = model.retained.size();
    if (p == 0) throw Error("PLS input has no column with non-zero variance");
    if (n_components > std::min(n - 1, p)) {
        throw Error("PLS components (" + std::to_string(n_components) + ") exceed min(n-1, p) = " +
                    std::to_string(std::min(n - 1, p)));
    }
    model.column_means = Eigen::Map<Eigen::VectorXd>(kept_means.data(), static_cast<Eigen::Index>(p));
    model.column_sds = Eigen::Map<Eigen::VectorXd>(kept_sds.data(), static_cast<Eigen::Index>(p));

    Eigen::MatrixXd xa = standardize(model, x);
    Eigen::VectorXd ya = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(n));
    model.y_mean = ya.mean();
    ya.array() -= model.y_mean;

    const auto A = static_cast<Eigen::Index>(n_components);
    const auto P = static_cast<Eigen::Index>(p);
    model.weights.resize(P, A);
    model.loadings.resize(P, A);
    model.y_loadings.resize(A);
    model.score_norms2.resize(A);
    for (Eigen::Index a = 0; a < A; ++a) {
        Eigen::VectorXd w = xa.transpose() * ya;
        const double norm = w.norm();
        if (norm < 1e-12) {
            throw Error("PLS component " + std::to_string(a + 1) + " has no remaining covariance with the response");
        }
        w /= norm;
        Eigen::Index imax = 0;
        w.cwiseAbs().maxCoeff(&imax);
        if (w(imax) < 0) w = -w;

        const Eigen::VectorXd t = xa * w;
        const double tt = t.squaredNorm();
        const Eigen::VectorXd pl = xa.transpose() * t / tt;
        const double q = ya.dot(t) / tt;
        xa -= t * pl.transpose();
        ya -= q * t;

        model.weights.col(a) = w;
        model.loadings.col(a) = pl;
        model.y_loadings(a) = q;
        model.score_norms2(a) = tt;
    }
    model.x_residual_norm = xa.norm();
    const Eigen::MatrixXd ptw = model.loadings.transpose() * model.weights;
    model.rotation = model.weights * ptw.inverse();
    return model;
}

Eigen::MatrixXd pls_transform(const PlsModel& model, const Eigen::MatrixXd& x, std::span<const std::string> names) {
    require_names(model, x, names);
    return standardize(model, x) * model.rotation;
}

Eigen::VectorXd vip_scores(const PlsModel& model) {
    const auto p = model.weights.rows();
    const Eigen::VectorXd ss = model.y_loadings.array().square() * model.score_norms2.array();
    const double total = ss.sum();
    Eigen::VectorXd vip(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        double acc = 0.0;
        for (Eigen::Index a = 0; a < model.weights.cols(); ++a) acc += ss(a) * model.weights(j, a) * model.weights(j, a);
        vip(j) = total > 0 ? std::sqrt(static_cast<double>(p) * acc / total) : 0.0;
    }
    return vip;
}

std::vector<std::size_t> vip_top(const PlsModel& model, std::size_t count) {
    const auto vip = vip_scores(model);
    if (count > static_cast<std::size_t>(vip.size())) throw Error("VIP selection larger than the retained columns");
    std::vector<std::size_t> order(static_cast<std::size_t>(vip.size()));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
        return vip(static_cast<Eigen::Index>(a)) > vip(static_cast<Eigen::Index>(b));
    });
    order.resize(count);
    for (auto& k : order) k = model.retained[k];
    return order;
}

Eigen::MatrixXd pls_select_columns(const PlsModel& model, const Eigen::MatrixXd& x, std::span<const std::string> names,
                                   std::span<const std::size_t> columns) {
    require_names(model, x, names);
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t k = 0; k < columns.size(); ++k) {
        const auto it = std::find(model.retained.begin(), model.retained.end(), columns[k]);
        if (it == model.retained.end()) throw Error("column was dropped by the PLS model");
        const auto pos = static_cast<Eigen::Index>(it - model.retained.begin());
        out.col(static_cast<Eigen::Index>(k)) =
            (x.col(static_cast<Eigen::Index>(columns[k])).array() - model.column_means(pos)) / model.column_sds(pos);
    }
    return out;
}

std::string pls_to_json(const PlsModel& model) {
    detail::ordered_json j;
    j["version"] = 1;
    j["n_components"] = model.n_components;
    j["input_names"] = model.input_names;
    j["retained"] = model.retained;
    j["dropped_names"] = model.dropped_names;
    j["column_means"] = detail::to_json(model.column_means);
    j["column_sds"] = detail::to_json(model.column_sds);
    j["weights"] = detail::to_json(model.weights);
    j["loadings"] = detail::to_json(model.loadings);
    j["y_loadings"] = detail::to_json(model.y_loadings);
    j["y_mean"] = model.y_mean;
    j["x_residual_norm"] = model.x_residual_norm;
    j["score_norms2"] = detail::to_json(model.score_norms2);
    return j.dump(1) + "\n";
}

PlsModel pls_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        PlsModel m;
        m.n_components = j.at("n_components").get<std::size_t>();
        m.input_names = j.at("input_names").get<std::vector<std::string>>();
        m.retained = j.at("retained").get<std::vector<std::size_t>>();
        m.dropped_names = j.at("dropped_names").get<std::vector<std::string>>();
        m.column_means = detail::vector_from_json(j.at("column_means"));
        m.column_sds = detail::vector_from_json(j.at("column_sds"));
        const auto A = static_cast<Eigen::Index>(m.n_components);
        m.weights = detail::matrix_from_json(j.at("weights"), A);
        m.loadings = detail::matrix_from_json(j.at("loadings"), A);
        m.y_loadings = detail::vector_from_json(j.at("y_loadings"));
        m.y_mean = j.at("y_mean").get<double>();
        m.x_residual_norm = j.at("x_residual_norm").get<double>();
        m.score_norms2 = detail::vector_from_json(j.at("score_norms2"));
        const Eigen::MatrixXd ptw = m.loadings.transpose() * m.weights;
        m.rotation = m.weights * ptw.inverse();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed PLS model: ") + e.what());
    }
}

}  // namespace rcrbm
