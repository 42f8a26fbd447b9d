#include "rcrbm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include "json_util.hpp"
#include "rcrbm/error.hpp"
#include "rcrbm/pls.hpp"
#include "rcrbm/rng.hpp"

namespace rcrbm {

namespace {

std::pair<std::size_t, std::size_t> class_counts(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw Error("scores and labels differ in length");
    std::size_t pos = 0, neg = 0;
    for (int l : labels) {
        if (l == 1) {
            ++pos;
        } else if (l == 0) {
            ++neg;
        } else {
            throw Error("labels must be 0 or 1");
        }
    }
    return {pos, neg};
}

std::pair<std::size_t, std::size_t> require_both(std::span<const double> scores, std::span<const int> labels) {
    const auto counts = class_counts(scores, labels);
    if (counts.first == 0 || counts.second == 0) throw Error("ROC analysis needs both classes");
    for (double s : scores)
        if (std::isnan(s)) throw Error("score is NaN");
    return counts;
}

MeanSd mean_sd(const std::vector<double>& xs) {
    if (xs.empty()) return {};
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0};
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

}  // namespace

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels) {
    const auto [pos, neg] = require_both(scores, labels);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });

    RocCurve c;
    c.fpr.push_back(0.0);
    c.tpr.push_back(0.0);
    c.thresholds.push_back(std::numeric_limits<double>::infinity());
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double s = scores[order[i]];
        for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] == 1 ? tp : fp)++;
        c.fpr.push_back(static_cast<double>(fp) / static_cast<double>(neg));
        c.tpr.push_back(static_cast<double>(tp) / static_cast<double>(pos));
        c.thresholds.push_back(s);
    }
    return c;
}

double auc_trapezoid(const RocCurve& c) {
    double area = 0.0;
    for (std::size_t i = 1; i < c.fpr.size(); ++i) {
        area += (c.fpr[i] - c.fpr[i - 1]) * 0.5 * (c.tpr[i] + c.tpr[i - 1]);
    }
    return area;
}

double auc_mann_whitney(std::span<const double> scores, std::span<const int> labels) {
    const auto [pos, neg] = require_both(scores, labels);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
    // Sum of midranks of the positives (ranks start at 1).
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        for (auto k = i; k < j; ++k)
            if (labels[order[k]] == 1) rank_sum += midrank;
        i = j;
    }
    const double np = static_cast<double>(pos), nn = static_cast<double>(neg);
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

ConfusionMetrics confusion_metrics(std::span<const double> scores, std::span<const int> labels, double threshold) {
    class_counts(scores, labels);
    ConfusionMetrics m;
    m.threshold = threshold;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        if (labels[i] == 1) {
            (predicted ? m.tp : m.fn)++;
        } else {
            (predicted ? m.fp : m.tn)++;
        }
    }
    const auto n = static_cast<double>(scores.size());
    m.accuracy = n > 0 ? static_cast<double>(m.tp + m.tn) / n : 0.0;
    m.sensitivity_undefined = m.tp + m.fn == 0;
    m.specificity_undefined = m.tn + m.fp == 0;
    m.sensitivity = m.sensitivity_undefined ? 0.0 : static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
    m.specificity = m.specificity_undefined ? 0.0 : static_cast<double>(m.tn) / static_cast<double>(m.tn + m.fp);
    return m;
}

double youden_threshold(const RocCurve& c) {
    double best = -std::numeric_limits<double>::infinity(), cutoff = c.thresholds.back();
    for (std::size_t i = 1; i < c.thresholds.size(); ++i) {
        const double j = c.tpr[i] - c.fpr[i];
        if (j > best) {
            best = j;
            cutoff = c.thresholds[i];
        }
    }
    return cutoff;
}

std::string_view to_string(FoldMode m) { return m == FoldMode::slice_level ? "slice" : "patient"; }

FoldMode parse_fold_mode(std::string_view s) {
    if (s == "slice") return FoldMode::slice_level;
    if (s == "patient") return FoldMode::patient_grouped;
    throw ConfigError("cv mode must be 'slice' or 'patient', got '" + std::string(s) + "'");
}

std::vector<std::size_t> FoldPlan::members(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        if (assignments[i] == fold) out.push_back(i);
    return out;
}

FoldPlan make_folds(const Dataset& ds, std::size_t k, FoldMode mode, std::uint64_t seed) {
    if (k < 2) throw Error("cross-validation needs k >= 2");
    FoldPlan plan{k, std::vector<std::size_t>(ds.size(), 0), mode, seed};
    Rng rng(derive_seed(seed, "folds"));
    if (mode == FoldMode::slice_level) {
        if (ds.size() < k) {
            throw Error("cannot split " + std::to_string(ds.size()) + " samples into " + std::to_string(k) + " folds");
        }
        std::vector<std::size_t> pos, neg;
        for (std::size_t i = 0; i < ds.size(); ++i) (ds.records[i].label == 1 ? pos : neg).push_back(i);
        rng.shuffle(pos.begin(), pos.end());
        rng.shuffle(neg.begin(), neg.end());
        pos.insert(pos.end(), neg.begin(), neg.end());
        for (std::size_t j = 0; j < pos.size(); ++j) plan.assignments[pos[j]] = j % k;
        return plan;
    }

    std::map<std::string, std::vector<std::size_t>> by_patient;
    for (std::size_t i = 0; i < ds.size(); ++i) by_patient[ds.records[i].patient_id].push_back(i);
    if (by_patient.size() < k) {
        throw Error("patient-grouped folds need at least " + std::to_string(k) + " patients, found " +
                    std::to_string(by_patient.size()));
    }
    std::vector<const std::vector<std::size_t>*> groups;
    for (const auto& [_, members] : by_patient) groups.push_back(&members);
    rng.shuffle(groups.begin(), groups.end());
    std::stable_sort(groups.begin(), groups.end(), [](auto a, auto b) { return a->size() > b->size(); });
    std::vector<std::size_t> load(k, 0);
    for (const auto* g : groups) {
        const auto f = static_cast<std::size_t>(std::min_element(load.begin(), load.end()) - load.begin());
        for (auto i : *g) plan.assignments[i] = f;
        load[f] += g->size();
    }
    return plan;
}

std::string_view to_string(ClassifierKind c) {
    switch (c) {
        case ClassifierKind::lr: return "lr";
        case ClassifierKind::svm: return "svm";
        case ClassifierKind::rf: return "rf";
    }
    return "lr";
}

ClassifierKind parse_classifier(std::string_view s) {
    if (s == "lr") return ClassifierKind::lr;
    if (s == "svm") return ClassifierKind::svm;
    if (s == "rf") return ClassifierKind::rf;
    throw ConfigError("classifier must be one of lr, svm, rf; got '" + std::string(s) + "'");
}

std::string_view to_string(PlsMode m) { return m == PlsMode::latent ? "latent" : "vip-subset"; }

PlsMode parse_pls_mode(std::string_view s) {
    if (s == "latent") return PlsMode::latent;
    if (s == "vip-subset") return PlsMode::vip_subset;
    throw ConfigError("pls mode must be 'latent' or 'vip-subset', got '" + std::string(s) + "'");
}

EvalReport cross_validate(const FeatureMatrix& features, std::span<const std::size_t> row_sample,
                          std::span<const int> sample_labels, const FoldPlan& plan, const HeadConfig& head) {
    const std::size_t n_samples = sample_labels.size();
    if (row_sample.size() != features.rows()) throw Error("row-to-sample map does not match the feature rows");
    if (plan.assignments.size() != n_samples) throw Error("fold plan does not match the sample count");

    EvalReport report;
    report.sample_labels.assign(sample_labels.begin(), sample_labels.end());
    report.sample_scores.assign(n_samples, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> auc_list, acc_list, sens_list, spec_list;

    for (std::size_t fold = 0; fold < plan.k; ++fold) {
        try {
            std::vector<std::size_t> train_rows, test_rows;
            for (std::size_t r = 0; r < row_sample.size(); ++r) {
                (plan.assignments[row_sample[r]] == fold ? test_rows : train_rows).push_back(r);
            }
            if (train_rows.empty() || test_rows.empty()) throw Error("empty training or held-out split");

            const Eigen::MatrixXd x_train = take_rows(features.values, train_rows);
            const Eigen::MatrixXd x_test = take_rows(features.values, test_rows);
            std::vector<int> y_train;
            std::vector<double> y_real;
            for (auto r : train_rows) {
                y_train.push_back(sample_labels[row_sample[r]]);
                y_real.push_back(static_cast<double>(y_train.back()));
            }

            const auto pls = fit_pls(x_train, features.names, y_real, head.pls_components);
            Eigen::MatrixXd z_train, z_test;
            if (head.pls_mode == PlsMode::latent) {
                z_train = pls_transform(pls, x_train, features.names);
                z_test = pls_transform(pls, x_test, features.names);
            } else {
                const auto cols = vip_top(pls, head.pls_components);
                z_train = pls_select_columns(pls, x_train, features.names, cols);
                z_test = pls_select_columns(pls, x_test, features.names, cols);
            }

            Eigen::VectorXd row_scores;
            switch (head.classifier) {
                case ClassifierKind::lr: {
                    row_scores = lr_predict_proba(lr_fit(z_train, y_train, head.lr), z_test);
                    break;
                }
                case ClassifierKind::svm: {
                    std::vector<int> pm(y_train.size());
                    std::transform(y_train.begin(), y_train.end(), pm.begin(), [](int v) { return v == 1 ? 1 : -1; });
                    auto cfg = head.svm;
                    cfg.seed = derive_seed(head.seed, "svm", fold);
                    row_scores = svm_decision(svm_fit(z_train, pm, cfg), z_test);
                    break;
                }
                case ClassifierKind::rf: {
                    auto cfg = head.rf;
                    cfg.seed = derive_seed(head.seed, "rf", fold);
                    row_scores = rf_predict_proba(rf_fit(z_train, y_train, cfg), z_test);
                    break;
                }
            }

            // Mean of row scores per held-out sample.
            std::map<std::size_t, std::pair<double, std::size_t>> acc;
            for (std::size_t k = 0; k < test_rows.size(); ++k) {
                auto& [sum, count] = acc[row_sample[test_rows[k]]];
                sum += row_scores(static_cast<Eigen::Index>(k));
                ++count;
            }
            std::vector<double> fold_scores;
            std::vector<int> fold_labels;
            for (const auto& [sample, sc] : acc) {
                const double s = sc.first / static_cast<double>(sc.second);
                report.sample_scores[sample] = s;
                fold_scores.push_back(s);
                fold_labels.push_back(sample_labels[sample]);
            }

            FoldMetrics fm;
            fm.fold = fold;
            fm.n_test = fold_scores.size();
            fm.n_train = n_samples - plan.members(fold).size();
            fm.metrics = confusion_metrics(fold_scores, fold_labels, head.default_threshold());
            const auto pos = std::count(fold_labels.begin(), fold_labels.end(), 1);
            if (pos > 0 && pos < static_cast<std::ptrdiff_t>(fold_labels.size())) {
                fm.auc = auc_trapezoid(roc_curve(fold_scores, fold_labels));
                auc_list.push_back(*fm.auc);
            }
            acc_list.push_back(fm.metrics.accuracy);
            sens_list.push_back(fm.metrics.sensitivity);
            spec_list.push_back(fm.metrics.specificity);
            report.per_fold.push_back(fm);
        } catch (const Error& e) {
            throw Error("fold " + std::to_string(fold + 1) + ": " + e.what());
        }
    }

    for (std::size_t i = 0; i < n_samples; ++i) {
        if (std::isnan(report.sample_scores[i])) throw Error("sample " + std::to_string(i) + " received no held-out score");
    }
    report.roc = roc_curve(report.sample_scores, report.sample_labels);
    report.auc = auc_trapezoid(report.roc);
    report.auc_mann_whitney = auc_mann_whitney(report.sample_scores, report.sample_labels);
    report.metrics = confusion_metrics(report.sample_scores, report.sample_labels, head.default_threshold());
    report.youden_metrics =
        confusion_metrics(report.sample_scores, report.sample_labels, youden_threshold(report.roc));
    report.fold_auc = mean_sd(auc_list);
    report.fold_accuracy = mean_sd(acc_list);
    report.fold_sensitivity = mean_sd(sens_list);
    report.fold_specificity = mean_sd(spec_list);
    return report;
}

namespace detail {

ordered_json to_json(const ConfusionMetrics& m) {
    ordered_json j;
    j["threshold"] = m.threshold;
    j["accuracy"] = m.accuracy;
    j["sensitivity"] = m.sensitivity;
    j["specificity"] = m.specificity;
    j["confusion"] = {{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}};
    if (m.sensitivity_undefined) j["sensitivity_undefined"] = true;
    if (m.specificity_undefined) j["specificity_undefined"] = true;
    return j;
}

ordered_json report_to_json(const EvalReport& r) {
    auto msd = [](const MeanSd& v) { return ordered_json{{"mean", v.mean}, {"sd", v.sd}}; };
    ordered_json j;
    j["auc"] = r.auc;
    j["auc_mann_whitney"] = r.auc_mann_whitney;
    j["n_samples"] = r.sample_scores.size();
    j["default_threshold_metrics"] = to_json(r.metrics);
    j["youden_threshold_metrics"] = to_json(r.youden_metrics);
    auto folds = ordered_json::array();
    for (const auto& f : r.per_fold) {
        ordered_json jf;
        jf["fold"] = f.fold;
        jf["n_train_samples"] = f.n_train;
        jf["n_test_samples"] = f.n_test;
        jf["auc"] = f.auc ? ordered_json(*f.auc) : ordered_json(nullptr);
        jf["metrics"] = to_json(f.metrics);
        folds.push_back(std::move(jf));
    }
    j["per_fold"] = std::move(folds);
    j["per_fold_summary"] = {{"auc", msd(r.fold_auc)},
                             {"accuracy", msd(r.fold_accuracy)},
                             {"sensitivity", msd(r.fold_sensitivity)},
                             {"specificity", msd(r.fold_specificity)}};
    j["roc_points"] = r.roc.fpr.size();
    return j;
}

}  // namespace detail

std::string report_metrics_json(const EvalReport& report) { return detail::report_to_json(report).dump(1) + "\n"; }

void write_roc_csv(const std::string& path, const RocCurve& curve) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << "fpr,tpr\n";
    for (std::size_t i = 0; i < curve.fpr.size(); ++i) {
        out << detail::ordered_json(curve.fpr[i]).dump() << ',' << detail::ordered_json(curve.tpr[i]).dump() << '\n';
    }
    if (!out) throw Error("write failed: " + path);
}

}  // namespace rcrbm
