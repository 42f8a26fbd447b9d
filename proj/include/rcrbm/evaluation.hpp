#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rcrbm/classifiers.hpp"
#include "rcrbm/dataset.hpp"
#include "rcrbm/features.hpp"

namespace rcrbm {

// Points run from (0,0) to (1,1); thresholds[0] is +inf, thresholds[i] is the
// score cutoff (predict positive iff score >= cutoff) that produces point i.
struct RocCurve {
    std::vector<double> fpr;
    std::vector<double> tpr;
    std::vector<double> thresholds;
};

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels);
double auc_trapezoid(const RocCurve& curve);
// (#correctly ordered positive/negative pairs + 0.5 #ties) / (n_pos n_neg)
double auc_mann_whitney(std::span<const double> scores, std::span<const int> labels);

struct ConfusionMetrics {
    double threshold = 0.0;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double accuracy = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    // Set when a rate's denominator is zero (the rate is then reported as 0).
    bool sensitivity_undefined = false;
    bool specificity_undefined = false;
};

// Predict positive iff score >= threshold.
ConfusionMetrics confusion_metrics(std::span<const double> scores, std::span<const int> labels, double threshold);

// Cutoff maximizing TPR - FPR; ties resolve to the higher cutoff.
double youden_threshold(const RocCurve& curve);

enum class FoldMode { slice_level, patient_grouped };

std::string_view to_string(FoldMode m);
FoldMode parse_fold_mode(std::string_view s);

struct FoldPlan {
    std::size_t k = 0;
    std::vector<std::size_t> assignments;  // sample index -> fold
    FoldMode mode = FoldMode::slice_level;
    std::uint64_t seed = 0;

    std::vector<std::size_t> members(std::size_t fold) const;
};

// Slice-level: label-stratified shuffled round-robin, fold sizes differ by at
// most one. Patient-grouped: whole patients assigned greedily to the smallest fold.
FoldPlan make_folds(const Dataset& ds, std::size_t k, FoldMode mode, std::uint64_t seed);

enum class ClassifierKind { lr, svm, rf };
enum class PlsMode { latent, vip_subset };

std::string_view to_string(ClassifierKind c);
ClassifierKind parse_classifier(std::string_view s);
std::string_view to_string(PlsMode m);
PlsMode parse_pls_mode(std::string_view s);

// PLS reduction + classifier, fitted inside each training fold.
struct HeadConfig {
    std::size_t pls_components = 20;
    PlsMode pls_mode = PlsMode::latent;
    ClassifierKind classifier = ClassifierKind::lr;
    LrConfig lr;
    SvmConfig svm;
    RfConfig rf;
    std::uint64_t seed = 0;

    // 0.5 for probability heads, 0 for SVM margins.
    double default_threshold() const { return classifier == ClassifierKind::svm ? 0.0 : 0.5; }
};

struct FoldMetrics {
    std::size_t fold = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::optional<double> auc;  // absent when the held-out fold has one class
    ConfusionMetrics metrics;
};

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;
};

struct EvalReport {
    double auc = 0.0;                 // pooled held-out scores, trapezoidal
    double auc_mann_whitney = 0.0;    // cross-check of the same scores
    ConfusionMetrics metrics;         // pooled, at the default threshold
    ConfusionMetrics youden_metrics;  // pooled, at the Youden-optimal threshold
    RocCurve roc;
    std::vector<FoldMetrics> per_fold;
    MeanSd fold_auc, fold_accuracy, fold_sensitivity, fold_specificity;
    std::vector<double> sample_scores;  // pooled held-out score per sample
    std::vector<int> sample_labels;
};

// `features` rows may be finer than samples (patches); row_sample maps each
// row to its sample index. Row scores are averaged into sample scores.
EvalReport cross_validate(const FeatureMatrix& features, std::span<const std::size_t> row_sample,
                          std::span<const int> sample_labels, const FoldPlan& plan, const HeadConfig& head);

// Structured-text (JSON) body of a report, without provenance.
std::string report_metrics_json(const EvalReport& report);
void write_roc_csv(const std::string& path, const RocCurve& curve);

}  // namespace rcrbm
