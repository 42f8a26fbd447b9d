#pragma once

// End-to-end wiring: configuration, CRBM training over a manifest, feature
// extraction (radiomics, whole-image CRBM, patch CRBM) and cross-validated
// evaluation.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rcrbm/crbm.hpp"
#include "rcrbm/dataset.hpp"
#include "rcrbm/evaluation.hpp"
#include "rcrbm/features.hpp"
#include "rcrbm/radiomics.hpp"
#include "rcrbm/synth.hpp"

namespace rcrbm {

enum class FeatureSource { radiomics, crbm_image, crbm_patch };

std::string_view to_string(FeatureSource s);
FeatureSource parse_feature_source(std::string_view s);

struct CrbmSettings {
    std::size_t num_filters = 64;
    std::size_t kernel_size = 5;
    std::size_t input_size = 0;  // 0: 256 for crbm-image, 32 for crbm-patch
    std::size_t patch_stride = 16;
    std::size_t max_training_inputs = 0;  // 0: train on every image/patch
    CrbmTrainConfig train;
    ReductionMode reduction = ReductionMode::uniform;
};

struct PipelineConfig {
    FeatureSource feature_source = FeatureSource::crbm_patch;
    std::uint64_t seed = 42;
    CrbmSettings crbm;
    RadiomicsConfig radiomics;
    HeadConfig head;
    std::size_t cv_k = 4;
    FoldMode cv_mode = FoldMode::slice_level;
    std::optional<Stage> stage_filter;
    std::optional<Subtype> subtype_filter;
    SynthSpec synth;

    // Input side actually used by the CRBM for the configured source.
    std::size_t crbm_input_size() const;
    // Propagates the top-level seed to every component and checks ranges.
    void finalize();
};

// Throws ConfigError on unknown keys, bad enum names or out-of-range values.
PipelineConfig config_from_json(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);
// Complete, re-loadable echo of the resolved configuration.
std::string config_to_json(const PipelineConfig& cfg);

// CRBM inputs of one sample: ROI crop, then resize/pad (image mode) or
// patch tiling (patch mode).
std::vector<Image2D> crbm_inputs(const PipelineConfig& cfg, const SampleRecord& record);

TrainResult train_crbm(const PipelineConfig& cfg, const Dataset& ds);

// Flattened 1x1-reduced feature map.
std::vector<double> crbm_feature_vector(const CrbmModel& model, const Image2D& input, std::span<const double> weights);

struct ExtractedFeatures {
    FeatureMatrix matrix;                // one row per image (radiomics, crbm-image) or per patch
    std::vector<std::size_t> row_sample; // row -> dataset index
};

ExtractedFeatures extract_features(const PipelineConfig& cfg, const Dataset& ds, const CrbmModel* model);

// Mean of rows per sample, one row per dataset record.
FeatureMatrix aggregate_by_sample(const ExtractedFeatures& ef, const Dataset& ds);

struct RunResult {
    EvalReport report;
    std::string report_json;
    std::optional<TrainHistory> crbm_history;
};

// Applies the metadata filter, trains the CRBM (unsupervised, all images) when
// needed and no model is supplied, then cross-validates PLS + classifier.
RunResult run_pipeline(const PipelineConfig& cfg, const Dataset& ds, const CrbmModel* pretrained = nullptr);

void write_history_csv(const std::filesystem::path& path, const TrainHistory& history);

}  // namespace rcrbm
