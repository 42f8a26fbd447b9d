#include "rcrbm/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "json_util.hpp"
#include "rcrbm/error.hpp"

#ifndef RCRBM_VERSION
#define RCRBM_VERSION "unknown"
#endif

namespace rcrbm {

using detail::ordered_json;

std::string_view to_string(FeatureSource s) {
    switch (s) {
        case FeatureSource::radiomics: return "radiomics";
        case FeatureSource::crbm_image: return "crbm-image";
        case FeatureSource::crbm_patch: return "crbm-patch";
    }
    return "radiomics";
}

FeatureSource parse_feature_source(std::string_view s) {
    if (s == "radiomics") return FeatureSource::radiomics;
    if (s == "crbm-image") return FeatureSource::crbm_image;
    if (s == "crbm-patch") return FeatureSource::crbm_patch;
    throw ConfigError("feature_source must be radiomics, crbm-image or crbm-patch; got '" + std::string(s) + "'");
}

namespace {

std::string_view to_string(ReductionMode m) { return m == ReductionMode::uniform ? "uniform" : "random-projection"; }

ReductionMode parse_reduction(std::string_view s) {
    if (s == "uniform") return ReductionMode::uniform;
    if (s == "random-projection") return ReductionMode::random_projection;
    throw ConfigError("reduction must be 'uniform' or 'random-projection'; got '" + std::string(s) + "'");
}

// Typed, strict accessors over one JSON object of the config file.
class Section {
public:
    Section(const nlohmann::json& j, std::string path, std::set<std::string> allowed) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
        for (const auto& [key, _] : j_.items()) {
            if (!allowed.count(key)) throw ConfigError("unknown config key '" + where(key) + "'");
        }
    }

    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
    const nlohmann::json& raw(const std::string& key) const { return j_.at(key); }

    void get(const std::string& key, std::size_t& out) const {
        if (!has(key)) return;
        const auto& v = j_.at(key);
        if (!v.is_number_unsigned()) throw ConfigError(where(key) + " must be a non-negative integer");
        out = v.get<std::size_t>();
    }
    void get(const std::string& key, std::uint64_t& out, int) const {
        if (!has(key)) return;
        const auto& v = j_.at(key);
        if (!v.is_number_unsigned()) throw ConfigError(where(key) + " must be a non-negative integer");
        out = v.get<std::uint64_t>();
    }
    void get(const std::string& key, double& out) const {
        if (!has(key)) return;
        const auto& v = j_.at(key);
        if (!v.is_number()) throw ConfigError(where(key) + " must be a number");
        out = v.get<double>();
    }
    void get(const std::string& key, bool& out) const {
        if (!has(key)) return;
        const auto& v = j_.at(key);
        if (!v.is_boolean()) throw ConfigError(where(key) + " must be true or false");
        out = v.get<bool>();
    }
    std::optional<std::string> string(const std::string& key) const {
        if (!has(key)) return std::nullopt;
        const auto& v = j_.at(key);
        if (!v.is_string()) throw ConfigError(where(key) + " must be a string");
        return v.get<std::string>();
    }

private:
    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const nlohmann::json& j_;
    std::string path_;
};

std::size_t default_input_size(FeatureSource s) { return s == FeatureSource::crbm_image ? 256 : 32; }

bool uses_crbm(FeatureSource s) { return s != FeatureSource::radiomics; }

struct Seeds {
    std::uint64_t crbm_init, crbm_train, folds, head, reduction, synth;
};

Seeds derived_seeds(std::uint64_t top) {
    return {derive_seed(top, "crbm-init"), derive_seed(top, "crbm-train"), derive_seed(top, "cv"),
            derive_seed(top, "head"),      derive_seed(top, "reduction"),  derive_seed(top, "synth")};
}

Image2D pad_at_least(const Image2D& img, std::size_t side) {
    if (img.width() >= side && img.height() >= side) return img;
    const std::size_t w = std::max(img.width(), side), h = std::max(img.height(), side);
    Image2D out(w, h);
    const std::size_t r0 = (h - img.height()) / 2, c0 = (w - img.width()) / 2;
    for (std::size_t r = 0; r < img.height(); ++r)
        for (std::size_t c = 0; c < img.width(); ++c) out.at(r0 + r, c0 + c) = img.at(r, c);
    return out;
}

ordered_json history_json(const TrainHistory& h) {
    auto arr = ordered_json::array();
    for (std::size_t e = 0; e < h.epochs.size(); ++e) {
        arr.push_back({{"epoch", e + 1},
                       {"reconstruction_cross_entropy", h.epochs[e].reconstruction_cross_entropy},
                       {"mean_abs_weight_delta", h.epochs[e].mean_abs_weight_delta}});
    }
    return arr;
}

}  // namespace

std::size_t PipelineConfig::crbm_input_size() const {
    return crbm.input_size > 0 ? crbm.input_size : default_input_size(feature_source);
}

void PipelineConfig::finalize() {
    const auto seeds = derived_seeds(seed);
    crbm.train.rng_seed = seeds.crbm_train;
    head.seed = seeds.head;
    synth.seed = seeds.synth;
    crbm.train.validate();
    if (crbm.num_filters == 0) throw ConfigError("crbm.num_filters must be >= 1");
    if (crbm.kernel_size == 0) throw ConfigError("crbm.kernel_size must be >= 1");
    if (crbm_input_size() < crbm.kernel_size) throw ConfigError("crbm.input_size must be >= crbm.kernel_size");
    if (crbm.patch_stride == 0) throw ConfigError("crbm.patch_stride must be >= 1");
    if (radiomics.levels < 2) throw ConfigError("radiomics.levels must be >= 2");
    if (head.pls_components == 0) throw ConfigError("pls.components must be >= 1");
    if (cv_k < 2) throw ConfigError("cv.k must be >= 2");
    if (head.lr.l2 < 0) throw ConfigError("classifier.lr.l2 must be >= 0");
    if (!(head.svm.c > 0)) throw ConfigError("classifier.svm.c must be > 0");
    if (head.svm.epochs == 0 || head.svm.batch_size == 0) throw ConfigError("classifier.svm epochs/batch_size must be >= 1");
    if (head.rf.n_trees == 0) throw ConfigError("classifier.rf.n_trees must be >= 1");
    synth.validate();
}

PipelineConfig config_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    PipelineConfig cfg;
    const Section top(j, "", {"feature_source", "seed", "crbm", "radiomics", "pls", "classifier", "cv", "filter", "synth"});
    if (auto s = top.string("feature_source")) cfg.feature_source = parse_feature_source(*s);
    top.get("seed", cfg.seed, 0);

    if (top.has("crbm")) {
        const Section c(top.raw("crbm"), "crbm",
                        {"num_filters", "kernel_size", "input_size", "patch_stride", "max_training_inputs",
                         "learning_rate", "cd_steps", "epochs", "batch_size", "weight_init_sigma", "binary_visible",
                         "reduction"});
        c.get("num_filters", cfg.crbm.num_filters);
        c.get("kernel_size", cfg.crbm.kernel_size);
        c.get("input_size", cfg.crbm.input_size);
        c.get("patch_stride", cfg.crbm.patch_stride);
        c.get("max_training_inputs", cfg.crbm.max_training_inputs);
        c.get("learning_rate", cfg.crbm.train.learning_rate);
        c.get("cd_steps", cfg.crbm.train.cd_steps);
        c.get("epochs", cfg.crbm.train.epochs);
        c.get("batch_size", cfg.crbm.train.batch_size);
        c.get("weight_init_sigma", cfg.crbm.train.weight_init_sigma);
        c.get("binary_visible", cfg.crbm.train.binary_visible);
        if (auto s = c.string("reduction")) cfg.crbm.reduction = parse_reduction(*s);
    }
    if (top.has("radiomics")) {
        const Section r(top.raw("radiomics"), "radiomics", {"levels", "symmetric_glcm"});
        r.get("levels", cfg.radiomics.levels);
        r.get("symmetric_glcm", cfg.radiomics.symmetric_glcm);
    }
    if (top.has("pls")) {
        const Section p(top.raw("pls"), "pls", {"components", "mode"});
        p.get("components", cfg.head.pls_components);
        if (auto s = p.string("mode")) cfg.head.pls_mode = parse_pls_mode(*s);
    }
    if (top.has("classifier")) {
        const Section c(top.raw("classifier"), "classifier", {"name", "lr", "svm", "rf"});
        if (auto s = c.string("name")) cfg.head.classifier = parse_classifier(*s);
        if (c.has("lr")) {
            const Section s(c.raw("lr"), "classifier.lr", {"l2", "max_steps", "tolerance", "step_size"});
            s.get("l2", cfg.head.lr.l2);
            s.get("max_steps", cfg.head.lr.max_steps);
            s.get("tolerance", cfg.head.lr.tolerance);
            s.get("step_size", cfg.head.lr.step_size);
        }
        if (c.has("svm")) {
            const Section s(c.raw("svm"), "classifier.svm", {"c", "epochs", "batch_size", "initial_step"});
            s.get("c", cfg.head.svm.c);
            s.get("epochs", cfg.head.svm.epochs);
            s.get("batch_size", cfg.head.svm.batch_size);
            s.get("initial_step", cfg.head.svm.initial_step);
        }
        if (c.has("rf")) {
            const Section s(c.raw("rf"), "classifier.rf", {"n_trees", "max_depth", "features_per_split"});
            s.get("n_trees", cfg.head.rf.n_trees);
            s.get("max_depth", cfg.head.rf.max_depth);
            s.get("features_per_split", cfg.head.rf.features_per_split);
        }
    }
    if (top.has("cv")) {
        const Section c(top.raw("cv"), "cv", {"k", "mode"});
        c.get("k", cfg.cv_k);
        if (auto s = c.string("mode")) cfg.cv_mode = parse_fold_mode(*s);
    }
    if (top.has("filter")) {
        const Section f(top.raw("filter"), "filter", {"stage", "subtype"});
        try {
            if (auto s = f.string("stage")) cfg.stage_filter = parse_stage(*s);
            if (auto s = f.string("subtype")) cfg.subtype_filter = parse_subtype(*s);
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            throw ConfigError(std::string("filter: ") + e.what());
        }
    }
    if (top.has("synth")) {
        const Section s(top.raw("synth"), "synth",
                        {"n_per_class", "image_size", "stripe_period", "stripe_orientation_deg", "blob_density",
                         "blob_radius", "noise_level", "slices_per_patient"});
        s.get("n_per_class", cfg.synth.n_per_class);
        s.get("image_size", cfg.synth.image_size);
        s.get("stripe_period", cfg.synth.stripe_period);
        s.get("stripe_orientation_deg", cfg.synth.stripe_orientation_deg);
        s.get("blob_density", cfg.synth.blob_density);
        s.get("blob_radius", cfg.synth.blob_radius);
        s.get("noise_level", cfg.synth.noise_level);
        s.get("slices_per_patient", cfg.synth.slices_per_patient);
    }
    cfg.finalize();
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

namespace {

ordered_json config_json(const PipelineConfig& cfg) {
    ordered_json j;
    j["feature_source"] = to_string(cfg.feature_source);
    j["seed"] = cfg.seed;
    j["crbm"] = {{"num_filters", cfg.crbm.num_filters},
                 {"kernel_size", cfg.crbm.kernel_size},
                 {"input_size", cfg.crbm_input_size()},
                 {"patch_stride", cfg.crbm.patch_stride},
                 {"max_training_inputs", cfg.crbm.max_training_inputs},
                 {"learning_rate", cfg.crbm.train.learning_rate},
                 {"cd_steps", cfg.crbm.train.cd_steps},
                 {"epochs", cfg.crbm.train.epochs},
                 {"batch_size", cfg.crbm.train.batch_size},
                 {"weight_init_sigma", cfg.crbm.train.weight_init_sigma},
                 {"binary_visible", cfg.crbm.train.binary_visible},
                 {"reduction", to_string(cfg.crbm.reduction)}};
    j["radiomics"] = {{"levels", cfg.radiomics.levels}, {"symmetric_glcm", cfg.radiomics.symmetric_glcm}};
    j["pls"] = {{"components", cfg.head.pls_components}, {"mode", to_string(cfg.head.pls_mode)}};
    j["classifier"] = {
        {"name", to_string(cfg.head.classifier)},
        {"lr",
         {{"l2", cfg.head.lr.l2},
          {"max_steps", cfg.head.lr.max_steps},
          {"tolerance", cfg.head.lr.tolerance},
          {"step_size", cfg.head.lr.step_size}}},
        {"svm",
         {{"c", cfg.head.svm.c},
          {"epochs", cfg.head.svm.epochs},
          {"batch_size", cfg.head.svm.batch_size},
          {"initial_step", cfg.head.svm.initial_step}}},
        {"rf",
         {{"n_trees", cfg.head.rf.n_trees},
          {"max_depth", cfg.head.rf.max_depth},
          {"features_per_split", cfg.head.rf.features_per_split}}}};
    j["cv"] = {{"k", cfg.cv_k}, {"mode", to_string(cfg.cv_mode)}};
    j["filter"] = {{"stage", cfg.stage_filter ? ordered_json(to_string(*cfg.stage_filter)) : ordered_json(nullptr)},
                   {"subtype", cfg.subtype_filter ? ordered_json(to_string(*cfg.subtype_filter)) : ordered_json(nullptr)}};
    j["synth"] = {{"n_per_class", cfg.synth.n_per_class},
                  {"image_size", cfg.synth.image_size},
                  {"stripe_period", cfg.synth.stripe_period},
                  {"stripe_orientation_deg", cfg.synth.stripe_orientation_deg},
                  {"blob_density", cfg.synth.blob_density},
                  {"blob_radius", cfg.synth.blob_radius},
                  {"noise_level", cfg.synth.noise_level},
                  {"slices_per_patient", cfg.synth.slices_per_patient}};
    return j;
}

}  // namespace

std::string config_to_json(const PipelineConfig& cfg) { return config_json(cfg).dump(1) + "\n"; }

std::vector<Image2D> crbm_inputs(const PipelineConfig& cfg, const SampleRecord& record) {
    try {
        const auto img = load_image(record.image_path);
        const auto mask = load_mask(record.mask_path);
        const auto roi = crop_to_roi(img, mask);
        const auto side = cfg.crbm_input_size();
        if (cfg.feature_source == FeatureSource::crbm_patch) {
            return extract_patches(pad_at_least(roi, side), side, cfg.crbm.patch_stride);
        }
        return {resize_or_pad(roi, side)};
    } catch (const Error& e) {
        throw Error("sample " + record.sample_id + ": " + e.what());
    }
}

TrainResult train_crbm(const PipelineConfig& cfg, const Dataset& ds) {
    if (ds.empty()) throw Error("CRBM training needs a non-empty dataset");
    std::vector<Image2D> inputs;
    for (const auto& r : ds.records) {
        auto xs = crbm_inputs(cfg, r);
        std::move(xs.begin(), xs.end(), std::back_inserter(inputs));
    }
    if (cfg.crbm.max_training_inputs > 0 && inputs.size() > cfg.crbm.max_training_inputs) {
        std::vector<std::size_t> idx(inputs.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        Rng(derive_seed(cfg.seed, "crbm-subsample")).shuffle(idx.begin(), idx.end());
        idx.resize(cfg.crbm.max_training_inputs);
        std::sort(idx.begin(), idx.end());
        std::vector<Image2D> kept;
        for (auto i : idx) kept.push_back(std::move(inputs[i]));
        inputs = std::move(kept);
    }
    const auto model = init_crbm(cfg.crbm.num_filters, cfg.crbm.kernel_size, cfg.crbm_input_size(),
                                 cfg.crbm.train.weight_init_sigma, derived_seeds(cfg.seed).crbm_init);
    return train(model, inputs, cfg.crbm.train);
}

std::vector<double> crbm_feature_vector(const CrbmModel& model, const Image2D& input, std::span<const double> weights) {
    const auto reduced = reduce_1x1(extract_feature_map(model, input), weights);
    return reduced.vector();
}

ExtractedFeatures extract_features(const PipelineConfig& cfg, const Dataset& ds, const CrbmModel* model) {
    ExtractedFeatures ef;
    std::vector<std::vector<double>> rows;
    if (cfg.feature_source == FeatureSource::radiomics) {
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const auto& r = ds.records[i];
            try {
                const auto fv = extract_all(load_image(r.image_path), load_mask(r.mask_path), cfg.radiomics);
                if (ef.matrix.names.empty()) ef.matrix.names = fv.names;
                rows.push_back(fv.values);
            } catch (const Error& e) {
                throw Error("sample " + r.sample_id + ": " + e.what());
            }
            ef.row_sample.push_back(i);
        }
    } else {
        if (model == nullptr) throw Error("CRBM feature extraction needs a model");
        if (model->input_size != cfg.crbm_input_size()) {
            throw Error("CRBM model input size " + std::to_string(model->input_size) + " does not match configured " +
                        std::to_string(cfg.crbm_input_size()));
        }
        const auto weights =
            reduction_weights(model->num_filters, cfg.crbm.reduction, derived_seeds(cfg.seed).reduction);
        const auto side = model->hidden_side();
        for (std::size_t r = 0; r < side; ++r)
            for (std::size_t c = 0; c < side; ++c)
                ef.matrix.names.push_back("crbm_r" + std::to_string(r) + "_c" + std::to_string(c));
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const auto inputs = crbm_inputs(cfg, ds.records[i]);
            for (std::size_t p = 0; p < inputs.size(); ++p) {
                rows.push_back(crbm_feature_vector(*model, inputs[p], weights));
                ef.row_sample.push_back(i);
            }
        }
    }

    const bool per_patch = cfg.feature_source == FeatureSource::crbm_patch;
    std::map<std::size_t, std::size_t> patch_counter;
    ef.matrix.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(ef.matrix.names.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& rec = ds.records[ef.row_sample[k]];
        ef.matrix.sample_ids.push_back(per_patch ? rec.sample_id + "#p" + std::to_string(patch_counter[ef.row_sample[k]]++)
                                                 : rec.sample_id);
        ef.matrix.labels.push_back(rec.label);
        for (std::size_t c = 0; c < rows[k].size(); ++c)
            ef.matrix.values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = rows[k][c];
    }
    return ef;
}

FeatureMatrix aggregate_by_sample(const ExtractedFeatures& ef, const Dataset& ds) {
    FeatureMatrix out;
    out.names = ef.matrix.names;
    out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ds.size()), ef.matrix.values.cols());
    std::vector<double> counts(ds.size(), 0.0);
    for (std::size_t k = 0; k < ef.row_sample.size(); ++k) {
        out.values.row(static_cast<Eigen::Index>(ef.row_sample[k])) += ef.matrix.values.row(static_cast<Eigen::Index>(k));
        counts[ef.row_sample[k]] += 1.0;
    }
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (counts[i] == 0) throw Error("sample " + ds.records[i].sample_id + " produced no feature rows");
        out.values.row(static_cast<Eigen::Index>(i)) /= counts[i];
        out.sample_ids.push_back(ds.records[i].sample_id);
        out.labels.push_back(ds.records[i].label);
    }
    return out;
}

RunResult run_pipeline(const PipelineConfig& cfg, const Dataset& all, const CrbmModel* pretrained) {
    const auto ds = filter_dataset(all, cfg.stage_filter, cfg.subtype_filter);
    if (ds.empty()) throw Error("no samples left after the stage/subtype filter");
    if (ds.n_positive == 0 || ds.n_negative == 0) throw Error("the evaluated dataset must contain both classes");
    const auto seeds = derived_seeds(cfg.seed);

    RunResult result;
    std::optional<CrbmModel> trained;
    const CrbmModel* model = pretrained;
    std::string crbm_provenance = "not used";
    if (uses_crbm(cfg.feature_source) && model == nullptr) {
        try {
            auto tr = train_crbm(cfg, ds);
            trained = std::move(tr.model);
            result.crbm_history = std::move(tr.history);
        } catch (const Error& e) {
            throw Error(std::string("CRBM training: ") + e.what());
        }
        model = &*trained;
        crbm_provenance = "trained once, without labels, on every image of the evaluated dataset before cross-validation";
    } else if (uses_crbm(cfg.feature_source)) {
        crbm_provenance = "pretrained model supplied by the caller";
    }

    ExtractedFeatures ef;
    try {
        ef = extract_features(cfg, ds, model);
    } catch (const Error& e) {
        throw Error(std::string("feature extraction: ") + e.what());
    }

    std::vector<int> labels;
    for (const auto& r : ds.records) labels.push_back(r.label);
    const auto plan = make_folds(ds, cfg.cv_k, cfg.cv_mode, seeds.folds);
    try {
        result.report = cross_validate(ef.matrix, ef.row_sample, labels, plan, cfg.head);
    } catch (const Error& e) {
        throw Error(std::string("cross-validation: ") + e.what());
    }

    ordered_json j;
    j["tool"] = "radiomics-crbm";
    j["version"] = RCRBM_VERSION;
    j["config"] = config_json(cfg);
    j["seeds"] = {{"top_level", cfg.seed},       {"crbm_init", seeds.crbm_init},
                  {"crbm_train", seeds.crbm_train}, {"folds", seeds.folds},
                  {"head", seeds.head},          {"reduction", seeds.reduction}};
    j["dataset"] = {{"n_samples", ds.size()}, {"n_positive", ds.n_positive}, {"n_negative", ds.n_negative}};
    j["features"] = {{"source", to_string(cfg.feature_source)},
                     {"n_rows", ef.matrix.rows()},
                     {"n_columns", ef.matrix.cols()},
                     {"row_unit", cfg.feature_source == FeatureSource::crbm_patch ? "patch" : "sample"}};
    j["provenance"] = {
        {"crbm", crbm_provenance},
        {"feature_reduction", "PLS fitted on training folds only"},
        {"classifier", "fitted on training folds only"},
        {"patch_aggregation", cfg.feature_source == FeatureSource::crbm_patch
                                  ? "slice score = mean of its patch scores"
                                  : "not applicable"},
        {"pooled_metrics", "held-out scores concatenated across folds"},
        {"default_threshold", cfg.head.default_threshold()},
        {"hyperparameters", "artifact defaults unless set in the config"}};
    if (result.crbm_history) j["crbm_history"] = history_json(*result.crbm_history);
    j["results"] = detail::report_to_json(result.report);
    result.report_json = j.dump(1) + "\n";
    return result;
}

void write_history_csv(const std::filesystem::path& path, const TrainHistory& history) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << "epoch,reconstruction_cross_entropy,mean_abs_weight_delta\n";
    for (std::size_t e = 0; e < history.epochs.size(); ++e) {
        out << e + 1 << ',' << ordered_json(history.epochs[e].reconstruction_cross_entropy).dump() << ','
            << ordered_json(history.epochs[e].mean_abs_weight_delta).dump() << '\n';
    }
    if (!out) throw Error("write failed: " + path.string());
}

}  // namespace rcrbm
