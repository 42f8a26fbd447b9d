// radiomics-crbm: synthetic data, CRBM training, feature extraction and
// cross-validated evaluation from the command line.
//
// Exit status: 0 success, 1 runtime/data error, 2 usage/config error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "rcrbm/error.hpp"
#include "rcrbm/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

rcrbm::PipelineConfig resolve_config(const std::string& path) {
    if (path.empty()) {
        rcrbm::PipelineConfig cfg;
        cfg.finalize();
        return cfg;
    }
    return rcrbm::load_config(path);
}

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

// Sibling file sharing the stem of `p`, e.g. model.json -> model.history.csv.
fs::path sibling(const fs::path& p, const std::string& suffix) {
    return p.parent_path() / (p.stem().string() + suffix);
}

void write_text(const fs::path& p, const std::string& text) {
    ensure_parent(p);
    std::ofstream out(p, std::ios::binary);
    if (!out) throw rcrbm::Error("cannot write " + p.string());
    out << text;
    if (!out) throw rcrbm::Error("write failed: " + p.string());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CRBM and radiomics features for pCR prediction"};
    app.set_version_flag("--version", std::string(RCRBM_VERSION));
    app.require_subcommand(1);

    std::string config_path, manifest_path, out_path, model_path;

    auto* synth = app.add_subcommand("synth", "Generate the synthetic two-texture corpus");
    synth->add_option("--config", config_path, "Config file (synth section and seed)");
    synth->add_option("--out", out_path, "Output directory")->required();

    auto* train = app.add_subcommand("train-crbm", "Train a CRBM on every image of a manifest");
    train->add_option("--config", config_path, "Config file");
    train->add_option("--manifest", manifest_path, "Manifest CSV")->required();
    train->add_option("--out", out_path, "Model file (history written next to it)")->required();

    auto* extract = app.add_subcommand("extract", "Write the feature matrix of a manifest");
    extract->add_option("--config", config_path, "Config file");
    extract->add_option("--manifest", manifest_path, "Manifest CSV")->required();
    extract->add_option("--model", model_path, "CRBM model (crbm sources)");
    extract->add_option("--out", out_path, "Feature CSV")->required();

    auto* run = app.add_subcommand("run", "Cross-validated evaluation of the full pipeline");
    run->add_option("--config", config_path, "Config file");
    run->add_option("--manifest", manifest_path, "Manifest CSV")->required();
    run->add_option("--model", model_path, "Pretrained CRBM (skips CRBM training)");
    run->add_option("--out", out_path, "Report file (ROC CSV written next to it)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        const auto cfg = resolve_config(config_path);
        if (*synth) {
            const auto ds = rcrbm::generate_synthetic(cfg.synth, out_path);
            std::cout << "wrote " << ds.size() << " samples (" << ds.n_positive << " positive, " << ds.n_negative
                      << " negative) to " << out_path << "\n";
        } else if (*train) {
            if (cfg.feature_source == rcrbm::FeatureSource::radiomics) {
                throw rcrbm::ConfigError("train-crbm needs feature_source crbm-image or crbm-patch");
            }
            const auto ds = rcrbm::load_manifest(manifest_path);
            const auto result = rcrbm::train_crbm(cfg, ds);
            ensure_parent(out_path);
            rcrbm::save_crbm(out_path, result.model);
            rcrbm::write_history_csv(sibling(out_path, ".history.csv"), result.history);
            std::cout << "trained CRBM on " << ds.size() << " samples; model at " << out_path << "\n";
        } else if (*extract) {
            const auto ds = rcrbm::load_manifest(manifest_path);
            std::optional<rcrbm::CrbmModel> model;
            if (cfg.feature_source != rcrbm::FeatureSource::radiomics) {
                if (model_path.empty()) throw rcrbm::ConfigError("extract with a CRBM feature source needs --model");
                model = rcrbm::load_crbm(model_path);
            }
            const auto ef = rcrbm::extract_features(cfg, ds, model ? &*model : nullptr);
            const auto fm = rcrbm::aggregate_by_sample(ef, ds);
            ensure_parent(out_path);
            rcrbm::write_feature_csv(out_path, fm);
            std::cout << "wrote " << fm.rows() << " x " << fm.cols() << " features to " << out_path << "\n";
        } else if (*run) {
            const auto ds = rcrbm::load_manifest(manifest_path);
            std::optional<rcrbm::CrbmModel> model;
            if (!model_path.empty()) model = rcrbm::load_crbm(model_path);
            const auto result = rcrbm::run_pipeline(cfg, ds, model ? &*model : nullptr);
            write_text(out_path, result.report_json);
            rcrbm::write_roc_csv(sibling(out_path, ".roc.csv").string(), result.report.roc);
            std::cout << "AUC " << result.report.auc << " (" << rcrbm::to_string(cfg.feature_source) << ", "
                      << rcrbm::to_string(cfg.head.classifier) << "); report at " << out_path << "\n";
        }
    } catch (const rcrbm::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
