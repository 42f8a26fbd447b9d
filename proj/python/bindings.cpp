#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "rcrbm/crbm.hpp"
#include "rcrbm/error.hpp"
#include "rcrbm/evaluation.hpp"
#include "rcrbm/pipeline.hpp"
#include "rcrbm/radiomics.hpp"

namespace py = pybind11;
using namespace rcrbm;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image2D to_image(const DoubleArray& a) {
    if (a.ndim() != 2) throw ConfigError("image must be a 2-D array");
    const auto h = static_cast<std::size_t>(a.shape(0)), w = static_cast<std::size_t>(a.shape(1));
    return Image2D(w, h, std::vector<double>(a.data(), a.data() + a.size()));
}

RoiMask to_mask(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw ConfigError("mask must be a 2-D array");
    const auto h = static_cast<std::size_t>(a.shape(0)), w = static_cast<std::size_t>(a.shape(1));
    std::vector<std::uint8_t> data(a.data(), a.data() + a.size());
    for (auto& v : data) v = v ? 1 : 0;
    return RoiMask(w, h, std::move(data));
}

py::dict feature_dict(const FeatureVector& f) {
    py::dict d;
    for (std::size_t i = 0; i < f.size(); ++i) d[py::str(f.names[i])] = f.values[i];
    return d;
}

py::dict matrix_dict(const FeatureMatrix& fm) {
    py::dict d;
    d["sample_ids"] = fm.sample_ids;
    d["names"] = fm.names;
    d["values"] = fm.values;
    d["labels"] = fm.labels;
    return d;
}

py::list history_list(const TrainHistory& h) {
    py::list out;
    for (const auto& e : h.epochs) {
        py::dict d;
        d["reconstruction_cross_entropy"] = e.reconstruction_cross_entropy;
        d["mean_abs_weight_delta"] = e.mean_abs_weight_delta;
        out.append(d);
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "CRBM and radiomics feature pipeline for binary response prediction";
    m.attr("__version__") = RCRBM_VERSION;

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

    m.def("resolve_config", [](const std::string& text) { return config_to_json(config_from_json(text)); },
          py::arg("config_json"), "Validate a JSON config and return the complete resolved config as JSON.");

    m.def(
        "generate_synthetic",
        [](const std::string& config_json, const std::filesystem::path& out_dir) {
            const auto cfg = config_from_json(config_json);
            generate_synthetic(cfg.synth, out_dir);
            return (out_dir / "manifest.csv").string();
        },
        py::arg("config_json"), py::arg("out_dir"), "Write the synthetic corpus; returns the manifest path.");

    m.def(
        "train_crbm",
        [](const std::string& config_json, const std::filesystem::path& manifest) {
            const auto cfg = config_from_json(config_json);
            const auto ds = filter_dataset(load_manifest(manifest), cfg.stage_filter, cfg.subtype_filter);
            TrainResult res;
            {
                py::gil_scoped_release release;
                res = train_crbm(cfg, ds);
            }
            return py::make_tuple(crbm_to_json(res.model), history_list(res.history));
        },
        py::arg("config_json"), py::arg("manifest"), "Train a CRBM; returns (model_json, per-epoch history).");

    m.def(
        "extract_features",
        [](const std::string& config_json, const std::filesystem::path& manifest, std::optional<std::string> model_json) {
            const auto cfg = config_from_json(config_json);
            const auto ds = filter_dataset(load_manifest(manifest), cfg.stage_filter, cfg.subtype_filter);
            std::optional<CrbmModel> model;
            if (model_json) model = crbm_from_json(*model_json);
            if (cfg.feature_source != FeatureSource::radiomics && !model)
                throw ConfigError("CRBM feature sources need a model");
            FeatureMatrix fm;
            {
                py::gil_scoped_release release;
                fm = aggregate_by_sample(extract_features(cfg, ds, model ? &*model : nullptr), ds);
            }
            return matrix_dict(fm);
        },
        py::arg("config_json"), py::arg("manifest"), py::arg("model_json") = py::none(),
        "Per-sample feature matrix as a dict with sample_ids, names, values and labels.");

    m.def(
        "run_pipeline",
        [](const std::string& config_json, const std::filesystem::path& manifest, std::optional<std::string> model_json) {
            const auto cfg = config_from_json(config_json);
            const auto ds = load_manifest(manifest);
            std::optional<CrbmModel> model;
            if (model_json) model = crbm_from_json(*model_json);
            py::gil_scoped_release release;
            return run_pipeline(cfg, ds, model ? &*model : nullptr).report_json;
        },
        py::arg("config_json"), py::arg("manifest"), py::arg("model_json") = py::none(),
        "Cross-validated evaluation; returns the JSON report.");

    m.def(
        "crbm_feature_map",
        [](const std::string& model_json, const DoubleArray& image) {
            const auto model = crbm_from_json(model_json);
            const auto maps = extract_feature_map(model, to_image(image));
            py::array_t<double> out({maps.num_maps, maps.side, maps.side});
            std::copy(maps.values.begin(), maps.values.end(), out.mutable_data());
            return out;
        },
        py::arg("model_json"), py::arg("image"), "Hidden probabilities, shape (filters, side, side).");

    m.def(
        "free_energy",
        [](const std::string& model_json, const DoubleArray& image) {
            return free_energy(crbm_from_json(model_json), to_image(image));
        },
        py::arg("model_json"), py::arg("image"));

    m.def(
        "init_crbm",
        [](std::size_t num_filters, std::size_t kernel_size, std::size_t input_size, double sigma, std::uint64_t seed) {
            return crbm_to_json(init_crbm(num_filters, kernel_size, input_size, sigma, seed));
        },
        py::arg("num_filters"), py::arg("kernel_size"), py::arg("input_size"), py::arg("sigma") = 0.01,
        py::arg("seed") = 0, "Randomly initialized CRBM as JSON.");

    m.def(
        "radiomics_features",
        [](const DoubleArray& image, const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& mask,
           std::size_t levels, bool symmetric_glcm) {
            RadiomicsConfig cfg;
            cfg.levels = levels;
            cfg.symmetric_glcm = symmetric_glcm;
            return feature_dict(extract_all(to_image(image), to_mask(mask), cfg));
        },
        py::arg("image"), py::arg("mask"), py::arg("levels") = 32, py::arg("symmetric_glcm") = true,
        "Named radiomics features of an image in [0, 1] within a binary ROI.");

    m.def(
        "roc",
        [](const std::vector<double>& scores, const std::vector<int>& labels) {
            const auto curve = roc_curve(scores, labels);
            return py::make_tuple(curve.fpr, curve.tpr, curve.thresholds, auc_trapezoid(curve));
        },
        py::arg("scores"), py::arg("labels"), "Returns (fpr, tpr, thresholds, auc).");

    m.def(
        "auc_mann_whitney",
        [](const std::vector<double>& scores, const std::vector<int>& labels) { return auc_mann_whitney(scores, labels); },
        py::arg("scores"), py::arg("labels"));
}
