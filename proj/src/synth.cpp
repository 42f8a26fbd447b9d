#include "rcrbm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "rcrbm/error.hpp"
#include "rcrbm/rng.hpp"

namespace rcrbm {

namespace {

constexpr double kBackground = 0.15;
constexpr double kForeground = 0.85;

void add_noise(Image2D& img, double sigma, Rng& rng) {
    for (auto& p : img.values()) {
        if (sigma > 0) p += sigma * rng.normal();
        p = std::clamp(p, 0.0, 1.0);
    }
}

std::string numbered(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%04zu", prefix, i);
    return buf;
}

}  // namespace

void SynthSpec::validate() const {
    if (n_per_class == 0) throw ConfigError("synth n_per_class must be >= 1");
    if (image_size < 4) throw ConfigError("synth image_size must be >= 4");
    if (!(stripe_period > 0)) throw ConfigError("synth stripe_period must be > 0");
    if (!(blob_density > 0)) throw ConfigError("synth blob_density must be > 0");
    if (!(blob_radius > 0)) throw ConfigError("synth blob_radius must be > 0");
    if (noise_level < 0) throw ConfigError("synth noise_level must be >= 0");
    if (slices_per_patient == 0) throw ConfigError("synth slices_per_patient must be >= 1");
}

Image2D synth_stripes(const SynthSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    const double theta = spec.stripe_orientation_deg * std::numbers::pi / 180.0;
    const double phase = 2.0 * std::numbers::pi * rng.uniform();
    const std::size_t n = spec.image_size;
    Image2D img(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            const double u = std::cos(theta) * static_cast<double>(c) + std::sin(theta) * static_cast<double>(r);
            img.at(r, c) = std::sin(2.0 * std::numbers::pi * u / spec.stripe_period + phase) > 0 ? kForeground : kBackground;
        }
    }
    add_noise(img, spec.noise_level, rng);
    return img;
}

Image2D synth_blobs(const SynthSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t n = spec.image_size;
    const auto count = static_cast<std::size_t>(std::lround(spec.blob_density * static_cast<double>(n * n)));
    Image2D img(n, n, kBackground);
    const double s2 = 2.0 * spec.blob_radius * spec.blob_radius;
    for (std::size_t b = 0; b < count; ++b) {
        const double cy = rng.uniform() * static_cast<double>(n), cx = rng.uniform() * static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < n; ++c) {
                const double dy = static_cast<double>(r) - cy, dx = static_cast<double>(c) - cx;
                img.at(r, c) += (kForeground - kBackground) * std::exp(-(dx * dx + dy * dy) / s2);
            }
        }
    }
    for (auto& p : img.values()) p = std::min(p, kForeground);
    add_noise(img, spec.noise_level, rng);
    return img;
}

RoiMask synth_mask(std::size_t size) {
    RoiMask m(size, size);
    const double c = 0.5 * static_cast<double>(size - 1);
    const double a = 0.45 * static_cast<double>(size), b = 0.40 * static_cast<double>(size);
    for (std::size_t r = 0; r < size; ++r) {
        for (std::size_t col = 0; col < size; ++col) {
            const double dy = (static_cast<double>(r) - c) / b, dx = (static_cast<double>(col) - c) / a;
            m.at(r, col) = dx * dx + dy * dy <= 1.0 ? 1 : 0;
        }
    }
    return m;
}

Dataset generate_synthetic(const SynthSpec& spec, const std::filesystem::path& out_dir) {
    spec.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "images", ec);
    std::filesystem::create_directories(out_dir / "masks", ec);
    if (ec) throw Error("cannot create " + out_dir.string() + ": " + ec.message());

    const auto mask = synth_mask(spec.image_size);
    const auto mask_path = out_dir / "masks" / "roi.pgm";
    save_mask(mask_path, mask);

    constexpr Stage stages[] = {Stage::baseline, Stage::early, Stage::inter, Stage::presurgery};
    std::vector<SampleRecord> records;
    std::size_t patient_counter = 0;
    for (int label : {1, 0}) {
        for (std::size_t i = 0; i < spec.n_per_class; ++i) {
            const std::size_t index = records.size();
            const auto seed = derive_seed(spec.seed, "synth-sample", index);
            const auto img = label == 1 ? synth_stripes(spec, seed) : synth_blobs(spec, seed);
            SampleRecord r;
            r.sample_id = numbered("syn", index);
            const std::size_t patient = patient_counter + i / spec.slices_per_patient;
            r.patient_id = numbered("P", patient);
            r.image_path = out_dir / "images" / (r.sample_id + ".pgm");
            r.mask_path = mask_path;
            r.label = label;
            r.stage = stages[i % spec.slices_per_patient % 4];
            r.subtype = patient % 2 == 0 ? Subtype::hr_pos_her2_neg : Subtype::tn_or_her2_pos;
            save_image(r.image_path, img, 8);
            records.push_back(std::move(r));
        }
        patient_counter += (spec.n_per_class + spec.slices_per_patient - 1) / spec.slices_per_patient;
    }
    auto ds = make_dataset(std::move(records));
    write_manifest(out_dir / "manifest.csv", ds);
    return ds;
}

}  // namespace rcrbm
