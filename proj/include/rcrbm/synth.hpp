#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "rcrbm/dataset.hpp"
#include "rcrbm/image.hpp"

namespace rcrbm {

// Two-texture corpus: label 1 carries oriented stripes, label 0 carries
// Gaussian blobs. Both use the same background/foreground levels and have
// similar mean brightness at the default density.
struct SynthSpec {
    std::size_t n_per_class = 200;
    std::size_t image_size = 64;
    double stripe_period = 6.0;            // pixels
    double stripe_orientation_deg = 0.0;   // direction of the stripe normal
    double blob_density = 0.02;            // expected blobs per pixel
    double blob_radius = 2.0;              // Gaussian sigma, pixels
    double noise_level = 0.1;              // additive Gaussian sigma
    std::size_t slices_per_patient = 4;
    std::uint64_t seed = 42;

    void validate() const;
};

Image2D synth_stripes(const SynthSpec& spec, std::uint64_t seed);
Image2D synth_blobs(const SynthSpec& spec, std::uint64_t seed);
// Centered ellipse with semi-axes 0.45 and 0.40 of the image side.
RoiMask synth_mask(std::size_t size);

// Writes images/, masks/ and manifest.csv under out_dir; returns the dataset.
Dataset generate_synthetic(const SynthSpec& spec, const std::filesystem::path& out_dir);

}  // namespace rcrbm
