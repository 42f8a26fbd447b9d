#pragma once

// Hand-crafted texture features over an ROI: first-order statistics, shape,
// GLCM (Haralick), GLRLM and single-level Haar wavelet subbands.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rcrbm/error.hpp"
#include "rcrbm/image.hpp"

namespace rcrbm {

struct FeatureVector {
    std::vector<std::string> names;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    void push(std::string name, double value) {
        names.push_back(std::move(name));
        values.push_back(value);
    }
    // Appends `other` with every name prefixed by `prefix`.
    void append(const std::string& prefix, const FeatureVector& other);
};

// Gray-level codes in [1, levels] for in-ROI pixels, 0 elsewhere.
struct QuantizedImage {
    std::size_t levels = 0;
    Grid<int> codes;

    std::size_t width() const { return codes.width(); }
    std::size_t height() const { return codes.height(); }
    bool in_roi(std::ptrdiff_t r, std::ptrdiff_t c) const;
};

// Equal-width binning between the in-ROI minimum and maximum; a constant ROI
// maps entirely to code 1.
QuantizedImage quantize(const Image2D& img, const RoiMask& mask, std::size_t levels);

// mean, variance, skewness, kurtosis, energy, entropy, minimum, maximum, range,
// median, p10, p90, mad (mean absolute deviation).
FeatureVector first_order_features(const Image2D& img, const RoiMask& mask);

// area, perimeter, compactness, bbox_width, bbox_height, extent, major_axis,
// minor_axis, eccentricity.
FeatureVector shape_features(const RoiMask& mask);

struct Offset {
    int dr = 0;
    int dc = 0;
    bool operator==(const Offset&) const = default;
};

inline constexpr std::array<Offset, 4> kTextureOffsets{{{0, 1}, {1, 0}, {1, 1}, {1, -1}}};

class EmptyCooccurrence : public Error {
public:
    EmptyCooccurrence() : Error("no in-ROI pixel pair exists at this offset") {}
};

struct Glcm {
    std::size_t levels = 0;
    Offset offset;
    std::vector<double> p;  // levels x levels, row = first code - 1

    double at(std::size_t i, std::size_t j) const { return p[i * levels + j]; }
};

Glcm glcm_compute(const QuantizedImage& q, Offset offset, bool symmetric = true);

// contrast, dissimilarity, homogeneity, asm, entropy, correlation,
// cluster_shade, cluster_prominence.
FeatureVector glcm_features(const Glcm& g);

struct Glrlm {
    std::size_t levels = 0;
    std::size_t max_run = 0;
    Offset direction;
    std::vector<std::uint64_t> counts;  // levels x max_run, column = run length - 1

    std::uint64_t at(std::size_t level, std::size_t run) const { return counts[level * max_run + run]; }
    std::uint64_t total_runs() const;
};

// Maximal runs of equal codes; pixels outside the ROI break runs.
Glrlm glrlm_compute(const QuantizedImage& q, Offset direction);

// sre, lre, gln, rln, rp, lgre, hgre.
FeatureVector glrlm_features(const Glrlm& r);

// Single-level orthonormal 2-D Haar transform. For a 2x2 block {a b; c d}:
// LL = (a+b+c+d)/2, LH = (a+b-c-d)/2, HL = (a-b+c-d)/2, HH = (a-b-c+d)/2.
struct HaarSubbands {
    Image2D ll, lh, hl, hh;
};

// Odd dimensions are padded by edge replication first.
HaarSubbands wavelet_decompose(const Image2D& img);
Image2D wavelet_reconstruct(const HaarSubbands& bands);
Image2D pad_to_even(const Image2D& img);

// 2x2 "any set" downsampling, aligned with wavelet_decompose.
RoiMask downsample_mask(const RoiMask& mask);

struct RadiomicsConfig {
    std::size_t levels = 32;
    bool symmetric_glcm = true;
};

inline constexpr std::size_t kFirstOrderCount = 13;
inline constexpr std::size_t kShapeCount = 9;
inline constexpr std::size_t kGlcmCount = 8;
inline constexpr std::size_t kGlrlmCount = 7;
inline constexpr std::size_t kOriginalFeatureCount =
    kFirstOrderCount + kShapeCount + kTextureOffsets.size() * (kGlcmCount + kGlrlmCount);
inline constexpr std::size_t kSubbandFeatureCount =
    kFirstOrderCount + kTextureOffsets.size() * (kGlcmCount + kGlrlmCount);
inline constexpr std::size_t kRadiomicsFeatureCount = kOriginalFeatureCount + 4 * kSubbandFeatureCount;
static_assert(kRadiomicsFeatureCount == 374);

// Full catalog: original image (82) followed by LL, LH, HL, HH subbands (73 each).
// Offsets with no in-ROI pair contribute zeros.
FeatureVector extract_all(const Image2D& img, const RoiMask& mask, const RadiomicsConfig& cfg = {});

}  // namespace rcrbm
