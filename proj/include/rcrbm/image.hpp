#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

namespace rcrbm {

// Dense row-major 2-D array. Rows are indexed first: at(r, c).
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(std::size_t width, std::size_t height, T fill = T{})
        : width_(width), height_(height), data_(width * height, fill) {}
    Grid(std::size_t width, std::size_t height, std::vector<T> data)
        : width_(width), height_(height), data_(std::move(data)) {
        if (data_.size() != width * height) throw std::invalid_argument("grid data length does not match its shape");
    }

    std::size_t width() const { return width_; }
    std::size_t height() const { return height_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& at(std::size_t r, std::size_t c) { return data_[r * width_ + c]; }
    const T& at(std::size_t r, std::size_t c) const { return data_[r * width_ + c]; }

    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }
    const std::vector<T>& vector() const { return data_; }

    bool operator==(const Grid&) const = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<T> data_;
};

// Grayscale image. Pixels produced by normalize_image lie in [0, 1]; derived
// planes (wavelet subbands) reuse the type without that bound.
using Image2D = Grid<double>;

// Binary ROI mask; any non-zero value is "set".
using RoiMask = Grid<std::uint8_t>;

// Integer raster as stored on disk.
struct RawRaster {
    std::size_t width = 0;
    std::size_t height = 0;
    unsigned bit_depth = 8;  // 8 or 16
    std::vector<std::uint16_t> values;
};

RawRaster read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const RawRaster& raster);

// pixel = raw / (2^bit_depth - 1)
Image2D normalize_image(const RawRaster& raw);
// Inverse of normalize_image with rounding to the nearest code.
RawRaster quantize_to_raster(const Image2D& img, unsigned bit_depth);

Image2D load_image(const std::filesystem::path& path);
RoiMask load_mask(const std::filesystem::path& path);
void save_image(const std::filesystem::path& path, const Image2D& img, unsigned bit_depth = 8);
void save_mask(const std::filesystem::path& path, const RoiMask& mask);

bool is_unit_range(const Image2D& img);
std::size_t count_set(const RoiMask& mask);

Image2D binarize(const Image2D& img, double threshold);

struct BoundingBox {
    std::size_t row0 = 0, col0 = 0, rows = 0, cols = 0;
};

BoundingBox mask_bounding_box(const RoiMask& mask);

// Bounding-box crop of the mask's set bits; pixels outside the mask are zeroed.
Image2D crop_to_roi(const Image2D& img, const RoiMask& mask);
RoiMask crop_mask(const RoiMask& mask);

// All patch x patch windows whose origins are multiples of stride, row-major.
std::vector<Image2D> extract_patches(const Image2D& img, std::size_t patch, std::size_t stride);

// Area-average downsample (aspect preserving) when larger than target, then
// zero-pad centered to exactly target x target.
Image2D resize_or_pad(const Image2D& img, std::size_t target);

}  // namespace rcrbm
