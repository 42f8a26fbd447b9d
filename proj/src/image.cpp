#include "rcrbm/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "rcrbm/error.hpp"

namespace rcrbm {

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

std::size_t parse_header_number(std::istream& in, const std::filesystem::path& path, const char* what) {
    const auto tok = next_token(in);
    try {
        std::size_t pos = 0;
        const auto v = std::stoul(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw Error(path.string() + ": bad PGM " + what + " '" + tok + "'");
    }
}

}  // namespace

RawRaster read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    if (next_token(in) != "P5") throw Error(path.string() + ": not a binary PGM (P5)");
    RawRaster r;
    r.width = parse_header_number(in, path, "width");
    r.height = parse_header_number(in, path, "height");
    const auto maxval = parse_header_number(in, path, "maxval");
    if (r.width == 0 || r.height == 0) throw Error(path.string() + ": empty raster");
    if (maxval == 255) {
        r.bit_depth = 8;
    } else if (maxval == 65535) {
        r.bit_depth = 16;
    } else {
        throw Error(path.string() + ": unsupported maxval " + std::to_string(maxval));
    }
    const std::size_t n = r.width * r.height;
    const std::size_t bytes = n * (r.bit_depth / 8);
    std::vector<unsigned char> buf(bytes);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in.gcount()) != bytes) throw Error(path.string() + ": truncated pixel data");
    r.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        r.values[i] = r.bit_depth == 8 ? buf[i] : static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
    }
    return r;
}

void write_pgm(const std::filesystem::path& path, const RawRaster& raster) {
    if (raster.bit_depth != 8 && raster.bit_depth != 16) throw Error("bit depth must be 8 or 16");
    if (raster.values.size() != raster.width * raster.height) throw Error("raster size mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    const unsigned maxval = raster.bit_depth == 8 ? 255u : 65535u;
    out << "P5\n" << raster.width << ' ' << raster.height << '\n' << maxval << '\n';
    std::vector<unsigned char> buf;
    buf.reserve(raster.values.size() * (raster.bit_depth / 8));
    for (auto v : raster.values) {
        if (v > maxval) throw Error("raster value exceeds bit depth");
        if (raster.bit_depth == 16) buf.push_back(static_cast<unsigned char>(v >> 8));
        buf.push_back(static_cast<unsigned char>(v & 0xFF));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw Error("write failed: " + path.string());
}

Image2D normalize_image(const RawRaster& raw) {
    if (raw.bit_depth != 8 && raw.bit_depth != 16) throw Error("bit depth must be 8 or 16");
    if (raw.values.size() != raw.width * raw.height) throw Error("raster size mismatch");
    const double maxval = std::ldexp(1.0, static_cast<int>(raw.bit_depth)) - 1.0;
    std::vector<double> px(raw.values.size());
    for (std::size_t i = 0; i < px.size(); ++i) {
        if (raw.values[i] > maxval) {
            throw Error("raw value " + std::to_string(raw.values[i]) + " exceeds " +
                        std::to_string(raw.bit_depth) + "-bit range");
        }
        px[i] = raw.values[i] / maxval;
    }
    return Image2D(raw.width, raw.height, std::move(px));
}

RawRaster quantize_to_raster(const Image2D& img, unsigned bit_depth) {
    if (bit_depth != 8 && bit_depth != 16) throw Error("bit depth must be 8 or 16");
    const double maxval = std::ldexp(1.0, static_cast<int>(bit_depth)) - 1.0;
    RawRaster r{img.width(), img.height(), bit_depth, {}};
    r.values.reserve(img.size());
    for (double p : img.values()) {
        r.values.push_back(static_cast<std::uint16_t>(std::lround(std::clamp(p, 0.0, 1.0) * maxval)));
    }
    return r;
}

Image2D load_image(const std::filesystem::path& path) { return normalize_image(read_pgm(path)); }

RoiMask load_mask(const std::filesystem::path& path) {
    const auto raw = read_pgm(path);
    std::vector<std::uint8_t> bits(raw.values.size());
    std::transform(raw.values.begin(), raw.values.end(), bits.begin(), [](auto v) { return v > 0 ? 1 : 0; });
    return RoiMask(raw.width, raw.height, std::move(bits));
}

void save_image(const std::filesystem::path& path, const Image2D& img, unsigned bit_depth) {
    write_pgm(path, quantize_to_raster(img, bit_depth));
}

void save_mask(const std::filesystem::path& path, const RoiMask& mask) {
    RawRaster r{mask.width(), mask.height(), 8, {}};
    r.values.reserve(mask.size());
    for (auto b : mask.values()) r.values.push_back(b ? 255 : 0);
    write_pgm(path, r);
}

bool is_unit_range(const Image2D& img) {
    return std::all_of(img.values().begin(), img.values().end(), [](double p) { return p >= 0.0 && p <= 1.0; });
}

std::size_t count_set(const RoiMask& mask) {
    return static_cast<std::size_t>(std::count_if(mask.values().begin(), mask.values().end(), [](auto b) { return b != 0; }));
}

Image2D binarize(const Image2D& img, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw Error("binarize threshold must lie in (0,1)");
    Image2D out(img.width(), img.height());
    for (std::size_t i = 0; i < img.size(); ++i) out.values()[i] = img.values()[i] >= threshold ? 1.0 : 0.0;
    return out;
}

BoundingBox mask_bounding_box(const RoiMask& mask) {
    std::size_t r0 = mask.height(), r1 = 0, c0 = mask.width(), c1 = 0;
    bool any = false;
    for (std::size_t r = 0; r < mask.height(); ++r) {
        for (std::size_t c = 0; c < mask.width(); ++c) {
            if (!mask.at(r, c)) continue;
            any = true;
            r0 = std::min(r0, r);
            r1 = std::max(r1, r);
            c0 = std::min(c0, c);
            c1 = std::max(c1, c);
        }
    }
    if (!any) throw Error("ROI mask is empty");
    return {r0, c0, r1 - r0 + 1, c1 - c0 + 1};
}

Image2D crop_to_roi(const Image2D& img, const RoiMask& mask) {
    if (img.width() != mask.width() || img.height() != mask.height()) {
        throw Error("image and mask dimensions differ");
    }
    const auto box = mask_bounding_box(mask);
    Image2D out(box.cols, box.rows);
    for (std::size_t r = 0; r < box.rows; ++r) {
        for (std::size_t c = 0; c < box.cols; ++c) {
            const auto sr = box.row0 + r, sc = box.col0 + c;
            out.at(r, c) = mask.at(sr, sc) ? img.at(sr, sc) : 0.0;
        }
    }
    return out;
}

RoiMask crop_mask(const RoiMask& mask) {
    const auto box = mask_bounding_box(mask);
    RoiMask out(box.cols, box.rows);
    for (std::size_t r = 0; r < box.rows; ++r)
        for (std::size_t c = 0; c < box.cols; ++c) out.at(r, c) = mask.at(box.row0 + r, box.col0 + c) ? 1 : 0;
    return out;
}

std::vector<Image2D> extract_patches(const Image2D& img, std::size_t patch, std::size_t stride) {
    if (stride == 0) throw Error("patch stride must be >= 1");
    if (patch == 0 || patch > img.width() || patch > img.height()) {
        throw Error("patch size " + std::to_string(patch) + " does not fit a " + std::to_string(img.width()) + "x" +
                    std::to_string(img.height()) + " image");
    }
    std::vector<Image2D> out;
    for (std::size_t r0 = 0; r0 + patch <= img.height(); r0 += stride) {
        for (std::size_t c0 = 0; c0 + patch <= img.width(); c0 += stride) {
            Image2D p(patch, patch);
            for (std::size_t r = 0; r < patch; ++r)
                for (std::size_t c = 0; c < patch; ++c) p.at(r, c) = img.at(r0 + r, c0 + c);
            out.push_back(std::move(p));
        }
    }
    return out;
}

namespace {

// Overlap-weighted box filter from `in` extent to `out` extent along one axis.
// Returns, for each output index, the list of (input index, weight) pairs.
std::vector<std::vector<std::pair<std::size_t, double>>> area_weights(std::size_t in, std::size_t out) {
    std::vector<std::vector<std::pair<std::size_t, double>>> w(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
        const double lo = o * scale, hi = (o + 1) * scale;
        for (auto i = static_cast<std::size_t>(std::floor(lo)); i < in && static_cast<double>(i) < hi; ++i) {
            const double overlap = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
            if (overlap > 0) w[o].emplace_back(i, overlap / scale);
        }
    }
    return w;
}

}  // namespace

Image2D resize_or_pad(const Image2D& img, std::size_t target) {
    if (target == 0) throw Error("resize target must be >= 1");
    if (img.width() == target && img.height() == target) return img;

    Image2D src = img;
    if (img.width() > target || img.height() > target) {
        const double factor = static_cast<double>(std::max(img.width(), img.height())) / static_cast<double>(target);
        const auto nw = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(img.width() / factor)), 1, target);
        const auto nh = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(img.height() / factor)), 1, target);
        const auto wx = area_weights(img.width(), nw);
        const auto wy = area_weights(img.height(), nh);
        src = Image2D(nw, nh);
        for (std::size_t r = 0; r < nh; ++r) {
            for (std::size_t c = 0; c < nw; ++c) {
                double acc = 0.0;
                for (auto [ir, fr] : wy[r])
                    for (auto [ic, fc] : wx[c]) acc += fr * fc * img.at(ir, ic);
                src.at(r, c) = acc;
            }
        }
    }

    Image2D out(target, target);
    const std::size_t r0 = (target - src.height()) / 2, c0 = (target - src.width()) / 2;
    for (std::size_t r = 0; r < src.height(); ++r)
        for (std::size_t c = 0; c < src.width(); ++c) out.at(r0 + r, c0 + c) = src.at(r, c);
    return out;
}

}  // namespace rcrbm
