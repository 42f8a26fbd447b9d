#include "rcrbm/radiomics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>

namespace rcrbm {

namespace {

void require_same_shape(const Image2D& img, const RoiMask& mask) {
    if (img.width() != mask.width() || img.height() != mask.height()) {
        throw Error("image and mask dimensions differ");
    }
}

std::vector<double> roi_values(const Image2D& img, const RoiMask& mask) {
    require_same_shape(img, mask);
    std::vector<double> xs;
    for (std::size_t i = 0; i < img.size(); ++i)
        if (mask.values()[i]) xs.push_back(img.values()[i]);
    if (xs.empty()) throw Error("ROI mask is empty");
    return xs;
}

double plogp2(double p) { return p > 0 ? p * std::log2(p) : 0.0; }

constexpr std::array<const char*, kGlcmCount> kGlcmNames{
    "contrast", "dissimilarity", "homogeneity", "asm", "entropy", "correlation", "cluster_shade", "cluster_prominence"};

std::string offset_tag(Offset o) { return std::to_string(o.dr) + "_" + std::to_string(o.dc); }

}  // namespace

void FeatureVector::append(const std::string& prefix, const FeatureVector& other) {
    for (std::size_t i = 0; i < other.size(); ++i) push(prefix + other.names[i], other.values[i]);
}

bool QuantizedImage::in_roi(std::ptrdiff_t r, std::ptrdiff_t c) const {
    return r >= 0 && c >= 0 && r < static_cast<std::ptrdiff_t>(height()) && c < static_cast<std::ptrdiff_t>(width()) &&
           codes.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) > 0;
}

QuantizedImage quantize(const Image2D& img, const RoiMask& mask, std::size_t levels) {
    if (levels < 2) throw Error("quantization needs at least 2 levels");
    const auto xs = roi_values(img, mask);
    const auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
    const double lo = *lo_it, hi = *hi_it;
    QuantizedImage q{levels, Grid<int>(img.width(), img.height(), 0)};
    for (std::size_t i = 0; i < img.size(); ++i) {
        if (!mask.values()[i]) continue;
        int code = 1;
        if (hi > lo) {
            const double t = (img.values()[i] - lo) / (hi - lo);
            code = static_cast<int>(std::floor(t * static_cast<double>(levels))) + 1;
            code = std::clamp(code, 1, static_cast<int>(levels));
        }
        q.codes.values()[i] = code;
    }
    return q;
}

FeatureVector first_order_features(const Image2D& img, const RoiMask& mask) {
    auto xs = roi_values(img, mask);
    const auto n = static_cast<double>(xs.size());
    std::sort(xs.begin(), xs.end());
    const double lo = xs.front(), hi = xs.back();
    const bool constant = hi == lo;

    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double m2 = 0, m3 = 0, m4 = 0, mad = 0, energy = 0;
    for (double x : xs) {
        const double d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
        mad += std::abs(d);
        energy += x * x;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    mad /= n;
    const double variance = constant ? 0.0 : m2;
    const double skewness = constant || m2 == 0 ? 0.0 : m3 / std::pow(m2, 1.5);
    const double kurtosis = constant || m2 == 0 ? 0.0 : m4 / (m2 * m2) - 3.0;

    double entropy = 0.0;
    if (!constant) {
        std::array<double, 256> hist{};
        for (double x : xs) {
            auto b = static_cast<std::size_t>((x - lo) / (hi - lo) * 256.0);
            hist[std::min<std::size_t>(b, 255)] += 1.0;
        }
        for (double c : hist) entropy -= plogp2(c / n);
    }

    const std::size_t count = xs.size();
    const double median =
        count % 2 == 1 ? xs[count / 2] : 0.5 * (xs[count / 2 - 1] + xs[count / 2]);
    auto nearest_rank = [&](double pct) {
        auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * n));
        return xs[std::clamp<std::size_t>(rank, 1, count) - 1];
    };

    FeatureVector f;
    f.push("mean", mean);
    f.push("variance", variance);
    f.push("skewness", skewness);
    f.push("kurtosis", kurtosis);
    f.push("energy", energy);
    f.push("entropy", entropy);
    f.push("minimum", lo);
    f.push("maximum", hi);
    f.push("range", hi - lo);
    f.push("median", median);
    f.push("p10", nearest_rank(10));
    f.push("p90", nearest_rank(90));
    f.push("mad", constant ? 0.0 : mad);
    return f;
}

FeatureVector shape_features(const RoiMask& mask) {
    const auto box = mask_bounding_box(mask);
    const auto h = static_cast<std::ptrdiff_t>(mask.height()), w = static_cast<std::ptrdiff_t>(mask.width());
    auto set = [&](std::ptrdiff_t r, std::ptrdiff_t c) {
        return r >= 0 && c >= 0 && r < h && c < w && mask.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    };

    double area = 0, perimeter = 0, sr = 0, sc = 0;
    for (std::ptrdiff_t r = 0; r < h; ++r) {
        for (std::ptrdiff_t c = 0; c < w; ++c) {
            if (!set(r, c)) continue;
            area += 1;
            sr += static_cast<double>(r);
            sc += static_cast<double>(c);
            perimeter += !set(r - 1, c) + !set(r + 1, c) + !set(r, c - 1) + !set(r, c + 1);
        }
    }
    const double mr = sr / area, mc = sc / area;
    // Central second moments of the pixel squares (each contributes 1/12 of its own extent).
    double crr = 0, ccc = 0, crc = 0;
    for (std::ptrdiff_t r = 0; r < h; ++r) {
        for (std::ptrdiff_t c = 0; c < w; ++c) {
            if (!set(r, c)) continue;
            const double dr = static_cast<double>(r) - mr, dc = static_cast<double>(c) - mc;
            crr += dr * dr;
            ccc += dc * dc;
            crc += dr * dc;
        }
    }
    crr = crr / area + 1.0 / 12.0;
    ccc = ccc / area + 1.0 / 12.0;
    crc /= area;
    const double half_tr = 0.5 * (crr + ccc);
    const double disc = std::sqrt(0.25 * (crr - ccc) * (crr - ccc) + crc * crc);
    const double l1 = half_tr + disc, l2 = std::max(half_tr - disc, 0.0);

    FeatureVector f;
    f.push("area", area);
    f.push("perimeter", perimeter);
    f.push("compactness", 4.0 * std::numbers::pi * area / (perimeter * perimeter));
    f.push("bbox_width", static_cast<double>(box.cols));
    f.push("bbox_height", static_cast<double>(box.rows));
    f.push("extent", area / static_cast<double>(box.rows * box.cols));
    f.push("major_axis", 4.0 * std::sqrt(l1));
    f.push("minor_axis", 4.0 * std::sqrt(l2));
    f.push("eccentricity", std::sqrt(std::max(0.0, 1.0 - l2 / l1)));
    return f;
}

Glcm glcm_compute(const QuantizedImage& q, Offset offset, bool symmetric) {
    if (offset.dr == 0 && offset.dc == 0) throw Error("GLCM offset must be non-zero");
    const std::size_t L = q.levels;
    Glcm g{L, offset, std::vector<double>(L * L, 0.0)};
    double total = 0;
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(q.height()); ++r) {
        for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(q.width()); ++c) {
            if (!q.in_roi(r, c) || !q.in_roi(r + offset.dr, c + offset.dc)) continue;
            const auto i = static_cast<std::size_t>(q.codes.at(r, c) - 1);
            const auto j = static_cast<std::size_t>(q.codes.at(r + offset.dr, c + offset.dc) - 1);
            g.p[i * L + j] += 1;
            total += 1;
            if (symmetric) {
                g.p[j * L + i] += 1;
                total += 1;
            }
        }
    }
    if (total == 0) throw EmptyCooccurrence();
    for (auto& x : g.p) x /= total;
    return g;
}

FeatureVector glcm_features(const Glcm& g) {
    const std::size_t L = g.levels;
    double mu_i = 0, mu_j = 0;
    for (std::size_t i = 0; i < L; ++i) {
        for (std::size_t j = 0; j < L; ++j) {
            mu_i += static_cast<double>(i + 1) * g.at(i, j);
            mu_j += static_cast<double>(j + 1) * g.at(i, j);
        }
    }
    double var_i = 0, var_j = 0, cov = 0, contrast = 0, dissimilarity = 0, homogeneity = 0, asm_ = 0, entropy = 0,
           shade = 0, prominence = 0;
    for (std::size_t i = 0; i < L; ++i) {
        for (std::size_t j = 0; j < L; ++j) {
            const double p = g.at(i, j);
            if (p == 0) continue;
            const double a = static_cast<double>(i + 1), b = static_cast<double>(j + 1);
            const double d = a - b;
            var_i += (a - mu_i) * (a - mu_i) * p;
            var_j += (b - mu_j) * (b - mu_j) * p;
            cov += (a - mu_i) * (b - mu_j) * p;
            contrast += d * d * p;
            dissimilarity += std::abs(d) * p;
            homogeneity += p / (1.0 + d * d);
            asm_ += p * p;
            entropy -= plogp2(p);
            const double s = a + b - mu_i - mu_j;
            shade += s * s * s * p;
            prominence += s * s * s * s * p;
        }
    }
    const double correlation = var_i <= 1e-12 || var_j <= 1e-12 ? 0.0 : cov / std::sqrt(var_i * var_j);

    const std::array<double, kGlcmCount> values{contrast,    dissimilarity, homogeneity, asm_,
                                                entropy,     correlation,   shade,       prominence};
    FeatureVector f;
    for (std::size_t i = 0; i < kGlcmCount; ++i) f.push(kGlcmNames[i], values[i]);
    return f;
}

std::uint64_t Glrlm::total_runs() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

Glrlm glrlm_compute(const QuantizedImage& q, Offset direction) {
    if (std::find(kTextureOffsets.begin(), kTextureOffsets.end(), direction) == kTextureOffsets.end()) {
        throw Error("GLRLM direction must be one of (0,1), (1,0), (1,1), (1,-1)");
    }
    const std::size_t max_run = std::max(q.width(), q.height());
    Glrlm m{q.levels, max_run, direction, std::vector<std::uint64_t>(q.levels * max_run, 0)};
    const auto dr = direction.dr, dc = direction.dc;
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(q.height()); ++r) {
        for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(q.width()); ++c) {
            if (!q.in_roi(r, c)) continue;
            const int code = q.codes.at(r, c);
            // Only the first pixel of a maximal run starts a count.
            if (q.in_roi(r - dr, c - dc) && q.codes.at(r - dr, c - dc) == code) continue;
            std::ptrdiff_t len = 1;
            while (q.in_roi(r + len * dr, c + len * dc) && q.codes.at(r + len * dr, c + len * dc) == code) ++len;
            ++m.counts[static_cast<std::size_t>(code - 1) * max_run + static_cast<std::size_t>(len - 1)];
        }
    }
    if (m.total_runs() == 0) throw Error("GLRLM of an empty ROI");
    return m;
}

FeatureVector glrlm_features(const Glrlm& m) {
    const double runs = static_cast<double>(m.total_runs());
    if (runs == 0) throw Error("GLRLM has no runs");
    double sre = 0, lre = 0, pixels = 0, lgre = 0, hgre = 0, gln = 0, rln = 0;
    std::vector<double> per_length(m.max_run, 0.0);
    for (std::size_t i = 0; i < m.levels; ++i) {
        double per_level = 0;
        const double g = static_cast<double>(i + 1);
        for (std::size_t j = 0; j < m.max_run; ++j) {
            const double p = static_cast<double>(m.at(i, j));
            if (p == 0) continue;
            const double len = static_cast<double>(j + 1);
            sre += p / (len * len);
            lre += p * len * len;
            pixels += p * len;
            lgre += p / (g * g);
            hgre += p * g * g;
            per_level += p;
            per_length[j] += p;
        }
        gln += per_level * per_level;
    }
    for (double p : per_length) rln += p * p;

    FeatureVector f;
    f.push("sre", sre / runs);
    f.push("lre", lre / runs);
    f.push("gln", gln / runs);
    f.push("rln", rln / runs);
    f.push("rp", runs / pixels);
    f.push("lgre", lgre / runs);
    f.push("hgre", hgre / runs);
    return f;
}

Image2D pad_to_even(const Image2D& img) {
    const std::size_t w = img.width() + img.width() % 2, h = img.height() + img.height() % 2;
    if (w == img.width() && h == img.height()) return img;
    Image2D out(w, h);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c)
            out.at(r, c) = img.at(std::min(r, img.height() - 1), std::min(c, img.width() - 1));
    return out;
}

HaarSubbands wavelet_decompose(const Image2D& input) {
    if (input.empty()) throw Error("wavelet input is empty");
    const Image2D img = pad_to_even(input);
    const std::size_t hw = img.width() / 2, hh = img.height() / 2;
    HaarSubbands b{Image2D(hw, hh), Image2D(hw, hh), Image2D(hw, hh), Image2D(hw, hh)};
    for (std::size_t r = 0; r < hh; ++r) {
        for (std::size_t c = 0; c < hw; ++c) {
            const double a = img.at(2 * r, 2 * c), bb = img.at(2 * r, 2 * c + 1);
            const double cc = img.at(2 * r + 1, 2 * c), d = img.at(2 * r + 1, 2 * c + 1);
            b.ll.at(r, c) = 0.5 * (a + bb + cc + d);
            b.lh.at(r, c) = 0.5 * (a + bb - cc - d);
            b.hl.at(r, c) = 0.5 * (a - bb + cc - d);
            b.hh.at(r, c) = 0.5 * (a - bb - cc + d);
        }
    }
    return b;
}

Image2D wavelet_reconstruct(const HaarSubbands& b) {
    const std::size_t hw = b.ll.width(), hh = b.ll.height();
    for (const auto* band : {&b.lh, &b.hl, &b.hh}) {
        if (band->width() != hw || band->height() != hh) throw Error("wavelet subbands differ in shape");
    }
    Image2D out(2 * hw, 2 * hh);
    for (std::size_t r = 0; r < hh; ++r) {
        for (std::size_t c = 0; c < hw; ++c) {
            const double ll = b.ll.at(r, c), lh = b.lh.at(r, c), hl = b.hl.at(r, c), hhv = b.hh.at(r, c);
            out.at(2 * r, 2 * c) = 0.5 * (ll + lh + hl + hhv);
            out.at(2 * r, 2 * c + 1) = 0.5 * (ll + lh - hl - hhv);
            out.at(2 * r + 1, 2 * c) = 0.5 * (ll - lh + hl - hhv);
            out.at(2 * r + 1, 2 * c + 1) = 0.5 * (ll - lh - hl + hhv);
        }
    }
    return out;
}

RoiMask downsample_mask(const RoiMask& mask) {
    const std::size_t w = (mask.width() + 1) / 2, h = (mask.height() + 1) / 2;
    RoiMask out(w, h);
    for (std::size_t r = 0; r < mask.height(); ++r)
        for (std::size_t c = 0; c < mask.width(); ++c)
            if (mask.at(r, c)) out.at(r / 2, c / 2) = 1;
    return out;
}

namespace {

FeatureVector texture_features(const Image2D& img, const RoiMask& mask, const RadiomicsConfig& cfg) {
    const auto q = quantize(img, mask, cfg.levels);
    FeatureVector f;
    for (const auto off : kTextureOffsets) {
        FeatureVector g;
        try {
            g = glcm_features(glcm_compute(q, off, cfg.symmetric_glcm));
        } catch (const EmptyCooccurrence&) {
            for (const char* name : kGlcmNames) g.push(name, 0.0);
        }
        f.append("glcm_" + offset_tag(off) + "_", g);
    }
    for (const auto off : kTextureOffsets) {
        f.append("glrlm_" + offset_tag(off) + "_", glrlm_features(glrlm_compute(q, off)));
    }
    return f;
}

}  // namespace

FeatureVector extract_all(const Image2D& img, const RoiMask& mask, const RadiomicsConfig& cfg) {
    require_same_shape(img, mask);
    FeatureVector out;
    out.append("original_firstorder_", first_order_features(img, mask));
    out.append("original_shape_", shape_features(mask));
    out.append("original_", texture_features(img, mask, cfg));

    const auto bands = wavelet_decompose(img);
    const auto small_mask = downsample_mask(mask);
    const std::pair<const char*, const Image2D*> named[] = {
        {"wavelet-LL_", &bands.ll}, {"wavelet-LH_", &bands.lh}, {"wavelet-HL_", &bands.hl}, {"wavelet-HH_", &bands.hh}};
    for (const auto& [prefix, band] : named) {
        out.append(std::string(prefix) + "firstorder_", first_order_features(*band, small_mask));
        out.append(prefix, texture_features(*band, small_mask, cfg));
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!std::isfinite(out.values[i])) throw Error("radiomics feature " + out.names[i] + " is not finite");
    }
    return out;
}

}  // namespace rcrbm
