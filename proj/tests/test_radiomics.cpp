#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "rcrbm/error.hpp"
#include "rcrbm/radiomics.hpp"

using namespace rcrbm;

namespace {

double feature(const FeatureVector& f, const std::string& name) {
    const auto it = std::find(f.names.begin(), f.names.end(), name);
    REQUIRE(it != f.names.end());
    return f.values[static_cast<std::size_t>(it - f.names.begin())];
}

QuantizedImage codes_from(std::size_t w, std::size_t h, std::size_t levels, std::vector<int> codes) {
    return QuantizedImage{levels, Grid<int>(w, h, std::move(codes))};
}

Image2D random_image(Rng& rng, std::size_t w, std::size_t h) {
    Image2D img(w, h);
    for (auto& v : img.values()) v = rng.uniform();
    return img;
}

}  // namespace

TEST_CASE("quantize examples") {
    const auto c = quantize(Image2D(3, 3, 0.4), RoiMask(3, 3, 1), 32);
    for (int v : c.codes.values()) CHECK(v == 1);

    Image2D two(2, 1);
    two.at(0, 0) = 0.2;
    two.at(0, 1) = 0.9;
    const auto q2 = quantize(two, RoiMask(2, 1, 1), 2);
    CHECK(q2.codes.at(0, 0) == 1);
    CHECK(q2.codes.at(0, 1) == 2);

    Image2D ramp(8, 1);
    for (std::size_t i = 0; i < 8; ++i) ramp.at(0, i) = static_cast<double>(i) / 7.0;
    const auto q4 = quantize(ramp, RoiMask(8, 1, 1), 4);
    // Bin edges at 0.25, 0.5, 0.75: values 0, 1/7 | 2/7, 3/7 | 4/7, 5/7 | 6/7, 1.
    const std::vector<int> expect{1, 1, 2, 2, 3, 3, 4, 4};
    CHECK(q4.codes.vector() == expect);

    RoiMask partial(8, 1, 1);
    partial.at(0, 0) = 0;
    CHECK(quantize(ramp, partial, 4).codes.at(0, 0) == 0);

    CHECK_THROWS_AS(quantize(ramp, RoiMask(8, 1, 0), 4), Error);
    CHECK_THROWS_AS(quantize(ramp, RoiMask(8, 1, 1), 1), Error);
}

TEST_CASE("quantize is monotone and in range") {
    Rng rng(9);
    for (int t = 0; t < 50; ++t) {
        const auto img = random_image(rng, 6, 5);
        const auto q = quantize(img, RoiMask(6, 5, 1), 1 + 1 + rng.below(31));
        for (std::size_t i = 0; i < img.size(); ++i) {
            CHECK(q.codes.values()[i] >= 1);
            CHECK(q.codes.values()[i] <= static_cast<int>(q.levels));
            for (std::size_t j = 0; j < img.size(); ++j)
                if (img.values()[i] <= img.values()[j]) CHECK(q.codes.values()[i] <= q.codes.values()[j]);
        }
    }
}

TEST_CASE("first-order examples") {
    const auto c = first_order_features(Image2D(4, 4, 0.5), RoiMask(4, 4, 1));
    CHECK(c.size() == kFirstOrderCount);
    CHECK(feature(c, "mean") == 0.5);
    CHECK(feature(c, "variance") == 0.0);
    CHECK(feature(c, "skewness") == 0.0);
    CHECK(feature(c, "kurtosis") == 0.0);
    CHECK(feature(c, "range") == 0.0);
    CHECK(feature(c, "entropy") == 0.0);

    Image2D two(4, 1);
    two.at(0, 0) = two.at(0, 2) = 0.0;
    two.at(0, 1) = two.at(0, 3) = 1.0;
    const auto t = first_order_features(two, RoiMask(4, 1, 1));
    CHECK(feature(t, "mean") == 0.5);
    CHECK(feature(t, "variance") == 0.25);
    CHECK(feature(t, "skewness") == 0.0);
    CHECK(feature(t, "kurtosis") == doctest::Approx(-2.0));
    CHECK(feature(t, "entropy") == doctest::Approx(1.0));
    CHECK(feature(t, "mad") == 0.5);

    Image2D four(4, 1);
    for (std::size_t i = 0; i < 4; ++i) four.at(0, i) = static_cast<double>(i + 1);
    const auto f = first_order_features(four, RoiMask(4, 1, 1));
    CHECK(feature(f, "median") == 2.5);
    CHECK(feature(f, "minimum") == 1.0);
    CHECK(feature(f, "maximum") == 4.0);
    CHECK(feature(f, "p10") == 1.0);
    CHECK(feature(f, "p90") == 4.0);
    CHECK(feature(f, "energy") == 30.0);

    CHECK_THROWS_AS(first_order_features(four, RoiMask(4, 1, 0)), Error);
}

TEST_CASE("first-order features are invariant to permuting in-ROI pixels") {
    Rng rng(12);
    for (int t = 0; t < 20; ++t) {
        auto img = random_image(rng, 5, 5);
        RoiMask mask(5, 5, 0);
        for (auto& m : mask.values()) m = rng.bernoulli(0.6) ? 1 : 0;
        mask.at(0, 0) = 1;
        const auto before = first_order_features(img, mask);
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < 25; ++i)
            if (mask.values()[i]) idx.push_back(i);
        std::vector<double> vals;
        for (auto i : idx) vals.push_back(img.values()[i]);
        rng.shuffle(vals.begin(), vals.end());
        for (std::size_t k = 0; k < idx.size(); ++k) img.values()[idx[k]] = vals[k];
        const auto after = first_order_features(img, mask);
        for (std::size_t k = 0; k < before.size(); ++k)
            CHECK(after.values[k] == doctest::Approx(before.values[k]).epsilon(1e-12));
    }
}

TEST_CASE("shape examples") {
    RoiMask one(5, 5, 0);
    one.at(2, 2) = 1;
    const auto s1 = shape_features(one);
    CHECK(s1.size() == kShapeCount);
    CHECK(feature(s1, "area") == 1.0);
    CHECK(feature(s1, "perimeter") == 4.0);
    CHECK(feature(s1, "extent") == 1.0);

    for (std::size_t k : {2u, 3u, 6u}) {
        const auto sq = shape_features(RoiMask(k, k, 1));
        CHECK(feature(sq, "area") == static_cast<double>(k * k));
        CHECK(feature(sq, "perimeter") == static_cast<double>(4 * k));
        CHECK(feature(sq, "extent") == 1.0);
        CHECK(feature(sq, "eccentricity") == doctest::Approx(0.0));
    }

    // 10 x 2 rectangle: column variance (100-1)/12 + 1/12, row variance (4-1)/12 + 1/12.
    const auto rect = shape_features(RoiMask(10, 2, 1));
    const double lam1 = 100.0 / 12.0, lam2 = 4.0 / 12.0;
    CHECK(feature(rect, "major_axis") == doctest::Approx(4.0 * std::sqrt(lam1)));
    CHECK(feature(rect, "minor_axis") == doctest::Approx(4.0 * std::sqrt(lam2)));
    CHECK(feature(rect, "major_axis") > feature(rect, "minor_axis"));
    const double ecc = feature(rect, "eccentricity");
    CHECK(ecc > 0.0);
    CHECK(ecc < 1.0);
    CHECK(ecc == doctest::Approx(std::sqrt(1.0 - lam2 / lam1)));
    CHECK(feature(rect, "bbox_width") == 10.0);
    CHECK(feature(rect, "bbox_height") == 2.0);
    CHECK(feature(rect, "compactness") == doctest::Approx(4.0 * M_PI * 20.0 / (24.0 * 24.0)));

    CHECK_THROWS_AS(shape_features(RoiMask(3, 3, 0)), Error);
}

TEST_CASE("GLCM examples") {
    const auto flat = codes_from(2, 2, 2, {1, 1, 1, 1});
    const auto g = glcm_compute(flat, {0, 1});
    CHECK(g.at(0, 0) == 1.0);
    CHECK(g.at(0, 1) == 0.0);

    const auto checker = codes_from(4, 4, 2, {1, 2, 1, 2, 2, 1, 2, 1, 1, 2, 1, 2, 2, 1, 2, 1});
    const auto gc = glcm_compute(checker, {0, 1}, true);
    CHECK(gc.at(0, 1) == 0.5);
    CHECK(gc.at(1, 0) == 0.5);
    CHECK(gc.at(0, 0) == 0.0);

    const auto f = glcm_features(gc);
    CHECK(feature(f, "contrast") == doctest::Approx(1.0));
    CHECK(feature(f, "correlation") == doctest::Approx(-1.0));

    const auto single = glcm_features(g);
    CHECK(feature(single, "contrast") == 0.0);
    CHECK(feature(single, "homogeneity") == 1.0);
    CHECK(feature(single, "asm") == 1.0);
    CHECK(feature(single, "entropy") == 0.0);
    CHECK(feature(single, "correlation") == 0.0);

    Glcm uniform{2, {0, 1}, {0.25, 0.25, 0.25, 0.25}};
    const auto fu = glcm_features(uniform);
    CHECK(feature(fu, "entropy") == doctest::Approx(2.0));
    CHECK(feature(fu, "asm") == doctest::Approx(0.25));

    CHECK_THROWS_AS(glcm_compute(codes_from(1, 1, 2, {1}), {0, 1}), EmptyCooccurrence);
    CHECK_THROWS_AS(glcm_compute(flat, {0, 0}), Error);
}

TEST_CASE("GLCM normalization and symmetry on random inputs") {
    Rng rng(21);
    for (int t = 0; t < 40; ++t) {
        const auto img = random_image(rng, 6, 6);
        RoiMask mask(6, 6, 0);
        for (auto& m : mask.values()) m = rng.bernoulli(0.8) ? 1 : 0;
        mask.at(0, 0) = mask.at(0, 1) = mask.at(1, 0) = mask.at(1, 1) = 1;
        const auto q = quantize(img, mask, 6);
        for (const auto off : kTextureOffsets) {
            const auto g = glcm_compute(q, off, true);
            double total = 0;
            for (double p : g.p) {
                CHECK(p >= 0.0);
                total += p;
            }
            CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
            for (std::size_t i = 0; i < 6; ++i)
                for (std::size_t j = 0; j < 6; ++j) CHECK(g.at(i, j) == g.at(j, i));
        }
    }
}

TEST_CASE("GLRLM examples") {
    const auto row = codes_from(4, 1, 2, {1, 1, 1, 1});
    const auto r = glrlm_compute(row, {0, 1});
    CHECK(r.total_runs() == 1);
    CHECK(r.at(0, 3) == 1);
    CHECK(feature(glrlm_features(r), "rp") == 0.25);

    const auto two = glrlm_compute(codes_from(4, 1, 2, {1, 1, 2, 2}), {0, 1});
    CHECK(two.total_runs() == 2);
    CHECK(two.at(0, 1) == 1);
    CHECK(two.at(1, 1) == 1);
    const auto f = glrlm_features(two);
    // Two runs of length 2, one per level.
    CHECK(feature(f, "sre") == doctest::Approx(0.25));
    CHECK(feature(f, "lre") == doctest::Approx(4.0));
    CHECK(feature(f, "gln") == doctest::Approx(1.0));
    CHECK(feature(f, "rln") == doctest::Approx(2.0));
    CHECK(feature(f, "rp") == doctest::Approx(0.5));
    CHECK(feature(f, "lgre") == doctest::Approx((1.0 + 0.25) / 2.0));
    CHECK(feature(f, "hgre") == doctest::Approx((1.0 + 4.0) / 2.0));

    const auto diag = glrlm_compute(codes_from(3, 3, 2, std::vector<int>(9, 1)), {1, 1});
    CHECK(diag.total_runs() == 5);
    CHECK(diag.at(0, 0) == 2);
    CHECK(diag.at(0, 1) == 2);
    CHECK(diag.at(0, 2) == 1);

    const auto singles = glrlm_features(glrlm_compute(codes_from(4, 1, 2, {1, 2, 1, 2}), {0, 1}));
    CHECK(feature(singles, "sre") == 1.0);
    CHECK(feature(singles, "lre") == 1.0);
    CHECK(feature(singles, "rp") == 1.0);

    // An out-of-ROI pixel breaks a run.
    const auto broken = glrlm_compute(codes_from(5, 1, 2, {1, 1, 0, 1, 1}), {0, 1});
    CHECK(broken.total_runs() == 2);
    CHECK(broken.at(0, 1) == 2);

    CHECK_THROWS_AS(glrlm_compute(row, {0, 2}), Error);
    CHECK_THROWS_AS(glrlm_compute(codes_from(2, 1, 2, {0, 0}), {0, 1}), Error);
}

TEST_CASE("GLRLM conserves in-ROI pixels in every direction") {
    Rng rng(33);
    for (int t = 0; t < 40; ++t) {
        const auto img = random_image(rng, 7, 5);
        RoiMask mask(7, 5, 0);
        for (auto& m : mask.values()) m = rng.bernoulli(0.7) ? 1 : 0;
        mask.at(2, 3) = 1;
        const auto q = quantize(img, mask, 3);
        for (const auto d : kTextureOffsets) {
            const auto r = glrlm_compute(q, d);
            std::uint64_t pixels = 0;
            for (std::size_t g = 0; g < r.levels; ++g)
                for (std::size_t j = 0; j < r.max_run; ++j) pixels += r.at(g, j) * (j + 1);
            CHECK(pixels == count_set(mask));
        }
    }
}

TEST_CASE("texture features match the brute-force enumerators on the fixtures") {
    for (const auto& fx : oracle::texture_fixtures()) {
        const auto q = quantize(fx.image, fx.mask, fx.levels);
        for (const auto off : kTextureOffsets) {
            for (bool sym : {true, false}) {
                const auto brute = oracle::glcm_by_pairs(q, off, sym);
                const auto g = glcm_compute(q, off, sym);
                CHECK(g.p == brute);
                const auto expect = oracle::glcm_feature_values(brute, fx.levels);
                const auto got = glcm_features(g);
                for (std::size_t k = 0; k < expect.size(); ++k)
                    CHECK(got.values[k] == doctest::Approx(expect[k]).epsilon(1e-12));
            }
            const auto runs = oracle::runs_by_segments(q, off);
            const auto r = glrlm_compute(q, off);
            std::map<std::pair<int, std::size_t>, std::uint64_t> got_runs;
            for (std::size_t g = 0; g < r.levels; ++g)
                for (std::size_t j = 0; j < r.max_run; ++j)
                    if (r.at(g, j)) got_runs[{static_cast<int>(g + 1), j + 1}] = r.at(g, j);
            CHECK(got_runs == runs);
            const auto expect = oracle::glrlm_feature_values(runs, count_set(fx.mask));
            const auto got = glrlm_features(r);
            for (std::size_t k = 0; k < expect.size(); ++k)
                CHECK(got.values[k] == doctest::Approx(expect[k]).epsilon(1e-12));
        }
    }
}

TEST_CASE("Haar examples") {
    const auto c = wavelet_decompose(Image2D(4, 6, 0.3));
    for (double v : c.ll.values()) CHECK(v == doctest::Approx(0.6).epsilon(1e-15));
    for (const auto* band : {&c.lh, &c.hl, &c.hh})
        for (double v : band->values()) CHECK(v == 0.0);

    Image2D block(2, 2);
    const double a = 0.1, b = 0.7, cc = 0.4, d = 0.9;
    block.at(0, 0) = a, block.at(0, 1) = b, block.at(1, 0) = cc, block.at(1, 1) = d;
    const auto s = wavelet_decompose(block);
    CHECK(s.ll.at(0, 0) == doctest::Approx((a + b + cc + d) / 2));
    CHECK(s.lh.at(0, 0) == doctest::Approx((a + b - cc - d) / 2));
    CHECK(s.hl.at(0, 0) == doctest::Approx((a - b + cc - d) / 2));
    CHECK(s.hh.at(0, 0) == doctest::Approx((a - b - cc + d) / 2));
}

TEST_CASE("Haar reconstructs and conserves energy") {
    Rng rng(44);
    for (int t = 0; t < 50; ++t) {
        const auto img = random_image(rng, 1 + rng.below(12), 1 + rng.below(12));
        const auto padded = pad_to_even(img);
        const auto bands = wavelet_decompose(img);
        CHECK(bands.ll.width() == padded.width() / 2);
        const auto back = wavelet_reconstruct(bands);
        REQUIRE(back.width() == padded.width());
        double e_in = 0, e_out = 0;
        for (std::size_t i = 0; i < padded.size(); ++i) {
            CHECK(std::abs(back.values()[i] - padded.values()[i]) < 1e-10);
            e_in += padded.values()[i] * padded.values()[i];
        }
        for (const auto* band : {&bands.ll, &bands.lh, &bands.hl, &bands.hh})
            for (double v : band->values()) e_out += v * v;
        CHECK(std::abs(e_in - e_out) < 1e-9);
    }
}

TEST_CASE("extract_all catalog") {
    Rng rng(5);
    const auto img = random_image(rng, 16, 12);
    RoiMask mask(16, 12, 0);
    for (std::size_t r = 2; r < 10; ++r)
        for (std::size_t c = 3; c < 14; ++c) mask.at(r, c) = 1;
    const auto f = extract_all(img, mask);
    CHECK(f.size() == kRadiomicsFeatureCount);
    CHECK(f.size() == 374);
    CHECK(std::set<std::string>(f.names.begin(), f.names.end()).size() == f.size());
    CHECK(f.names.front() == "original_firstorder_mean");
    CHECK(extract_all(img, mask).values == f.values);

    // Shifting image and mask by an even amount keeps every in-ROI statistic.
    Image2D shifted(16, 12, 0.0);
    RoiMask smask(16, 12, 0);
    for (std::size_t r = 0; r + 2 < 12; ++r)
        for (std::size_t c = 0; c + 2 < 16; ++c) {
            shifted.at(r + 2, c + 2) = img.at(r, c);
            smask.at(r + 2, c + 2) = mask.at(r, c);
        }
    const auto g = extract_all(shifted, smask);
    REQUIRE(g.names == f.names);
    for (std::size_t k = 0; k < f.size(); ++k) {
        INFO(f.names[k]);
        CHECK(g.values[k] == doctest::Approx(f.values[k]).epsilon(1e-9));
    }
}

TEST_CASE("extract_all is finite on random inputs, including one-pixel ROIs") {
    Rng rng(8);
    for (int t = 0; t < 30; ++t) {
        const std::size_t w = 1 + rng.below(14), h = 1 + rng.below(14);
        const auto img = random_image(rng, w, h);
        RoiMask mask(w, h, 0);
        const double density = t % 3 == 0 ? 0.05 : 0.6;
        for (auto& m : mask.values()) m = rng.bernoulli(density) ? 1 : 0;
        mask.at(rng.below(h), rng.below(w)) = 1;
        const auto f = extract_all(img, mask);
        CHECK(f.size() == 374);
        for (double v : f.values) CHECK(std::isfinite(v));
    }
}
