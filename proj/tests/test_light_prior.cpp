#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>

#include "nhaze/fastops.hpp"
#include "nhaze/light_prior.hpp"
#include "support/oracles.hpp"

using namespace nhaze;

namespace {

// Red fixed at `red`, green a random smooth field, blue on the given line.
ImageBuffer line_image(std::mt19937_64& rng, double slope, double intercept, float red = 1.0f) {
    std::uniform_int_distribution<int> cells(2, 12);
    const int k = cells(rng);
    const auto coarse = testing::random_image(k, k, 1, rng, 0.35f, 1.0f);
    const auto green = resize(coarse, 100, 100, ResampleMode::kBilinearUp);
    ImageBuffer img(100, 100, 3);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        const float g = green.plane(0)[i];
        img.plane(0)[i] = red;
        img.plane(1)[i] = g * red;
        img.plane(2)[i] = static_cast<float>((slope * g + intercept) * red);
    }
    return img;
}

}  // namespace

TEST_CASE("blue prediction follows the shipped regression line") {
    const auto m = LightPriorModel::default_model();
    CHECK(m.slope == 1.133);
    CHECK(m.intercept == -0.3616);
    CHECK(m.predict_blue(0.5) == doctest::Approx(0.2049).epsilon(1e-9));
    CHECK(m.predict_blue(0.8) == doctest::Approx(0.5448).epsilon(1e-9));
    CHECK(m.predict_blue(0.3616 / 1.133) == doctest::Approx(0.0).scale(1.0));
    CHECK_NOTHROW(m.validate());
    CHECK(m.green_hist.size() == 32);
    CHECK(std::accumulate(m.green_hist.begin(), m.green_hist.end(), 0.0) == doctest::Approx(1.0));
    // no mass below the 0.4 support edge
    for (int i = 0; i < 12; ++i) CHECK(m.green_hist[i] == 0.0);
}

TEST_CASE("degenerate histogram with a collapsed band reproduces the line") {
    LightPriorModel m = LightPriorModel::default_model();
    m.green_hist.assign(32, 0.0);
    // bin 25 covers [0.78125, 0.8125); restrict the check to the line itself
    m.green_hist[25] = 1.0;
    m.band_halfwidth = 1e-12;
    std::mt19937_64 rng(42);
    for (int i = 0; i < 100; ++i) {
        const auto s = sample_light_color(m, rng);
        CHECK(s.r == 1.0f);
        CHECK(s.g >= 0.78125f);
        CHECK(s.g <= 0.8125f);
        CHECK(s.b == doctest::Approx(1.133 * s.g - 0.3616).epsilon(1e-6));
    }
    // exactly the 0.8 sample of the line
    CHECK(m.predict_blue(0.8) == doctest::Approx(0.5448));
}

TEST_CASE("samples satisfy the band invariant and are seed-deterministic") {
    const auto m = LightPriorModel::default_model();
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100000; ++i) {
        const auto s = sample_light_color(m, rng);
        REQUIRE(s.r == 1.0f);
        REQUIRE(s.g >= 0.0f);
        REQUIRE(s.g <= 1.0f);
        REQUIRE(s.b >= 0.0f);
        REQUIRE(s.b <= 1.0f);
        REQUIRE(std::abs(s.b - m.predict_blue(s.g)) <= m.band_halfwidth + 1e-6);
    }
    std::mt19937_64 a(77), b(77);
    for (int i = 0; i < 10; ++i) {
        const auto x = sample_light_color(m, a);
        const auto y = sample_light_color(m, b);
        CHECK(x.g == y.g);
        CHECK(x.b == y.b);
    }
}

TEST_CASE("empirical mean blue matches the histogram expectation") {
    const auto m = LightPriorModel::default_model();
    // Expectation oracle: the line is linear within a bin, so the bin-centre
    // evaluation is exact while the band stays inside [0,1].
    double expected = 0.0;
    for (std::size_t i = 0; i < m.green_hist.size(); ++i) {
        const double g = (i + 0.5) / m.green_hist.size();
        expected += m.green_hist[i] * std::clamp(m.predict_blue(g), 0.0, 1.0);
    }
    std::mt19937_64 rng(2025);
    double sum = 0.0;
    for (int i = 0; i < 10000; ++i) sum += sample_light_color(m, rng).b;
    CHECK(std::abs(sum / 10000 - expected) <= 0.01);
}

TEST_CASE("sampling rejects an empty histogram") {
    LightPriorModel m = LightPriorModel::default_model();
    m.green_hist.clear();
    std::mt19937_64 rng(0);
    CHECK_THROWS_AS(sample_light_color(m, rng), std::invalid_argument);
    m.green_hist.assign(4, 0.0);
    CHECK_THROWS_AS(sample_light_color(m, rng), std::invalid_argument);
}

TEST_CASE("fit on white images falls back to a flat line") {
    std::vector<ImageBuffer> corpus(3, ImageBuffer(120, 90, 3, 1.0f));
    LightPriorFitOptions opt;
    opt.stride = 3;
    const auto m = fit_light_prior(corpus, opt);
    CHECK(m.slope == 0.0);
    CHECK(m.intercept == doctest::Approx(1.0));
    CHECK(m.band_halfwidth > 0.0);
    CHECK(m.green_hist.back() == doctest::Approx(1.0));
}

TEST_CASE("fit recovers a known line from a noiseless corpus") {
    std::mt19937_64 rng(19);
    std::vector<ImageBuffer> corpus;
    for (int i = 0; i < 6; ++i) corpus.push_back(line_image(rng, 0.9, -0.2, i % 2 ? 1.0f : 0.7f));
    LightPriorFitOptions opt;
    opt.stride = 2;
    const auto m = fit_light_prior(corpus, opt);
    CHECK(m.slope == doctest::Approx(0.9).epsilon(1e-3));
    CHECK(std::abs(m.intercept + 0.2) <= 1e-3);
    CHECK_NOTHROW(m.validate());
}

TEST_CASE("fit is order invariant and honours the coverage target") {
    std::mt19937_64 rng(5);
    std::vector<ImageBuffer> corpus;
    for (int i = 0; i < 5; ++i) {
        auto img = line_image(rng, 1.1, -0.3);
        std::normal_distribution<float> noise(0.0f, 0.05f);
        for (float& v : img.plane(2)) v = std::clamp(v + noise(rng), 0.0f, 1.0f);
        corpus.push_back(img);
    }
    LightPriorFitOptions opt;
    opt.stride = 4;
    const auto a = fit_light_prior(corpus, opt);
    std::reverse(corpus.begin(), corpus.end());
    std::swap(corpus[0], corpus[2]);
    const auto b = fit_light_prior(corpus, opt);
    CHECK(a.slope == b.slope);
    CHECK(a.intercept == b.intercept);
    CHECK(a.band_halfwidth == b.band_halfwidth);
    CHECK(a.green_hist == b.green_hist);

    // Coverage oracle: recompute every estimate by brute force.
    std::size_t inside = 0, total = 0;
    for (int size : light_prior_scales(opt))
        for (const auto& img : corpus)
            for (int y = 0; y + size <= 100; y += opt.stride)
                for (int x = 0; x + size <= 100; x += opt.stride) {
                    float mx[3] = {0, 0, 0};
                    for (int c = 0; c < 3; ++c)
                        for (int yy = y; yy < y + size; ++yy)
                            for (int xx = x; xx < x + size; ++xx) mx[c] = std::max(mx[c], img.at(c, yy, xx));
                    if (mx[0] <= 0) continue;
                    const double g = std::min(1.0, double(mx[1]) / mx[0]);
                    const double bl = std::min(1.0, double(mx[2]) / mx[0]);
                    inside += std::abs(bl - a.predict_blue(g)) <= a.band_halfwidth;
                    ++total;
                }
    CHECK(static_cast<double>(inside) / total >= 0.9868);
}

TEST_CASE("fit input errors") {
    std::vector<ImageBuffer> gray(1, ImageBuffer(100, 100, 1, 0.5f));
    CHECK_THROWS_AS(fit_light_prior(gray), std::invalid_argument);
    CHECK_THROWS_AS(fit_light_prior(std::vector<ImageBuffer>{}), std::invalid_argument);
}

TEST_CASE("model file roundtrip") {
    const auto path = std::filesystem::temp_directory_path() / "nhaze_prior.toml";
    const auto m = LightPriorModel::default_model();
    m.save(path);
    const auto back = LightPriorModel::load(path);
    CHECK(back.slope == m.slope);
    CHECK(back.intercept == m.intercept);
    CHECK(back.band_halfwidth == m.band_halfwidth);
    CHECK(back.green_hist == m.green_hist);
}

TEST_CASE("fit scales are log spaced from 11 to 100") {
    const auto s = light_prior_scales({});
    CHECK(s.size() == 10);
    CHECK(s.front() == 11);
    CHECK(s.back() == 100);
    CHECK(std::is_sorted(s.begin(), s.end()));
}
