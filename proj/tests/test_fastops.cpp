#include <doctest.h>

#include <random>

#include "nhaze/fastops.hpp"
#include "nhaze/parallel.hpp"
#include "support/oracles.hpp"

using namespace nhaze;

TEST_CASE("window extremum basics") {
    SUBCASE("constant image") {
        const ImageBuffer img(9, 7, 1, 0.3f);
        for (int s : {1, 3, 5, 15})
            for (auto mode : {ExtremumMode::kMin, ExtremumMode::kMax})
                CHECK(window_extremum(img, {s, mode}) == img);
    }
    SUBCASE("row example") {
        const ImageBuffer row(5, 1, 1, std::vector<float>{1, 3, 2, 5, 4});
        const auto out = window_extremum(row, {3, ExtremumMode::kMax});
        CHECK(out == testing::naive_window_extremum(row, 3, true));
        CHECK(out.data() == std::vector<float>{3, 3, 5, 5, 5});
    }
    SUBCASE("impulse dilates to a truncated block") {
        ImageBuffer img(10, 10, 1, 0.0f);
        img.at(0, 1, 8) = 1.0f;
        const auto out = window_extremum(img, {5, ExtremumMode::kMax});
        for (int y = 0; y < 10; ++y)
            for (int x = 0; x < 10; ++x) {
                const bool inside = y <= 3 && x >= 6;
                CHECK(out.at(0, y, x) == (inside ? 1.0f : 0.0f));
            }
    }
    SUBCASE("even window rejected") {
        CHECK_THROWS_AS(window_extremum(ImageBuffer(3, 3, 1), {4, ExtremumMode::kMax}), std::invalid_argument);
        CHECK_THROWS_AS(window_extremum(ImageBuffer(3, 3, 1), {0, ExtremumMode::kMax}), std::invalid_argument);
    }
}

TEST_CASE("window extremum matches the naive scan and is monotone in size") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> dim(1, 40);
    std::uniform_int_distribution<int> half(0, 12);
    for (int trial = 0; trial < 150; ++trial) {
        const auto img = testing::random_image(dim(rng), dim(rng), trial % 3 == 0 ? 3 : 1, rng);
        const int s = 2 * half(rng) + 1;
        const bool is_max = trial % 2 == 0;
        const auto mode = is_max ? ExtremumMode::kMax : ExtremumMode::kMin;
        const auto fast = window_extremum(img, {s, mode});
        REQUIRE(fast == testing::naive_window_extremum(img, s, is_max));
        const auto bigger = window_extremum(img, {s + 2, mode});
        for (std::size_t i = 0; i < fast.data().size(); ++i)
            CHECK((is_max ? bigger.data()[i] >= fast.data()[i] : bigger.data()[i] <= fast.data()[i]));
    }
}

TEST_CASE("summed-area table") {
    const ImageBuffer ones(2, 2, 1, 1.0f);
    const SummedAreaTable sat(ones);
    CHECK(sat.box_sum({0, 0, 2, 2}) == 4.0);
    CHECK(sat.entry(0, 1) == 0.0);
    CHECK(sat.entry(1, 0) == 0.0);
    CHECK_THROWS_AS(sat.box_sum({1, 1, 2, 1}), std::out_of_range);
    CHECK_THROWS_AS(sat.box_sum({-1, 0, 1, 1}), std::out_of_range);

    std::mt19937_64 rng(7);
    const auto img = testing::random_image(16, 16, 1, rng);
    const SummedAreaTable t(img);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) CHECK(t.box_sum({y, x, 1, 1}) == doctest::Approx(img.at(0, y, x)).epsilon(1e-12));
    std::uniform_int_distribution<int> u(0, 16);
    for (int k = 0; k < 500; ++k) {
        int y0 = u(rng), y1 = u(rng), x0 = u(rng), x1 = u(rng);
        if (y0 > y1) std::swap(y0, y1);
        if (x0 > x1) std::swap(x0, x1);
        CHECK(std::abs(t.box_sum({y0, x0, y1 - y0, x1 - x0}) - testing::naive_rect_sum(img, y0, x0, y1 - y0, x1 - x0)) <=
              1e-9);
    }
}

TEST_CASE("box mean divides by the truncated window") {
    std::mt19937_64 rng(8);
    const auto img = testing::random_image(13, 11, 1, rng);
    const auto fast = box_mean(img, 3);
    const auto ref = testing::naive_box_mean(std::vector<double>(img.data().begin(), img.data().end()), 13, 11, 3);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(fast.data()[i] == doctest::Approx(ref[i]).epsilon(1e-6));
    CHECK_THROWS_AS(box_mean(img, -1), std::invalid_argument);
}

TEST_CASE("guided filter") {
    SUBCASE("constant pair is preserved") {
        const ImageBuffer c(20, 16, 1, 0.42f);
        const auto out = guided_filter_fast(c, c, {4, 1e-3, 2});
        for (float v : out.data()) CHECK(v == doctest::Approx(0.42).epsilon(1e-6));
    }
    SUBCASE("flat guide with huge eps reduces to a box mean") {
        std::mt19937_64 rng(1);
        const ImageBuffer guide(24, 24, 1, 0.5f);
        const auto src = testing::random_image(24, 24, 1, rng);
        const auto out = guided_filter_fast(guide, src, {3, 1e6, 1});
        const auto mean = box_mean(src, 3);
        CHECK(testing::max_abs_diff(out, box_mean(mean, 3)) < 1e-6);
    }
    SUBCASE("subsample 1 equals the exact filter") {
        std::mt19937_64 rng(2);
        const auto guide = testing::random_image(37, 29, 1, rng);
        const auto src = testing::random_image(37, 29, 3, rng);
        const auto out = guided_filter_fast(guide, src, {5, 1e-3, 1});
        for (int c = 0; c < 3; ++c) {
            const auto ref = testing::naive_guided_filter(guide, src, c, 5, 1e-3);
            for (std::size_t i = 0; i < ref.size(); ++i) REQUIRE(std::abs(out.plane(c)[i] - ref[i]) < 1e-6);
        }
    }
    SUBCASE("fast variant approximates the exact filter") {
        // The subsampled window (2*round(r/d)+1)*d differs from 2r+1, so the
        // fast filter is an approximation: ~0.016-0.02 mean abs deviation at
        // r=8, d=4 on 64x64 inputs (cross-checked with an OpenCV/numpy port).
        std::mt19937_64 rng(3);
        const auto guide = resize(testing::random_image(8, 8, 1, rng), 64, 64, ResampleMode::kBilinearUp);
        const auto src = resize(testing::random_image(8, 8, 1, rng), 64, 64, ResampleMode::kBilinearUp);
        const auto exact = guided_filter_fast(guide, src, {8, 1e-3, 1});
        const auto d2 = guided_filter_fast(guide, src, {8, 1e-3, 2});
        const auto d4 = guided_filter_fast(guide, src, {8, 1e-3, 4});
        CHECK(testing::mean_abs_diff(d4, exact) <= 0.02);
        CHECK(testing::mean_abs_diff(d2, exact) < testing::mean_abs_diff(d4, exact));
        CHECK(testing::mean_abs_diff(d4, exact) < 0.25 * testing::mean_abs_diff(src, exact));
    }
    SUBCASE("argument errors") {
        const ImageBuffer g(8, 8, 1);
        CHECK_THROWS_AS(guided_filter_fast(g, g, {0, 1e-3, 1}), std::invalid_argument);
        CHECK_THROWS_AS(guided_filter_fast(g, g, {2, 0.0, 1}), std::invalid_argument);
        CHECK_THROWS_AS(guided_filter_fast(g, ImageBuffer(7, 8, 1), {2, 1e-3, 1}), std::invalid_argument);
    }
}

TEST_CASE("resampling") {
    std::mt19937_64 rng(4);
    const auto img = testing::random_image(12, 10, 3, rng);
    CHECK(resample(img, 1.0, ResampleMode::kBilinearDown) == img);

    const ImageBuffer checker(2, 2, 1, std::vector<float>{0, 1, 1, 0});
    const auto down = resample(checker, 2.0, ResampleMode::kBilinearDown);
    CHECK(down.width() == 1);
    CHECK(down.at(0, 0, 0) == doctest::Approx(0.5));

    const ImageBuffer flat(30, 18, 1, 0.37f);
    for (double f : {1.5, 2.0, 7.0 / 3.0}) {
        const auto d = resample(flat, f, ResampleMode::kBilinearDown);
        for (auto mode : {ResampleMode::kBilinearUp, ResampleMode::kNearestUp}) {
            const auto u = resize(d, 30, 18, mode);
            for (float v : u.data()) CHECK(v == doctest::Approx(0.37).epsilon(1e-6));
        }
    }
    // area weighting conserves the mean
    const auto d = resize(img, 4, 5, ResampleMode::kBilinearDown);
    double s0 = 0, s1 = 0;
    for (float v : img.plane(0)) s0 += v;
    for (float v : d.plane(0)) s1 += v;
    CHECK(s0 / 120.0 == doctest::Approx(s1 / 20.0).epsilon(1e-6));

    CHECK_THROWS_AS(resample(img, 0.5, ResampleMode::kBilinearDown), std::invalid_argument);
    CHECK_THROWS_AS(resample(ImageBuffer(2, 2, 1), 5.0, ResampleMode::kBilinearDown), std::invalid_argument);
}

TEST_CASE("kernels do not depend on the worker count") {
    std::mt19937_64 rng(9);
    const auto img = testing::random_image(57, 41, 3, rng);
    const auto guide = testing::random_image(57, 41, 1, rng);
    set_thread_count(1);
    const auto a = window_extremum(img, {9, ExtremumMode::kMin});
    const auto b = guided_filter_fast(guide, img, {6, 1e-3, 2});
    set_thread_count(4);
    const auto a4 = window_extremum(img, {9, ExtremumMode::kMin});
    const auto b4 = guided_filter_fast(guide, img, {6, 1e-3, 2});
    set_thread_count(1);
    CHECK(a == a4);
    CHECK(b == b4);
}
