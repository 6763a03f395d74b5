#include <doctest.h>

#include <cmath>

#include "nhaze/osfd.hpp"
#include "nhaze/parallel.hpp"
#include "nhaze/scene3r.hpp"
#include "support/oracles.hpp"

using namespace nhaze;
using nhaze::testing::max_abs_diff;
using nhaze::testing::random_image;

namespace {

ImageBuffer rgb(int w, int h, float r, float g, float b) {
    ImageBuffer img(w, h, 3);
    const float v[3] = {r, g, b};
    for (int c = 0; c < 3; ++c)
        for (float& x : img.plane(c)) x = v[c];
    return img;
}

void set_px(ImageBuffer& img, int y, int x, float r, float g, float b) {
    img.at(0, y, x) = r;
    img.at(1, y, x) = g;
    img.at(2, y, x) = b;
}

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        const double d = std::clamp(a.data()[i], 0.0f, 1.0f) - std::clamp(b.data()[i], 0.0f, 1.0f);
        s += d * d;
    }
    return 10.0 * std::log10(a.data().size() / s);
}

// Random colours on 2x2 cells with black and white cells sprinkled in, so
// every 15x15 window satisfies both the dark-channel and max-reflectance
// assumptions.
ImageBuffer prior_friendly(int w, int h, std::mt19937_64& rng) {
    std::uniform_real_distribution<float> u(0.2f, 0.8f);
    std::uniform_int_distribution<int> kind(0, 9);
    ImageBuffer img(w, h, 3);
    for (int y = 0; y < h; y += 2)
        for (int x = 0; x < w; x += 2) {
            const int k = kind(rng);
            const float r = k == 0 ? 0.0f : k == 1 ? 1.0f : u(rng);
            const float g = k == 0 ? 0.0f : k == 1 ? 1.0f : u(rng);
            const float b = k == 0 ? 0.0f : k == 1 ? 1.0f : u(rng);
            for (int yy = y; yy < std::min(h, y + 2); ++yy)
                for (int xx = x; xx < std::min(w, x + 2); ++xx) set_px(img, yy, xx, r, g, b);
        }
    return img;
}

}  // namespace

TEST_CASE("cast of a constant image") {
    const auto img = rgb(30, 20, 0.6f, 0.48f, 0.36f);
    for (int s : {0, 4, 9}) {
        const auto est = estimate_cast_scale(img, {}, s);
        CHECK(est.L.at(0, 10, 10) == doctest::Approx(0.6f));
        CHECK(est.eta.at(0, 10, 10) == 1.0f);
        CHECK(est.eta.at(1, 10, 10) == doctest::Approx(0.8f));
        CHECK(est.eta.at(2, 10, 10) == doctest::Approx(0.6f));
    }
}

TEST_CASE("cast where the window holds a white pixel or split maxima") {
    auto img = rgb(21, 21, 0.05f, 0.02f, 0.01f);
    set_px(img, 10, 10, 0.9f, 0.9f, 0.9f);
    auto est = estimate_cast_scale(img, {}, 0);
    CHECK(est.L.at(0, 12, 12) == doctest::Approx(0.9f));
    for (int c = 0; c < 3; ++c) CHECK(est.eta.at(c, 12, 12) == 1.0f);

    img = rgb(21, 21, 0.05f, 0.02f, 0.01f);
    set_px(img, 9, 9, 0.8f, 0.0f, 0.0f);
    set_px(img, 10, 11, 0.0f, 0.64f, 0.0f);
    set_px(img, 11, 10, 0.0f, 0.0f, 0.48f);
    est = estimate_cast_scale(img, {}, 0);
    CHECK(est.L.at(0, 10, 10) == doctest::Approx(0.8f));
    CHECK(est.eta.at(1, 10, 10) == doctest::Approx(0.8f));
    CHECK(est.eta.at(2, 10, 10) == doctest::Approx(0.6f));
}

TEST_CASE("black input gives a white cast") {
    const auto est = estimate_cast_scale(ImageBuffer(16, 16, 3), {}, 3);
    for (float v : est.eta.data()) CHECK(v == 1.0f);
    for (float v : est.L.data()) CHECK(v == 0.0f);
}

TEST_CASE("every per-scale cast has max channel exactly 1") {
    std::mt19937_64 rng(8);
    const auto img = random_image(70, 50, 3, rng);
    const ScaleSet scales;
    for (int s = 0; s < scales.count(); ++s) {
        const auto m = channel_max(estimate_cast_scale(img, scales, s).eta);
        for (float v : m.data()) REQUIRE(v == 1.0f);
    }
}

TEST_CASE("cast estimation is invariant to power-of-two intensity scaling") {
    std::mt19937_64 rng(31);
    const auto img = random_image(67, 45, 3, rng);
    const ScaleSet scales;
    for (float c : {0.25f, 0.5f}) {
        ImageBuffer scaled = img;
        for (float& v : scaled.data()) v *= c;
        for (int s = 0; s < scales.count(); ++s) {
            const auto a = estimate_cast_scale(img, scales, s);
            const auto b = estimate_cast_scale(scaled, scales, s);
            CHECK(a.eta == b.eta);
            for (std::size_t i = 0; i < a.L.data().size(); ++i) REQUIRE(b.L.data()[i] == c * a.L.data()[i]);
        }
    }
}

TEST_CASE("mean cast fusion") {
    const auto a = rgb(4, 4, 1.0f, 0.8f, 0.6f);
    const auto b = rgb(4, 4, 1.0f, 0.6f, 0.4f);
    std::vector<ImageBuffer> same{a, a, a};
    CHECK(fuse_cast_mean(same) == a);
    std::vector<ImageBuffer> two{a, b};
    const auto m = fuse_cast_mean(two);
    CHECK(m.at(0, 1, 1) == 1.0f);
    CHECK(m.at(1, 1, 1) == doctest::Approx(0.7f));
    CHECK(m.at(2, 1, 1) == doctest::Approx(0.5f));
    CHECK(channel_max(m).at(0, 0, 0) <= 1.0f);
    CHECK_THROWS_AS(fuse_cast_mean(std::vector<ImageBuffer>{}), std::invalid_argument);
}

TEST_CASE("optimal cast fusion selects per pixel") {
    const auto a = rgb(6, 4, 1.0f, 0.8f, 0.6f);
    const auto b = rgb(6, 4, 0.5f, 1.0f, 0.3f);
    const std::vector<ImageBuffer> stack{a, b};
    OptimalScaleMap s{6, 4, std::vector<std::uint8_t>(24, 1)};
    CHECK(fuse_cast_optimal(stack, s) == b);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 3; ++x) s.index[y * 6 + x] = 0;
    const auto f = fuse_cast_optimal(stack, s);
    CHECK(f.at(1, 2, 2) == 0.8f);
    CHECK(f.at(1, 2, 3) == 1.0f);

    const std::vector<ImageBuffer> same{a, a};
    CHECK(fuse_cast_optimal(same, s) == a);

    s.index[5] = 2;
    CHECK_THROWS_AS(fuse_cast_optimal(stack, s), std::out_of_range);
    CHECK_THROWS_AS(fuse_cast_optimal(stack, OptimalScaleMap{5, 4, std::vector<std::uint8_t>(20, 0)}),
                    std::invalid_argument);
}

TEST_CASE("cast correction") {
    const auto I = rgb(2, 2, 0.5f, 0.4f, 0.3f);
    CHECK(correct_cast(I, rgb(2, 2, 1, 1, 1), 0.1) == I);
    const auto c = correct_cast(I, rgb(2, 2, 1.0f, 0.8f, 0.6f), 0.1);
    for (int ch = 0; ch < 3; ++ch) CHECK(c.at(ch, 0, 0) == doctest::Approx(0.5f));
    const auto f = correct_cast(I, rgb(2, 2, 1.0f, 1.0f, 0.05f), 0.1);
    CHECK(f.at(2, 1, 1) == doctest::Approx(3.0f));
}

TEST_CASE("illuminance re-estimation") {
    const auto flat = estimate_illuminance(rgb(20, 20, 0.3f, 0.7f, 0.2f), 15);
    for (float v : flat.data()) CHECK(v == 0.7f);

    std::mt19937_64 rng(4);
    const auto img = random_image(40, 30, 3, rng);
    const auto L = estimate_illuminance(img, 15);
    for (int y = 0; y < 30; ++y)
        for (int x = 0; x < 40; ++x)
            for (int yy = std::max(0, y - 7); yy <= std::min(29, y + 7); ++yy)
                for (int xx = std::max(0, x - 7); xx <= std::min(39, x + 7); ++xx)
                    for (int c = 0; c < 3; ++c) REQUIRE(L.at(0, y, x) >= img.at(c, yy, xx));

    // Airlight-only image: I = L_true gives its window maximum.
    const auto airlight = random_image(30, 30, 1, rng);
    ImageBuffer I(30, 30, 3);
    for (int c = 0; c < 3; ++c) std::copy(airlight.data().begin(), airlight.data().end(), I.plane(c).begin());
    CHECK(estimate_illuminance(I, 15) == window_extremum(airlight, {15, ExtremumMode::kMax}));
}

TEST_CASE("transmission by the dark channel") {
    auto I = rgb(15, 15, 0.5f, 0.5f, 0.5f);
    set_px(I, 7, 7, 0.0f, 0.4f, 0.4f);
    const ImageBuffer L(15, 15, 1, 0.8f);
    CHECK(estimate_transmission(I, L, 15).at(0, 7, 7) == 1.0f);

    const auto air = rgb(15, 15, 0.6f, 0.6f, 0.6f);
    const ImageBuffer L6(15, 15, 1, 0.6f);
    CHECK(estimate_transmission(air, L6, 15).at(0, 3, 3) == 0.0f);

    const auto half = rgb(15, 15, 0.3f, 0.5f, 0.4f);
    CHECK(estimate_transmission(half, L6, 15).at(0, 3, 3) == doctest::Approx(0.5f));

    ImageBuffer L0(15, 15, 1, 0.6f);
    L0.at(0, 7, 7) = 0.0f;
    const auto t = estimate_transmission(half, L0, 3);
    CHECK(t.at(0, 7, 7) == 1.0f);
    CHECK(t.at(0, 8, 8) == 1.0f);
    CHECK(t.at(0, 0, 0) == doctest::Approx(0.5f));
}

TEST_CASE("recovery") {
    const auto I = rgb(1, 1, 0.5f, 0.5f, 0.5f);
    const ImageBuffer L(1, 1, 1, 0.8f);
    CHECK(recover(I, L, ImageBuffer(1, 1, 1, 0.5f), 0.1).at(0, 0, 0) == doctest::Approx(0.2f));
    // t below the floor divides by t0.
    CHECK(recover_unclamped(I, L, ImageBuffer(1, 1, 1, 0.05f), 0.1).at(0, 0, 0) == doctest::Approx(-2.2f));
    CHECK(recover(I, L, ImageBuffer(1, 1, 1, 0.05f), 0.1).at(0, 0, 0) == 0.0f);
}

TEST_CASE("recovery inverts the corrected forward model") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<float> u(0.0f, 1.0f), ut(0.1f, 1.0f);
    for (int trial = 0; trial < 100; ++trial) {
        const int w = 8 + trial % 9, h = 5 + trial % 7;
        const auto J = random_image(w, h, 3, rng);
        ImageBuffer L(w, h, 1), t(w, h, 1);
        for (float& v : L.data()) v = u(rng);
        for (float& v : t.data()) v = ut(rng);
        ImageBuffer I(w, h, 3);
        for (int c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < I.pixel_count(); ++i) {
                const double tt = t.plane(0)[i], LL = L.plane(0)[i];
                I.plane(c)[i] = static_cast<float>(J.plane(c)[i] * tt + LL * (1.0 - tt));
            }
        CHECK(max_abs_diff(recover_unclamped(I, L, t, 0.1), J) <= 1e-6);
    }
}

TEST_CASE("dehaze parameters are validated") {
    DehazeParams p;
    CHECK_NOTHROW(p.validate());
    p.t0 = 1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = {};
    p.omega_t = 14;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = {};
    p.eta_min = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = {};
    p.L_min = 1.5;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    CHECK_THROWS_AS(osfd(ImageBuffer(8, 8, 1)), std::invalid_argument);
}

TEST_CASE("a clear white-balanced image is left nearly unchanged") {
    std::mt19937_64 rng(2024);
    const auto img = prior_friendly(96, 80, rng);
    const auto res = osfd(img);
    double t_min = 1.0;
    for (float v : res.latents.t.data()) t_min = std::min<double>(t_min, v);
    CHECK(t_min > 0.9);
    CHECK(max_abs_diff(res.J, img) <= 0.05);
}

TEST_CASE("osfd keeps its invariants") {
    const auto scene = make_street_scene(128, 96, 5);
    SynthParams sp;
    sp.seed = 3;
    const auto synth = render_3r(scene.reflectance, scene.labels, scene.depth, scene.camera, sp,
                                 LightPriorModel::default_model());
    const auto res = osfd(synth.hazy);

    REQUIRE(res.eta_stack.size() == 10);
    for (float v : res.J.data()) REQUIRE((v >= 0.0f && v <= 1.0f));
    for (float v : res.latents.t.data()) REQUIRE(v >= 0.0f);
    for (auto s : res.s_star.index) REQUIRE(s < 10);

    // Selection property of the unrefined optimal fusion.
    const auto picked = fuse_cast_optimal(res.eta_stack, res.s_star);
    for (std::size_t i = 0; i < picked.pixel_count(); ++i)
        for (int c = 0; c < 3; ++c) REQUIRE(picked.plane(c)[i] == res.eta_stack[res.s_star.index[i]].plane(c)[i]);

    CHECK(psnr(res.J, synth.lowlight) > psnr(synth.hazy, synth.lowlight));

    const auto again = osfd(synth.hazy);
    CHECK(again.J == res.J);
    CHECK(again.latents.t == res.latents.t);
    CHECK(again.s_star.index == res.s_star.index);
}

TEST_CASE("osfd output does not depend on the thread count") {
    std::mt19937_64 rng(6);
    const auto img = random_image(90, 70, 3, rng);
    set_thread_count(1);
    const auto one = osfd(img);
    set_thread_count(4);
    const auto four = osfd(img);
    set_thread_count(1);
    CHECK(one.J == four.J);
    CHECK(one.latents.eta == four.latents.eta);
    CHECK(one.s_star.index == four.s_star.index);
}
