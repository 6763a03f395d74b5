#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <opencv2/imgcodecs.hpp>
#include <random>

#include "nhaze/image.hpp"
#include "nhaze/image_io.hpp"
#include "nhaze/kvconfig.hpp"
#include "support/oracles.hpp"

using namespace nhaze;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("nhaze_core_" + name);
    fs::create_directories(dir);
    return dir;
}

LatentMaps uniform_latents(int w, int h, float L, std::array<float, 3> eta, float t) {
    LatentMaps m{ImageBuffer(w, h, 1, L), ImageBuffer(w, h, 3), ImageBuffer(w, h, 1, t)};
    for (int c = 0; c < 3; ++c) std::fill(m.eta.plane(c).begin(), m.eta.plane(c).end(), eta[c]);
    return m;
}

}  // namespace

TEST_CASE("image buffer rejects inconsistent storage") {
    CHECK_THROWS_AS(ImageBuffer(2, 2, 3, std::vector<float>(11)), std::invalid_argument);
    CHECK_THROWS_AS(ImageBuffer(2, 2, 2), std::invalid_argument);
    CHECK_THROWS_AS(ImageBuffer(0, 2, 1), std::invalid_argument);
    ImageBuffer ok(3, 2, 3, 0.25f);
    CHECK(ok.data().size() == 18);
    CHECK(ok.all_finite());
}

TEST_CASE("imaging model evaluates the forward model") {
    SUBCASE("identity latents") {
        const ImageBuffer R(4, 3, 3, 1.0f);
        const auto I = apply_imaging_model(R, uniform_latents(4, 3, 1.0f, {1, 1, 1}, 1.0f));
        for (float v : I.data()) CHECK(v == doctest::Approx(1.0));
    }
    SUBCASE("t = 0 is pure airlight") {
        std::mt19937_64 rng(3);
        const auto R = testing::random_image(5, 5, 3, rng);
        const auto I = apply_imaging_model(R, uniform_latents(5, 5, 0.7f, {1.0f, 0.8f, 0.5f}, 0.0f));
        CHECK(I.at(0, 2, 2) == doctest::Approx(0.7));
        CHECK(I.at(1, 2, 2) == doctest::Approx(0.56));
        CHECK(I.at(2, 2, 2) == doctest::Approx(0.35));
    }
    SUBCASE("direct evaluation") {
        const ImageBuffer R(1, 1, 3, 0.5f);
        const auto I = apply_imaging_model(R, uniform_latents(1, 1, 0.8f, {1.0f, 0.9f, 0.6f}, 0.5f));
        CHECK(I.at(0, 0, 0) == doctest::Approx(0.6).epsilon(1e-6));
        CHECK(I.at(1, 0, 0) == doctest::Approx(0.54).epsilon(1e-6));
        CHECK(I.at(2, 0, 0) == doctest::Approx(0.36).epsilon(1e-6));
    }
    SUBCASE("dimension mismatch") {
        const ImageBuffer R(4, 4, 3);
        CHECK_THROWS_AS(apply_imaging_model(R, uniform_latents(4, 3, 1, {1, 1, 1}, 1)), std::invalid_argument);
        CHECK_THROWS_AS(apply_imaging_model(ImageBuffer(4, 4, 1), uniform_latents(4, 4, 1, {1, 1, 1}, 1)),
                        std::invalid_argument);
    }
}

TEST_CASE("imaging model is monotone in reflectance and bounded by L*eta") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (int trial = 0; trial < 50; ++trial) {
        const auto R = testing::random_image(8, 6, 3, rng);
        ImageBuffer R2 = R;
        for (float& v : R2.data()) v = std::min(1.0f, v + 0.3f * u(rng));
        LatentMaps lat{testing::random_image(8, 6, 1, rng), testing::random_image(8, 6, 3, rng, 0.1f, 1.0f),
                       testing::random_image(8, 6, 1, rng)};
        const auto I = apply_imaging_model(R, lat);
        const auto I2 = apply_imaging_model(R2, lat);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < 6; ++y)
                for (int x = 0; x < 8; ++x) {
                    CHECK(I.at(c, y, x) <= I2.at(c, y, x));
                    CHECK(I2.at(c, y, x) <= lat.L.at(0, y, x) * lat.eta.at(c, y, x) + 1e-6f);
                }
    }
}

TEST_CASE("nighttime clear image is reflectance times illuminance") {
    ImageBuffer R(1, 1, 3);
    R.at(0, 0, 0) = 1.0f;
    R.at(1, 0, 0) = 0.5f;
    R.at(2, 0, 0) = 0.25f;
    const auto J = compose_nighttime_clear(R, ImageBuffer(1, 1, 1, 0.4f));
    CHECK(J.at(0, 0, 0) == doctest::Approx(0.4));
    CHECK(J.at(1, 0, 0) == doctest::Approx(0.2));
    CHECK(J.at(2, 0, 0) == doctest::Approx(0.1));
    CHECK(compose_nighttime_clear(R, ImageBuffer(1, 1, 1, 1.0f)) == R);
    const auto dark = compose_nighttime_clear(R, ImageBuffer(1, 1, 1, 0.0f));
    for (float v : dark.data()) CHECK(v == 0.0f);
    CHECK_THROWS_AS(compose_nighttime_clear(R, ImageBuffer(2, 1, 1)), std::invalid_argument);
}

TEST_CASE("png codes are normalised by bit depth") {
    const auto dir = scratch_dir("png");
    cv::Mat m8(1, 2, CV_8UC1);
    m8.at<std::uint8_t>(0, 0) = 255;
    m8.at<std::uint8_t>(0, 1) = 0;
    cv::imwrite((dir / "a.png").string(), m8);
    const auto a = read_image(dir / "a.png");
    CHECK(a.channels() == 1);
    CHECK(a.at(0, 0, 0) == 1.0f);
    CHECK(a.at(0, 0, 1) == 0.0f);

    cv::Mat m16(1, 1, CV_16UC1);
    m16.at<std::uint16_t>(0, 0) = 32768;
    cv::imwrite((dir / "b.png").string(), m16);
    CHECK(read_image(dir / "b.png").at(0, 0, 0) == doctest::Approx(0.50000763).epsilon(1e-7));

    cv::Mat rgba(2, 2, CV_8UC4, cv::Scalar(1, 2, 3, 4));
    cv::imwrite((dir / "c.png").string(), rgba);
    CHECK_THROWS_AS(read_image(dir / "c.png"), std::runtime_error);
    CHECK_THROWS_AS(read_image(dir / "missing.png"), std::runtime_error);
}

TEST_CASE("png roundtrip stays within half a code step") {
    const auto dir = scratch_dir("roundtrip");
    std::mt19937_64 rng(5);
    for (int bits : {8, 16}) {
        const auto img = testing::random_image(17, 9, 3, rng);
        write_image(dir / "rt.png", img, bits);
        const auto back = read_image(dir / "rt.png");
        REQUIRE(back.same_shape(img));
        // colour channels must come back in R,G,B order
        CHECK(testing::max_abs_diff(back, img) <= 0.5 / ((1 << bits) - 1) + 1e-7);
    }
}

TEST_CASE("pfm depth is read in metres and rejects NaN") {
    const auto dir = scratch_dir("pfm");
    ImageBuffer d(3, 2, 1);
    d.at(0, 0, 0) = 1.5f;
    d.at(0, 1, 2) = 40.0f;
    d.at(0, 0, 1) = 0.0f;  // invalid -> sky
    write_pfm(dir / "d.pfm", d);
    const auto back = read_pfm(dir / "d.pfm");
    CHECK(back == d);
    const auto depth = read_depth(dir / "d.pfm");
    CHECK(depth.depth(0, 0) == 1.5f);
    CHECK(depth.depth(1, 2) == 40.0f);
    CHECK(depth.is_sky(0, 1));
    CHECK(read_depth(dir / "d.pfm", 2.0).depth(1, 2) == 80.0f);

    d.at(0, 1, 1) = std::nanf("");
    write_pfm(dir / "nan.pfm", d);
    CHECK_THROWS_AS(read_pfm(dir / "nan.pfm"), std::runtime_error);
}

TEST_CASE("depth png is millimetres") {
    const auto dir = scratch_dir("depthpng");
    cv::Mat m(1, 2, CV_16UC1);
    m.at<std::uint16_t>(0, 0) = 12500;
    m.at<std::uint16_t>(0, 1) = 0;
    cv::imwrite((dir / "d.png").string(), m);
    const auto d = read_depth(dir / "d.png");
    CHECK(d.depth(0, 0) == doctest::Approx(12.5));
    CHECK(d.is_sky(0, 1));
}

TEST_CASE("class map and camera files") {
    const auto dir = scratch_dir("cfg");
    {
        std::ofstream(dir / "class_map.toml") << "# cityscapes-like\nroad = [7, 8]\nsky = [23]\nother = [11, 26]\n";
        std::ofstream(dir / "camera.toml") << "fx = 500\nfy = 500.0\ncx = 128\ncy = 96.5\n";
        std::ofstream(dir / "bad.toml") << "road = [1]\nlane = [2]\n";
    }
    const auto cfg = load_class_config(dir / "class_map.toml");
    CHECK(cfg.classify(8) == SemanticClass::kRoad);
    CHECK(cfg.classify(23) == SemanticClass::kSky);
    CHECK(cfg.classify(26) == SemanticClass::kOther);
    CHECK_FALSE(cfg.contains(5));
    CHECK_THROWS(load_class_config(dir / "bad.toml"));

    const auto k = load_camera(dir / "camera.toml");
    CHECK(k.cy == 96.5);

    SemanticMap s{2, 1, {7, 5}, cfg};
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("key-value documents roundtrip") {
    auto kv = KeyValueFile::parse("a = 1.5\nname = \"x # y\" # note\n[osfd]\nscales = [7, 11]\nflag = true\n");
    CHECK(kv.number("a") == 1.5);
    CHECK(kv.string("name") == "x # y");
    CHECK(kv.numbers("osfd.scales") == std::vector<double>{7, 11});
    CHECK(kv.boolean("osfd.flag"));
    const auto again = KeyValueFile::parse(kv.serialize());
    CHECK(again.values() == kv.values());
    CHECK_THROWS(KeyValueFile::parse("a = 1\na = 2\n"));
    CHECK_THROWS(KeyValueFile::parse("a = oops\n"));
}
