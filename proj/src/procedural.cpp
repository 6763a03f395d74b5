#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "nhaze/scene3r.hpp"

namespace nhaze {
namespace {

constexpr double kCameraHeight = 1.6;
constexpr double kRoadHalfWidth = 6.0;
constexpr double kFacadeX = 9.0;
constexpr double kFarWallZ = 200.0;
constexpr double kBlockLength = 15.0;
constexpr float kSpeckle = 0.08f;

using Rgb = std::array<float, 3>;

struct Block {
    double top;  // y of the roof line (negative: above the camera)
    Rgb wall;
    Rgb frame;
};

struct Car {
    double x;
    double z;
    Rgb body;
};

struct Hit {
    double z = std::numeric_limits<double>::infinity();
    int label = street_labels::kSky;
    Rgb color{0.70f, 0.80f, 0.95f};
};

// Stateless per-pixel grain so textures do not depend on traversal order.
float grain(std::uint64_t seed, int x, int y) {
    std::uint64_t h = seed * 0x9E3779B97F4A7C15ull ^ (static_cast<std::uint64_t>(y) << 32 | static_cast<std::uint32_t>(x));
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdull;
    h ^= h >> 33;
    h *= 0xc4ceb9fe1a85ec53ull;
    h ^= h >> 33;
    return static_cast<float>(h >> 40) / static_cast<float>(1ull << 24) - 0.5f;
}

// Window cell in facade coordinates (a along the wall, b up it): dark glass
// inside a light frame inside the wall.
enum class Facade { kWall, kFrame, kGlass };

Facade facade_at(double a, double b) {
    const double fa = a - std::floor(a), fb = b - std::floor(b);
    if (fa > 0.3 && fa < 0.7 && fb > 0.35 && fb < 0.75) return Facade::kGlass;
    if (fa > 0.22 && fa < 0.78 && fb > 0.27 && fb < 0.83) return Facade::kFrame;
    return Facade::kWall;
}

Rgb facade_color(Facade f, const Rgb& wall, const Rgb& frame) {
    switch (f) {
        case Facade::kGlass:
            return {0.06f, 0.07f, 0.09f};
        case Facade::kFrame:
            return frame;
        case Facade::kWall:
            break;
    }
    return wall;
}

}  // namespace

StreetScene make_street_scene(int width, int height, std::uint64_t seed) {
    if (width < 8 || height < 8) throw std::invalid_argument("procedural scene needs at least 8x8 pixels");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    static constexpr std::array<Rgb, 6> kWalls{{{0.62f, 0.55f, 0.48f},
                                                {0.48f, 0.50f, 0.55f},
                                                {0.70f, 0.66f, 0.58f},
                                                {0.55f, 0.38f, 0.32f},
                                                {0.80f, 0.78f, 0.74f},
                                                {0.40f, 0.45f, 0.42f}}};
    static constexpr std::array<Rgb, 3> kFrames{{{0.95f, 0.95f, 0.95f}, {0.90f, 0.92f, 0.96f}, {0.96f, 0.93f, 0.86f}}};
    static constexpr std::array<Rgb, 5> kBodies{{{0.75f, 0.10f, 0.10f},
                                                 {0.90f, 0.90f, 0.90f},
                                                 {0.15f, 0.20f, 0.45f},
                                                 {0.10f, 0.10f, 0.10f},
                                                 {0.80f, 0.70f, 0.20f}}};
    const int blocks = static_cast<int>(std::ceil(kFarWallZ / kBlockLength));
    auto make_block = [&] {
        return Block{-(6.0 + 14.0 * unit(rng)), kWalls[rng() % kWalls.size()], kFrames[rng() % kFrames.size()]};
    };
    std::vector<Block> left, right;
    for (int i = 0; i < blocks; ++i) left.push_back(make_block());
    for (int i = 0; i < blocks; ++i) right.push_back(make_block());
    const Block far = make_block();
    std::vector<Car> cars;
    const int car_count = 2 + static_cast<int>(rng() % 3);
    for (int i = 0; i < car_count; ++i) {
        const double lane = (rng() % 2 ? 1.0 : -1.0) * (1.2 + 2.8 * unit(rng));
        cars.push_back({lane, 8.0 + 50.0 * unit(rng), kBodies[rng() % kBodies.size()]});
    }
    std::sort(cars.begin(), cars.end(), [](const Car& a, const Car& b) { return a.z < b.z; });

    StreetScene scene;
    scene.camera = {1.1 * width, 1.1 * width, 0.5 * width, 0.5 * height};
    scene.reflectance = ImageBuffer(width, height, 3);
    scene.labels.width = scene.depth.width = width;
    scene.labels.height = scene.depth.height = height;
    scene.labels.labels.assign(static_cast<std::size_t>(width) * height, street_labels::kSky);
    scene.labels.class_config = {{street_labels::kRoad},
                                 {street_labels::kSky},
                                 {street_labels::kSidewalk, street_labels::kBuilding, street_labels::kCar}};
    scene.depth.meters.assign(scene.labels.labels.size(), 0.0f);
    scene.depth.sky_mask.assign(scene.labels.labels.size(), 1);

    const auto& K = scene.camera;
    for (int v = 0; v < height; ++v)
        for (int u = 0; u < width; ++u) {
            const double rx = (u - K.cx) / K.fx, ry = (v - K.cy) / K.fy;
            Hit hit;
            auto offer = [&](double z, int label, const Rgb& c) {
                if (z > 0.0 && z < hit.z) hit = {z, label, c};
            };

            if (ry > 0.0) {
                const double z = kCameraHeight / ry;
                const double x = rx * z;
                if (z < kFarWallZ && std::abs(x) < kFacadeX) {
                    if (std::abs(x) <= kRoadHalfWidth) {
                        const bool mark = std::abs(x) < 0.12 && std::fmod(z, 6.0) < 3.0;
                        const bool edge = std::abs(std::abs(x) - (kRoadHalfWidth - 0.2)) < 0.1;
                        const bool patch = std::fmod(std::abs(x) * 0.7 + z * 0.45, 2.3) < 0.35;
                        Rgb c = mark || edge ? Rgb{0.92f, 0.92f, 0.90f} : Rgb{0.42f, 0.42f, 0.43f};
                        if (patch && !mark && !edge) c = {0.08f, 0.08f, 0.09f};
                        offer(z, street_labels::kRoad, c);
                    } else {
                        const bool joint = std::fmod(z, 1.5) < 0.15 || std::fmod(std::abs(x), 1.5) < 0.15;
                        offer(z, street_labels::kSidewalk, joint ? Rgb{0.08f, 0.08f, 0.08f} : Rgb{0.72f, 0.70f, 0.66f});
                    }
                }
            }
            if (rx != 0.0) {
                const bool on_left = rx < 0.0;
                const double z = (on_left ? -kFacadeX : kFacadeX) / rx;
                if (z > 0.0 && z < kFarWallZ) {
                    const double y = ry * z;
                    const int idx = std::min(blocks - 1, static_cast<int>(z / kBlockLength));
                    const Block& b = on_left ? left[idx] : right[idx];
                    if (y <= kCameraHeight && y >= b.top)
                        offer(z, street_labels::kBuilding, facade_color(facade_at(z / 2.5, -y / 3.0), b.wall, b.frame));
                }
            }
            {
                const double z = kFarWallZ, x = rx * z, y = ry * z;
                if (std::abs(x) <= kFacadeX && y <= kCameraHeight && y >= far.top)
                    offer(z, street_labels::kBuilding, facade_color(facade_at(x / 2.5, -y / 3.0), far.wall, far.frame));
            }
            for (const Car& c : cars) {
                const double x = rx * c.z, y = ry * c.z;
                if (std::abs(x - c.x) > 0.9 || y > kCameraHeight || y < kCameraHeight - 1.5) continue;
                const double dx = std::abs(x - c.x);
                Rgb col = c.body;
                if (y < kCameraHeight - 0.95 && dx < 0.75) col = {0.07f, 0.08f, 0.10f};  // windscreen
                if (y > kCameraHeight - 0.3) col = {0.04f, 0.04f, 0.04f};                  // bumper, tyres
                if (y > kCameraHeight - 0.6 && y < kCameraHeight - 0.45 && dx < 0.25) col = {0.95f, 0.95f, 0.95f};
                offer(c.z, street_labels::kCar, col);
            }

            const std::size_t i = static_cast<std::size_t>(v) * width + u;
            Rgb c = hit.color;
            if (hit.label != street_labels::kSky) {
                // Sparse dark and bright speckles on 2x2 cells, so every
                // small patch holds both a near-black and a near-white sample.
                const float s = grain(seed ^ 0x5bd1e995ull, u / 2, v / 2) + 0.5f;
                if (s < kSpeckle)
                    for (float& ch : c) ch *= 0.03f;
                else if (s > 1.0f - kSpeckle)
                    for (float& ch : c) ch += 0.9f * (0.97f - ch);
            }
            const float g = 0.04f * grain(seed, u, v);
            for (int ch = 0; ch < 3; ++ch) scene.reflectance.at(ch, v, u) = std::clamp(c[ch] + g, 0.0f, 1.0f);
            scene.labels.labels[i] = hit.label;
            if (hit.label != street_labels::kSky) {
                scene.depth.meters[i] = static_cast<float>(hit.z);
                scene.depth.sky_mask[i] = 0;
            }
        }
    return scene;
}

}  // namespace nhaze
