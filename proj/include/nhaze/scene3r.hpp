#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nhaze/fastops.hpp"
#include "nhaze/image.hpp"
#include "nhaze/light_prior.hpp"

namespace nhaze {

/// Camera-frame vector in metres: x right, y down, z forward.
struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        const double n = norm();
        return n > 0.0 ? *this * (1.0 / n) : *this;
    }
    bool operator==(const Vec3&) const = default;
};

// ---- Reconstruct ---------------------------------------------------------

/// A 4-connected region of a single semantic label. `pixels` holds linear
/// indices y * width + x.
struct Superpixel {
    int id = 0;
    std::vector<int> pixels;
    int class_id = 0;
};

struct Segmentation {
    int width = 0;
    int height = 0;
    std::vector<int> assignment;  ///< superpixel id per pixel
    std::vector<Superpixel> superpixels;
};

/// SLIC-style clustering on pixel position where a label mismatch is an
/// infinite distance, followed by connectivity enforcement. Seeds are laid
/// on a regular grid of roughly `target_count` cells; connected label
/// regions that receive no seed get one of their own.
Segmentation segment_superpixels(const SemanticMap& labels, int target_count, int iterations = 10);

struct PointMap {
    int width = 0;
    int height = 0;
    std::vector<Vec3> points;
    std::vector<std::uint8_t> valid;  ///< 0 on sky pixels
};

/// x = ((u - cx) d / fx, (v - cy) d / fy, d) for every non-sky pixel.
PointMap backproject(const DepthMap& depth, const CameraIntrinsics& camera);

/// Plane v.x + m = 0 with |v| = 1 and v facing the camera (v . centroid <= 0).
struct PlaneFit {
    Vec3 normal{0.0, 0.0, -1.0};
    double offset = 0.0;
    bool degenerate = false;
};

/// Total least squares plane: v is the eigenvector of the centred covariance
/// with the smallest eigenvalue. Fewer than 3 points or collinear input fall
/// back to a normal pointing back at the camera and set `degenerate`.
PlaneFit fit_plane(std::span<const Vec3> points);

/// Per-pixel world points and normals inherited from the superpixel planes.
struct SceneGeometry {
    int width = 0;
    int height = 0;
    std::vector<Vec3> points;
    std::vector<Vec3> normals;
    std::vector<std::uint8_t> sky;
    Segmentation segmentation;
    std::vector<PlaneFit> planes;  ///< indexed by superpixel id

    bool is_sky(std::size_t i) const { return sky[i] != 0; }
};

/// Segment, backproject and fit one plane per superpixel. Pixels whose class
/// is sky or whose depth is invalid are masked.
SceneGeometry reconstruct_geometry(const SemanticMap& labels, const DepthMap& depth, const CameraIntrinsics& camera,
                                   int target_superpixels);

// ---- Rays ----------------------------------------------------------------

/// Isotropic point light.
struct LightSource {
    Vec3 position;
    LightColorSample color;
    double intensity = 1.0;  ///< beta_l
};

struct RoadsideLayout {
    double spacing = 30.0;  ///< metres between lamps along z
    double height = 5.0;    ///< metres above the road surface
};

struct LightPlacement {
    std::vector<LightSource> lights;
    std::string warning;  ///< non-empty when no lamp could be placed
};

/// For every `spacing`-metre slab along +z that contains road, lamps are
/// put above the leftmost and rightmost road points, raised by `height`
/// (y decreases). Colours come from the prior in placement order.
LightPlacement place_roadside_lights(const SemanticMap& labels, const DepthMap& depth, const CameraIntrinsics& camera,
                                     const RoadsideLayout& layout, double intensity, const LightPriorModel& prior,
                                     std::mt19937_64& rng);

struct IlluminanceMaps {
    ImageBuffer L;      ///< refined (or raw if refinement is disabled)
    ImageBuffer eta;    ///< colour cast, max channel 1
    ImageBuffer L_raw;  ///< before guided refinement
};

/// Inverse-square, Lambert-cosine illuminance summed over lights in list
/// order, plus `ambient` white light. Distances below `min_distance` are
/// clamped. L = max channel of the sum, eta = sum / L (white where L = 0).
/// Sky pixels receive the ambient term only.
IlluminanceMaps illuminance(std::span<const LightSource> lights, const SceneGeometry& geometry, const ImageBuffer& guide,
                            double ambient, const std::optional<GuidedFilterParams>& refine,
                            double min_distance = 0.5);

// ---- Render --------------------------------------------------------------

/// t = exp(-beta_t d); sky pixels use `sky_depth`.
ImageBuffer transmission_from_depth(const DepthMap& depth, double beta_t, double sky_depth = 300.0);

struct SynthParams {
    double beta_l = 30.0;
    double beta_t = 0.01;
    double ambient = 0.05;
    RoadsideLayout layout;
    int target_superpixels = 0;  ///< 0: 2000 per 2048x1024 pixels
    double sky_depth = 300.0;
    bool lights_enabled = true;
    bool refine_illuminance = true;
    GuidedFilterParams refine{41, 1e-3, 4};
    double min_light_distance = 0.5;
    std::uint64_t seed = 0;

    void validate() const;
    int superpixels_for(int width, int height) const;
};

struct SynthResult {
    ImageBuffer hazy;           ///< I
    ImageBuffer lowlight;       ///< R L
    ImageBuffer lowlight_cast;  ///< R L eta
    ImageBuffer dayhaze;        ///< R t + (1 - t)
    LatentMaps latents;
    ImageBuffer L_raw;
    std::vector<LightSource> lights;
    SceneGeometry geometry;
    std::string warning;
};

/// Runs the whole synthesis: reconstruct geometry, place lights and
/// simulate illuminance, compute transmission, and render with the imaging
/// model. Deterministic for a given `params.seed`.
SynthResult render_3r(const ImageBuffer& reflectance, const SemanticMap& labels, const DepthMap& depth,
                      const CameraIntrinsics& camera, const SynthParams& params, const LightPriorModel& prior);

// ---- Procedural scenes ---------------------------------------------------

/// A daytime street scene with analytic geometry: flat road, two facades,
/// a far wall, a few frontal boxes and sky. Used for tests, benchmarks and
/// the `synth --procedural` mode.
struct StreetScene {
    ImageBuffer reflectance;
    SemanticMap labels;
    DepthMap depth;
    CameraIntrinsics camera;
};

namespace street_labels {
inline constexpr int kRoad = 7;
inline constexpr int kSidewalk = 8;
inline constexpr int kBuilding = 11;
inline constexpr int kSky = 23;
inline constexpr int kCar = 26;
}  // namespace street_labels

StreetScene make_street_scene(int width, int height, std::uint64_t seed);

}  // namespace nhaze
