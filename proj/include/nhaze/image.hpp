#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nhaze {

/// Planar, row-major float image. Channel order is R,G,B for colour images.
///
/// Values are normalised sRGB-encoded samples in [0,1]; intermediates that
/// are documented as unclamped may leave that range but must stay finite.
class ImageBuffer {
public:
    ImageBuffer() = default;
    ImageBuffer(int width, int height, int channels, float fill = 0.0f);
    ImageBuffer(int width, int height, int channels, std::vector<float> data);

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
    bool empty() const { return data_.empty(); }

    float& at(int c, int y, int x) { return data_[index(c, y, x)]; }
    float at(int c, int y, int x) const { return data_[index(c, y, x)]; }

    std::span<float> plane(int c);
    std::span<const float> plane(int c) const;
    std::span<float> row(int c, int y) { return plane(c).subspan(static_cast<std::size_t>(y) * width_, width_); }
    std::span<const float> row(int c, int y) const {
        return plane(c).subspan(static_cast<std::size_t>(y) * width_, width_);
    }

    std::vector<float>& data() { return data_; }
    const std::vector<float>& data() const { return data_; }

    /// Copy of a single channel as a 1-channel image.
    ImageBuffer channel(int c) const;
    bool same_shape(const ImageBuffer& other) const {
        return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
    }
    bool same_size(const ImageBuffer& other) const {
        return width_ == other.width_ && height_ == other.height_;
    }

    void clamp01();
    bool all_finite() const;

    bool operator==(const ImageBuffer&) const = default;

private:
    std::size_t index(int c, int y, int x) const {
        return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<float> data_;
};

/// Per-pixel scene depth in metres. Sky (or otherwise invalid) pixels are
/// flagged in `sky_mask` and carry no meaningful depth.
struct DepthMap {
    int width = 0;
    int height = 0;
    std::vector<float> meters;
    std::vector<std::uint8_t> sky_mask;

    float depth(int y, int x) const { return meters[static_cast<std::size_t>(y) * width + x]; }
    bool is_sky(int y, int x) const { return sky_mask[static_cast<std::size_t>(y) * width + x] != 0; }
    void validate() const;
};

enum class SemanticClass { kOther, kRoad, kSky };

/// Maps raw label ids onto the three roles the synthesiser cares about.
/// Every id a label map uses must appear in one of the three lists.
struct ClassConfig {
    std::vector<int> road;
    std::vector<int> sky;
    std::vector<int> other;

    SemanticClass classify(int id) const;
    bool contains(int id) const;
};

struct SemanticMap {
    int width = 0;
    int height = 0;
    std::vector<int> labels;
    ClassConfig class_config;

    int label(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }
    SemanticClass class_at(int y, int x) const { return class_config.classify(label(y, x)); }
    /// Throws if a label id is missing from the class configuration.
    void validate() const;
};

struct CameraIntrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;

    void validate() const;
};

/// Latent maps of the nighttime imaging model: illuminance L (1 channel),
/// colour cast eta (3 channels) and transmission t (1 channel).
struct LatentMaps {
    ImageBuffer L;
    ImageBuffer eta;
    ImageBuffer t;

    void validate_against(const ImageBuffer& reference) const;
};

/// I_c = R_c L eta_c t + L eta_c (1 - t), clamped to [0,1].
ImageBuffer apply_imaging_model(const ImageBuffer& reflectance, const LatentMaps& latents);

/// J_c = R_c L. Not clamped.
ImageBuffer compose_nighttime_clear(const ImageBuffer& reflectance, const ImageBuffer& illuminance);

/// ITU-R BT.601 luma of a 3-channel image; 1-channel input is copied.
ImageBuffer to_gray(const ImageBuffer& img);

/// Per-pixel maximum / minimum over channels.
ImageBuffer channel_max(const ImageBuffer& img);
ImageBuffer channel_min(const ImageBuffer& img);

}  // namespace nhaze
