#include "nhaze/image.hpp"

#include <algorithm>
#include <cmath>

namespace nhaze {

ImageBuffer::ImageBuffer(int width, int height, int channels, float fill)
    : width_(width), height_(height), channels_(channels) {
    if (width < 1 || height < 1) throw std::invalid_argument("image dimensions must be positive");
    if (channels != 1 && channels != 3) throw std::invalid_argument("image must have 1 or 3 channels");
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

ImageBuffer::ImageBuffer(int width, int height, int channels, std::vector<float> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    if (width < 1 || height < 1) throw std::invalid_argument("image dimensions must be positive");
    if (channels != 1 && channels != 3) throw std::invalid_argument("image must have 1 or 3 channels");
    if (data_.size() != static_cast<std::size_t>(width) * height * channels)
        throw std::invalid_argument("image data length does not match width*height*channels");
}

std::span<float> ImageBuffer::plane(int c) {
    return std::span<float>(data_).subspan(static_cast<std::size_t>(c) * pixel_count(), pixel_count());
}

std::span<const float> ImageBuffer::plane(int c) const {
    return std::span<const float>(data_).subspan(static_cast<std::size_t>(c) * pixel_count(), pixel_count());
}

ImageBuffer ImageBuffer::channel(int c) const {
    auto p = plane(c);
    return ImageBuffer(width_, height_, 1, std::vector<float>(p.begin(), p.end()));
}

void ImageBuffer::clamp01() {
    for (float& v : data_) v = std::clamp(v, 0.0f, 1.0f);
}

bool ImageBuffer::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

void DepthMap::validate() const {
    const auto n = static_cast<std::size_t>(width) * height;
    if (width < 1 || height < 1 || meters.size() != n || sky_mask.size() != n)
        throw std::invalid_argument("depth map has inconsistent dimensions");
    for (std::size_t i = 0; i < n; ++i) {
        if (sky_mask[i]) continue;
        if (!std::isfinite(meters[i]) || meters[i] <= 0.0f)
            throw std::invalid_argument("non-sky depth must be finite and positive");
    }
}

SemanticClass ClassConfig::classify(int id) const {
    if (std::find(road.begin(), road.end(), id) != road.end()) return SemanticClass::kRoad;
    if (std::find(sky.begin(), sky.end(), id) != sky.end()) return SemanticClass::kSky;
    return SemanticClass::kOther;
}

bool ClassConfig::contains(int id) const {
    auto has = [id](const std::vector<int>& v) { return std::find(v.begin(), v.end(), id) != v.end(); };
    return has(road) || has(sky) || has(other);
}

void SemanticMap::validate() const {
    if (width < 1 || height < 1 || labels.size() != static_cast<std::size_t>(width) * height)
        throw std::invalid_argument("semantic map has inconsistent dimensions");
    std::vector<int> seen;
    for (int id : labels) {
        if (std::find(seen.begin(), seen.end(), id) != seen.end()) continue;
        if (!class_config.contains(id))
            throw std::invalid_argument("label id " + std::to_string(id) + " missing from class map");
        seen.push_back(id);
    }
}

void CameraIntrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("focal lengths must be positive");
    if (!std::isfinite(cx) || !std::isfinite(cy)) throw std::invalid_argument("principal point must be finite");
}

void LatentMaps::validate_against(const ImageBuffer& reference) const {
    if (L.channels() != 1 || t.channels() != 1 || eta.channels() != 3)
        throw std::invalid_argument("latent maps need L:1, eta:3, t:1 channels");
    if (!L.same_size(reference) || !eta.same_size(reference) || !t.same_size(reference))
        throw std::invalid_argument("latent maps do not match the reference dimensions");
}

ImageBuffer apply_imaging_model(const ImageBuffer& reflectance, const LatentMaps& latents) {
    if (reflectance.channels() != 3) throw std::invalid_argument("reflectance must have 3 channels");
    latents.validate_against(reflectance);

    ImageBuffer out(reflectance.width(), reflectance.height(), 3);
    const auto L = latents.L.plane(0);
    const auto t = latents.t.plane(0);
    const std::size_t n = reflectance.pixel_count();
    for (int c = 0; c < 3; ++c) {
        const auto r = reflectance.plane(c);
        const auto eta = latents.eta.plane(c);
        auto o = out.plane(c);
        for (std::size_t i = 0; i < n; ++i) {
            const float light = L[i] * eta[i];
            o[i] = std::clamp(r[i] * light * t[i] + light * (1.0f - t[i]), 0.0f, 1.0f);
        }
    }
    return out;
}

ImageBuffer compose_nighttime_clear(const ImageBuffer& reflectance, const ImageBuffer& illuminance) {
    if (!reflectance.same_size(illuminance) || illuminance.channels() != 1)
        throw std::invalid_argument("reflectance and illuminance dimensions differ");
    ImageBuffer out(reflectance.width(), reflectance.height(), reflectance.channels());
    const auto L = illuminance.plane(0);
    for (int c = 0; c < reflectance.channels(); ++c) {
        const auto r = reflectance.plane(c);
        auto o = out.plane(c);
        for (std::size_t i = 0; i < o.size(); ++i) o[i] = r[i] * L[i];
    }
    return out;
}

ImageBuffer to_gray(const ImageBuffer& img) {
    if (img.channels() == 1) return img;
    ImageBuffer out(img.width(), img.height(), 1);
    const auto r = img.plane(0);
    const auto g = img.plane(1);
    const auto b = img.plane(2);
    auto o = out.plane(0);
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = 0.299f * r[i] + 0.587f * g[i] + 0.114f * b[i];
    return out;
}

ImageBuffer channel_max(const ImageBuffer& img) {
    ImageBuffer out = img.channel(0);
    auto o = out.plane(0);
    for (int c = 1; c < img.channels(); ++c) {
        const auto p = img.plane(c);
        for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::max(o[i], p[i]);
    }
    return out;
}

ImageBuffer channel_min(const ImageBuffer& img) {
    ImageBuffer out = img.channel(0);
    auto o = out.plane(0);
    for (int c = 1; c < img.channels(); ++c) {
        const auto p = img.plane(c);
        for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::min(o[i], p[i]);
    }
    return out;
}

}  // namespace nhaze
