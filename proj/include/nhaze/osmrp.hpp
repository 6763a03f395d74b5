#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nhaze/image.hpp"

namespace nhaze {

/// Ascending odd window sizes. Scale i is evaluated on the image shrunk by
/// ratio(i) = radius(i) / radius(0) with the smallest window, which keeps
/// the per-scale cost proportional to the pixel count.
struct ScaleSet {
    std::vector<int> sizes{7, 11, 15, 19, 23, 27, 31, 35, 39, 43};
    bool downsample = true;  ///< false: every scale is a dense full-size window

    int count() const { return static_cast<int>(sizes.size()); }
    double ratio(int i) const;
    /// Throws unless non-empty, strictly increasing, odd and >= 3.
    void validate() const;
};

/// Per-channel windowed maximum of `img` at scale i of `scales`, at full
/// resolution (area downsample, max filter, nearest upsample).
ImageBuffer scale_max(const ImageBuffer& img, const ScaleSet& scales, int i);

/// M_s for every scale, made elementwise non-decreasing in s by a running
/// maximum over ascending scales.
std::vector<ImageBuffer> max_reflectance_stack(const ImageBuffer& rhat, const ScaleSet& scales);

/// P_s = product of the three channels of M_s, each clamped to [0,1].
std::vector<ImageBuffer> whiteness_probability(std::span<const ImageBuffer> stack);

struct OptimalScaleMap {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> index;  ///< into the scale set

    int at(int y, int x) const { return index[static_cast<std::size_t>(y) * width + x]; }
};

inline constexpr double kDefaultTieEpsilon = 1e-4;

/// s*(x): the smallest scale whose P is within `epsilon_tie` of max_s P_s(x).
OptimalScaleMap optimal_scale_map(std::span<const ImageBuffer> probabilities, double epsilon_tie = kDefaultTieEpsilon);

/// P evaluated at s* (one channel).
ImageBuffer probability_at(std::span<const ImageBuffer> probabilities, const OptimalScaleMap& s_star);

}  // namespace nhaze
