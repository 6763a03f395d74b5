#pragma once

#include <span>
#include <vector>

#include "nhaze/image.hpp"

namespace nhaze {

enum class ExtremumMode { kMin, kMax };

/// Square window of odd side `size`, truncated at the image border.
struct WindowSpec {
    int size = 1;
    ExtremumMode mode = ExtremumMode::kMax;

    int radius() const { return size / 2; }
    void validate() const;
};

/// Windowed minimum or maximum of every channel, O(N) per channel
/// regardless of window size (van Herk / Gil-Werman block decomposition,
/// applied separably). Output is identical to the naive scan.
ImageBuffer window_extremum(const ImageBuffer& img, WindowSpec spec);

/// Half-open rectangle [y, y + height) x [x, x + width).
struct Rect {
    int y = 0;
    int x = 0;
    int height = 0;
    int width = 0;
};

/// (height+1) x (width+1) table of double-precision running sums; row and
/// column 0 are zero.
class SummedAreaTable {
public:
    SummedAreaTable(std::span<const float> plane, int width, int height);
    explicit SummedAreaTable(const ImageBuffer& single_channel);

    int width() const { return width_; }
    int height() const { return height_; }
    double entry(int y, int x) const { return table_[static_cast<std::size_t>(y) * (width_ + 1) + x]; }

    /// Sum over `rect`; throws std::out_of_range if it leaves the image.
    double box_sum(const Rect& rect) const;

private:
    int width_;
    int height_;
    std::vector<double> table_;
};

/// Mean over the (2r+1)^2 window clipped to the image, per channel.
ImageBuffer box_mean(const ImageBuffer& img, int radius);

struct GuidedFilterParams {
    int radius = 41;
    double eps = 1e-3;
    int subsample = 4;

    void validate() const;
};

/// Exact guided filter (single-channel guide, 1- or 3-channel source).
ImageBuffer guided_filter(const ImageBuffer& guide, const ImageBuffer& src, int radius, double eps);

/// Fast guided filter: coefficients are estimated on the pair subsampled by
/// `subsample` with radius radius/subsample, bilinearly upsampled, and applied
/// to the full-resolution guide. subsample == 1 gives the exact filter.
ImageBuffer guided_filter_fast(const ImageBuffer& guide, const ImageBuffer& src, const GuidedFilterParams& params);

enum class ResampleMode {
    kBilinearDown,  ///< area-weighted average
    kBilinearUp,
    kNearestUp,
};

/// Scales by 1/factor (down) or factor (up); output dims are rounded.
/// Throws if a target dimension would be < 1.
ImageBuffer resample(const ImageBuffer& img, double factor, ResampleMode mode);

/// Resizes to explicit dimensions. kBilinearDown may be used for any
/// shrinking resize; up modes map output pixel centres back to the source.
ImageBuffer resize(const ImageBuffer& img, int width, int height, ResampleMode mode);

}  // namespace nhaze
