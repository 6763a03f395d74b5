#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "nhaze/image.hpp"

namespace nhaze {

/// Returned by psnr for identical images.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 10 log10(1 / MSE) with the MSE taken over every sample of every channel.
double psnr(const ImageBuffer& a, const ImageBuffer& b);

/// Mean local SSIM of the BT.601 luma over all valid positions of an 11x11
/// Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, dynamic range 1.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

using Lab = std::array<double, 3>;

/// sRGB-encoded [0,1] triple to CIELAB under D65 with the 2 degree observer.
Lab srgb_to_lab(double r, double g, double b);

/// CIEDE2000 colour difference with kL = kC = kH = 1.
double delta_e2000(const Lab& x, const Lab& y);

/// Per-pixel CIEDE2000 of two RGB images, averaged over pixels.
double ciede2000(const ImageBuffer& a, const ImageBuffer& b);

struct MetricRow {
    std::string path;  // file name relative to the compared directories
    bool ok = false;
    std::string error;  // set when !ok
    double psnr = 0.0;
    double ssim = 0.0;
    double ciede2000 = 0.0;
};

/// Rows are sorted by path. The mean skips failed rows; it is NaN when no
/// row succeeded and +inf in PSNR when any row is identical.
struct MetricReport {
    std::vector<MetricRow> rows;
    MetricRow mean;
    int failed() const;
    void write_csv(std::ostream& out) const;
};

/// Compares every PNG in truth_dir against the same file name in pred_dir.
/// Missing, unreadable or mis-sized predictions fail their row only.
MetricReport evaluate_dir(const std::filesystem::path& pred_dir, const std::filesystem::path& truth_dir);

}  // namespace nhaze
