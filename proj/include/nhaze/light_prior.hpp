#pragma once

#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "nhaze/image.hpp"

namespace nhaze {

/// A light colour with red fixed to 1.
struct LightColorSample {
    float r = 1.0f;
    float g = 1.0f;
    float b = 1.0f;
};

/// Empirical prior over street-light colours: a line blue = slope*green +
/// intercept, a band of half-width `band_halfwidth` around it, and a
/// histogram of green values over [0,1].
struct LightPriorModel {
    double slope = 1.133;
    double intercept = -0.3616;
    double band_halfwidth = 0.08;
    std::vector<double> green_hist;

    /// The shipped model: the published regression line with a placeholder
    /// band (0.08) and a 32-bin truncated-normal green histogram (mean 0.75,
    /// sigma 0.12, support [0.4, 1]).
    static LightPriorModel default_model();

    double predict_blue(double green) const { return slope * green + intercept; }

    /// Throws std::invalid_argument unless the histogram is non-empty,
    /// non-negative and sums to 1, and the band half-width is positive.
    void validate() const;

    static LightPriorModel load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

/// Draws green from the histogram (uniform within the bin), then blue
/// uniformly from the band around the line intersected with [0,1].
LightColorSample sample_light_color(const LightPriorModel& model, std::mt19937_64& rng);

struct LightPriorFitOptions {
    int resize_to = 100;
    int min_scale = 11;
    int max_scale = 100;
    int scale_count = 10;
    int bins = 32;
    double coverage = 0.9868;
    int stride = 1;
};

/// Patch sizes used when fitting: `scale_count` log-spaced sizes between
/// min_scale and max_scale, rounded and de-duplicated.
std::vector<int> light_prior_scales(const LightPriorFitOptions& options);

/// Fits the prior from nighttime images. Every patch of every scale yields a
/// maximum-reflectance colour estimate normalised to red = 1; the line is
/// least-squares through the per-scale mean estimates and the band is the
/// smallest half-width covering `coverage` of all estimates.
LightPriorModel fit_light_prior(std::span<const ImageBuffer> corpus, const LightPriorFitOptions& options = {});

}  // namespace nhaze
