#pragma once

#include <span>
#include <vector>

#include "nhaze/fastops.hpp"
#include "nhaze/image.hpp"
#include "nhaze/osmrp.hpp"

namespace nhaze {

struct DehazeParams {
    ScaleSet scales;
    int omega_t = 15;   ///< dark-channel window for t
    int omega_l = 15;   ///< max window for re-estimating L
    double t0 = 0.1;
    double eta_min = 0.1;
    double L_min = 0.05;
    double epsilon_tie = kDefaultTieEpsilon;
    GuidedFilterParams eta_filter{41, 1e-3, 4};  ///< guided by gray(I)
    GuidedFilterParams lt_filter{41, 1e-4, 4};   ///< guided by gray(I_corr)
    bool refine = true;  ///< false skips every guided-filter step

    void validate() const;
};

struct CastEstimate {
    ImageBuffer eta;  ///< max channel 1; white where L = 0
    ImageBuffer L;
};

/// Per-channel maxima at scale i; L is their channel maximum and eta the
/// maxima divided by L. The channel maxima may come from different pixels.
CastEstimate estimate_cast_scale(const ImageBuffer& I, const ScaleSet& scales, int i);

/// Arithmetic mean of the per-scale casts. Unrefined.
ImageBuffer fuse_cast_mean(std::span<const ImageBuffer> eta_stack);

/// eta(x) = eta_stack[s*(x)](x). Unrefined.
ImageBuffer fuse_cast_optimal(std::span<const ImageBuffer> eta_stack, const OptimalScaleMap& s_star);

/// I_c / max(eta_c, eta_min). Not clamped.
ImageBuffer correct_cast(const ImageBuffer& I, const ImageBuffer& eta, double eta_min);

/// Window maximum (side omega) of the channel maximum of I_corr. Unrefined.
ImageBuffer estimate_illuminance(const ImageBuffer& I_corr, int omega);

/// 1 - minwin(min_c I_corr) / minwin(L), clamped to [0,1]; 1 where the
/// window minimum of L is not positive. Unrefined.
ImageBuffer estimate_transmission(const ImageBuffer& I_corr, const ImageBuffer& L, int omega);

/// (I_corr - L) / max(t, t0) + L. Not clamped.
ImageBuffer recover_unclamped(const ImageBuffer& I_corr, const ImageBuffer& L, const ImageBuffer& t, double t0);

/// recover_unclamped clamped to [0,1].
ImageBuffer recover(const ImageBuffer& I_corr, const ImageBuffer& L, const ImageBuffer& t, double t0);

struct DehazeResult {
    ImageBuffer J;
    LatentMaps latents;  ///< final (second pass) L, eta, t
    OptimalScaleMap s_star;
    std::vector<ImageBuffer> eta_stack;  ///< per scale, unrefined
    ImageBuffer J_initial;               ///< first-pass output
    LatentMaps latents_initial;
};

/// Two passes. The first fuses the per-scale casts by their mean; the
/// second normalises the first result by its illuminance, picks each
/// pixel's optimal scale on that reflectance estimate, fuses the same cast
/// stack by selection, and restores the original input again.
DehazeResult osfd(const ImageBuffer& I, const DehazeParams& params = {});

}  // namespace nhaze
