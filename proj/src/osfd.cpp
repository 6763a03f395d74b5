#include "nhaze/osfd.hpp"

#include <algorithm>
#include <stdexcept>

namespace nhaze {
namespace {

void require_rgb(const ImageBuffer& img, const char* what) {
    if (img.channels() != 3 || img.empty()) throw std::invalid_argument(std::string(what) + " must be a 3-channel image");
}

ImageBuffer refined(const ImageBuffer& guide, const ImageBuffer& src, const DehazeParams& p,
                    const GuidedFilterParams& gf) {
    return p.refine ? guided_filter_fast(guide, src, gf) : src;
}

struct Restored {
    ImageBuffer J;
    LatentMaps latents;
};

Restored restore(const ImageBuffer& I, const ImageBuffer& eta_raw, const ImageBuffer& gray_I, const DehazeParams& p) {
    Restored r;
    r.latents.eta = refined(gray_I, eta_raw, p, p.eta_filter);
    const auto I_corr = correct_cast(I, r.latents.eta, p.eta_min);
    const auto gray_corr = to_gray(I_corr);
    r.latents.L = refined(gray_corr, estimate_illuminance(I_corr, p.omega_l), p, p.lt_filter);
    for (float& v : r.latents.L.data()) v = std::max(v, 0.0f);
    r.latents.t = refined(gray_corr, estimate_transmission(I_corr, r.latents.L, p.omega_t), p, p.lt_filter);
    r.latents.t.clamp01();
    r.J = recover(I_corr, r.latents.L, r.latents.t, p.t0);
    return r;
}

}  // namespace

void DehazeParams::validate() const {
    scales.validate();
    if (omega_t < 1 || omega_t % 2 == 0) throw std::invalid_argument("omega_t must be odd and >= 1");
    if (omega_l < 1 || omega_l % 2 == 0) throw std::invalid_argument("omega_l must be odd and >= 1");
    if (!(t0 > 0.0 && t0 < 1.0)) throw std::invalid_argument("t0 must be in (0,1)");
    if (!(eta_min > 0.0 && eta_min < 1.0)) throw std::invalid_argument("eta_min must be in (0,1)");
    if (!(L_min > 0.0 && L_min < 1.0)) throw std::invalid_argument("L_min must be in (0,1)");
    if (!(epsilon_tie >= 0.0)) throw std::invalid_argument("epsilon_tie must be >= 0");
    eta_filter.validate();
    lt_filter.validate();
}

CastEstimate estimate_cast_scale(const ImageBuffer& I, const ScaleSet& scales, int i) {
    require_rgb(I, "hazy input");
    const auto M = scale_max(I, scales, i);
    CastEstimate est{ImageBuffer(I.width(), I.height(), 3, 1.0f), channel_max(M)};
    const auto L = est.L.plane(0);
    for (int c = 0; c < 3; ++c) {
        const auto m = M.plane(c);
        auto e = est.eta.plane(c);
        for (std::size_t k = 0; k < e.size(); ++k)
            if (L[k] > 0.0f) e[k] = m[k] / L[k];
    }
    return est;
}

ImageBuffer fuse_cast_mean(std::span<const ImageBuffer> eta_stack) {
    if (eta_stack.empty()) throw std::invalid_argument("cast stack is empty");
    const auto& first = eta_stack.front();
    std::vector<double> acc(first.data().size(), 0.0);
    for (const auto& e : eta_stack) {
        if (!e.same_shape(first)) throw std::invalid_argument("cast stack maps differ in shape");
        for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += e.data()[k];
    }
    ImageBuffer out(first.width(), first.height(), first.channels());
    for (std::size_t k = 0; k < acc.size(); ++k) out.data()[k] = static_cast<float>(acc[k] / eta_stack.size());
    return out;
}

ImageBuffer fuse_cast_optimal(std::span<const ImageBuffer> eta_stack, const OptimalScaleMap& s_star) {
    if (eta_stack.empty()) throw std::invalid_argument("cast stack is empty");
    const auto& first = eta_stack.front();
    if (s_star.width != first.width() || s_star.height != first.height())
        throw std::invalid_argument("optimal-scale map does not match the cast stack");
    ImageBuffer out(first.width(), first.height(), first.channels());
    const std::size_t n = first.pixel_count();
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t s = s_star.index[k];
        if (s >= eta_stack.size()) throw std::out_of_range("optimal-scale index outside the cast stack");
        for (int c = 0; c < first.channels(); ++c) out.plane(c)[k] = eta_stack[s].plane(c)[k];
    }
    return out;
}

ImageBuffer correct_cast(const ImageBuffer& I, const ImageBuffer& eta, double eta_min) {
    if (!I.same_shape(eta)) throw std::invalid_argument("cast map does not match the image");
    ImageBuffer out(I.width(), I.height(), I.channels());
    const float floor = static_cast<float>(eta_min);
    for (std::size_t k = 0; k < out.data().size(); ++k) out.data()[k] = I.data()[k] / std::max(eta.data()[k], floor);
    return out;
}

ImageBuffer estimate_illuminance(const ImageBuffer& I_corr, int omega) {
    return window_extremum(channel_max(I_corr), {omega, ExtremumMode::kMax});
}

ImageBuffer estimate_transmission(const ImageBuffer& I_corr, const ImageBuffer& L, int omega) {
    if (!I_corr.same_size(L) || L.channels() != 1) throw std::invalid_argument("illuminance does not match the image");
    const auto dark = window_extremum(channel_min(I_corr), {omega, ExtremumMode::kMin});
    const auto Lmin = window_extremum(L, {omega, ExtremumMode::kMin});
    ImageBuffer t(L.width(), L.height(), 1, 1.0f);
    const auto d = dark.plane(0), l = Lmin.plane(0);
    auto o = t.plane(0);
    for (std::size_t k = 0; k < o.size(); ++k)
        if (l[k] > 0.0f) o[k] = std::clamp(1.0f - d[k] / l[k], 0.0f, 1.0f);
    return t;
}

ImageBuffer recover_unclamped(const ImageBuffer& I_corr, const ImageBuffer& L, const ImageBuffer& t, double t0) {
    if (!I_corr.same_size(L) || !I_corr.same_size(t) || L.channels() != 1 || t.channels() != 1)
        throw std::invalid_argument("recover inputs differ in size");
    ImageBuffer J(I_corr.width(), I_corr.height(), I_corr.channels());
    const auto l = L.plane(0), tt = t.plane(0);
    const double floor = t0;
    for (int c = 0; c < I_corr.channels(); ++c) {
        const auto i = I_corr.plane(c);
        auto j = J.plane(c);
        for (std::size_t k = 0; k < j.size(); ++k)
            j[k] = static_cast<float>((static_cast<double>(i[k]) - l[k]) / std::max<double>(tt[k], floor) + l[k]);
    }
    return J;
}

ImageBuffer recover(const ImageBuffer& I_corr, const ImageBuffer& L, const ImageBuffer& t, double t0) {
    auto J = recover_unclamped(I_corr, L, t, t0);
    J.clamp01();
    return J;
}

DehazeResult osfd(const ImageBuffer& I, const DehazeParams& params) {
    params.validate();
    require_rgb(I, "hazy input");
    DehazeResult res;
    const auto gray_I = to_gray(I);

    res.eta_stack.reserve(params.scales.sizes.size());
    for (int i = 0; i < params.scales.count(); ++i)
        res.eta_stack.push_back(estimate_cast_scale(I, params.scales, i).eta);

    auto first = restore(I, fuse_cast_mean(res.eta_stack), gray_I, params);

    ImageBuffer rhat = first.J;
    const auto L1 = first.latents.L.plane(0);
    const float L_floor = static_cast<float>(params.L_min);
    for (int c = 0; c < 3; ++c) {
        auto p = rhat.plane(c);
        for (std::size_t k = 0; k < p.size(); ++k) p[k] /= std::max(L1[k], L_floor);
    }
    const auto probabilities = whiteness_probability(max_reflectance_stack(rhat, params.scales));
    res.s_star = optimal_scale_map(probabilities, params.epsilon_tie);

    auto second = restore(I, fuse_cast_optimal(res.eta_stack, res.s_star), gray_I, params);
    res.J = std::move(second.J);
    res.latents = std::move(second.latents);
    res.J_initial = std::move(first.J);
    res.latents_initial = std::move(first.latents);
    return res;
}

}  // namespace nhaze
