#include "nhaze/osmrp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nhaze/fastops.hpp"
#include "nhaze/parallel.hpp"

namespace nhaze {

double ScaleSet::ratio(int i) const {
    if (!downsample) return 1.0;
    return static_cast<double>(sizes.at(i) / 2) / (sizes.front() / 2);
}

void ScaleSet::validate() const {
    if (sizes.empty()) throw std::invalid_argument("scale set is empty");
    if (sizes.size() > 255) throw std::invalid_argument("scale set has more than 255 sizes");
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (sizes[i] < 3 || sizes[i] % 2 == 0) throw std::invalid_argument("scale sizes must be odd and >= 3");
        if (i > 0 && sizes[i] <= sizes[i - 1]) throw std::invalid_argument("scale sizes must be strictly increasing");
    }
}

ImageBuffer scale_max(const ImageBuffer& img, const ScaleSet& scales, int i) {
    const double k = scales.ratio(i);
    if (k == 1.0) return window_extremum(img, {scales.sizes.at(i), ExtremumMode::kMax});
    const int sw = std::max(1, static_cast<int>(std::lround(img.width() / k)));
    const int sh = std::max(1, static_cast<int>(std::lround(img.height() / k)));
    const auto small = resize(img, sw, sh, ResampleMode::kBilinearDown);
    const auto m = window_extremum(small, {scales.sizes.front(), ExtremumMode::kMax});
    return resize(m, img.width(), img.height(), ResampleMode::kNearestUp);
}

std::vector<ImageBuffer> max_reflectance_stack(const ImageBuffer& rhat, const ScaleSet& scales) {
    scales.validate();
    if (rhat.channels() != 3) throw std::invalid_argument("max reflectance needs a 3-channel image");
    std::vector<ImageBuffer> stack;
    stack.reserve(scales.sizes.size());
    for (int i = 0; i < scales.count(); ++i) {
        stack.push_back(scale_max(rhat, scales, i));
        if (i == 0) continue;
        auto& cur = stack[i].data();
        const auto& prev = stack[i - 1].data();
        for (std::size_t j = 0; j < cur.size(); ++j) cur[j] = std::max(cur[j], prev[j]);
    }
    return stack;
}

std::vector<ImageBuffer> whiteness_probability(std::span<const ImageBuffer> stack) {
    std::vector<ImageBuffer> out;
    out.reserve(stack.size());
    for (const auto& m : stack) {
        if (m.channels() != 3) throw std::invalid_argument("whiteness probability needs 3-channel maxima");
        ImageBuffer p(m.width(), m.height(), 1);
        const auto r = m.plane(0), g = m.plane(1), b = m.plane(2);
        auto o = p.plane(0);
        for (std::size_t i = 0; i < o.size(); ++i)
            o[i] = std::clamp(r[i], 0.0f, 1.0f) * std::clamp(g[i], 0.0f, 1.0f) * std::clamp(b[i], 0.0f, 1.0f);
        out.push_back(std::move(p));
    }
    return out;
}

OptimalScaleMap optimal_scale_map(std::span<const ImageBuffer> probabilities, double epsilon_tie) {
    if (probabilities.empty()) throw std::invalid_argument("no whiteness probabilities");
    if (probabilities.size() > 255) throw std::invalid_argument("too many scales");
    const auto& first = probabilities.front();
    for (const auto& p : probabilities)
        if (!p.same_size(first) || p.channels() != 1) throw std::invalid_argument("probability maps differ in shape");

    OptimalScaleMap map{first.width(), first.height(), std::vector<std::uint8_t>(first.pixel_count(), 0)};
    const std::size_t S = probabilities.size();
    parallel_for(first.height(), [&](int y0, int y1) {
        const std::size_t begin = static_cast<std::size_t>(y0) * first.width();
        const std::size_t end = static_cast<std::size_t>(y1) * first.width();
        for (std::size_t i = begin; i < end; ++i) {
            float best = probabilities[0].plane(0)[i];
            for (std::size_t s = 1; s < S; ++s) best = std::max(best, probabilities[s].plane(0)[i]);
            std::size_t s = 0;
            while (probabilities[s].plane(0)[i] < best - epsilon_tie) ++s;
            map.index[i] = static_cast<std::uint8_t>(s);
        }
    });
    return map;
}

ImageBuffer probability_at(std::span<const ImageBuffer> probabilities, const OptimalScaleMap& s_star) {
    ImageBuffer out(s_star.width, s_star.height, 1);
    auto o = out.plane(0);
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = probabilities[s_star.index[i]].plane(0)[i];
    return out;
}

}  // namespace nhaze
