#include "nhaze/fastops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "nhaze/parallel.hpp"

namespace nhaze {
namespace {

template <bool IsMax>
inline float pick(float a, float b) {
    if constexpr (IsMax)
        return a > b ? a : b;
    else
        return a < b ? a : b;
}

template <bool IsMax>
constexpr float identity() {
    return IsMax ? -std::numeric_limits<float>::infinity() : std::numeric_limits<float>::infinity();
}

// Horizontal pass over rows [y0, y1). `g` and `h` are scratch of length
// width + 2r: prefix and suffix extrema within blocks of length 2r+1 over the
// identity-padded row.
template <bool IsMax>
void extremum_rows(std::span<const float> src, std::span<float> dst, int width, int y0, int y1, int r) {
    const int w = 2 * r + 1;
    const int m = width + 2 * r;
    std::vector<float> g(m), h(m);
    auto padded = [&](const float* row, int i) {
        const int x = i - r;
        return (x < 0 || x >= width) ? identity<IsMax>() : row[x];
    };
    for (int y = y0; y < y1; ++y) {
        const float* row = src.data() + static_cast<std::size_t>(y) * width;
        for (int i = 0; i < m; ++i) g[i] = (i % w == 0) ? padded(row, i) : pick<IsMax>(g[i - 1], padded(row, i));
        for (int i = m - 1; i >= 0; --i)
            h[i] = (i == m - 1 || (i + 1) % w == 0) ? padded(row, i) : pick<IsMax>(h[i + 1], padded(row, i));
        float* out = dst.data() + static_cast<std::size_t>(y) * width;
        for (int x = 0; x < width; ++x) out[x] = pick<IsMax>(h[x], g[x + 2 * r]);
    }
}

// Vertical pass over columns [x0, x1), streaming whole row segments so the
// inner loops stay contiguous.
template <bool IsMax>
void extremum_cols(std::span<const float> src, std::span<float> dst, int width, int height, int x0, int x1, int r) {
    const int w = 2 * r + 1;
    const int m = height + 2 * r;
    const int span_w = x1 - x0;
    std::vector<float> g(static_cast<std::size_t>(m) * span_w), h(static_cast<std::size_t>(m) * span_w);
    const std::vector<float> pad(span_w, identity<IsMax>());
    auto padded_row = [&](int i) -> const float* {
        const int y = i - r;
        return (y < 0 || y >= height) ? pad.data() : src.data() + static_cast<std::size_t>(y) * width + x0;
    };
    for (int i = 0; i < m; ++i) {
        const float* p = padded_row(i);
        float* gi = g.data() + static_cast<std::size_t>(i) * span_w;
        if (i % w == 0) {
            std::copy(p, p + span_w, gi);
        } else {
            const float* prev = gi - span_w;
            for (int x = 0; x < span_w; ++x) gi[x] = pick<IsMax>(prev[x], p[x]);
        }
    }
    for (int i = m - 1; i >= 0; --i) {
        const float* p = padded_row(i);
        float* hi = h.data() + static_cast<std::size_t>(i) * span_w;
        if (i == m - 1 || (i + 1) % w == 0) {
            std::copy(p, p + span_w, hi);
        } else {
            const float* next = hi + span_w;
            for (int x = 0; x < span_w; ++x) hi[x] = pick<IsMax>(next[x], p[x]);
        }
    }
    for (int y = 0; y < height; ++y) {
        const float* hy = h.data() + static_cast<std::size_t>(y) * span_w;
        const float* gy = g.data() + static_cast<std::size_t>(y + 2 * r) * span_w;
        float* out = dst.data() + static_cast<std::size_t>(y) * width + x0;
        for (int x = 0; x < span_w; ++x) out[x] = pick<IsMax>(hy[x], gy[x]);
    }
}

template <bool IsMax>
void extremum_plane(std::span<const float> src, std::span<float> dst, int width, int height, int r) {
    std::vector<float> tmp(src.size());
    parallel_for(height, [&](int y0, int y1) { extremum_rows<IsMax>(src, tmp, width, y0, y1, r); });
    parallel_for(width, [&](int x0, int x1) { extremum_cols<IsMax>(tmp, dst, width, height, x0, x1, r); });
}

// Double-precision box mean of one plane with clipped windows.
std::vector<double> box_mean_plane(const std::vector<double>& src, int width, int height, int r) {
    std::vector<double> sat(static_cast<std::size_t>(width + 1) * (height + 1), 0.0);
    const int stride = width + 1;
    for (int y = 0; y < height; ++y) {
        double run = 0.0;
        for (int x = 0; x < width; ++x) {
            run += src[static_cast<std::size_t>(y) * width + x];
            sat[static_cast<std::size_t>(y + 1) * stride + x + 1] = sat[static_cast<std::size_t>(y) * stride + x + 1] + run;
        }
    }
    std::vector<double> out(src.size());
    parallel_for(height, [&](int ya, int yb) {
        for (int y = ya; y < yb; ++y) {
            const int y0 = std::max(0, y - r), y1 = std::min(height, y + r + 1);
            for (int x = 0; x < width; ++x) {
                const int x0 = std::max(0, x - r), x1 = std::min(width, x + r + 1);
                const double s = sat[static_cast<std::size_t>(y1) * stride + x1] - sat[static_cast<std::size_t>(y0) * stride + x1] -
                                 sat[static_cast<std::size_t>(y1) * stride + x0] + sat[static_cast<std::size_t>(y0) * stride + x0];
                out[static_cast<std::size_t>(y) * width + x] = s / (static_cast<double>(y1 - y0) * (x1 - x0));
            }
        }
    });
    return out;
}

std::vector<double> to_double(std::span<const float> p) { return std::vector<double>(p.begin(), p.end()); }

// Guided filter coefficients (a, b), already box-averaged, for one source
// plane at the working resolution.
void guided_coefficients(const std::vector<double>& I, const std::vector<double>& p, int width, int height, int r,
                         double eps, const std::vector<double>& mean_I, const std::vector<double>& var_I,
                         std::vector<double>& mean_a, std::vector<double>& mean_b) {
    const std::size_t n = I.size();
    std::vector<double> Ip(n);
    for (std::size_t i = 0; i < n; ++i) Ip[i] = I[i] * p[i];
    const auto mean_p = box_mean_plane(p, width, height, r);
    const auto mean_Ip = box_mean_plane(Ip, width, height, r);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double cov = mean_Ip[i] - mean_I[i] * mean_p[i];
        a[i] = cov / (var_I[i] + eps);
        b[i] = mean_p[i] - a[i] * mean_I[i];
    }
    mean_a = box_mean_plane(a, width, height, r);
    mean_b = box_mean_plane(b, width, height, r);
}

struct AxisWeights {
    std::vector<int> begin;
    std::vector<std::vector<double>> w;
};

// Overlap of output cell [o*s, (o+1)*s) with each source pixel, s = in/out.
AxisWeights area_weights(int in, int out) {
    AxisWeights aw;
    aw.begin.resize(out);
    aw.w.resize(out);
    const double s = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
        const double lo = o * s, hi = (o + 1) * s;
        const int first = static_cast<int>(std::floor(lo));
        const int last = std::min(in - 1, static_cast<int>(std::ceil(hi)) - 1);
        aw.begin[o] = first;
        for (int i = first; i <= last; ++i) {
            const double ov = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
            aw.w[o].push_back(std::max(0.0, ov) / s);
        }
    }
    return aw;
}

ImageBuffer area_resize(const ImageBuffer& img, int width, int height) {
    const auto wx = area_weights(img.width(), width);
    const auto wy = area_weights(img.height(), height);
    ImageBuffer out(width, height, img.channels());
    for (int c = 0; c < img.channels(); ++c) {
        const auto src = img.plane(c);
        std::vector<double> tmp(static_cast<std::size_t>(img.height()) * width);
        for (int y = 0; y < img.height(); ++y) {
            const float* row = src.data() + static_cast<std::size_t>(y) * img.width();
            for (int x = 0; x < width; ++x) {
                double acc = 0.0;
                for (std::size_t k = 0; k < wx.w[x].size(); ++k) acc += wx.w[x][k] * row[wx.begin[x] + k];
                tmp[static_cast<std::size_t>(y) * width + x] = acc;
            }
        }
        auto dst = out.plane(c);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                double acc = 0.0;
                for (std::size_t k = 0; k < wy.w[y].size(); ++k)
                    acc += wy.w[y][k] * tmp[static_cast<std::size_t>(wy.begin[y] + k) * width + x];
                dst[static_cast<std::size_t>(y) * width + x] = static_cast<float>(acc);
            }
        }
    }
    return out;
}

std::vector<double> bilinear_up_plane(const std::vector<double>& src, int sw, int sh, int width, int height) {
    std::vector<int> x0(width), x1(width);
    std::vector<double> fx(width);
    for (int x = 0; x < width; ++x) {
        const double s = std::clamp((x + 0.5) * sw / width - 0.5, 0.0, static_cast<double>(sw - 1));
        x0[x] = static_cast<int>(std::floor(s));
        x1[x] = std::min(sw - 1, x0[x] + 1);
        fx[x] = s - x0[x];
    }
    std::vector<double> out(static_cast<std::size_t>(width) * height);
    for (int y = 0; y < height; ++y) {
        const double s = std::clamp((y + 0.5) * sh / height - 0.5, 0.0, static_cast<double>(sh - 1));
        const int y0 = static_cast<int>(std::floor(s));
        const int y1 = std::min(sh - 1, y0 + 1);
        const double fy = s - y0;
        const double* r0 = src.data() + static_cast<std::size_t>(y0) * sw;
        const double* r1 = src.data() + static_cast<std::size_t>(y1) * sw;
        for (int x = 0; x < width; ++x) {
            const double top = r0[x0[x]] + (r0[x1[x]] - r0[x0[x]]) * fx[x];
            const double bot = r1[x0[x]] + (r1[x1[x]] - r1[x0[x]]) * fx[x];
            out[static_cast<std::size_t>(y) * width + x] = top + (bot - top) * fy;
        }
    }
    return out;
}

}  // namespace

void WindowSpec::validate() const {
    if (size < 1 || size % 2 == 0) throw std::invalid_argument("window size must be odd and >= 1");
}

ImageBuffer window_extremum(const ImageBuffer& img, WindowSpec spec) {
    spec.validate();
    ImageBuffer out(img.width(), img.height(), img.channels());
    const int r = spec.radius();
    for (int c = 0; c < img.channels(); ++c) {
        if (r == 0) {
            std::copy(img.plane(c).begin(), img.plane(c).end(), out.plane(c).begin());
        } else if (spec.mode == ExtremumMode::kMax) {
            extremum_plane<true>(img.plane(c), out.plane(c), img.width(), img.height(), r);
        } else {
            extremum_plane<false>(img.plane(c), out.plane(c), img.width(), img.height(), r);
        }
    }
    return out;
}

SummedAreaTable::SummedAreaTable(std::span<const float> plane, int width, int height)
    : width_(width), height_(height), table_(static_cast<std::size_t>(width + 1) * (height + 1), 0.0) {
    if (plane.size() != static_cast<std::size_t>(width) * height)
        throw std::invalid_argument("plane size does not match dimensions");
    const int stride = width + 1;
    for (int y = 0; y < height; ++y) {
        double run = 0.0;
        for (int x = 0; x < width; ++x) {
            run += plane[static_cast<std::size_t>(y) * width + x];
            table_[static_cast<std::size_t>(y + 1) * stride + x + 1] = table_[static_cast<std::size_t>(y) * stride + x + 1] + run;
        }
    }
}

SummedAreaTable::SummedAreaTable(const ImageBuffer& single_channel)
    : SummedAreaTable(single_channel.plane(0), single_channel.width(), single_channel.height()) {
    if (single_channel.channels() != 1) throw std::invalid_argument("summed-area table needs a 1-channel image");
}

double SummedAreaTable::box_sum(const Rect& rect) const {
    if (rect.y < 0 || rect.x < 0 || rect.height < 0 || rect.width < 0 || rect.y + rect.height > height_ ||
        rect.x + rect.width > width_)
        throw std::out_of_range("rectangle outside the summed-area table");
    const int y1 = rect.y + rect.height, x1 = rect.x + rect.width;
    return entry(y1, x1) - entry(rect.y, x1) - entry(y1, rect.x) + entry(rect.y, rect.x);
}

ImageBuffer box_mean(const ImageBuffer& img, int radius) {
    if (radius < 0) throw std::invalid_argument("radius must be non-negative");
    ImageBuffer out(img.width(), img.height(), img.channels());
    for (int c = 0; c < img.channels(); ++c) {
        const auto mean = box_mean_plane(to_double(img.plane(c)), img.width(), img.height(), radius);
        auto dst = out.plane(c);
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>(mean[i]);
    }
    return out;
}

void GuidedFilterParams::validate() const {
    if (radius < 1) throw std::invalid_argument("guided filter radius must be >= 1");
    if (!(eps > 0.0)) throw std::invalid_argument("guided filter eps must be > 0");
    if (subsample < 1) throw std::invalid_argument("guided filter subsample must be >= 1");
}

ImageBuffer guided_filter(const ImageBuffer& guide, const ImageBuffer& src, int radius, double eps) {
    return guided_filter_fast(guide, src, GuidedFilterParams{radius, eps, 1});
}

ImageBuffer guided_filter_fast(const ImageBuffer& guide, const ImageBuffer& src, const GuidedFilterParams& params) {
    params.validate();
    if (guide.channels() != 1) throw std::invalid_argument("guide must be single-channel");
    if (!guide.same_size(src)) throw std::invalid_argument("guide and source dimensions differ");

    const int d = params.subsample;
    const int W = guide.width(), H = guide.height();
    const int sw = d == 1 ? W : std::max(1, static_cast<int>(std::lround(static_cast<double>(W) / d)));
    const int sh = d == 1 ? H : std::max(1, static_cast<int>(std::lround(static_cast<double>(H) / d)));
    const int r = d == 1 ? params.radius : std::max(1, static_cast<int>(std::lround(static_cast<double>(params.radius) / d)));

    const ImageBuffer guide_s = d == 1 ? guide : resize(guide, sw, sh, ResampleMode::kBilinearDown);
    const ImageBuffer src_s = d == 1 ? src : resize(src, sw, sh, ResampleMode::kBilinearDown);

    const auto I = to_double(guide_s.plane(0));
    const auto mean_I = box_mean_plane(I, sw, sh, r);
    std::vector<double> II(I.size());
    for (std::size_t i = 0; i < I.size(); ++i) II[i] = I[i] * I[i];
    const auto mean_II = box_mean_plane(II, sw, sh, r);
    std::vector<double> var_I(I.size());
    for (std::size_t i = 0; i < I.size(); ++i) var_I[i] = mean_II[i] - mean_I[i] * mean_I[i];

    ImageBuffer out(W, H, src.channels());
    const auto full_guide = guide.plane(0);
    for (int c = 0; c < src.channels(); ++c) {
        std::vector<double> mean_a, mean_b;
        guided_coefficients(I, to_double(src_s.plane(c)), sw, sh, r, params.eps, mean_I, var_I, mean_a, mean_b);
        if (d != 1) {
            mean_a = bilinear_up_plane(mean_a, sw, sh, W, H);
            mean_b = bilinear_up_plane(mean_b, sw, sh, W, H);
        }
        auto dst = out.plane(c);
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>(mean_a[i] * full_guide[i] + mean_b[i]);
    }
    return out;
}

ImageBuffer resample(const ImageBuffer& img, double factor, ResampleMode mode) {
    if (!(factor >= 1.0)) throw std::invalid_argument("resample factor must be >= 1");
    const double scale = mode == ResampleMode::kBilinearDown ? 1.0 / factor : factor;
    const long w = std::lround(img.width() * scale);
    const long h = std::lround(img.height() * scale);
    if (w < 1 || h < 1) throw std::invalid_argument("resampled dimensions would be < 1");
    return resize(img, static_cast<int>(w), static_cast<int>(h), mode);
}

ImageBuffer resize(const ImageBuffer& img, int width, int height, ResampleMode mode) {
    if (width < 1 || height < 1) throw std::invalid_argument("target dimensions must be >= 1");
    if (width == img.width() && height == img.height()) return img;
    switch (mode) {
        case ResampleMode::kBilinearDown:
            return area_resize(img, width, height);
        case ResampleMode::kBilinearUp: {
            ImageBuffer out(width, height, img.channels());
            for (int c = 0; c < img.channels(); ++c) {
                const auto up = bilinear_up_plane(to_double(img.plane(c)), img.width(), img.height(), width, height);
                auto dst = out.plane(c);
                for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>(up[i]);
            }
            return out;
        }
        case ResampleMode::kNearestUp: {
            std::vector<int> sx(width);
            for (int x = 0; x < width; ++x)
                sx[x] = std::min(img.width() - 1, static_cast<int>(std::floor((x + 0.5) * img.width() / width)));
            ImageBuffer out(width, height, img.channels());
            for (int c = 0; c < img.channels(); ++c) {
                for (int y = 0; y < height; ++y) {
                    const int sy = std::min(img.height() - 1, static_cast<int>(std::floor((y + 0.5) * img.height() / height)));
                    const auto srow = img.row(c, sy);
                    auto drow = out.row(c, y);
                    for (int x = 0; x < width; ++x) drow[x] = srow[sx[x]];
                }
            }
            return out;
        }
    }
    throw std::invalid_argument("unknown resample mode");
}

}  // namespace nhaze
