#include "nhaze/light_prior.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "nhaze/fastops.hpp"
#include "nhaze/kvconfig.hpp"

namespace nhaze {
namespace {

constexpr int kDefaultBins = 32;

double normal_cdf(double x, double mean, double sigma) {
    return 0.5 * std::erfc(-(x - mean) / (sigma * std::sqrt(2.0)));
}

// Sliding maximum over `size` consecutive samples starting at each position
// (no padding): out has n - size + 1 entries.
std::vector<float> sliding_max(std::span<const float> v, int size) {
    const int n = static_cast<int>(v.size());
    std::vector<float> out(n - size + 1);
    for (int i = 0; i + size <= n; ++i) out[i] = *std::max_element(v.begin() + i, v.begin() + i + size);
    return out;
}

// Maxima of every size x size patch whose top-left corner is on the stride
// grid. Result is row-major over corner positions.
std::vector<float> patch_maxima(const ImageBuffer& img, int c, int size, int stride, int& nx, int& ny) {
    const int W = img.width(), H = img.height();
    const int cols = W - size + 1;
    std::vector<float> horiz(static_cast<std::size_t>(H) * cols);
    for (int y = 0; y < H; ++y) {
        const auto m = sliding_max(img.row(c, y), size);
        std::copy(m.begin(), m.end(), horiz.begin() + static_cast<std::ptrdiff_t>(y) * cols);
    }
    nx = (cols - 1) / stride + 1;
    ny = (H - size) / stride + 1;
    std::vector<float> out(static_cast<std::size_t>(nx) * ny);
    std::vector<float> column(H);
    for (int j = 0; j < nx; ++j) {
        const int x = j * stride;
        for (int y = 0; y < H; ++y) column[y] = horiz[static_cast<std::size_t>(y) * cols + x];
        const auto m = sliding_max(column, size);
        for (int i = 0; i < ny; ++i) out[static_cast<std::size_t>(i) * nx + j] = m[i * stride];
    }
    return out;
}

// Order-independent sum.
double sorted_sum(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return std::accumulate(v.begin(), v.end(), 0.0);
}

}  // namespace

LightPriorModel LightPriorModel::default_model() {
    LightPriorModel m;
    m.green_hist.assign(kDefaultBins, 0.0);
    const double lo = 0.4, hi = 1.0, mean = 0.75, sigma = 0.12;
    for (int i = 0; i < kDefaultBins; ++i) {
        const double a = std::max(lo, static_cast<double>(i) / kDefaultBins);
        const double b = std::min(hi, static_cast<double>(i + 1) / kDefaultBins);
        if (b > a) m.green_hist[i] = normal_cdf(b, mean, sigma) - normal_cdf(a, mean, sigma);
    }
    const double total = std::accumulate(m.green_hist.begin(), m.green_hist.end(), 0.0);
    for (double& p : m.green_hist) p /= total;
    return m;
}

void LightPriorModel::validate() const {
    if (green_hist.empty()) throw std::invalid_argument("light prior has an empty green histogram");
    double total = 0.0;
    for (double p : green_hist) {
        if (!(p >= 0.0)) throw std::invalid_argument("green histogram has negative or NaN mass");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-6) throw std::invalid_argument("green histogram must sum to 1");
    if (!(band_halfwidth > 0.0)) throw std::invalid_argument("band half-width must be > 0");
    if (!std::isfinite(slope) || !std::isfinite(intercept)) throw std::invalid_argument("light prior line is not finite");
}

LightPriorModel LightPriorModel::load(const std::filesystem::path& path) {
    const auto kv = KeyValueFile::load(path);
    kv.require_known({"slope", "intercept", "band_halfwidth", "green_hist"});
    LightPriorModel m;
    m.slope = kv.number("slope");
    m.intercept = kv.number("intercept");
    m.band_halfwidth = kv.number("band_halfwidth");
    m.green_hist = kv.numbers("green_hist");
    m.validate();
    return m;
}

void LightPriorModel::save(const std::filesystem::path& path) const {
    KeyValueFile kv;
    kv.set("slope", slope);
    kv.set("intercept", intercept);
    kv.set("band_halfwidth", band_halfwidth);
    kv.set("green_hist", green_hist);
    kv.save(path);
}

LightColorSample sample_light_color(const LightPriorModel& model, std::mt19937_64& rng) {
    model.validate();
    const int bins = static_cast<int>(model.green_hist.size());
    std::discrete_distribution<int> pick_bin(model.green_hist.begin(), model.green_hist.end());
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const int bin = pick_bin(rng);
    const double green = std::clamp((bin + unit(rng)) / bins, 0.0, 1.0);
    const double center = model.predict_blue(green);
    const double lo = std::max(0.0, center - model.band_halfwidth);
    const double hi = std::min(1.0, center + model.band_halfwidth);
    const double u = unit(rng);
    // An empty intersection means the band lies entirely outside [0,1].
    const double blue = lo <= hi ? lo + (hi - lo) * u : std::clamp(center, 0.0, 1.0);
    return {1.0f, static_cast<float>(green), static_cast<float>(blue)};
}

std::vector<int> light_prior_scales(const LightPriorFitOptions& o) {
    if (o.min_scale < 1 || o.max_scale < o.min_scale || o.scale_count < 1)
        throw std::invalid_argument("invalid light prior scale range");
    std::vector<int> sizes;
    for (int i = 0; i < o.scale_count; ++i) {
        const double f = o.scale_count == 1 ? 0.0 : static_cast<double>(i) / (o.scale_count - 1);
        const int s = static_cast<int>(std::lround(o.min_scale * std::pow(static_cast<double>(o.max_scale) / o.min_scale, f)));
        if (sizes.empty() || sizes.back() != s) sizes.push_back(s);
    }
    return sizes;
}

LightPriorModel fit_light_prior(std::span<const ImageBuffer> corpus, const LightPriorFitOptions& options) {
    if (corpus.empty()) throw std::invalid_argument("light prior corpus is empty");
    if (options.bins < 1 || options.stride < 1 || !(options.coverage > 0.0 && options.coverage <= 1.0))
        throw std::invalid_argument("invalid light prior fit options");
    const auto sizes = light_prior_scales(options);
    if (sizes.back() > options.resize_to) throw std::invalid_argument("patch scale exceeds the working resolution");

    std::vector<ImageBuffer> resized;
    for (const auto& img : corpus) {
        if (img.channels() != 3) throw std::invalid_argument("light prior corpus images must have 3 channels");
        resized.push_back(resize(img, options.resize_to, options.resize_to, ResampleMode::kBilinearDown));
    }

    std::vector<double> all_g, all_b;
    std::vector<double> mean_g, mean_b;
    for (int size : sizes) {
        std::vector<double> gs, bs;
        for (const auto& img : resized) {
            int nx = 0, ny = 0;
            const auto mr = patch_maxima(img, 0, size, options.stride, nx, ny);
            const auto mg = patch_maxima(img, 1, size, options.stride, nx, ny);
            const auto mb = patch_maxima(img, 2, size, options.stride, nx, ny);
            for (std::size_t i = 0; i < mr.size(); ++i) {
                if (!(mr[i] > 0.0f)) continue;
                gs.push_back(std::min(1.0, static_cast<double>(mg[i]) / mr[i]));
                bs.push_back(std::min(1.0, static_cast<double>(mb[i]) / mr[i]));
            }
        }
        if (gs.empty()) continue;
        mean_g.push_back(sorted_sum(gs) / gs.size());
        mean_b.push_back(sorted_sum(bs) / bs.size());
        all_g.insert(all_g.end(), gs.begin(), gs.end());
        all_b.insert(all_b.end(), bs.begin(), bs.end());
    }
    if (all_g.empty()) throw std::invalid_argument("light prior corpus has no lit patches");

    LightPriorModel m;
    const double n = static_cast<double>(mean_g.size());
    const double gbar = std::accumulate(mean_g.begin(), mean_g.end(), 0.0) / n;
    const double bbar = std::accumulate(mean_b.begin(), mean_b.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < mean_g.size(); ++i) {
        sxx += (mean_g[i] - gbar) * (mean_g[i] - gbar);
        sxy += (mean_g[i] - gbar) * (mean_b[i] - bbar);
    }
    if (sxx < 1e-12) {
        // All scale centres coincide: a horizontal line through them.
        m.slope = 0.0;
        m.intercept = bbar;
    } else {
        m.slope = sxy / sxx;
        m.intercept = bbar - m.slope * gbar;
    }

    std::vector<double> residual(all_g.size());
    for (std::size_t i = 0; i < all_g.size(); ++i) residual[i] = std::abs(all_b[i] - m.predict_blue(all_g[i]));
    std::sort(residual.begin(), residual.end());
    const auto k = static_cast<std::size_t>(std::ceil(options.coverage * residual.size()));
    m.band_halfwidth = std::max(residual[std::min(residual.size(), std::max<std::size_t>(k, 1)) - 1], 1e-6);

    m.green_hist.assign(options.bins, 0.0);
    for (double g : all_g) m.green_hist[std::min(options.bins - 1, static_cast<int>(g * options.bins))] += 1.0;
    for (double& p : m.green_hist) p /= static_cast<double>(all_g.size());
    return m;
}

}  // namespace nhaze
