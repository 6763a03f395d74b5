#include "nhaze/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "nhaze/image_io.hpp"
#include "nhaze/parallel.hpp"

namespace nhaze {
namespace {

void require_same_shape(const ImageBuffer& a, const ImageBuffer& b, const char* what) {
    if (a.empty() || !a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": image shapes differ or are empty");
}

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

std::array<double, kSsimWindow> gaussian_taps() {
    std::array<double, kSsimWindow> w{};
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double x = i - kSsimWindow / 2;
        w[i] = std::exp(-x * x / (2.0 * kSsimSigma * kSsimSigma));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

// Separable valid-mode correlation of a (w x h) field; output is
// (w - 10) x (h - 10).
std::vector<double> gaussian_valid(const std::vector<double>& f, int w, int h) {
    static const auto taps = gaussian_taps();
    const int ow = w - kSsimWindow + 1, oh = h - kSsimWindow + 1;
    std::vector<double> horiz(static_cast<std::size_t>(ow) * h), out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < kSsimWindow; ++k) s += taps[k] * f[static_cast<std::size_t>(y) * w + x + k];
            horiz[static_cast<std::size_t>(y) * ow + x] = s;
        }
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < kSsimWindow; ++k) s += taps[k] * horiz[static_cast<std::size_t>(y + k) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    return out;
}

std::vector<double> luma(const ImageBuffer& img) {
    std::vector<double> g(img.pixel_count());
    if (img.channels() == 1) {
        std::copy(img.data().begin(), img.data().end(), g.begin());
        return g;
    }
    const auto r = img.plane(0), gr = img.plane(1), b = img.plane(2);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = 0.299 * r[i] + 0.587 * gr[i] + 0.114 * b[i];
    return g;
}

double srgb_decode(double c) {
    c = std::clamp(c, 0.0, 1.0);
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
    constexpr double d = 6.0 / 29.0;
    return t > d * d * d ? std::cbrt(t) : t / (3.0 * d * d) + 4.0 / 29.0;
}

double deg(double rad) { return rad * 180.0 / std::numbers::pi; }
double rad(double deg) { return deg * std::numbers::pi / 180.0; }

std::string format_value(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
    require_same_shape(a, b, "psnr");
    double sse = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        const double d = static_cast<double>(a.data()[i]) - b.data()[i];
        sse += d * d;
    }
    if (sse == 0.0) return kPsnrIdentical;
    return 10.0 * std::log10(static_cast<double>(a.data().size()) / sse);
}

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
    require_same_shape(a, b, "ssim");
    const int w = a.width(), h = a.height();
    if (w < kSsimWindow || h < kSsimWindow) throw std::invalid_argument("ssim: image smaller than the 11x11 window");
    const auto x = luma(a), y = luma(b);
    std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto mx = gaussian_valid(x, w, h), my = gaussian_valid(y, w, h);
    const auto sxx = gaussian_valid(xx, w, h), syy = gaussian_valid(yy, w, h), sxy = gaussian_valid(xy, w, h);
    constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cxy = sxy[i] - mx[i] * my[i];
        total += (2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2) /
                 ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    return total / static_cast<double>(mx.size());
}

Lab srgb_to_lab(double r, double g, double b) {
    const double R = srgb_decode(r), G = srgb_decode(g), B = srgb_decode(b);
    const double X = 0.4124564 * R + 0.3575761 * G + 0.1804375 * B;
    const double Y = 0.2126729 * R + 0.7151522 * G + 0.0721750 * B;
    const double Z = 0.0193339 * R + 0.1191920 * G + 0.9503041 * B;
    const double fx = lab_f(X / 0.95047), fy = lab_f(Y / 1.0), fz = lab_f(Z / 1.08883);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

double delta_e2000(const Lab& p, const Lab& q) {
    const double C1 = std::hypot(p[1], p[2]), C2 = std::hypot(q[1], q[2]);
    const double Cbar7 = std::pow(0.5 * (C1 + C2), 7.0);
    const double G = 0.5 * (1.0 - std::sqrt(Cbar7 / (Cbar7 + std::pow(25.0, 7.0))));
    const double a1 = (1.0 + G) * p[1], a2 = (1.0 + G) * q[1];
    const double c1 = std::hypot(a1, p[2]), c2 = std::hypot(a2, q[2]);
    auto hue = [](double b, double a) {
        if (a == 0.0 && b == 0.0) return 0.0;
        const double h = deg(std::atan2(b, a));
        return h < 0.0 ? h + 360.0 : h;
    };
    const double h1 = hue(p[2], a1), h2 = hue(q[2], a2);

    const double dL = q[0] - p[0], dC = c2 - c1;
    double dh = 0.0;
    if (c1 * c2 != 0.0) {
        dh = h2 - h1;
        if (dh > 180.0) dh -= 360.0;
        else if (dh < -180.0) dh += 360.0;
    }
    const double dH = 2.0 * std::sqrt(c1 * c2) * std::sin(rad(dh / 2.0));

    const double Lbar = 0.5 * (p[0] + q[0]), cbar = 0.5 * (c1 + c2);
    double hbar = h1 + h2;
    if (c1 * c2 != 0.0) {
        if (std::abs(h1 - h2) <= 180.0) hbar = 0.5 * (h1 + h2);
        else if (h1 + h2 < 360.0) hbar = 0.5 * (h1 + h2 + 360.0);
        else hbar = 0.5 * (h1 + h2 - 360.0);
    }
    const double T = 1.0 - 0.17 * std::cos(rad(hbar - 30.0)) + 0.24 * std::cos(rad(2.0 * hbar)) +
                     0.32 * std::cos(rad(3.0 * hbar + 6.0)) - 0.20 * std::cos(rad(4.0 * hbar - 63.0));
    const double dTheta = 30.0 * std::exp(-std::pow((hbar - 275.0) / 25.0, 2.0));
    const double cbar7 = std::pow(cbar, 7.0);
    const double Rc = 2.0 * std::sqrt(cbar7 / (cbar7 + std::pow(25.0, 7.0)));
    const double l50 = (Lbar - 50.0) * (Lbar - 50.0);
    const double SL = 1.0 + 0.015 * l50 / std::sqrt(20.0 + l50);
    const double SC = 1.0 + 0.045 * cbar;
    const double SH = 1.0 + 0.015 * cbar * T;
    const double RT = -std::sin(rad(2.0 * dTheta)) * Rc;
    const double tl = dL / SL, tc = dC / SC, th = dH / SH;
    return std::sqrt(tl * tl + tc * tc + th * th + RT * tc * th);
}

double ciede2000(const ImageBuffer& a, const ImageBuffer& b) {
    require_same_shape(a, b, "ciede2000");
    if (a.channels() != 3) throw std::invalid_argument("ciede2000: RGB images required");
    double total = 0.0;
    for (std::size_t i = 0; i < a.pixel_count(); ++i) {
        const Lab la = srgb_to_lab(a.plane(0)[i], a.plane(1)[i], a.plane(2)[i]);
        const Lab lb = srgb_to_lab(b.plane(0)[i], b.plane(1)[i], b.plane(2)[i]);
        total += delta_e2000(la, lb);
    }
    return total / static_cast<double>(a.pixel_count());
}

int MetricReport::failed() const {
    return static_cast<int>(std::count_if(rows.begin(), rows.end(), [](const MetricRow& r) { return !r.ok; }));
}

void MetricReport::write_csv(std::ostream& out) const {
    out << "path,psnr,ssim,ciede2000\n";
    for (const auto& r : rows) {
        if (r.ok)
            out << r.path << ',' << format_value(r.psnr) << ',' << format_value(r.ssim) << ','
                << format_value(r.ciede2000) << '\n';
        else
            out << r.path << ",failed,failed,failed\n";
    }
    out << "MEAN," << format_value(mean.psnr) << ',' << format_value(mean.ssim) << ',' << format_value(mean.ciede2000)
        << '\n';
}

MetricReport evaluate_dir(const std::filesystem::path& pred_dir, const std::filesystem::path& truth_dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(truth_dir)) throw std::runtime_error("evaluate_dir: not a directory: " + truth_dir.string());
    if (!fs::is_directory(pred_dir)) throw std::runtime_error("evaluate_dir: not a directory: " + pred_dir.string());

    MetricReport report;
    for (const auto& entry : fs::directory_iterator(truth_dir)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".png") {
            MetricRow row;
            row.path = entry.path().filename().string();
            report.rows.push_back(std::move(row));
        }
    }
    std::sort(report.rows.begin(), report.rows.end(), [](const MetricRow& a, const MetricRow& b) { return a.path < b.path; });

    parallel_for(static_cast<int>(report.rows.size()), [&](int begin, int end) {
        for (int i = begin; i < end; ++i) {
            MetricRow& row = report.rows[i];
            try {
                const fs::path pred = pred_dir / row.path;
                if (!fs::exists(pred)) throw std::runtime_error("missing prediction");
                const ImageBuffer p = read_image(pred), t = read_image(truth_dir / row.path);
                row.psnr = psnr(p, t);
                row.ssim = ssim(p, t);
                row.ciede2000 = ciede2000(p, t);
                row.ok = true;
            } catch (const std::exception& e) {
                row.ok = false;
                row.error = e.what();
            }
        }
    });

    report.mean.path = "MEAN";
    int n = 0;
    for (const auto& r : report.rows) {
        if (!r.ok) continue;
        report.mean.psnr += r.psnr;
        report.mean.ssim += r.ssim;
        report.mean.ciede2000 += r.ciede2000;
        ++n;
    }
    report.mean.ok = n > 0;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    report.mean.psnr = n ? report.mean.psnr / n : nan;
    report.mean.ssim = n ? report.mean.ssim / n : nan;
    report.mean.ciede2000 = n ? report.mean.ciede2000 / n : nan;
    return report;
}

}  // namespace nhaze
