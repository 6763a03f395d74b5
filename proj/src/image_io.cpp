#include "nhaze/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <opencv2/imgcodecs.hpp>
#include <sstream>

#include "nhaze/kvconfig.hpp"

namespace nhaze {
namespace {

cv::Mat read_png_raw(const std::filesystem::path& path) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (m.empty()) throw std::runtime_error("cannot read image " + path.string());
    if (m.depth() != CV_8U && m.depth() != CV_16U)
        throw std::runtime_error(path.string() + ": only 8- and 16-bit images are supported");
    return m;
}

}  // namespace

ImageBuffer read_image(const std::filesystem::path& path) {
    if (path.extension() == ".pfm") return read_pfm(path);
    const cv::Mat m = read_png_raw(path);
    const int ch = m.channels();
    if (ch != 1 && ch != 3)
        throw std::runtime_error(path.string() + ": unsupported channel count " + std::to_string(ch));
    const double scale = m.depth() == CV_8U ? 255.0 : 65535.0;

    ImageBuffer img(m.cols, m.rows, ch);
    for (int y = 0; y < m.rows; ++y) {
        for (int x = 0; x < m.cols; ++x) {
            for (int c = 0; c < ch; ++c) {
                // OpenCV stores colour as BGR.
                const int src_c = ch == 3 ? 2 - c : 0;
                double code = m.depth() == CV_8U ? m.ptr<std::uint8_t>(y)[x * ch + src_c]
                                                 : m.ptr<std::uint16_t>(y)[x * ch + src_c];
                img.at(c, y, x) = static_cast<float>(code / scale);
            }
        }
    }
    return img;
}

void write_image(const std::filesystem::path& path, const ImageBuffer& img, int bits) {
    if (bits != 8 && bits != 16) throw std::invalid_argument("bit depth must be 8 or 16");
    const int ch = img.channels();
    const int type = bits == 8 ? CV_MAKETYPE(CV_8U, ch) : CV_MAKETYPE(CV_16U, ch);
    const double scale = bits == 8 ? 255.0 : 65535.0;
    cv::Mat m(img.height(), img.width(), type);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < ch; ++c) {
                const int dst_c = ch == 3 ? 2 - c : 0;
                const double v = std::clamp(static_cast<double>(img.at(c, y, x)), 0.0, 1.0);
                const long code = std::lround(v * scale);
                if (bits == 8)
                    m.ptr<std::uint8_t>(y)[x * ch + dst_c] = static_cast<std::uint8_t>(code);
                else
                    m.ptr<std::uint16_t>(y)[x * ch + dst_c] = static_cast<std::uint16_t>(code);
            }
        }
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), m)) throw std::runtime_error("cannot write image " + path.string());
}

ImageBuffer read_pfm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string magic;
    int width = 0, height = 0;
    double scale = 0.0;
    in >> magic >> width >> height >> scale;
    in.get();  // single whitespace byte before the raster
    if (!in || (magic != "Pf" && magic != "PF") || width < 1 || height < 1 || scale == 0.0)
        throw std::runtime_error(path.string() + ": malformed PFM header");
    const int ch = magic == "PF" ? 3 : 1;
    const bool little = scale < 0.0;
    const bool swap = little != (std::endian::native == std::endian::little);

    std::vector<float> raster(static_cast<std::size_t>(width) * height * ch);
    in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size() * sizeof(float)));
    if (!in) throw std::runtime_error(path.string() + ": truncated PFM raster");

    ImageBuffer img(width, height, ch);
    for (int row = 0; row < height; ++row) {
        const int y = height - 1 - row;
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < ch; ++c) {
                float v = raster[(static_cast<std::size_t>(row) * width + x) * ch + c];
                if (swap) {
                    std::uint32_t u;
                    std::memcpy(&u, &v, 4);
                    u = __builtin_bswap32(u);
                    std::memcpy(&v, &u, 4);
                }
                if (std::isnan(v)) throw std::runtime_error(path.string() + ": NaN in PFM raster");
                img.at(c, y, x) = v;
            }
        }
    }
    return img;
}

void write_pfm(const std::filesystem::path& path, const ImageBuffer& img) {
    static_assert(std::endian::native == std::endian::little, "PFM writer assumes a little-endian host");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    const int ch = img.channels();
    out << (ch == 3 ? "PF" : "Pf") << '\n' << img.width() << ' ' << img.height() << "\n-1.0\n";
    std::vector<float> row(static_cast<std::size_t>(img.width()) * ch);
    for (int y = img.height() - 1; y >= 0; --y) {
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < ch; ++c) row[static_cast<std::size_t>(x) * ch + c] = img.at(c, y, x);
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
}

DepthMap read_depth(const std::filesystem::path& path, std::optional<double> depth_scale) {
    DepthMap d;
    if (path.extension() == ".pfm") {
        const ImageBuffer img = read_pfm(path);
        const double s = depth_scale.value_or(1.0);
        d.width = img.width();
        d.height = img.height();
        d.meters.resize(img.pixel_count());
        for (std::size_t i = 0; i < d.meters.size(); ++i) d.meters[i] = static_cast<float>(img.plane(0)[i] * s);
    } else {
        const cv::Mat m = read_png_raw(path);
        if (m.channels() != 1) throw std::runtime_error(path.string() + ": depth PNG must be single-channel");
        const double s = depth_scale.value_or(1e-3);
        d.width = m.cols;
        d.height = m.rows;
        d.meters.resize(static_cast<std::size_t>(m.cols) * m.rows);
        for (int y = 0; y < m.rows; ++y)
            for (int x = 0; x < m.cols; ++x) {
                const double code = m.depth() == CV_8U ? m.ptr<std::uint8_t>(y)[x] : m.ptr<std::uint16_t>(y)[x];
                d.meters[static_cast<std::size_t>(y) * m.cols + x] = static_cast<float>(code * s);
            }
    }
    d.sky_mask.resize(d.meters.size());
    for (std::size_t i = 0; i < d.meters.size(); ++i)
        d.sky_mask[i] = !(std::isfinite(d.meters[i]) && d.meters[i] > 0.0f);
    return d;
}

SemanticMap read_labels(const std::filesystem::path& path, const ClassConfig& config) {
    const cv::Mat m = read_png_raw(path);
    if (m.channels() != 1) throw std::runtime_error(path.string() + ": label PNG must be single-channel");
    SemanticMap s;
    s.width = m.cols;
    s.height = m.rows;
    s.class_config = config;
    s.labels.resize(static_cast<std::size_t>(m.cols) * m.rows);
    for (int y = 0; y < m.rows; ++y)
        for (int x = 0; x < m.cols; ++x)
            s.labels[static_cast<std::size_t>(y) * m.cols + x] =
                m.depth() == CV_8U ? m.ptr<std::uint8_t>(y)[x] : m.ptr<std::uint16_t>(y)[x];
    s.validate();
    return s;
}

void write_labels(const std::filesystem::path& path, const SemanticMap& labels) {
    cv::Mat m(labels.height, labels.width, CV_16UC1);
    for (int y = 0; y < labels.height; ++y)
        for (int x = 0; x < labels.width; ++x) {
            const int v = labels.label(y, x);
            if (v < 0 || v > 65535) throw std::invalid_argument("label id does not fit in 16 bits");
            m.ptr<std::uint16_t>(y)[x] = static_cast<std::uint16_t>(v);
        }
    if (!cv::imwrite(path.string(), m)) throw std::runtime_error("cannot write " + path.string());
}

ClassConfig load_class_config(const std::filesystem::path& path) {
    const auto kv = KeyValueFile::load(path);
    kv.require_known({"road", "sky", "other"});
    auto ints = [&kv](const std::string& key) {
        std::vector<int> out;
        if (!kv.has(key)) return out;
        for (double v : kv.numbers(key)) {
            if (v != std::floor(v)) throw std::runtime_error("class ids must be integers");
            out.push_back(static_cast<int>(v));
        }
        return out;
    };
    ClassConfig cfg;
    cfg.road = ints("road");
    cfg.sky = ints("sky");
    cfg.other = ints("other");
    return cfg;
}

CameraIntrinsics load_camera(const std::filesystem::path& path) {
    const auto kv = KeyValueFile::load(path);
    kv.require_known({"fx", "fy", "cx", "cy"});
    CameraIntrinsics k{kv.number("fx"), kv.number("fy"), kv.number("cx"), kv.number("cy")};
    k.validate();
    return k;
}

void save_class_config(const std::filesystem::path& path, const ClassConfig& config) {
    KeyValueFile kv;
    auto list = [](const std::vector<int>& ids) { return std::vector<double>(ids.begin(), ids.end()); };
    kv.set("road", list(config.road));
    kv.set("sky", list(config.sky));
    if (!config.other.empty()) kv.set("other", list(config.other));
    kv.save(path);
}

void save_camera(const std::filesystem::path& path, const CameraIntrinsics& camera) {
    KeyValueFile kv;
    kv.set("fx", camera.fx);
    kv.set("fy", camera.fy);
    kv.set("cx", camera.cx);
    kv.set("cy", camera.cy);
    kv.save(path);
}

void write_index_png(const std::filesystem::path& path, int width, int height, const std::vector<int>& index) {
    cv::Mat m(height, width, CV_8UC1);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const int v = index[static_cast<std::size_t>(y) * width + x];
            if (v < 0 || v > 255) throw std::invalid_argument("index does not fit in 8 bits");
            m.ptr<std::uint8_t>(y)[x] = static_cast<std::uint8_t>(v);
        }
    if (!cv::imwrite(path.string(), m)) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace nhaze
