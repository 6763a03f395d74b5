#include "nhaze/scene3r.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "nhaze/parallel.hpp"

namespace nhaze {
namespace {

constexpr int kDx[4] = {1, -1, 0, 0};
constexpr int kDy[4] = {0, 0, 1, -1};

// 4-connected components of equal label; returns component id per pixel.
std::vector<int> label_components(const SemanticMap& labels, int& count) {
    const int W = labels.width, H = labels.height;
    std::vector<int> comp(static_cast<std::size_t>(W) * H, -1);
    std::vector<int> stack;
    count = 0;
    for (int start = 0; start < W * H; ++start) {
        if (comp[start] >= 0) continue;
        const int lab = labels.labels[start];
        comp[start] = count;
        stack.assign(1, start);
        while (!stack.empty()) {
            const int p = stack.back();
            stack.pop_back();
            const int x = p % W, y = p / W;
            for (int k = 0; k < 4; ++k) {
                const int nx = x + kDx[k], ny = y + kDy[k];
                if (nx < 0 || ny < 0 || nx >= W || ny >= H) continue;
                const int q = ny * W + nx;
                if (comp[q] < 0 && labels.labels[q] == lab) {
                    comp[q] = count;
                    stack.push_back(q);
                }
            }
        }
        ++count;
    }
    return comp;
}

struct Seed {
    double x = 0.0;
    double y = 0.0;
    int label = 0;
};

bool is_sky_pixel(const SemanticMap& labels, const DepthMap& depth, std::size_t i) {
    return labels.class_config.classify(labels.labels[i]) == SemanticClass::kSky || depth.sky_mask[i] != 0;
}

void check_aligned(const SemanticMap& labels, const DepthMap& depth) {
    if (labels.width != depth.width || labels.height != depth.height)
        throw std::invalid_argument("semantic map and depth map dimensions differ");
}

}  // namespace

Segmentation segment_superpixels(const SemanticMap& labels, int target_count, int iterations) {
    if (labels.width < 1 || labels.height < 1 || labels.labels.empty())
        throw std::invalid_argument("cannot segment an empty label map");
    if (target_count < 1) throw std::invalid_argument("superpixel target count must be >= 1");
    const int W = labels.width, H = labels.height;
    const int N = W * H;

    const double S = std::sqrt(static_cast<double>(N) / target_count);
    const int nx = std::max(1, static_cast<int>(std::lround(W / S)));
    const int ny = std::max(1, static_cast<int>(std::lround(H / S)));
    const double step_x = static_cast<double>(W) / nx, step_y = static_cast<double>(H) / ny;

    int comp_count = 0;
    const auto comp = label_components(labels, comp_count);
    std::vector<char> seeded(comp_count, 0);
    std::vector<Seed> seeds;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const double sx = (i + 0.5) * step_x - 0.5, sy = (j + 0.5) * step_y - 0.5;
            const int px = std::clamp(static_cast<int>(std::lround(sx)), 0, W - 1);
            const int py = std::clamp(static_cast<int>(std::lround(sy)), 0, H - 1);
            const int p = py * W + px;
            seeds.push_back({sx, sy, labels.labels[p]});
            seeded[comp[p]] = 1;
        }
    // Label regions missed by the grid get a seed at the member pixel
    // closest to their centroid.
    {
        std::vector<double> cx(comp_count, 0.0), cy(comp_count, 0.0);
        std::vector<int> n(comp_count, 0);
        for (int p = 0; p < N; ++p) {
            cx[comp[p]] += p % W;
            cy[comp[p]] += p / W;
            ++n[comp[p]];
        }
        std::vector<int> best(comp_count, -1);
        std::vector<double> best_d(comp_count, std::numeric_limits<double>::infinity());
        for (int p = 0; p < N; ++p) {
            const int c = comp[p];
            if (seeded[c]) continue;
            const double dx = p % W - cx[c] / n[c], dy = p / W - cy[c] / n[c];
            const double d = dx * dx + dy * dy;
            if (d < best_d[c]) {
                best_d[c] = d;
                best[c] = p;
            }
        }
        for (int c = 0; c < comp_count; ++c)
            if (!seeded[c]) seeds.push_back({static_cast<double>(best[c] % W), static_cast<double>(best[c] / W), labels.labels[best[c]]});
    }

    std::vector<int> assign(N, -1);
    std::vector<double> dist(N);
    const int reach = static_cast<int>(std::ceil(std::max(step_x, step_y)));
    for (int it = 0; it < std::max(1, iterations); ++it) {
        std::fill(assign.begin(), assign.end(), -1);
        std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
        for (int k = 0; k < static_cast<int>(seeds.size()); ++k) {
            const Seed& s = seeds[k];
            const int x0 = std::max(0, static_cast<int>(std::floor(s.x)) - reach);
            const int x1 = std::min(W - 1, static_cast<int>(std::ceil(s.x)) + reach);
            const int y0 = std::max(0, static_cast<int>(std::floor(s.y)) - reach);
            const int y1 = std::min(H - 1, static_cast<int>(std::ceil(s.y)) + reach);
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    const int p = y * W + x;
                    if (labels.labels[p] != s.label) continue;
                    const double d = (x - s.x) * (x - s.x) + (y - s.y) * (y - s.y);
                    if (d < dist[p]) {
                        dist[p] = d;
                        assign[p] = k;
                    }
                }
        }
        std::vector<double> sx(seeds.size(), 0.0), sy(seeds.size(), 0.0);
        std::vector<int> sn(seeds.size(), 0);
        for (int p = 0; p < N; ++p) {
            if (assign[p] < 0) continue;
            sx[assign[p]] += p % W;
            sy[assign[p]] += p / W;
            ++sn[assign[p]];
        }
        for (std::size_t k = 0; k < seeds.size(); ++k)
            if (sn[k] > 0) {
                seeds[k].x = sx[k] / sn[k];
                seeds[k].y = sy[k] / sn[k];
            }
    }

    // Connectivity enforcement: every final superpixel is a 4-connected run
    // of one (cluster, label) pair; small fragments merge into an adjacent
    // superpixel of the same label.
    const int min_size = std::max(1, static_cast<int>(static_cast<double>(N) / seeds.size() / 4.0));
    Segmentation seg;
    seg.width = W;
    seg.height = H;
    seg.assignment.assign(N, -1);
    std::vector<int> stack, members;
    for (int start = 0; start < N; ++start) {
        if (seg.assignment[start] >= 0) continue;
        const int cluster = assign[start];
        const int lab = labels.labels[start];
        const int id = static_cast<int>(seg.superpixels.size());
        int adjacent = -1;
        members.assign(1, start);
        stack.assign(1, start);
        seg.assignment[start] = id;
        while (!stack.empty()) {
            const int p = stack.back();
            stack.pop_back();
            const int x = p % W, y = p / W;
            for (int k = 0; k < 4; ++k) {
                const int qx = x + kDx[k], qy = y + kDy[k];
                if (qx < 0 || qy < 0 || qx >= W || qy >= H) continue;
                const int q = qy * W + qx;
                if (labels.labels[q] != lab) continue;
                if (seg.assignment[q] < 0 && assign[q] == cluster) {
                    seg.assignment[q] = id;
                    stack.push_back(q);
                    members.push_back(q);
                } else if (seg.assignment[q] >= 0 && seg.assignment[q] != id && adjacent < 0) {
                    adjacent = seg.assignment[q];
                }
            }
        }
        if (static_cast<int>(members.size()) < min_size && adjacent >= 0) {
            for (int p : members) seg.assignment[p] = adjacent;
            auto& target = seg.superpixels[adjacent].pixels;
            target.insert(target.end(), members.begin(), members.end());
        } else {
            seg.superpixels.push_back({id, members, lab});
        }
    }
    for (auto& sp : seg.superpixels) std::sort(sp.pixels.begin(), sp.pixels.end());
    return seg;
}

PointMap backproject(const DepthMap& depth, const CameraIntrinsics& camera) {
    camera.validate();
    PointMap pm;
    pm.width = depth.width;
    pm.height = depth.height;
    pm.points.assign(static_cast<std::size_t>(depth.width) * depth.height, Vec3{});
    pm.valid.assign(pm.points.size(), 0);
    for (int v = 0; v < depth.height; ++v)
        for (int u = 0; u < depth.width; ++u) {
            const std::size_t i = static_cast<std::size_t>(v) * depth.width + u;
            if (depth.sky_mask[i]) continue;
            const double d = depth.meters[i];
            pm.points[i] = {(u - camera.cx) * d / camera.fx, (v - camera.cy) * d / camera.fy, d};
            pm.valid[i] = 1;
        }
    return pm;
}

PlaneFit fit_plane(std::span<const Vec3> points) {
    PlaneFit fit;
    Vec3 centroid;
    for (const auto& p : points) centroid = centroid + p;
    if (!points.empty()) centroid = centroid * (1.0 / points.size());

    auto fallback = [&] {
        fit.degenerate = true;
        const double n = centroid.norm();
        fit.normal = n > 0.0 ? centroid * (-1.0 / n) : Vec3{0.0, 0.0, -1.0};
        fit.offset = -fit.normal.dot(centroid);
        return fit;
    };
    if (points.size() < 3) return fallback();

    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& p : points) {
        const Eigen::Vector3d d(p.x - centroid.x, p.y - centroid.y, p.z - centroid.z);
        cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
    const auto& ev = solver.eigenvalues();  // ascending
    if (!(ev(2) > 0.0) || ev(1) <= 1e-10 * ev(2)) return fallback();

    const Eigen::Vector3d v = solver.eigenvectors().col(0).normalized();
    fit.normal = {v.x(), v.y(), v.z()};
    if (fit.normal.dot(centroid) > 0.0) fit.normal = fit.normal * -1.0;
    fit.offset = -fit.normal.dot(centroid);
    return fit;
}

SceneGeometry reconstruct_geometry(const SemanticMap& labels, const DepthMap& depth, const CameraIntrinsics& camera,
                                   int target_superpixels) {
    check_aligned(labels, depth);
    SceneGeometry g;
    g.width = labels.width;
    g.height = labels.height;
    const std::size_t N = labels.labels.size();
    g.sky.resize(N);
    for (std::size_t i = 0; i < N; ++i) g.sky[i] = is_sky_pixel(labels, depth, i);

    g.segmentation = segment_superpixels(labels, target_superpixels);
    const auto pm = backproject(depth, camera);
    g.points = pm.points;
    g.normals.assign(N, Vec3{});
    g.planes.resize(g.segmentation.superpixels.size());
    std::vector<Vec3> pts;
    for (const auto& sp : g.segmentation.superpixels) {
        pts.clear();
        for (int p : sp.pixels)
            if (!g.sky[p]) pts.push_back(pm.points[p]);
        if (pts.empty()) continue;
        g.planes[sp.id] = fit_plane(pts);
        for (int p : sp.pixels)
            if (!g.sky[p]) g.normals[p] = g.planes[sp.id].normal;
    }
    return g;
}

LightPlacement place_roadside_lights(const SemanticMap& labels, const DepthMap& depth, const CameraIntrinsics& camera,
                                     const RoadsideLayout& layout, double intensity, const LightPriorModel& prior,
                                     std::mt19937_64& rng) {
    check_aligned(labels, depth);
    if (!(layout.spacing > 0.0)) throw std::invalid_argument("lamp spacing must be > 0");
    if (!(intensity > 0.0)) throw std::invalid_argument("light intensity must be > 0");
    const auto pm = backproject(depth, camera);

    struct Extremes {
        std::size_t left;
        std::size_t right;
    };
    std::map<long, Extremes> slabs;
    for (std::size_t i = 0; i < labels.labels.size(); ++i) {
        if (!pm.valid[i] || labels.class_config.classify(labels.labels[i]) != SemanticClass::kRoad) continue;
        const long slab = static_cast<long>(std::floor(pm.points[i].z / layout.spacing));
        auto [it, inserted] = slabs.try_emplace(slab, Extremes{i, i});
        if (inserted) continue;
        if (pm.points[i].x < pm.points[it->second.left].x) it->second.left = i;
        if (pm.points[i].x > pm.points[it->second.right].x) it->second.right = i;
    }

    LightPlacement out;
    if (slabs.empty()) {
        out.warning = "no road pixels: no roadside lights placed";
        return out;
    }
    auto add = [&](std::size_t i) {
        const Vec3 p = pm.points[i];
        out.lights.push_back({Vec3{p.x, p.y - layout.height, p.z}, sample_light_color(prior, rng), intensity});
    };
    for (const auto& [slab, e] : slabs) {
        add(e.left);
        if (e.right != e.left) add(e.right);
    }
    return out;
}

IlluminanceMaps illuminance(std::span<const LightSource> lights, const SceneGeometry& geometry, const ImageBuffer& guide,
                            double ambient, const std::optional<GuidedFilterParams>& refine, double min_distance) {
    const int W = geometry.width, H = geometry.height;
    if (guide.width() != W || guide.height() != H) throw std::invalid_argument("guide does not match the geometry");
    if (ambient < 0.0) throw std::invalid_argument("ambient must be >= 0");
    for (const auto& l : lights)
        if (!(l.intensity > 0.0) || !std::isfinite(l.position.x) || !std::isfinite(l.position.y) ||
            !std::isfinite(l.position.z))
            throw std::invalid_argument("light sources need a finite position and positive intensity");

    IlluminanceMaps maps;
    maps.L_raw = ImageBuffer(W, H, 1);
    maps.eta = ImageBuffer(W, H, 3, 1.0f);
    parallel_for(H, [&](int y0, int y1) {
        for (int y = y0; y < y1; ++y)
            for (int x = 0; x < W; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * W + x;
                double rgb[3] = {ambient, ambient, ambient};
                if (!geometry.is_sky(i)) {
                    const Vec3& p = geometry.points[i];
                    const Vec3& n = geometry.normals[i];
                    for (const auto& light : lights) {
                        const Vec3 to_light = light.position - p;
                        const double d = to_light.norm();
                        const double cosine = d > 0.0 ? to_light.dot(n) / d : 1.0;
                        if (cosine <= 0.0) continue;
                        const double de = std::max(d, min_distance);
                        const double e = light.intensity / (de * de) * cosine;
                        rgb[0] += light.color.r * e;
                        rgb[1] += light.color.g * e;
                        rgb[2] += light.color.b * e;
                    }
                }
                const double L = std::max({rgb[0], rgb[1], rgb[2]});
                maps.L_raw.at(0, y, x) = static_cast<float>(L);
                if (L > 0.0)
                    for (int c = 0; c < 3; ++c) maps.eta.at(c, y, x) = static_cast<float>(rgb[c] / L);
            }
    });

    if (refine) {
        maps.L = guided_filter_fast(to_gray(guide), maps.L_raw, *refine);
        auto Lp = maps.L.plane(0);
        for (std::size_t i = 0; i < Lp.size(); ++i)
            Lp[i] = geometry.is_sky(i) ? static_cast<float>(ambient) : std::max(0.0f, Lp[i]);
    } else {
        maps.L = maps.L_raw;
    }
    return maps;
}

ImageBuffer transmission_from_depth(const DepthMap& depth, double beta_t, double sky_depth) {
    if (!(beta_t >= 0.0)) throw std::invalid_argument("beta_t must be >= 0");
    ImageBuffer t(depth.width, depth.height, 1);
    auto tp = t.plane(0);
    for (std::size_t i = 0; i < tp.size(); ++i) {
        const double d = depth.sky_mask[i] ? sky_depth : depth.meters[i];
        tp[i] = static_cast<float>(std::exp(-beta_t * d));
    }
    return t;
}

void SynthParams::validate() const {
    if (!(beta_l > 0.0)) throw std::invalid_argument("beta_l must be > 0");
    if (!(beta_t >= 0.0)) throw std::invalid_argument("beta_t must be >= 0");
    if (!(ambient >= 0.0)) throw std::invalid_argument("ambient must be >= 0");
    if (!(layout.spacing > 0.0)) throw std::invalid_argument("spacing must be > 0");
    if (!std::isfinite(layout.height)) throw std::invalid_argument("lamp height must be finite");
    if (target_superpixels < 0) throw std::invalid_argument("target superpixels must be >= 0");
    if (!(sky_depth > 0.0)) throw std::invalid_argument("sky depth must be > 0");
    if (!(min_light_distance > 0.0)) throw std::invalid_argument("minimum light distance must be > 0");
    if (refine_illuminance) refine.validate();
}

int SynthParams::superpixels_for(int width, int height) const {
    if (target_superpixels > 0) return target_superpixels;
    const double n = static_cast<double>(width) * height;
    return std::max(1, static_cast<int>(std::lround(2000.0 * n / (2048.0 * 1024.0))));
}

SynthResult render_3r(const ImageBuffer& reflectance, const SemanticMap& labels, const DepthMap& depth,
                      const CameraIntrinsics& camera, const SynthParams& params, const LightPriorModel& prior) {
    params.validate();
    if (reflectance.channels() != 3) throw std::invalid_argument("reflectance must have 3 channels");
    if (reflectance.width() != labels.width || reflectance.height() != labels.height)
        throw std::invalid_argument("reflectance and label map dimensions differ");
    check_aligned(labels, depth);
    labels.validate();

    SynthResult out;
    out.geometry = reconstruct_geometry(labels, depth, camera, params.superpixels_for(labels.width, labels.height));

    std::mt19937_64 rng(params.seed);
    if (params.lights_enabled) {
        auto placement = place_roadside_lights(labels, depth, camera, params.layout, params.beta_l, prior, rng);
        out.lights = std::move(placement.lights);
        out.warning = std::move(placement.warning);
    }

    std::optional<GuidedFilterParams> refine;
    if (params.refine_illuminance) refine = params.refine;
    auto maps = illuminance(out.lights, out.geometry, reflectance, params.ambient, refine, params.min_light_distance);

    DepthMap masked = depth;
    for (std::size_t i = 0; i < masked.sky_mask.size(); ++i) masked.sky_mask[i] = out.geometry.sky[i];
    out.latents = LatentMaps{std::move(maps.L), std::move(maps.eta), transmission_from_depth(masked, params.beta_t, params.sky_depth)};
    out.L_raw = std::move(maps.L_raw);

    out.hazy = apply_imaging_model(reflectance, out.latents);
    out.lowlight = compose_nighttime_clear(reflectance, out.latents.L);
    out.lowlight_cast = out.lowlight;
    for (int c = 0; c < 3; ++c) {
        auto p = out.lowlight_cast.plane(c);
        const auto e = out.latents.eta.plane(c);
        for (std::size_t i = 0; i < p.size(); ++i) p[i] *= e[i];
    }
    out.dayhaze = ImageBuffer(reflectance.width(), reflectance.height(), 3);
    const auto t = out.latents.t.plane(0);
    for (int c = 0; c < 3; ++c) {
        const auto r = reflectance.plane(c);
        auto p = out.dayhaze.plane(c);
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] * t[i] + (1.0f - t[i]);
    }
    out.lowlight.clamp01();
    out.lowlight_cast.clamp01();
    out.dayhaze.clamp01();
    return out;
}

}  // namespace nhaze
