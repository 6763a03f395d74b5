#include "nhaze/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

#include "nhaze/image_io.hpp"
#include "nhaze/kvconfig.hpp"
#include "nhaze/light_prior.hpp"
#include "nhaze/metrics.hpp"
#include "nhaze/osfd.hpp"
#include "nhaze/parallel.hpp"
#include "nhaze/scene3r.hpp"

namespace nhaze::cli {
namespace {

namespace fs = std::filesystem;

// Raised while resolving arguments and configuration; maps to exit 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string fmt_fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

int resolve_threads(const CLI::Option* flag, int value) {
    if (flag->count() > 0) {
        if (value < 1) throw UsageError("--threads must be at least 1");
        return value;
    }
    if (const char* env = std::getenv("NHAZE_THREADS"); env && *env) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (*end != '\0' || n < 1 || n > 4096) throw UsageError(std::string("NHAZE_THREADS is not a positive integer: ") + env);
        return static_cast<int>(n);
    }
    return 1;
}

// Malformed or mistyped configuration is a usage error.
template <typename F>
auto guard(F&& f) {
    try {
        return f();
    } catch (const std::runtime_error& e) {
        throw UsageError(e.what());
    }
}

// A --params file restricted to one command's keys. Keys may be written
// bare or under a table named after the command, so a run.toml written by
// the same command can be fed back; its bookkeeping keys are skipped.
class ParamFile {
public:
    ParamFile() = default;
    ParamFile(const fs::path& path, const std::string& command, const std::vector<std::string>& allowed) {
        const auto raw = guard([&] { return KeyValueFile::load(path); });
        const std::string prefix = command + ".";
        for (const auto& [key, value] : raw.values()) {
            if (key == "command" || key == "threads" || key.rfind("run.", 0) == 0) continue;
            const std::string k = key.rfind(prefix, 0) == 0 ? key.substr(prefix.size()) : key;
            if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
                throw UsageError(path.string() + ": unknown key '" + key + "'");
            kv_.set(k, value);
        }
    }
    bool has(const std::string& key) const { return kv_.has(key); }
    double number(const std::string& key) const {
        return guard([&] { return kv_.number(key); });
    }
    bool boolean(const std::string& key) const {
        return guard([&] { return kv_.boolean(key); });
    }
    std::string string(const std::string& key) const {
        return guard([&] { return kv_.string(key); });
    }
    int integer(const std::string& key) const {
        const double v = number(key);
        if (v != std::floor(v) || std::abs(v) > 1e9) throw UsageError("key '" + key + "' must be an integer");
        return static_cast<int>(v);
    }
    // Accepts a single number or an array.
    std::vector<double> list(const std::string& key) const {
        const auto& v = kv_.values().at(key);
        if (const auto* d = std::get_if<double>(&v)) return {*d};
        return guard([&] { return kv_.numbers(key); });
    }

private:
    KeyValueFile kv_;
};

// Overrides `target` from the file, then from the flag when it was given.
template <typename T>
void layer(T& target, const ParamFile& file, const std::string& key, const CLI::Option* flag, const T& flag_value) {
    if (file.has(key)) {
        if constexpr (std::is_same_v<T, bool>)
            target = file.boolean(key);
        else if constexpr (std::is_integral_v<T>)
            target = static_cast<T>(file.integer(key));
        else if constexpr (std::is_same_v<T, std::string>)
            target = file.string(key);
        else
            target = file.number(key);
    }
    if (flag && flag->count() > 0) target = flag_value;
}

std::vector<fs::path> png_files(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        auto ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".png") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

void write_run_record(const fs::path& dir, KeyValueFile record) {
    fs::create_directories(dir);
    record.save(dir / "run.toml");
}

// Blue (small scales) to red (large scales).
ImageBuffer colorize_scales(const OptimalScaleMap& s, int count) {
    ImageBuffer img(s.width, s.height, 3);
    const double denom = std::max(1, count - 1);
    for (std::size_t i = 0; i < s.index.size(); ++i) {
        const double t = s.index[i] / denom;
        img.plane(0)[i] = static_cast<float>(std::clamp(1.5 - std::abs(4.0 * t - 3.0), 0.0, 1.0));
        img.plane(1)[i] = static_cast<float>(std::clamp(1.5 - std::abs(4.0 * t - 2.0), 0.0, 1.0));
        img.plane(2)[i] = static_cast<float>(std::clamp(1.5 - std::abs(4.0 * t - 1.0), 0.0, 1.0));
    }
    return img;
}

void write_scale_index(const fs::path& path, const OptimalScaleMap& s) {
    write_index_png(path, s.width, s.height, std::vector<int>(s.index.begin(), s.index.end()));
}

// ---------------------------------------------------------------- synth

struct SynthCommand {
    std::string scene, procedural, out, params_path, light_prior;
    std::vector<double> beta_t;
    double beta_l = 0, ambient = 0, spacing = 0, height = 0, sky_depth = 0, depth_scale = 0;
    int superpixels = 0, variants = 1, bits = 8;
    std::uint64_t seed = 0;
    CLI::Option *o_beta_t, *o_beta_l, *o_ambient, *o_spacing, *o_height, *o_sky, *o_depth_scale, *o_superpixels,
        *o_variants, *o_seed, *o_prior;

    void attach(CLI::App& app) {
        app.add_option("scene", scene, "Scene directory with rgb.png, depth.png|depth.pfm, labels.png, class_map.toml, camera.toml");
        app.add_option("--procedural", procedural, "Render a generated street scene of size WxH instead")->excludes(app.get_option("scene"));
        app.add_option("-o,--out", out, "Output directory")->required();
        app.add_option("--params", params_path, "Key-value parameter file")->check(CLI::ExistingFile);
        o_beta_t = app.add_option("--beta-t", beta_t, "Scattering coefficient(s), comma separated")->delimiter(',');
        o_beta_l = app.add_option("--beta-l", beta_l, "Light intensity");
        o_ambient = app.add_option("--ambient", ambient, "Ambient illuminance");
        o_spacing = app.add_option("--spacing", spacing, "Metres between lamps");
        o_height = app.add_option("--height", height, "Lamp height above the road in metres");
        o_sky = app.add_option("--sky-depth", sky_depth, "Depth assigned to sky pixels in metres");
        o_depth_scale = app.add_option("--depth-scale", depth_scale, "Multiplier from stored depth values to metres");
        o_superpixels = app.add_option("--superpixels", superpixels, "Target superpixel count (0 = by image size)");
        o_variants = app.add_option("--variants", variants, "Light-colour variants per scene, seeds seed..seed+n-1");
        o_seed = app.add_option("--seed", seed, "Base seed");
        o_prior = app.add_option("--light-prior", light_prior, "Light prior model file")->check(CLI::ExistingFile);
        app.add_option("--bits", bits, "PNG bit depth")->check(CLI::IsMember({8, 16}));
    }

    int execute(KeyValueFile& record, std::ostream& out_stream, std::ostream& err) {
        if (scene.empty() == procedural.empty()) throw UsageError("synth needs a scene directory or --procedural WxH");
        ParamFile file;
        if (!params_path.empty())
            file = ParamFile(params_path, "synth",
                             {"beta_l", "beta_t", "ambient", "spacing", "height", "target_superpixels", "sky_depth",
                              "min_light_distance", "refine", "refine_radius", "refine_eps", "refine_subsample",
                              "lights", "variants", "seed", "light_prior", "depth_scale"});
        SynthParams p;
        layer(p.beta_l, file, "beta_l", o_beta_l, beta_l);
        layer(p.ambient, file, "ambient", o_ambient, ambient);
        layer(p.layout.spacing, file, "spacing", o_spacing, spacing);
        layer(p.layout.height, file, "height", o_height, height);
        layer(p.target_superpixels, file, "target_superpixels", o_superpixels, superpixels);
        layer(p.sky_depth, file, "sky_depth", o_sky, sky_depth);
        layer(p.min_light_distance, file, "min_light_distance", nullptr, 0.0);
        layer(p.refine_illuminance, file, "refine", nullptr, false);
        layer(p.lights_enabled, file, "lights", nullptr, false);
        layer(p.refine.radius, file, "refine_radius", nullptr, 0);
        layer(p.refine.eps, file, "refine_eps", nullptr, 0.0);
        layer(p.refine.subsample, file, "refine_subsample", nullptr, 0);
        int n_variants = 1;
        layer(n_variants, file, "variants", o_variants, variants);
        std::uint64_t base_seed = 0;
        if (file.has("seed")) {
            const int s = file.integer("seed");
            if (s < 0) throw UsageError("seed must be non-negative");
            base_seed = static_cast<std::uint64_t>(s);
        }
        if (o_seed->count()) base_seed = seed;
        std::string prior_path;
        layer(prior_path, file, "light_prior", o_prior, light_prior);
        double dscale = 0.0;
        layer(dscale, file, "depth_scale", o_depth_scale, depth_scale);
        std::vector<double> betas{p.beta_t};
        if (file.has("beta_t")) betas = file.list("beta_t");
        if (o_beta_t->count()) betas = beta_t;

        if (n_variants < 1) throw UsageError("--variants must be at least 1");
        if (betas.empty()) throw UsageError("no beta_t value given");
        if (dscale < 0.0) throw UsageError("depth scale must be positive");
        for (double b : betas) {
            p.beta_t = b;
            p.validate();
        }
        const LightPriorModel model = prior_path.empty() ? LightPriorModel::default_model() : LightPriorModel::load(prior_path);
        model.validate();

        int width = 0, height_px = 0;
        if (!procedural.empty()) {
            char sep = 0;
            std::istringstream is(procedural);
            if (!(is >> width >> sep >> height_px) || sep != 'x' || !is.eof() || width < 8 || height_px < 8)
                throw UsageError("--procedural expects WxH with both sides at least 8");
        }

        record.set("synth.beta_l", p.beta_l);
        record.set("synth.beta_t", betas);
        record.set("synth.ambient", p.ambient);
        record.set("synth.spacing", p.layout.spacing);
        record.set("synth.height", p.layout.height);
        record.set("synth.target_superpixels", static_cast<double>(p.target_superpixels));
        record.set("synth.sky_depth", p.sky_depth);
        record.set("synth.min_light_distance", p.min_light_distance);
        record.set("synth.refine", p.refine_illuminance);
        record.set("synth.lights", p.lights_enabled);
        record.set("synth.refine_radius", static_cast<double>(p.refine.radius));
        record.set("synth.refine_eps", p.refine.eps);
        record.set("synth.refine_subsample", static_cast<double>(p.refine.subsample));
        record.set("synth.variants", static_cast<double>(n_variants));
        record.set("synth.seed", static_cast<double>(base_seed));
        if (!prior_path.empty()) record.set("synth.light_prior", fs::absolute(prior_path).string());
        if (dscale > 0.0) record.set("synth.depth_scale", dscale);
        record.set("run.scene", procedural.empty() ? fs::absolute(scene).string() : "procedural:" + procedural);
        record.set("run.output", fs::absolute(out).string());
        fs::create_directories(out);
        write_run_record(out, record);

        // Inputs.
        ImageBuffer rgb;
        SemanticMap labels;
        DepthMap depth;
        CameraIntrinsics camera;
        if (!procedural.empty()) {
            auto street = make_street_scene(width, height_px, base_seed);
            const fs::path sdir = fs::path(out) / "scene";
            fs::create_directories(sdir);
            write_image(sdir / "rgb.png", street.reflectance, 16);
            write_labels(sdir / "labels.png", street.labels);
            save_class_config(sdir / "class_map.toml", street.labels.class_config);
            save_camera(sdir / "camera.toml", street.camera);
            ImageBuffer d(width, height_px, 1);
            std::copy(street.depth.meters.begin(), street.depth.meters.end(), d.data().begin());
            write_pfm(sdir / "depth.pfm", d);
            rgb = std::move(street.reflectance);
            labels = std::move(street.labels);
            depth = std::move(street.depth);
            camera = street.camera;
        } else {
            const fs::path dir = scene;
            if (!fs::is_directory(dir)) throw UsageError("scene directory not found: " + scene);
            rgb = read_image(dir / "rgb.png");
            const auto config = load_class_config(dir / "class_map.toml");
            labels = read_labels(dir / "labels.png", config);
            const std::optional<double> scale = dscale > 0.0 ? std::optional<double>(dscale) : std::nullopt;
            depth = fs::exists(dir / "depth.pfm") ? read_depth(dir / "depth.pfm", scale) : read_depth(dir / "depth.png", scale);
            camera = load_camera(dir / "camera.toml");
        }

        const bool nested = n_variants > 1 || betas.size() > 1;
        int failures = 0;
        for (int v = 0; v < n_variants; ++v)
            for (double b : betas) {
                const fs::path dir = nested ? fs::path(out) / ("v" + std::to_string(v) + "_bt" + fmt_g(b)) : fs::path(out);
                try {
                    SynthParams job = p;
                    job.beta_t = b;
                    job.seed = base_seed + static_cast<std::uint64_t>(v);
                    const auto r = render_3r(rgb, labels, depth, camera, job, model);
                    fs::create_directories(dir);
                    write_image(dir / "hazy.png", r.hazy, bits);
                    write_image(dir / "lowlight.png", r.lowlight, bits);
                    write_image(dir / "lowlight_cast.png", r.lowlight_cast, bits);
                    write_image(dir / "dayhaze.png", r.dayhaze, bits);
                    write_image(dir / "L.png", r.latents.L, bits);
                    write_image(dir / "eta.png", r.latents.eta, bits);
                    write_image(dir / "t.png", r.latents.t, bits);
                    std::ofstream lights(dir / "lights.csv");
                    lights << "x,y,z,r,g,b,intensity\n";
                    for (const auto& l : r.lights)
                        lights << fmt_g(l.position.x) << ',' << fmt_g(l.position.y) << ',' << fmt_g(l.position.z) << ','
                               << fmt_g(l.color.r) << ',' << fmt_g(l.color.g) << ',' << fmt_g(l.color.b) << ','
                               << fmt_g(l.intensity) << '\n';
                    if (!r.warning.empty()) err << dir.string() << ": warning: " << r.warning << '\n';
                    out_stream << dir.string() << '\n';
                } catch (const std::exception& e) {
                    ++failures;
                    err << dir.string() << ": error: " << e.what() << '\n';
                }
            }
        return failures ? kExitFailure : kExitOk;
    }
};

// ---------------------------------------------------------------- dehaze

struct DehazeCommand {
    std::vector<std::string> inputs;
    std::string out, params_path;
    double t0 = 0, eta_min = 0, l_min = 0, eps_tie = 0;
    int omega_t = 0, omega_l = 0, bits = 8;
    bool no_refine = false, dense = false, dump_intermediates = false, dump_scales = false;
    CLI::Option *o_t0, *o_eta_min, *o_l_min, *o_eps, *o_omega_t, *o_omega_l, *o_no_refine, *o_dense;

    void attach(CLI::App& app) {
        app.add_option("inputs", inputs, "Input PNG files or directories of PNGs")->required();
        app.add_option("-o,--out", out, "Output directory")->required();
        app.add_option("--params", params_path, "Key-value parameter file")->check(CLI::ExistingFile);
        o_t0 = app.add_option("--t0", t0, "Lower bound on transmission");
        o_eta_min = app.add_option("--eta-min", eta_min, "Lower bound on the colour cast");
        o_l_min = app.add_option("--l-min", l_min, "Lower bound on illuminance in the second pass");
        o_eps = app.add_option("--epsilon-tie", eps_tie, "Tie tolerance for the optimal scale");
        o_omega_t = app.add_option("--omega-t", omega_t, "Dark-channel window for transmission");
        o_omega_l = app.add_option("--omega-l", omega_l, "Window for re-estimating illuminance");
        o_no_refine = app.add_flag("--no-refine", no_refine, "Skip guided-filter refinement");
        o_dense = app.add_flag("--dense", dense, "Evaluate every scale at full resolution");
        app.add_flag("--dump-intermediates", dump_intermediates, "Also write eta.png, L.png, t.png and s_star.png");
        app.add_flag("--dump-scales", dump_scales, "Also write s_star.png and s_star_color.png");
        app.add_option("--bits", bits, "PNG bit depth")->check(CLI::IsMember({8, 16}));
    }

    DehazeParams resolve() const {
        ParamFile file;
        if (!params_path.empty())
            file = ParamFile(params_path, "dehaze",
                             {"scales", "downsample", "omega_t", "omega_l", "t0", "eta_min", "L_min", "epsilon_tie",
                              "refine", "eta_filter_radius", "eta_filter_eps", "eta_filter_subsample", "lt_filter_radius",
                              "lt_filter_eps", "lt_filter_subsample"});
        DehazeParams p;
        if (file.has("scales")) {
            p.scales.sizes.clear();
            for (double v : file.list("scales")) {
                if (v != std::floor(v)) throw UsageError("scales must be integers");
                p.scales.sizes.push_back(static_cast<int>(v));
            }
        }
        layer(p.scales.downsample, file, "downsample", o_dense, !dense);
        layer(p.omega_t, file, "omega_t", o_omega_t, omega_t);
        layer(p.omega_l, file, "omega_l", o_omega_l, omega_l);
        layer(p.t0, file, "t0", o_t0, t0);
        layer(p.eta_min, file, "eta_min", o_eta_min, eta_min);
        layer(p.L_min, file, "L_min", o_l_min, l_min);
        layer(p.epsilon_tie, file, "epsilon_tie", o_eps, eps_tie);
        layer(p.refine, file, "refine", o_no_refine, !no_refine);
        layer(p.eta_filter.radius, file, "eta_filter_radius", nullptr, 0);
        layer(p.eta_filter.eps, file, "eta_filter_eps", nullptr, 0.0);
        layer(p.eta_filter.subsample, file, "eta_filter_subsample", nullptr, 0);
        layer(p.lt_filter.radius, file, "lt_filter_radius", nullptr, 0);
        layer(p.lt_filter.eps, file, "lt_filter_eps", nullptr, 0.0);
        layer(p.lt_filter.subsample, file, "lt_filter_subsample", nullptr, 0);
        p.validate();
        return p;
    }

    static void record_params(KeyValueFile& record, const DehazeParams& p) {
        record.set("dehaze.scales", std::vector<double>(p.scales.sizes.begin(), p.scales.sizes.end()));
        record.set("dehaze.downsample", p.scales.downsample);
        record.set("dehaze.omega_t", static_cast<double>(p.omega_t));
        record.set("dehaze.omega_l", static_cast<double>(p.omega_l));
        record.set("dehaze.t0", p.t0);
        record.set("dehaze.eta_min", p.eta_min);
        record.set("dehaze.L_min", p.L_min);
        record.set("dehaze.epsilon_tie", p.epsilon_tie);
        record.set("dehaze.refine", p.refine);
        record.set("dehaze.eta_filter_radius", static_cast<double>(p.eta_filter.radius));
        record.set("dehaze.eta_filter_eps", p.eta_filter.eps);
        record.set("dehaze.eta_filter_subsample", static_cast<double>(p.eta_filter.subsample));
        record.set("dehaze.lt_filter_radius", static_cast<double>(p.lt_filter.radius));
        record.set("dehaze.lt_filter_eps", p.lt_filter.eps);
        record.set("dehaze.lt_filter_subsample", static_cast<double>(p.lt_filter.subsample));
    }

    int execute(KeyValueFile& record, std::ostream& out_stream, std::ostream& err) {
        const DehazeParams p = resolve();
        std::vector<fs::path> files;
        for (const auto& in : inputs) {
            if (fs::is_directory(in)) {
                const auto found = png_files(in);
                files.insert(files.end(), found.begin(), found.end());
            } else {
                files.emplace_back(in);
            }
        }
        if (files.empty()) throw UsageError("no input images");
        record_params(record, p);
        std::string joined;
        for (const auto& f : files) joined += (joined.empty() ? "" : ";") + fs::absolute(f).string();
        record.set("run.inputs", joined);
        record.set("run.output", fs::absolute(out).string());
        write_run_record(out, record);

        const bool nested = files.size() > 1;
        int failures = 0;
        for (const auto& f : files) {
            const fs::path dir = nested ? fs::path(out) / f.stem() : fs::path(out);
            try {
                const ImageBuffer I = read_image(f);
                const auto r = osfd(I, p);
                fs::create_directories(dir);
                write_image(dir / "J.png", r.J, bits);
                if (dump_intermediates) {
                    write_image(dir / "eta.png", r.latents.eta, bits);
                    write_image(dir / "L.png", r.latents.L, bits);
                    write_image(dir / "t.png", r.latents.t, bits);
                }
                if (dump_intermediates || dump_scales) write_scale_index(dir / "s_star.png", r.s_star);
                if (dump_scales) write_image(dir / "s_star_color.png", colorize_scales(r.s_star, p.scales.count()));
                out_stream << (dir / "J.png").string() << '\n';
            } catch (const std::exception& e) {
                ++failures;
                err << f.string() << ": error: " << e.what() << '\n';
            }
        }
        return failures ? kExitFailure : kExitOk;
    }
};

// ---------------------------------------------------------------- eval

struct EvalCommand {
    std::string pred, truth, out = ".";

    void attach(CLI::App& app) {
        app.add_option("pred_dir", pred, "Directory of predictions")->required()->check(CLI::ExistingDirectory);
        app.add_option("truth_dir", truth, "Directory of ground-truth images")->required()->check(CLI::ExistingDirectory);
        app.add_option("-o,--out", out, "Directory for metrics.csv and run.toml");
    }

    int execute(KeyValueFile& record, std::ostream& out_stream, std::ostream& err) {
        record.set("run.pred_dir", fs::absolute(pred).string());
        record.set("run.truth_dir", fs::absolute(truth).string());
        record.set("run.output", fs::absolute(out).string());
        write_run_record(out, record);
        const auto report = evaluate_dir(pred, truth);
        std::ofstream csv(fs::path(out) / "metrics.csv");
        report.write_csv(csv);
        report.write_csv(out_stream);
        for (const auto& r : report.rows)
            if (!r.ok) err << r.path << ": failed: " << r.error << '\n';
        return report.rows.empty() || report.failed() == static_cast<int>(report.rows.size()) ? kExitFailure : kExitOk;
    }
};

// ---------------------------------------------------------------- lights

struct LightsCommand {
    int n = 10;
    std::uint64_t seed = 0;
    std::string prior, out = ".";

    void attach(CLI::App& app) {
        app.add_option("-n,--count", n, "Number of colours")->check(CLI::PositiveNumber);
        app.add_option("--seed", seed, "Seed");
        app.add_option("--light-prior", prior, "Light prior model file")->check(CLI::ExistingFile);
        app.add_option("-o,--out", out, "Directory for lights.csv and run.toml");
    }

    int execute(KeyValueFile& record, std::ostream& out_stream, std::ostream&) {
        const LightPriorModel model = prior.empty() ? LightPriorModel::default_model() : LightPriorModel::load(prior);
        model.validate();
        record.set("lights.count", static_cast<double>(n));
        record.set("lights.seed", static_cast<double>(seed));
        if (!prior.empty()) record.set("lights.light_prior", fs::absolute(prior).string());
        record.set("run.output", fs::absolute(out).string());
        write_run_record(out, record);
        std::ostringstream csv;
        csv << "r,g,b\n";
        std::mt19937_64 rng(seed);
        for (int i = 0; i < n; ++i) {
            const auto c = sample_light_color(model, rng);
            csv << fmt_fixed(c.r, 6) << ',' << fmt_fixed(c.g, 6) << ',' << fmt_fixed(c.b, 6) << '\n';
        }
        std::ofstream(fs::path(out) / "lights.csv") << csv.str();
        out_stream << csv.str();
        return kExitOk;
    }
};

// ---------------------------------------------------------------- prior-fit

struct PriorFitCommand {
    std::string dir, out = ".";
    LightPriorFitOptions opt;

    void attach(CLI::App& app) {
        app.add_option("dir", dir, "Directory of nighttime PNG images")->required()->check(CLI::ExistingDirectory);
        app.add_option("-o,--out", out, "Directory for light_prior.toml and run.toml");
        app.add_option("--resize", opt.resize_to, "Images are resized to this square size")->check(CLI::PositiveNumber);
        app.add_option("--min-scale", opt.min_scale, "Smallest patch size")->check(CLI::PositiveNumber);
        app.add_option("--max-scale", opt.max_scale, "Largest patch size")->check(CLI::PositiveNumber);
        app.add_option("--scale-count", opt.scale_count, "Number of patch sizes")->check(CLI::PositiveNumber);
        app.add_option("--bins", opt.bins, "Green histogram bins")->check(CLI::PositiveNumber);
        app.add_option("--coverage", opt.coverage, "Fraction of estimates the band must cover")->check(CLI::Range(0.0, 1.0));
        app.add_option("--stride", opt.stride, "Patch stride")->check(CLI::PositiveNumber);
    }

    int execute(KeyValueFile& record, std::ostream& out_stream, std::ostream& err) {
        if (opt.min_scale > opt.max_scale || opt.max_scale > opt.resize_to)
            throw UsageError("need min-scale <= max-scale <= resize");
        record.set("prior_fit.resize", static_cast<double>(opt.resize_to));
        record.set("prior_fit.min_scale", static_cast<double>(opt.min_scale));
        record.set("prior_fit.max_scale", static_cast<double>(opt.max_scale));
        record.set("prior_fit.scale_count", static_cast<double>(opt.scale_count));
        record.set("prior_fit.bins", static_cast<double>(opt.bins));
        record.set("prior_fit.coverage", opt.coverage);
        record.set("prior_fit.stride", static_cast<double>(opt.stride));
        record.set("run.input", fs::absolute(dir).string());
        record.set("run.output", fs::absolute(out).string());
        write_run_record(out, record);

        std::vector<ImageBuffer> corpus;
        for (const auto& f : png_files(dir)) {
            try {
                auto img = read_image(f);
                if (img.channels() != 3) throw std::runtime_error("not an RGB image");
                corpus.push_back(std::move(img));
            } catch (const std::exception& e) {
                err << f.string() << ": skipped: " << e.what() << '\n';
            }
        }
        if (corpus.empty()) {
            err << "prior-fit: no usable images in " << dir << '\n';
            return kExitFailure;
        }
        LightPriorModel model;
        try {
            model = fit_light_prior(corpus, opt);
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error(e.what());
        }
        model.save(fs::path(out) / "light_prior.toml");
        out_stream << "images " << corpus.size() << "\nslope " << fmt_g(model.slope) << "\nintercept "
                   << fmt_g(model.intercept) << "\nband_halfwidth " << fmt_g(model.band_halfwidth) << '\n';
        return kExitOk;
    }
};

// ---------------------------------------------------------------- bench

struct BenchCommand {
    std::string input, out = ".";
    std::vector<int> sizes{256, 512, 1024};
    int runs = 3;
    std::uint64_t seed = 1;

    void attach(CLI::App& app) {
        app.add_option("--input", input, "Image to resize to each size (default: a rendered street scene)")
            ->check(CLI::ExistingFile);
        app.add_option("--sizes", sizes, "Square sizes, comma separated")->delimiter(',')->check(CLI::PositiveNumber);
        app.add_option("--runs", runs, "Timed runs per size; the median is reported")->check(CLI::PositiveNumber);
        app.add_option("--seed", seed, "Seed of the rendered scene");
        app.add_option("-o,--out", out, "Directory for bench.csv and run.toml");
    }

    ImageBuffer make_input(int size) const {
        if (!input.empty()) {
            const ImageBuffer src = read_image(input);
            const bool shrink = size <= src.width() && size <= src.height();
            return resize(src, size, size, shrink ? ResampleMode::kBilinearDown : ResampleMode::kBilinearUp);
        }
        const auto scene = make_street_scene(size, size, seed);
        SynthParams sp;
        sp.seed = seed;
        return render_3r(scene.reflectance, scene.labels, scene.depth, scene.camera, sp, LightPriorModel::default_model())
            .hazy;
    }

    int execute(KeyValueFile& record, std::ostream& out_stream, std::ostream&) {
        for (int s : sizes)
            if (s < 16) throw UsageError("bench sizes must be at least 16");
        record.set("bench.sizes", std::vector<double>(sizes.begin(), sizes.end()));
        record.set("bench.runs", static_cast<double>(runs));
        record.set("bench.seed", static_cast<double>(seed));
        if (!input.empty()) record.set("run.input", fs::absolute(input).string());
        record.set("run.output", fs::absolute(out).string());
        write_run_record(out, record);

        std::ostringstream table, csv;
        csv << "size,pixels,median_ms,min_ms\n";
        table << "size        pixels     median_ms     min_ms\n";
        for (int s : sizes) {
            const ImageBuffer I = make_input(s);
            std::vector<double> ms;
            for (int r = 0; r < runs; ++r) {
                const auto start = std::chrono::steady_clock::now();
                const auto res = osfd(I);
                const auto stop = std::chrono::steady_clock::now();
                ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
            }
            std::sort(ms.begin(), ms.end());
            const double median = ms.size() % 2 ? ms[ms.size() / 2] : 0.5 * (ms[ms.size() / 2 - 1] + ms[ms.size() / 2]);
            char line[128];
            std::snprintf(line, sizeof line, "%-11s %-10lld %10.1f %10.1f\n",
                          (std::to_string(s) + "x" + std::to_string(s)).c_str(), static_cast<long long>(s) * s, median,
                          ms.front());
            table << line;
            csv << s << ',' << static_cast<long long>(s) * s << ',' << fmt_fixed(median, 3) << ',' << fmt_fixed(ms.front(), 3)
                << '\n';
            out_stream << line << std::flush;
        }
        std::ofstream(fs::path(out) / "bench.csv") << csv.str();
        return kExitOk;
    }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Nighttime haze synthesis, removal and evaluation", "nhaze"};
    app.require_subcommand(1);
    int threads = 1;
    auto* o_threads = app.add_option("--threads", threads, "Worker threads (default: NHAZE_THREADS or 1)");

    SynthCommand synth;
    DehazeCommand dehaze;
    EvalCommand eval;
    LightsCommand lights;
    PriorFitCommand prior_fit;
    BenchCommand bench;
    auto* s_synth = app.add_subcommand("synth", "Render nighttime hazy images from a clear scene");
    auto* s_dehaze = app.add_subcommand("dehaze", "Remove nighttime haze");
    auto* s_eval = app.add_subcommand("eval", "Compare predictions against ground truth");
    auto* s_lights = app.add_subcommand("lights", "Sample light colours from the prior");
    auto* s_prior = app.add_subcommand("prior-fit", "Fit the light-colour prior from nighttime images");
    auto* s_bench = app.add_subcommand("bench", "Time dehazing over image sizes");
    synth.attach(*s_synth);
    dehaze.attach(*s_dehaze);
    eval.attach(*s_eval);
    lights.attach(*s_lights);
    prior_fit.attach(*s_prior);
    bench.attach(*s_bench);
    for (auto* sub : {s_synth, s_dehaze, s_eval, s_lights, s_prior, s_bench})
        sub->add_option("--threads", threads, "Worker threads (default: NHAZE_THREADS or 1)");

    std::vector<const char*> argv{"nhaze"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    const CLI::Option* thread_flag = o_threads;
    std::string command;
    for (auto* sub : app.get_subcommands()) {
        command = sub->get_name();
        if (sub->get_option("--threads")->count()) thread_flag = sub->get_option("--threads");
    }

    KeyValueFile record;
    record.set("command", command);
    int result = kExitOk;
    try {
        const int n = resolve_threads(thread_flag, threads);
        set_thread_count(n);
        record.set("threads", static_cast<double>(n));
        if (command == "synth") result = synth.execute(record, out, err);
        else if (command == "dehaze") result = dehaze.execute(record, out, err);
        else if (command == "eval") result = eval.execute(record, out, err);
        else if (command == "lights") result = lights.execute(record, out, err);
        else if (command == "prior-fit") result = prior_fit.execute(record, out, err);
        else result = bench.execute(record, out, err);
    } catch (const UsageError& e) {
        err << "nhaze " << command << ": " << e.what() << '\n';
        result = kExitUsage;
    } catch (const std::invalid_argument& e) {
        // Parameter validation failures.
        err << "nhaze " << command << ": " << e.what() << '\n';
        result = kExitUsage;
    } catch (const std::exception& e) {
        err << "nhaze " << command << ": " << e.what() << '\n';
        result = kExitFailure;
    }
    set_thread_count(1);
    return result;
}

}  // namespace nhaze::cli
