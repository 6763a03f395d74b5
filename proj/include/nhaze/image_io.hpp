#pragma once

#include <filesystem>
#include <optional>

#include "nhaze/image.hpp"

namespace nhaze {

/// Reads an 8- or 16-bit PNG (gray or RGB) and normalises codes by
/// 2^bits - 1. Throws std::runtime_error on unreadable files and
/// unsupported channel counts.
ImageBuffer read_image(const std::filesystem::path& path);

/// Writes values clamped to [0,1] and rounded to the nearest code.
void write_image(const std::filesystem::path& path, const ImageBuffer& img, int bits = 8);

/// Little-endian or big-endian PFM (`Pf` gray, `PF` colour). Rows are stored
/// bottom-to-top as the format requires. NaN samples are rejected.
ImageBuffer read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const ImageBuffer& img);

/// Depth from PNG (raw code * scale, default millimetres -> metres) or PFM
/// (value * scale, default metres). Non-positive or non-finite depths are
/// flagged as sky.
DepthMap read_depth(const std::filesystem::path& path, std::optional<double> depth_scale = std::nullopt);

/// Raw integer label ids from an 8/16-bit single-channel PNG.
SemanticMap read_labels(const std::filesystem::path& path, const ClassConfig& config);
void write_labels(const std::filesystem::path& path, const SemanticMap& labels);

/// `class_map.toml`: integer lists under `road`, `sky` and optionally `other`.
ClassConfig load_class_config(const std::filesystem::path& path);
/// `camera.toml`: `fx`, `fy`, `cx`, `cy`.
CameraIntrinsics load_camera(const std::filesystem::path& path);
void save_class_config(const std::filesystem::path& path, const ClassConfig& config);
void save_camera(const std::filesystem::path& path, const CameraIntrinsics& camera);

/// Writes an index map as an 8-bit gray PNG (values must fit in a byte).
void write_index_png(const std::filesystem::path& path, int width, int height, const std::vector<int>& index);

}  // namespace nhaze
