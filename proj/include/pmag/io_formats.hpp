#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pmag/attention_map.hpp"
#include "pmag/grid.hpp"
#include "pmag/image.hpp"
#include "pmag/refinement.hpp"

namespace pmag {

// ---------------------------------------------------------------------------
// NPY 1.0 subset: little-endian float32 ('<f4') or bool ('|b1'), C order,
// 1 to 4 dimensions.

enum class NpyDtype { Float32, Bool };

struct NpyArray {
  NpyDtype dtype = NpyDtype::Float32;
  std::vector<std::size_t> shape;
  std::vector<float> f32;        // used when dtype == Float32
  std::vector<std::uint8_t> b1;  // used when dtype == Bool; 0 or 1

  std::size_t element_count() const;
  friend bool operator==(const NpyArray&, const NpyArray&) = default;
};

/// Serialized bytes, header padded so the preamble is a multiple of 64.
std::string encode_npy(const NpyArray& array);
NpyArray decode_npy(std::string_view bytes);

NpyArray read_npy(const std::filesystem::path& path);
void write_npy(const std::filesystem::path& path, const NpyArray& array);

NpyArray to_npy(const AttnStack& attn);
/// Values are rounded to float32.
NpyArray to_npy(const Grid2<double>& grid);
NpyArray to_npy(const TokenMask& mask);

/// Requires a 4-D float array.
AttnStack stack_from_npy(const NpyArray& array);
/// Requires a 2-D float array.
Grid2<double> grid_from_npy(const NpyArray& array);
/// Requires a 2-D bool array.
TokenMask mask_from_npy(const NpyArray& array);

// ---------------------------------------------------------------------------
// 8-bit PNG, grayscale or RGB. Alpha channels are dropped on read.

ImageBuffer read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const ImageBuffer& image);

/// round(v * 255) with halves rounded up, clamped to [0, 255].
std::uint8_t quantize_unit(double v);

// ---------------------------------------------------------------------------
// Run manifest listing one attention dump per refinement pass.

struct RunManifest {
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::size_t num_layers = 0;
  std::size_t num_heads = 0;
  /// As written in the file; relative entries resolve against the manifest's directory.
  std::vector<std::string> iterations;

  StackShape shape() const { return {num_layers, num_heads, grid_h, grid_w}; }
};

RunManifest parse_manifest(std::string_view json_text);
RunManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);

/// Reads every listed dump and checks it against the declared shape before
/// returning. Shape disagreements raise ValidationError.
std::vector<AttnStack> load_manifest_stacks(const std::filesystem::path& manifest_path);

/// Synthetic provider description:
/// {"grid_h": int, "grid_w": int, "num_layers": int (default 32), "leak": real,
///  "blobs": [{"center": [row, col], "sigma": real, "weight": real}, ...]}
SyntheticSpec parse_synthetic_spec(std::string_view json_text);
SyntheticSpec read_synthetic_spec(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Heatmap visualization.

using Rgb8 = std::array<std::uint8_t, 3>;

/// The 256-entry viridis table used by render_heat.
const std::array<Rgb8, 256>& colormap_lut();

/// Colormapped RGB image of a map with values in [0, 1].
ImageBuffer render_heat(const Grid2<double>& map);
/// Alpha-blends the colormapped map over `overlay`: out = (1 - blend) * overlay
/// + blend * color. The map is bilinearly upsampled to the overlay size.
ImageBuffer render_heat(const Grid2<double>& map, const ImageBuffer& overlay, double blend);

}  // namespace pmag
