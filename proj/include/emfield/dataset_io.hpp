#pragma once

// On-disk formats: the PortableGrid binary container, 8-bit images (PNG and
// binary PGM/PPM), and the key/value scene manifest.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emfield/grid.hpp"

namespace emfield::io
{

// ---------------------------------------------------------------------------
// PortableGrid
//
//   offset  size        field
//   0       8           magic "EMFGRID1"
//   8       4           dtype, uint32 LE (0 = f32, 1 = c64)
//   12      4           H, uint32 LE
//   16      4           W, uint32 LE
//   20      H*W*s       payload, row-major, little-endian IEEE-754 binary32
//                       (c64 cells are real, imag)
//   20+H*W*s 4          CRC-32 (IEEE 802.3, as zlib) of the payload bytes
// ---------------------------------------------------------------------------

inline constexpr char kGridMagic[8] = {'E', 'M', 'F', 'G', 'R', 'I', 'D', '1'};

enum class GridDtype : std::uint32_t
{
  f32 = 0,
  c64 = 1,
};

struct PortableGrid
{
  GridDtype dtype = GridDtype::f32;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  /// rows*cols floats for f32, 2*rows*cols interleaved for c64
  std::vector<float> payload;

  std::size_t cell_width() const { return dtype == GridDtype::c64 ? 2 : 1; }
};

std::vector<std::uint8_t> encode_grid(const PortableGrid &grid);
PortableGrid decode_grid(std::span<const std::uint8_t> bytes);

void save_grid(const std::filesystem::path &path, const PortableGrid &grid);
PortableGrid load_grid(const std::filesystem::path &path);

PortableGrid to_portable(const ComplexFieldd &field);
PortableGrid to_portable(const RealMapd &map);
PortableGrid to_portable(const GridArray<double> &values);
ComplexFieldd field_from_portable(const PortableGrid &grid, const GridSpec &spec);
GridArray<double> array_from_portable(const PortableGrid &grid);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);
std::uint32_t file_crc32(const std::filesystem::path &path);

// ---------------------------------------------------------------------------
// Images
// ---------------------------------------------------------------------------

struct Image8
{
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t channels = 1;  // 1 gray, 2 gray+alpha, 3 RGB, 4 RGBA
  std::vector<std::uint8_t> pixels;  // row-major, interleaved
};

/// How multi-channel images are reduced to one channel on load.
enum class LumaReduction
{
  reject,     // anything but single-channel input is an error
  rec601,     // Y = 0.299 R + 0.587 G + 0.114 B, alpha ignored
  first_channel,
};

/// PNG or binary PGM/PPM, detected from the file signature. 8-bit only.
Image8 read_image(const std::filesystem::path &path);
/// PNG unless the extension is .pgm/.ppm.
void write_image(const std::filesystem::path &path, const Image8 &image);

GridArray<std::uint8_t> image_to_gray(const Image8 &image, LumaReduction luma);

/// pixel >= threshold -> 1 (building), else 0.
MaskArray load_building_mask(const std::filesystem::path &path, std::uint8_t threshold = 128,
                             LumaReduction luma = LumaReduction::reject);

/// 8-bit gray v -> v / 255 on the given grid (dimensions must match).
RealMapd load_groundtruth_map(const std::filesystem::path &path, const GridSpec &grid,
                              std::optional<NormWindow> window = std::nullopt,
                              LumaReduction luma = LumaReduction::reject);

enum class Colormap
{
  grayscale,
  viridis,
};

/// Normalized map -> 8-bit image; grayscale writes round(255 v).
void export_heatmap(const RealMapd &map, const std::filesystem::path &path,
                    Colormap colormap = Colormap::grayscale);
Image8 render_heatmap(const RealMapd &map, Colormap colormap);

// ---------------------------------------------------------------------------
// Scene manifest: UTF-8 "key = value" lines, '#' starts a comment. Relative
// paths resolve against the manifest's directory.
// ---------------------------------------------------------------------------

struct SceneManifest
{
  std::filesystem::path source;
  long height = 0;
  long width = 0;
  double pixel_length_m = 0.0;
  double frequency_hz = 0.0;
  long tx_row = 0;
  long tx_col = 0;
  double eps_r = 5.0;
  double sigma_s_per_m = 0.1;
  std::filesystem::path mask_path;
  std::optional<std::filesystem::path> truth_path;
  std::optional<std::filesystem::path> terrain_path;
  NormWindow window;
};

SceneManifest parse_manifest(const std::string &text, const std::filesystem::path &base_dir);
SceneManifest read_manifest(const std::filesystem::path &path);

struct LoadedScene
{
  SceneManifest manifest;
  Scene scene;
  std::optional<RealMapd> truth;
  /// loaded for completeness; the physics core does not consume it
  std::optional<GridArray<std::uint8_t>> terrain;
};

/// Reads the manifest, checks every referenced file and dimension, then loads.
LoadedScene load_scene(const std::filesystem::path &manifest_path);

}  // namespace emfield::io
