#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <png.h>

#include "emfield/dataset_io.hpp"
#include "emfield/errors.hpp"

namespace emfield::io
{

namespace
{

bool has_png_signature(const std::filesystem::path &path)
{
  std::ifstream in(path, std::ios::binary);
  std::array<unsigned char, 8> sig{};
  in.read(reinterpret_cast<char *>(sig.data()), sig.size());
  return in.gcount() == 8 && png_sig_cmp(sig.data(), 0, 8) == 0;
}

Image8 read_png(const std::filesystem::path &path)
{
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str()))
  {
    throw IoError("cannot read PNG " + path.string() + ": " + img.message);
  }
  if (img.format & PNG_FORMAT_FLAG_LINEAR)
  {
    png_image_free(&img);
    throw IoError("16-bit PNG not supported: " + path.string());
  }
  Image8 out;
  out.width = img.width;
  out.height = img.height;
  const bool color = img.format & PNG_FORMAT_FLAG_COLOR;
  const bool alpha = img.format & PNG_FORMAT_FLAG_ALPHA;
  out.channels = (color ? 3u : 1u) + (alpha ? 1u : 0u);
  img.format = color ? (alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB)
                     : (alpha ? PNG_FORMAT_GA : PNG_FORMAT_GRAY);
  out.pixels.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr))
  {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IoError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return out;
}

// Binary PGM (P5) / PPM (P6), maxval <= 255.
Image8 read_pnm(const std::filesystem::path &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw IoError("cannot open " + path.string());
  }
  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P6")
  {
    throw IoError("unsupported image format (expected PNG, P5 or P6): " + path.string());
  }
  auto next_int = [&]() {
    in >> std::ws;
    while (in.peek() == '#')
    {
      std::string skip;
      std::getline(in, skip);
      in >> std::ws;
    }
    long v = -1;
    in >> v;
    if (!in)
    {
      throw IoError("malformed PNM header in " + path.string());
    }
    return v;
  };
  const long w = next_int();
  const long h = next_int();
  const long maxval = next_int();
  if (maxval <= 0 || maxval > 255)
  {
    throw IoError("only 8-bit PNM images are supported: " + path.string());
  }
  in.get();  // single whitespace before the raster
  Image8 out;
  out.width = static_cast<std::uint32_t>(std::max(w, 0L));
  out.height = static_cast<std::uint32_t>(std::max(h, 0L));
  out.channels = magic == "P5" ? 1 : 3;
  out.pixels.resize(std::size_t(out.width) * out.height * out.channels);
  in.read(reinterpret_cast<char *>(out.pixels.data()), static_cast<std::streamsize>(out.pixels.size()));
  if (static_cast<std::size_t>(in.gcount()) != out.pixels.size())
  {
    throw IoError("PNM raster truncated: " + path.string());
  }
  return out;
}

bool is_pnm_extension(const std::filesystem::path &path)
{
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

// Perceptually ordered dark-blue -> green -> yellow ramp sampled from viridis.
constexpr std::array<std::array<double, 3>, 9> kViridis = {{
    {68, 1, 84},
    {71, 44, 122},
    {59, 81, 139},
    {44, 113, 142},
    {33, 144, 141},
    {39, 173, 129},
    {92, 200, 99},
    {170, 220, 50},
    {253, 231, 37},
}};

}  // namespace

Image8 read_image(const std::filesystem::path &path)
{
  if (!std::filesystem::is_regular_file(path))
  {
    throw IoError("image not found: " + path.string());
  }
  Image8 img = has_png_signature(path) ? read_png(path) : read_pnm(path);
  if (img.width == 0 || img.height == 0)
  {
    throw IoError("zero-size image: " + path.string());
  }
  return img;
}

void write_image(const std::filesystem::path &path, const Image8 &image)
{
  detail::require(image.width > 0 && image.height > 0, "cannot write an empty image");
  detail::require(image.channels == 1 || image.channels == 3,
                  "only gray or RGB images can be written");
  detail::require(image.pixels.size() == std::size_t(image.width) * image.height * image.channels,
                  "image buffer size mismatch");
  if (is_pnm_extension(path))
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
    {
      throw IoError("cannot write " + path.string());
    }
    out << (image.channels == 1 ? "P5" : "P6") << '\n'
        << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char *>(image.pixels.data()),
              static_cast<std::streamsize>(image.pixels.size()));
    if (!out)
    {
      throw IoError("write failed for " + path.string());
    }
    return;
  }
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = image.width;
  img.height = image.height;
  img.format = image.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, image.pixels.data(), 0, nullptr))
  {
    throw IoError("cannot write PNG " + path.string() + ": " + img.message);
  }
}

GridArray<std::uint8_t> image_to_gray(const Image8 &image, LumaReduction luma)
{
  GridArray<std::uint8_t> out(image.height, image.width);
  const std::size_t n = std::size_t(image.width) * image.height;
  if (image.channels == 1)
  {
    std::copy(image.pixels.begin(), image.pixels.begin() + static_cast<std::ptrdiff_t>(n), out.data());
    return out;
  }
  if (luma == LumaReduction::reject)
  {
    throw IoError("expected a single-channel 8-bit image, got " + std::to_string(image.channels) +
                  " channels (no luma reduction requested)");
  }
  const std::uint32_t ch = image.channels;
  for (std::size_t i = 0; i < n; ++i)
  {
    const std::uint8_t *p = image.pixels.data() + i * ch;
    if (luma == LumaReduction::first_channel || ch < 3)
    {
      out.data()[i] = p[0];
    }
    else
    {
      const double y = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
      out.data()[i] = static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
    }
  }
  return out;
}

MaskArray load_building_mask(const std::filesystem::path &path, std::uint8_t threshold,
                             LumaReduction luma)
{
  const auto gray = image_to_gray(read_image(path), luma);
  return (gray >= threshold).cast<std::uint8_t>();
}

RealMapd load_groundtruth_map(const std::filesystem::path &path, const GridSpec &grid,
                              std::optional<NormWindow> window, LumaReduction luma)
{
  const auto gray = image_to_gray(read_image(path), luma);
  detail::require(gray.rows() == grid.rows() && gray.cols() == grid.cols(),
                  "ground-truth image " + path.string() + " is " + std::to_string(gray.cols()) +
                      "x" + std::to_string(gray.rows()) + ", scene grid is " +
                      std::to_string(grid.cols()) + "x" + std::to_string(grid.rows()));
  GridArray<double> v = gray.cast<double>() / 255.0;
  return {grid, std::move(v), MapUnit::normalized, window};
}

Image8 render_heatmap(const RealMapd &map, Colormap colormap)
{
  detail::require(map.is_normalized(), "heatmap export requires a normalized map with values in [0, 1]");
  Image8 img;
  img.width = static_cast<std::uint32_t>(map.values.cols());
  img.height = static_cast<std::uint32_t>(map.values.rows());
  img.channels = colormap == Colormap::grayscale ? 1 : 3;
  img.pixels.reserve(std::size_t(img.width) * img.height * img.channels);
  for (Eigen::Index i = 0; i < map.values.size(); ++i)
  {
    const double v = map.values.data()[i];
    if (colormap == Colormap::grayscale)
    {
      img.pixels.push_back(static_cast<std::uint8_t>(std::lround(255.0 * v)));
      continue;
    }
    const double pos = v * static_cast<double>(kViridis.size() - 1);
    const std::size_t lo = std::min<std::size_t>(static_cast<std::size_t>(pos), kViridis.size() - 2);
    const double t = pos - static_cast<double>(lo);
    for (int c = 0; c < 3; ++c)
    {
      const double x = (1.0 - t) * kViridis[lo][c] + t * kViridis[lo + 1][c];
      img.pixels.push_back(static_cast<std::uint8_t>(std::lround(x)));
    }
  }
  return img;
}

void export_heatmap(const RealMapd &map, const std::filesystem::path &path, Colormap colormap)
{
  write_image(path, render_heatmap(map, colormap));
}

}  // namespace emfield::io
