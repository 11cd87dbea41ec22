#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "emfield/dataset_io.hpp"
#include "emfield/errors.hpp"

namespace emfield::io
{

namespace
{

constexpr std::size_t kHeaderBytes = 20;

void put_u32(std::vector<std::uint8_t> &out, std::uint32_t v)
{
  for (int i = 0; i < 4; ++i)
  {
    out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFFu));
  }
}

std::uint32_t get_u32(const std::uint8_t *p)
{
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::vector<std::uint8_t> read_all(const std::filesystem::path &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw IoError("cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes)
{
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths
  std::size_t offset = 0;
  while (offset < bytes.size())
  {
    const std::size_t chunk = std::min<std::size_t>(bytes.size() - offset, 1u << 30);
    crc = ::crc32(crc, bytes.data() + offset, static_cast<uInt>(chunk));
    offset += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::uint32_t file_crc32(const std::filesystem::path &path)
{
  const auto bytes = read_all(path);
  return crc32(bytes);
}

std::vector<std::uint8_t> encode_grid(const PortableGrid &grid)
{
  detail::require(grid.rows > 0 && grid.cols > 0, "PortableGrid dimensions must be positive");
  const std::size_t count = std::size_t(grid.rows) * grid.cols * grid.cell_width();
  detail::require(grid.payload.size() == count, "PortableGrid payload length does not match H*W");
  std::vector<std::uint8_t> out(std::begin(kGridMagic), std::end(kGridMagic));
  out.reserve(kHeaderBytes + 4 * count + 4);
  put_u32(out, static_cast<std::uint32_t>(grid.dtype));
  put_u32(out, grid.rows);
  put_u32(out, grid.cols);
  for (float f : grid.payload)
  {
    put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  const std::uint32_t crc = crc32(std::span(out).subspan(kHeaderBytes));
  put_u32(out, crc);
  return out;
}

PortableGrid decode_grid(std::span<const std::uint8_t> bytes)
{
  if (bytes.size() < sizeof(kGridMagic) ||
      std::memcmp(bytes.data(), kGridMagic, sizeof(kGridMagic)) != 0)
  {
    throw MagicError("not a PortableGrid file (bad magic)");
  }
  if (bytes.size() < kHeaderBytes)
  {
    throw TruncatedError("PortableGrid header truncated");
  }
  PortableGrid g;
  const std::uint32_t dtype = get_u32(bytes.data() + 8);
  if (dtype > 1)
  {
    throw IoError("PortableGrid has unknown dtype " + std::to_string(dtype));
  }
  g.dtype = static_cast<GridDtype>(dtype);
  g.rows = get_u32(bytes.data() + 12);
  g.cols = get_u32(bytes.data() + 16);
  if (g.rows == 0 || g.cols == 0)
  {
    throw IoError("PortableGrid has zero dimension");
  }
  const std::size_t count = std::size_t(g.rows) * g.cols * g.cell_width();
  const std::size_t expected = kHeaderBytes + 4 * count + 4;
  if (bytes.size() < expected)
  {
    throw TruncatedError("PortableGrid payload truncated: expected " + std::to_string(expected) +
                         " bytes, found " + std::to_string(bytes.size()));
  }
  if (bytes.size() > expected)
  {
    throw IoError("PortableGrid has trailing bytes after the checksum");
  }
  const auto payload = bytes.subspan(kHeaderBytes, 4 * count);
  if (crc32(payload) != get_u32(bytes.data() + kHeaderBytes + 4 * count))
  {
    throw ChecksumError("PortableGrid CRC-32 mismatch");
  }
  g.payload.resize(count);
  for (std::size_t i = 0; i < count; ++i)
  {
    g.payload[i] = std::bit_cast<float>(get_u32(payload.data() + 4 * i));
  }
  return g;
}

void save_grid(const std::filesystem::path &path, const PortableGrid &grid)
{
  const auto bytes = encode_grid(grid);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
  {
    throw IoError("cannot write " + path.string());
  }
  out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out)
  {
    throw IoError("write failed for " + path.string());
  }
}

PortableGrid load_grid(const std::filesystem::path &path)
{
  const auto bytes = read_all(path);
  return decode_grid(bytes);
}

PortableGrid to_portable(const ComplexFieldd &field)
{
  PortableGrid g{GridDtype::c64, static_cast<std::uint32_t>(field.grid.rows()),
                 static_cast<std::uint32_t>(field.grid.cols()), {}};
  g.payload.reserve(2 * field.values.size());
  for (Eigen::Index i = 0; i < field.values.size(); ++i)
  {
    g.payload.push_back(static_cast<float>(field.values.data()[i].real()));
    g.payload.push_back(static_cast<float>(field.values.data()[i].imag()));
  }
  return g;
}

PortableGrid to_portable(const GridArray<double> &values)
{
  PortableGrid g{GridDtype::f32, static_cast<std::uint32_t>(values.rows()),
                 static_cast<std::uint32_t>(values.cols()), {}};
  g.payload.reserve(values.size());
  for (Eigen::Index i = 0; i < values.size(); ++i)
  {
    g.payload.push_back(static_cast<float>(values.data()[i]));
  }
  return g;
}

PortableGrid to_portable(const RealMapd &map) { return to_portable(map.values); }

ComplexFieldd field_from_portable(const PortableGrid &grid, const GridSpec &spec)
{
  detail::require(grid.dtype == GridDtype::c64, "expected a c64 PortableGrid for a field");
  detail::require(grid.rows == spec.rows() && grid.cols == spec.cols(),
                  "PortableGrid dimensions do not match the scene grid");
  ComplexArray<double> v(spec.rows(), spec.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i)
  {
    v.data()[i] = {grid.payload[2 * i], grid.payload[2 * i + 1]};
  }
  return {spec, std::move(v)};
}

GridArray<double> array_from_portable(const PortableGrid &grid)
{
  detail::require(grid.dtype == GridDtype::f32, "expected an f32 PortableGrid for a map");
  GridArray<double> v(grid.rows, grid.cols);
  for (Eigen::Index i = 0; i < v.size(); ++i)
  {
    v.data()[i] = grid.payload[i];
  }
  return v;
}

}  // namespace emfield::io
