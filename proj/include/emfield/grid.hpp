#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "emfield/errors.hpp"

namespace emfield
{

inline constexpr double kSpeedOfLight = 299'792'458.0;         // m/s
inline constexpr double kVacuumPermittivity = 8.8541878128e-12;  // F/m

// All H x W grids are stored row-major so that the flat index of cell (r, c)
// is r * W + c, which is the ordering used by the dense operator.
template <typename T>
using GridArray = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using ComplexArray = GridArray<std::complex<Scalar>>;

using MaskArray = GridArray<std::uint8_t>;

/// Uniform 2-D discretization plus the excitation frequency.
///
/// Derived quantities (wavenumber, cell area, equivalent disk radius) are
/// computed once at construction; build through make_grid().
class GridSpec
{
public:
  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  Eigen::Index size() const { return rows_ * cols_; }
  double pixel_length() const { return pixel_length_; }
  double frequency() const { return frequency_; }
  double angular_frequency() const { return 2.0 * std::numbers::pi * frequency_; }
  double wavenumber() const { return wavenumber_; }
  double cell_area() const { return cell_area_; }
  double disk_radius() const { return disk_radius_; }

  /// k0 * pixel_length; values well below 1 mean the wavelength is resolved.
  double sampling_ratio() const { return wavenumber_ * pixel_length_; }

  bool operator==(const GridSpec &other) const
  {
    return rows_ == other.rows_ && cols_ == other.cols_ &&
           pixel_length_ == other.pixel_length_ && frequency_ == other.frequency_;
  }

private:
  friend GridSpec make_grid(Eigen::Index, Eigen::Index, double, double);

  Eigen::Index rows_ = 0;
  Eigen::Index cols_ = 0;
  double pixel_length_ = 0.0;
  double frequency_ = 0.0;
  double wavenumber_ = 0.0;
  double cell_area_ = 0.0;
  double disk_radius_ = 0.0;
};

inline GridSpec make_grid(Eigen::Index rows, Eigen::Index cols, double pixel_length,
                          double frequency)
{
  detail::require(rows >= 2 && cols >= 2,
                  "grid dimensions must be at least 2x2, got " + std::to_string(rows) + "x" +
                      std::to_string(cols));
  detail::require(std::isfinite(pixel_length) && pixel_length > 0.0,
                  "pixel length must be positive and finite");
  detail::require(std::isfinite(frequency) && frequency > 0.0,
                  "frequency must be positive and finite");
  GridSpec g;
  g.rows_ = rows;
  g.cols_ = cols;
  g.pixel_length_ = pixel_length;
  g.frequency_ = frequency;
  g.wavenumber_ = 2.0 * std::numbers::pi * frequency / kSpeedOfLight;
  g.cell_area_ = pixel_length * pixel_length;
  g.disk_radius_ = std::sqrt(g.cell_area_ / std::numbers::pi);
  return g;
}

inline void require_same_grid(const GridSpec &a, const GridSpec &b, const char *what)
{
  detail::require(a == b, std::string("grid mismatch in ") + what);
}

struct MaterialParams
{
  double relative_permittivity = 5.0;
  double conductivity = 0.1;  // S/m

  void validate() const
  {
    detail::require(std::isfinite(relative_permittivity) && relative_permittivity >= 1.0,
                    "relative permittivity must be >= 1");
    detail::require(std::isfinite(conductivity) && conductivity >= 0.0,
                    "conductivity must be >= 0");
  }
};

/// Building layout, transmitter position and building material on a grid.
struct Scene
{
  GridSpec grid;
  MaskArray building_mask;
  Eigen::Index tx_row = 0;
  Eigen::Index tx_col = 0;
  MaterialParams building_material;

  void validate() const
  {
    detail::require(building_mask.rows() == grid.rows() && building_mask.cols() == grid.cols(),
                    "building mask shape does not match the grid");
    detail::require((building_mask <= std::uint8_t{1}).all(), "building mask must be 0/1 valued");
    detail::require(tx_row >= 0 && tx_row < grid.rows() && tx_col >= 0 && tx_col < grid.cols(),
                    "transmitter lies outside the grid");
    detail::require(building_mask(tx_row, tx_col) == 0, "transmitter cell is inside a building");
    building_material.validate();
  }
};

inline Scene make_scene(const GridSpec &grid, MaskArray building_mask, Eigen::Index tx_row,
                        Eigen::Index tx_col, MaterialParams material = {})
{
  Scene s{grid, std::move(building_mask), tx_row, tx_col, material};
  s.validate();
  return s;
}

/// One-hot transmitter map, materialized on demand.
inline MaskArray transmitter_mask(const Scene &scene)
{
  MaskArray m = MaskArray::Zero(scene.grid.rows(), scene.grid.cols());
  m(scene.tx_row, scene.tx_col) = 1;
  return m;
}

template <typename Scalar>
struct ComplexField
{
  GridSpec grid;
  ComplexArray<Scalar> values;

  ComplexField() = default;
  ComplexField(const GridSpec &g, ComplexArray<Scalar> v) : grid(g), values(std::move(v))
  {
    detail::require(values.rows() == grid.rows() && values.cols() == grid.cols(),
                    "field shape does not match the grid");
  }

  static ComplexField Zero(const GridSpec &g)
  {
    return {g, ComplexArray<Scalar>::Zero(g.rows(), g.cols())};
  }

  bool all_finite() const { return values.real().allFinite() && values.imag().allFinite(); }
};

/// Per-cell contrast chi = (eps_c - eps0) / eps0.
template <typename Scalar>
struct ContrastMap
{
  GridSpec grid;
  ComplexArray<Scalar> values;

  ContrastMap() = default;
  ContrastMap(const GridSpec &g, ComplexArray<Scalar> v) : grid(g), values(std::move(v))
  {
    detail::require(values.rows() == grid.rows() && values.cols() == grid.cols(),
                    "contrast shape does not match the grid");
  }

  static ContrastMap Zero(const GridSpec &g)
  {
    return {g, ComplexArray<Scalar>::Zero(g.rows(), g.cols())};
  }

  bool is_zero() const { return (values == std::complex<Scalar>(0)).all(); }
};

enum class MapUnit
{
  decibel,
  normalized,
  linear,
};

inline const char *to_string(MapUnit u)
{
  switch (u)
  {
    case MapUnit::decibel:
      return "dB";
    case MapUnit::normalized:
      return "normalized";
    case MapUnit::linear:
      return "linear";
  }
  return "?";
}

/// dB window used to map levels onto [0, 1].
struct NormWindow
{
  double min_db = -100.0;
  double max_db = 0.0;

  void validate() const
  {
    detail::require(std::isfinite(min_db) && std::isfinite(max_db) && min_db < max_db,
                    "normalization window requires min_db < max_db");
  }
};

template <typename Scalar>
struct RealMap
{
  GridSpec grid;
  GridArray<Scalar> values;
  MapUnit unit = MapUnit::linear;
  std::optional<NormWindow> window;

  RealMap() = default;
  RealMap(const GridSpec &g, GridArray<Scalar> v, MapUnit u,
          std::optional<NormWindow> w = std::nullopt)
      : grid(g), values(std::move(v)), unit(u), window(w)
  {
    detail::require(values.rows() == grid.rows() && values.cols() == grid.cols(),
                    "map shape does not match the grid");
  }

  bool is_normalized() const
  {
    return unit == MapUnit::normalized && values.allFinite() && (values >= Scalar(0)).all() &&
           (values <= Scalar(1)).all();
  }
};

using ComplexFieldd = ComplexField<double>;
using ContrastMapd = ContrastMap<double>;
using RealMapd = RealMap<double>;

/// chi = (eps_r - 1) - j sigma / (omega eps0) inside buildings, 0 elsewhere.
template <typename Scalar = double>
ContrastMap<Scalar> contrast_from_materials(const Scene &scene)
{
  scene.validate();
  const auto &m = scene.building_material;
  const std::complex<Scalar> chi(
      static_cast<Scalar>(m.relative_permittivity - 1.0),
      static_cast<Scalar>(-m.conductivity / (scene.grid.angular_frequency() * kVacuumPermittivity)));
  ComplexArray<Scalar> values =
      (scene.building_mask != 0).select(ComplexArray<Scalar>::Constant(
                                            scene.grid.rows(), scene.grid.cols(), chi),
                                        std::complex<Scalar>(0));
  return {scene.grid, std::move(values)};
}

}  // namespace emfield
