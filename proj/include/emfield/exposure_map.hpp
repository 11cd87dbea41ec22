#pragma once

// Field magnitude to dB / normalized exposure maps, and distance-only
// baseline path-loss surfaces.

#include <algorithm>
#include <cmath>
#include <numbers>

#include "emfield/errors.hpp"
#include "emfield/grid.hpp"

namespace emfield
{

struct PathLossConfig
{
  double floor_db = -100.0;  // levels below this are clamped (|E| -> 0 stays finite)
  double ref_db = 0.0;       // level of the 0 dB reference magnitude, 20 log10(ref)
  bool normalize = true;
  NormWindow window{-100.0, 0.0};

  void validate() const
  {
    window.validate();
    detail::require(std::isfinite(floor_db) && std::isfinite(ref_db), "dB levels must be finite");
    detail::require(floor_db <= window.min_db, "floor_db must not exceed the window minimum");
  }
};

/// level = 20 log10(|E| / ref), clamped below at floor_db; optionally mapped
/// through the window onto [0, 1].
template <typename Scalar>
RealMap<Scalar> field_to_pathloss(const ComplexField<Scalar> &e, const PathLossConfig &cfg)
{
  cfg.validate();
  const Scalar floor_db = static_cast<Scalar>(cfg.floor_db);
  GridArray<Scalar> level(e.grid.rows(), e.grid.cols());
  for (Eigen::Index i = 0; i < level.size(); ++i)
  {
    const Scalar mag = std::abs(e.values.data()[i]);
    const Scalar db = mag > Scalar(0)
                          ? Scalar(20) * std::log10(mag) - static_cast<Scalar>(cfg.ref_db)
                          : floor_db;
    level.data()[i] = std::isfinite(db) ? std::max(db, floor_db) : floor_db;
  }
  if (!cfg.normalize)
  {
    return {e.grid, std::move(level), MapUnit::decibel};
  }
  const Scalar lo = static_cast<Scalar>(cfg.window.min_db);
  const Scalar span = static_cast<Scalar>(cfg.window.max_db - cfg.window.min_db);
  GridArray<Scalar> norm = ((level - lo) / span).max(Scalar(0)).min(Scalar(1));
  return {e.grid, std::move(norm), MapUnit::normalized, cfg.window};
}

namespace detail
{
inline double tx_distance(const Scene &s, Eigen::Index r, Eigen::Index c)
{
  const Eigen::Index dr = r - s.tx_row;
  const Eigen::Index dc = c - s.tx_col;
  return s.grid.pixel_length() * std::sqrt(static_cast<double>(dr * dr + dc * dc));
}
}  // namespace detail

/// PL = pl0 + 10 n log10(max(d, d0) / d0), buildings ignored.
template <typename Scalar = double>
RealMap<Scalar> baseline_log_distance(const Scene &scene, double exponent, double ref_distance,
                                      double pl0_db)
{
  scene.validate();
  detail::require(exponent > 0.0 && std::isfinite(exponent), "path-loss exponent must be > 0");
  detail::require(ref_distance > 0.0 && std::isfinite(ref_distance),
                  "reference distance must be > 0");
  GridArray<Scalar> out(scene.grid.rows(), scene.grid.cols());
  for (Eigen::Index r = 0; r < out.rows(); ++r)
  {
    for (Eigen::Index c = 0; c < out.cols(); ++c)
    {
      const double d = std::max(detail::tx_distance(scene, r, c), ref_distance);
      out(r, c) = static_cast<Scalar>(pl0_db + 10.0 * exponent * std::log10(d / ref_distance));
    }
  }
  return {scene.grid, std::move(out), MapUnit::decibel};
}

/// Free-space path loss 20 log10(4 pi d f / c), d clamped to half a pixel.
template <typename Scalar = double>
RealMap<Scalar> baseline_free_space(const Scene &scene)
{
  scene.validate();
  const double half_pixel = 0.5 * scene.grid.pixel_length();
  const double factor = 4.0 * std::numbers::pi * scene.grid.frequency() / kSpeedOfLight;
  GridArray<Scalar> out(scene.grid.rows(), scene.grid.cols());
  for (Eigen::Index r = 0; r < out.rows(); ++r)
  {
    for (Eigen::Index c = 0; c < out.cols(); ++c)
    {
      const double d = std::max(detail::tx_distance(scene, r, c), half_pixel);
      out(r, c) = static_cast<Scalar>(20.0 * std::log10(factor * d));
    }
  }
  return {scene.grid, std::move(out), MapUnit::decibel};
}

/// Maps a dB surface through a window onto [0, 1]. With invert set, larger
/// losses map to smaller values so the result is comparable to gain maps.
template <typename Scalar>
RealMap<Scalar> normalize_db(const RealMap<Scalar> &db, const NormWindow &window, bool invert)
{
  window.validate();
  detail::require(db.unit == MapUnit::decibel, "normalize_db expects a dB map");
  const Scalar lo = static_cast<Scalar>(window.min_db);
  const Scalar span = static_cast<Scalar>(window.max_db - window.min_db);
  GridArray<Scalar> v = invert ? GridArray<Scalar>(-db.values) : db.values;
  GridArray<Scalar> out = ((v - lo) / span).max(Scalar(0)).min(Scalar(1));
  return {db.grid, std::move(out), MapUnit::normalized, window};
}

}  // namespace emfield
