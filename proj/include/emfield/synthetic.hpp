#pragma once

// Small generated instances for self-tests and examples.

#include <complex>
#include <numbers>
#include <random>

#include "emfield/grid.hpp"

namespace emfield
{

/// Frequency that gives k0 * pixel_length == ratio.
inline double frequency_for_sampling(double ratio, double pixel_length)
{
  return ratio * kSpeedOfLight / (2.0 * std::numbers::pi * pixel_length);
}

/// rows x cols grid at 1 m pixels with a centered block x block building of
/// contrast chi (lossless: eps_r = 1 + chi) and the transmitter at (1, 1).
inline Scene centered_block_scene(Eigen::Index rows, Eigen::Index cols, Eigen::Index block,
                                  double chi, double sampling_ratio)
{
  const GridSpec grid = make_grid(rows, cols, 1.0, frequency_for_sampling(sampling_ratio, 1.0));
  MaskArray mask = MaskArray::Zero(rows, cols);
  mask.block((rows - block) / 2, (cols - block) / 2, block, block).setOnes();
  return make_scene(grid, std::move(mask), 1, 1, {1.0 + chi, 0.0});
}

/// Independent standard-normal real and imaginary parts.
template <typename Scalar = double, typename Rng>
ComplexField<Scalar> random_field(const GridSpec &grid, Rng &rng)
{
  std::normal_distribution<Scalar> normal;
  ComplexArray<Scalar> v(grid.rows(), grid.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i)
  {
    v.data()[i] = {normal(rng), normal(rng)};
  }
  return {grid, std::move(v)};
}

/// Random contrast on a random subset of cells, Im(chi) <= 0.
template <typename Scalar = double, typename Rng>
ContrastMap<Scalar> random_contrast(const GridSpec &grid, Rng &rng)
{
  std::uniform_real_distribution<Scalar> u(0, 1);
  ComplexArray<Scalar> v = ComplexArray<Scalar>::Zero(grid.rows(), grid.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i)
  {
    if (u(rng) < Scalar(0.4))
    {
      v.data()[i] = {u(rng), -Scalar(0.3) * u(rng)};
    }
  }
  return {grid, std::move(v)};
}

}  // namespace emfield
