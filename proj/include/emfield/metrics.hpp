#pragma once

// NMSE, RMSE, MAE and SSIM between a predicted and a ground-truth map.
// Every function accepts any pair of same-shape real Eigen arrays; RealMap
// overloads additionally check the grids.

#include <cmath>
#include <limits>

#include <Eigen/Core>

#include "emfield/errors.hpp"
#include "emfield/grid.hpp"

namespace emfield
{

enum class SsimMode
{
  global,
  windowed,
};

inline constexpr Eigen::Index kSsimWindow = 11;

struct SsimConstants
{
  double c1 = 1e-4;  // (0.01 L)^2, L = 1
  double c2 = 9e-4;  // (0.03 L)^2
};

struct MetricsReport
{
  double nmse = 0.0;
  double nmse_db = 0.0;  // -inf when nmse == 0
  double rmse = 0.0;
  double mae = 0.0;
  double ssim = 0.0;
  SsimMode ssim_mode = SsimMode::global;
};

namespace detail
{
template <typename A, typename B>
void require_same_shape(const Eigen::ArrayBase<A> &a, const Eigen::ArrayBase<B> &b)
{
  require(a.rows() == b.rows() && a.cols() == b.cols(), "metric operands differ in shape");
  require(a.size() > 0, "metric operands are empty");
}

template <typename A, typename B>
double ssim_moments(const Eigen::ArrayBase<A> &x, const Eigen::ArrayBase<B> &y,
                    const SsimConstants &k)
{
  const double n = static_cast<double>(x.size());
  const double mx = static_cast<double>(x.sum()) / n;
  const double my = static_cast<double>(y.sum()) / n;
  const auto dx = x.template cast<double>() - mx;
  const auto dy = y.template cast<double>() - my;
  const double vx = dx.square().sum() / n;
  const double vy = dy.square().sum() / n;
  const double cov = (dx * dy).sum() / n;
  return ((2.0 * mx * my + k.c1) * (2.0 * cov + k.c2)) /
         ((mx * mx + my * my + k.c1) * (vx + vy + k.c2));
}
}  // namespace detail

/// sum (p - t)^2 / sum t^2; throws when the truth has zero energy.
template <typename A, typename B>
double nmse(const Eigen::ArrayBase<A> &pred, const Eigen::ArrayBase<B> &truth)
{
  detail::require_same_shape(pred, truth);
  const double energy = truth.template cast<double>().square().sum();
  detail::require(energy > 0.0, "nmse undefined: ground truth is identically zero");
  return (pred.template cast<double>() - truth.template cast<double>()).square().sum() / energy;
}

inline double to_db(double nmse_value)
{
  return nmse_value > 0.0 ? 10.0 * std::log10(nmse_value)
                          : -std::numeric_limits<double>::infinity();
}

template <typename A, typename B>
double nmse_db(const Eigen::ArrayBase<A> &pred, const Eigen::ArrayBase<B> &truth)
{
  return to_db(nmse(pred, truth));
}

template <typename A, typename B>
double rmse(const Eigen::ArrayBase<A> &pred, const Eigen::ArrayBase<B> &truth)
{
  detail::require_same_shape(pred, truth);
  return std::sqrt((pred.template cast<double>() - truth.template cast<double>()).square().mean());
}

template <typename A, typename B>
double mae(const Eigen::ArrayBase<A> &pred, const Eigen::ArrayBase<B> &truth)
{
  detail::require_same_shape(pred, truth);
  return (pred.template cast<double>() - truth.template cast<double>()).abs().mean();
}

/// Global mode evaluates the index once with whole-map statistics; windowed
/// mode averages it over every 11 x 11 uniform window fully inside the map.
/// Population (1/N) moments throughout.
template <typename A, typename B>
double ssim(const Eigen::ArrayBase<A> &pred, const Eigen::ArrayBase<B> &truth,
            const SsimConstants &k = {}, SsimMode mode = SsimMode::global)
{
  detail::require_same_shape(pred, truth);
  detail::require(k.c1 > 0.0 && k.c2 > 0.0, "SSIM constants must be positive");
  if (mode == SsimMode::global)
  {
    return detail::ssim_moments(pred, truth, k);
  }
  detail::require(pred.rows() >= kSsimWindow && pred.cols() >= kSsimWindow,
                  "windowed SSIM needs maps of at least 11 x 11");
  double total = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index r = 0; r + kSsimWindow <= pred.rows(); ++r)
  {
    for (Eigen::Index c = 0; c + kSsimWindow <= pred.cols(); ++c)
    {
      total += detail::ssim_moments(pred.block(r, c, kSsimWindow, kSsimWindow),
                                    truth.block(r, c, kSsimWindow, kSsimWindow), k);
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

template <typename A, typename B>
MetricsReport evaluate_metrics(const Eigen::ArrayBase<A> &pred, const Eigen::ArrayBase<B> &truth,
                               SsimMode mode = SsimMode::global, const SsimConstants &k = {})
{
  MetricsReport m;
  m.nmse = nmse(pred, truth);
  m.nmse_db = to_db(m.nmse);
  m.rmse = rmse(pred, truth);
  m.mae = mae(pred, truth);
  m.ssim = ssim(pred, truth, k, mode);
  m.ssim_mode = mode;
  return m;
}

template <typename Scalar>
MetricsReport evaluate_metrics(const RealMap<Scalar> &pred, const RealMap<Scalar> &truth,
                               SsimMode mode = SsimMode::global, const SsimConstants &k = {})
{
  require_same_grid(pred.grid, truth.grid, "evaluate_metrics");
  return evaluate_metrics(pred.values, truth.values, mode, k);
}

}  // namespace emfield
