#pragma once

// Helmholtz (PDE) and volume-integral-equation residual losses, their
// analytic gradients, and the weighted composite.
//
// Gradients of a real loss L(E) are returned packed as one complex field,
// dL/dRe(E) + j dL/dIm(E).

#include <algorithm>
#include <cmath>
#include <optional>

#include "emfield/errors.hpp"
#include "emfield/greens_operator.hpp"
#include "emfield/grid.hpp"
#include "emfield/vie_solver.hpp"

namespace emfield
{

struct LossWeights
{
  double lambda_pde = 0.5;
  double lambda_vie = 0.5;
  double beta = 0.1;
  /// -1 penalizes lap(E) - beta E, +1 penalizes lap(E) + beta E.
  int pde_sign = -1;

  void validate() const
  {
    detail::require(std::isfinite(lambda_pde) && lambda_pde >= 0.0, "lambda_pde must be >= 0");
    detail::require(std::isfinite(lambda_vie) && lambda_vie >= 0.0, "lambda_vie must be >= 0");
    detail::require(std::isfinite(beta) && beta >= 0.0, "beta must be >= 0");
    detail::require(pde_sign == 1 || pde_sign == -1, "pde_sign must be +1 or -1");
  }
};

struct LossBreakdown
{
  double pde = 0.0;
  double vie = 0.0;
  std::optional<double> data;
  double composite = 0.0;
};

/// Weighted sum of already evaluated terms.
inline LossBreakdown combine_losses(double pde, double vie, std::optional<double> data,
                                    const LossWeights &w)
{
  LossBreakdown out{pde, vie, data, w.lambda_pde * pde + w.lambda_vie * vie};
  if (data)
  {
    out.composite += *data;
  }
  return out;
}

/// f(i+1,j) + f(i-1,j) + f(i,j+1) + f(i,j-1) - 4 f(i,j) in pixel units,
/// out-of-range neighbours replicated from the nearest edge cell.
template <typename Derived>
GridArray<typename Derived::Scalar> laplacian_5pt(const Eigen::ArrayBase<Derived> &f)
{
  const Eigen::Index H = f.rows();
  const Eigen::Index W = f.cols();
  GridArray<typename Derived::Scalar> out(H, W);
  for (Eigen::Index i = 0; i < H; ++i)
  {
    const Eigen::Index up = std::max<Eigen::Index>(i - 1, 0);
    const Eigen::Index down = std::min<Eigen::Index>(i + 1, H - 1);
    for (Eigen::Index j = 0; j < W; ++j)
    {
      const Eigen::Index left = std::max<Eigen::Index>(j - 1, 0);
      const Eigen::Index right = std::min<Eigen::Index>(j + 1, W - 1);
      out(i, j) = f(down, j) + f(up, j) + f(i, right) + f(i, left) - typename Derived::Scalar(4) * f(i, j);
    }
  }
  return out;
}

/// Exact transpose of laplacian_5pt: every cell scatters its value to the
/// (clamped) neighbours it was read from.
template <typename Derived>
GridArray<typename Derived::Scalar> laplacian_5pt_adjoint(const Eigen::ArrayBase<Derived> &g)
{
  using T = typename Derived::Scalar;
  const Eigen::Index H = g.rows();
  const Eigen::Index W = g.cols();
  GridArray<T> out = GridArray<T>::Zero(H, W);
  for (Eigen::Index i = 0; i < H; ++i)
  {
    const Eigen::Index up = std::max<Eigen::Index>(i - 1, 0);
    const Eigen::Index down = std::min<Eigen::Index>(i + 1, H - 1);
    for (Eigen::Index j = 0; j < W; ++j)
    {
      const Eigen::Index left = std::max<Eigen::Index>(j - 1, 0);
      const Eigen::Index right = std::min<Eigen::Index>(j + 1, W - 1);
      const T v = g(i, j);
      out(down, j) += v;
      out(up, j) += v;
      out(i, right) += v;
      out(i, left) += v;
      out(i, j) -= T(4) * v;
    }
  }
  return out;
}

namespace detail
{
// (lap + s beta) applied to a complex field; real coefficients so the real and
// imaginary parts are transformed independently.
template <typename Scalar>
ComplexArray<Scalar> helmholtz_operator(const ComplexArray<Scalar> &e, const LossWeights &w)
{
  return laplacian_5pt(e) + static_cast<Scalar>(w.pde_sign * w.beta) * e;
}

template <typename Scalar>
ComplexArray<Scalar> helmholtz_operator_adjoint(const ComplexArray<Scalar> &e,
                                                const LossWeights &w)
{
  return laplacian_5pt_adjoint(e) + static_cast<Scalar>(w.pde_sign * w.beta) * e;
}

inline void check_region(const GridSpec &grid, const MaskArray *region)
{
  if (region)
  {
    require(region->rows() == grid.rows() && region->cols() == grid.cols(),
            "PDE region mask does not match the grid");
  }
}
}  // namespace detail

/// Per-cell (lap Re E + s beta Re E)^2 + (lap Im E + s beta Im E)^2.
///
/// With a region mask, cells where the mask is 0 contribute zero (e.g. pass
/// the complement of the building mask to restrict to free space).
template <typename Scalar>
RealMap<Scalar> pde_residual_map(const ComplexField<Scalar> &e, const LossWeights &w,
                                 const MaskArray *region = nullptr)
{
  w.validate();
  detail::check_region(e.grid, region);
  const Scalar sb = static_cast<Scalar>(w.pde_sign * w.beta);
  const GridArray<Scalar> re = e.values.real();
  const GridArray<Scalar> im = e.values.imag();
  const GridArray<Scalar> rr = laplacian_5pt(re) + sb * re;
  const GridArray<Scalar> ri = laplacian_5pt(im) + sb * im;
  GridArray<Scalar> out = rr.square() + ri.square();
  if (region)
  {
    out = (*region != 0).select(out, Scalar(0));
  }
  return {e.grid, std::move(out), MapUnit::linear};
}

/// Mean of pde_residual_map over all H W cells.
template <typename Scalar>
Scalar loss_pde(const ComplexField<Scalar> &e, const LossWeights &w,
                const MaskArray *region = nullptr)
{
  return pde_residual_map(e, w, region).values.mean();
}

/// (2/N) L^T (M L E) with L = lap + s beta and M the region mask.
template <typename Scalar>
ComplexField<Scalar> grad_loss_pde(const ComplexField<Scalar> &e, const LossWeights &w,
                                   const MaskArray *region = nullptr)
{
  w.validate();
  detail::check_region(e.grid, region);
  ComplexArray<Scalar> r = detail::helmholtz_operator(e.values, w);
  if (region)
  {
    r = (*region != 0).select(r, std::complex<Scalar>(0));
  }
  const Scalar scale = Scalar(2) / static_cast<Scalar>(e.grid.size());
  return {e.grid, scale * detail::helmholtz_operator_adjoint(r, w)};
}

/// R = (I + W chi) E - E_inc via the convolution path.
template <typename Scalar>
ComplexField<Scalar> vie_residual_field(const WKernel<Scalar> &kernel,
                                        const ContrastMap<Scalar> &chi,
                                        const ComplexField<Scalar> &e,
                                        const ComplexField<Scalar> &incident)
{
  require_same_grid(kernel.grid(), chi.grid, "vie_residual_field");
  require_same_grid(kernel.grid(), e.grid, "vie_residual_field");
  require_same_grid(kernel.grid(), incident.grid, "vie_residual_field");
  return {e.grid, vie_operator(kernel, chi, e.values) - incident.values};
}

/// (1/N) ||R||^2.
template <typename Scalar>
Scalar loss_vie(const WKernel<Scalar> &kernel, const ContrastMap<Scalar> &chi,
                const ComplexField<Scalar> &e, const ComplexField<Scalar> &incident)
{
  return vie_residual_field(kernel, chi, e, incident).values.abs2().mean();
}

/// (2/N) (I + W chi)^H R.
template <typename Scalar>
ComplexField<Scalar> grad_loss_vie(const WKernel<Scalar> &kernel, const ContrastMap<Scalar> &chi,
                                   const ComplexField<Scalar> &e,
                                   const ComplexField<Scalar> &incident)
{
  const auto r = vie_residual_field(kernel, chi, e, incident);
  const Scalar scale = Scalar(2) / static_cast<Scalar>(e.grid.size());
  return {e.grid, scale * vie_operator_adjoint(kernel, chi, r.values)};
}

/// Mean squared difference of two maps on the same grid.
template <typename Scalar>
Scalar loss_data(const RealMap<Scalar> &prediction, const RealMap<Scalar> &target)
{
  require_same_grid(prediction.grid, target.grid, "loss_data");
  return (prediction.values - target.values).square().mean();
}

/// lambda_pde L_pde + lambda_vie L_vie (+ L_data when both maps are given).
template <typename Scalar>
LossBreakdown loss_composite(const WKernel<Scalar> &kernel, const ContrastMap<Scalar> &chi,
                             const ComplexField<Scalar> &e, const ComplexField<Scalar> &incident,
                             const LossWeights &w, const RealMap<Scalar> *prediction = nullptr,
                             const RealMap<Scalar> *target = nullptr,
                             const MaskArray *region = nullptr)
{
  w.validate();
  detail::require((prediction == nullptr) == (target == nullptr),
                  "prediction and target maps must be supplied together");
  std::optional<double> data;
  if (prediction)
  {
    require_same_grid(prediction->grid, e.grid, "loss_composite");
    data = static_cast<double>(loss_data(*prediction, *target));
  }
  return combine_losses(static_cast<double>(loss_pde(e, w, region)),
                        static_cast<double>(loss_vie(kernel, chi, e, incident)), data, w);
}

}  // namespace emfield
