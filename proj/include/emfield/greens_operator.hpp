#pragma once

// Incident field and the discretized Green's operator W of the 2-D TM volume
// integral equation (I + W chi) E_tot = E_inc.
//
// W is translation invariant, so W x is a 2-D linear convolution of x with a
// (2H-1) x (2W-1) stencil. The fast path zero-pads both to a smooth transform
// size and multiplies spectra; the dense N x N matrix is kept as the oracle.

#include <algorithm>
#include <complex>
#include <memory>
#include <numbers>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "emfield/errors.hpp"
#include "emfield/grid.hpp"
#include "emfield/special_functions.hpp"

namespace emfield
{

inline constexpr Eigen::Index kDenseCellLimit = 4096;

namespace detail
{

/// Smallest integer >= n whose only prime factors are 2, 3 and 5.
inline Eigen::Index smooth_size(Eigen::Index n)
{
  for (Eigen::Index m = std::max<Eigen::Index>(n, 1);; ++m)
  {
    Eigen::Index r = m;
    for (Eigen::Index p : {2, 3, 5})
    {
      while (r % p == 0)
      {
        r /= p;
      }
    }
    if (r == 1)
    {
      return m;
    }
  }
}

/// In-place unscaled 2-D transform of a row-major array.
///
/// Uses a thread-local Eigen::FFT, whose plan cache is not synchronized;
/// one instance per thread keeps concurrent callers independent.
template <typename Scalar>
void fft2(ComplexArray<Scalar> &a, bool inverse)
{
  thread_local Eigen::FFT<Scalar> fft = [] {
    Eigen::FFT<Scalar> f;
    f.SetFlag(Eigen::FFT<Scalar>::Unscaled);
    return f;
  }();
  using C = std::complex<Scalar>;
  const Eigen::Index rows = a.rows();
  const Eigen::Index cols = a.cols();
  std::vector<C> in(std::max(rows, cols));
  std::vector<C> out(std::max(rows, cols));
  for (Eigen::Index r = 0; r < rows; ++r)
  {
    C *row = a.data() + r * cols;
    std::copy(row, row + cols, in.begin());
    inverse ? fft.inv(out.data(), in.data(), cols) : fft.fwd(out.data(), in.data(), cols);
    std::copy(out.begin(), out.begin() + cols, row);
  }
  for (Eigen::Index c = 0; c < cols; ++c)
  {
    for (Eigen::Index r = 0; r < rows; ++r)
    {
      in[r] = a(r, c);
    }
    inverse ? fft.inv(out.data(), in.data(), rows) : fft.fwd(out.data(), in.data(), rows);
    for (Eigen::Index r = 0; r < rows; ++r)
    {
      a(r, c) = out[r];
    }
  }
}

}  // namespace detail

/// W_{n,n} = (j/2) [pi k0 a H1^(2)(k0 a) - 2j]
template <typename Scalar = double>
std::complex<Scalar> w_self_term(const GridSpec &grid)
{
  using C = std::complex<Scalar>;
  const Scalar ka = static_cast<Scalar>(grid.wavenumber() * grid.disk_radius());
  const C j(0, 1);
  return j / Scalar(2) * (std::numbers::pi_v<Scalar> * ka * special::hankel2_1(ka) - Scalar(2) * j);
}

/// Prefactor of the off-diagonal entries: (j pi k0 a / 2) J1(k0 a).
template <typename Scalar = double>
std::complex<Scalar> w_coupling_factor(const GridSpec &grid)
{
  const Scalar ka = static_cast<Scalar>(grid.wavenumber() * grid.disk_radius());
  return std::complex<Scalar>(0, std::numbers::pi_v<Scalar> * ka / Scalar(2) * special::bessel_j1(ka));
}

/// W entry between two cells whose index offsets are (dr, dc).
template <typename Scalar = double>
std::complex<Scalar> w_entry(const GridSpec &grid, Eigen::Index dr, Eigen::Index dc)
{
  if (dr == 0 && dc == 0)
  {
    return w_self_term<Scalar>(grid);
  }
  // distance from the integer squared offset, so equal distances give equal bits
  const double d2 = static_cast<double>(dr * dr + dc * dc);
  const Scalar arg = static_cast<Scalar>(grid.wavenumber() * grid.pixel_length() * std::sqrt(d2));
  return w_coupling_factor<Scalar>(grid) * special::hankel2_0(arg);
}

/// Free-space Green's function averaged over the equivalent disk of one cell:
/// (1/A) int_disk -(j/4) H0^(2)(k0 r) dA = -(j / (2 k0^2 A)) [pi k0 a H1^(2)(k0 a) - 2j].
template <typename Scalar = double>
std::complex<Scalar> green_cell_average(const GridSpec &grid)
{
  using C = std::complex<Scalar>;
  const Scalar ka = static_cast<Scalar>(grid.wavenumber() * grid.disk_radius());
  const Scalar k2a = static_cast<Scalar>(grid.wavenumber() * grid.wavenumber() * grid.cell_area());
  const C j(0, 1);
  return -j / (Scalar(2) * k2a) *
         (std::numbers::pi_v<Scalar> * ka * special::hankel2_1(ka) - Scalar(2) * j);
}

/// E_inc(p) = G(p_tx - p) = -(j/4) H0^(2)(k0 |p_tx - p|); the transmitter cell
/// takes the disk-averaged Green's function instead of the singular value.
template <typename Scalar = double>
ComplexField<Scalar> incident_field(const Scene &scene)
{
  scene.validate();
  const GridSpec &g = scene.grid;
  const std::complex<Scalar> minus_j_quarter(0, Scalar(-0.25));
  const Scalar kh = static_cast<Scalar>(g.wavenumber() * g.pixel_length());
  ComplexArray<Scalar> e(g.rows(), g.cols());
  for (Eigen::Index r = 0; r < g.rows(); ++r)
  {
    for (Eigen::Index c = 0; c < g.cols(); ++c)
    {
      const Eigen::Index dr = r - scene.tx_row;
      const Eigen::Index dc = c - scene.tx_col;
      if (dr == 0 && dc == 0)
      {
        e(r, c) = green_cell_average<Scalar>(g);
        continue;
      }
      const Scalar dist = static_cast<Scalar>(std::sqrt(static_cast<double>(dr * dr + dc * dc)));
      e(r, c) = minus_j_quarter * special::hankel2_0(kh * dist);
    }
  }
  return {g, std::move(e)};
}

/// Translation-invariant stencil of W plus its cached zero-padded spectrum.
///
/// Immutable after construction. apply_w()/apply_w_adjoint() only read the
/// cached spectrum and run transforms on thread-local plans, so one kernel may
/// be shared by any number of threads.
template <typename Scalar = double>
class WKernel
{
public:
  using Complex = std::complex<Scalar>;

  explicit WKernel(const GridSpec &grid) : grid_(grid)
  {
    const Eigen::Index H = grid.rows();
    const Eigen::Index W = grid.cols();
    stencil_.resize(2 * H - 1, 2 * W - 1);
    for (Eigen::Index dr = -(H - 1); dr <= H - 1; ++dr)
    {
      for (Eigen::Index dc = -(W - 1); dc <= W - 1; ++dc)
      {
        stencil_(dr + H - 1, dc + W - 1) = w_entry<Scalar>(grid, dr, dc);
      }
    }
    padded_rows_ = detail::smooth_size(2 * H - 1);
    padded_cols_ = detail::smooth_size(2 * W - 1);
    ComplexArray<Scalar> padded = ComplexArray<Scalar>::Zero(padded_rows_, padded_cols_);
    for (Eigen::Index dr = -(H - 1); dr <= H - 1; ++dr)
    {
      for (Eigen::Index dc = -(W - 1); dc <= W - 1; ++dc)
      {
        padded((dr + padded_rows_) % padded_rows_, (dc + padded_cols_) % padded_cols_) =
            stencil_(dr + H - 1, dc + W - 1);
      }
    }
    detail::fft2(padded, false);
    spectrum_ = std::make_shared<const ComplexArray<Scalar>>(std::move(padded));
  }

  const GridSpec &grid() const { return grid_; }

  /// (2H-1) x (2W-1); offset (dr, dc) lives at (dr + H - 1, dc + W - 1).
  const ComplexArray<Scalar> &stencil() const { return stencil_; }

  Complex at(Eigen::Index dr, Eigen::Index dc) const
  {
    return stencil_(dr + grid_.rows() - 1, dc + grid_.cols() - 1);
  }

  Complex center() const { return at(0, 0); }

  Eigen::Index padded_rows() const { return padded_rows_; }
  Eigen::Index padded_cols() const { return padded_cols_; }

  /// y = W x for an H x W array, or W^H x when adjoint is set.
  template <typename Derived>
  ComplexArray<Scalar> convolve(const Eigen::ArrayBase<Derived> &x, bool adjoint) const
  {
    const Eigen::Index H = grid_.rows();
    const Eigen::Index W = grid_.cols();
    detail::require(x.rows() == H && x.cols() == W, "operand shape does not match the kernel grid");
    ComplexArray<Scalar> work = ComplexArray<Scalar>::Zero(padded_rows_, padded_cols_);
    work.topLeftCorner(H, W) = x;
    detail::fft2(work, false);
    // The adjoint uses the conjugated, index-reversed stencil conj(K(-d)),
    // whose spectrum is exactly conj(FFT(K)).
    if (adjoint)
    {
      work *= spectrum_->conjugate();
    }
    else
    {
      work *= *spectrum_;
    }
    detail::fft2(work, true);
    const Scalar scale = Scalar(1) / static_cast<Scalar>(padded_rows_ * padded_cols_);
    return work.topLeftCorner(H, W) * scale;
  }

private:
  GridSpec grid_;
  ComplexArray<Scalar> stencil_;
  Eigen::Index padded_rows_ = 0;
  Eigen::Index padded_cols_ = 0;
  std::shared_ptr<const ComplexArray<Scalar>> spectrum_;
};

using WKerneld = WKernel<double>;

template <typename Scalar = double>
WKernel<Scalar> build_w_kernel(const GridSpec &grid)
{
  return WKernel<Scalar>(grid);
}

/// Explicit N x N operator, N = H W <= kDenseCellLimit. Row/column n is cell
/// (n / W, n % W).
template <typename Scalar = double>
struct DenseW
{
  GridSpec grid;
  Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic> matrix;
};

template <typename Scalar = double>
DenseW<Scalar> build_dense_w(const GridSpec &grid)
{
  const Eigen::Index n = grid.size();
  detail::require(n <= kDenseCellLimit, "dense operator limited to " +
                                            std::to_string(kDenseCellLimit) + " cells, grid has " +
                                            std::to_string(n));
  const Eigen::Index W = grid.cols();
  // one evaluation per distinct offset
  const WKernel<Scalar> kernel(grid);
  DenseW<Scalar> out{grid, decltype(DenseW<Scalar>::matrix)(n, n)};
  for (Eigen::Index a = 0; a < n; ++a)
  {
    for (Eigen::Index b = 0; b < n; ++b)
    {
      out.matrix(a, b) = kernel.at(a / W - b / W, a % W - b % W);
    }
  }
  return out;
}

template <typename Scalar>
ComplexField<Scalar> apply_w(const WKernel<Scalar> &kernel, const ComplexField<Scalar> &field)
{
  require_same_grid(kernel.grid(), field.grid, "apply_w");
  return {field.grid, kernel.convolve(field.values, false)};
}

template <typename Scalar>
ComplexField<Scalar> apply_w_adjoint(const WKernel<Scalar> &kernel,
                                     const ComplexField<Scalar> &field)
{
  require_same_grid(kernel.grid(), field.grid, "apply_w_adjoint");
  return {field.grid, kernel.convolve(field.values, true)};
}

/// Dense matvec on a field, for cross-checking the convolution path.
template <typename Scalar>
ComplexField<Scalar> apply_dense(const DenseW<Scalar> &dense, const ComplexField<Scalar> &field,
                                 bool adjoint = false)
{
  require_same_grid(dense.grid, field.grid, "apply_dense");
  using Vec = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;
  const Eigen::Map<const Vec> x(field.values.data(), field.values.size());
  ComplexArray<Scalar> y(field.grid.rows(), field.grid.cols());
  Eigen::Map<Vec> out(y.data(), y.size());
  out.noalias() = adjoint ? Vec(dense.matrix.adjoint() * x) : Vec(dense.matrix * x);
  return {field.grid, std::move(y)};
}

}  // namespace emfield
