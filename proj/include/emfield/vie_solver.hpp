#pragma once

// Iterative solution of (I + W chi) E = E_inc for ground-truth total fields.

#include <chrono>
#include <cmath>
#include <complex>
#include <utility>
#include <vector>

#include "emfield/errors.hpp"
#include "emfield/greens_operator.hpp"
#include "emfield/grid.hpp"

namespace emfield
{

struct SolveOptions
{
  double tol = 1e-8;
  int max_iter = 2000;
  /// Restart when the best residual improves by less than stagnation_drop
  /// (relative) over stagnation_window iterations.
  int stagnation_window = 20;
  double stagnation_drop = 0.01;

  void validate() const
  {
    detail::require(tol > 0.0 && tol < 1.0, "solver tolerance must lie in (0, 1)");
    detail::require(max_iter >= 1, "max_iter must be >= 1");
    detail::require(stagnation_window >= 1, "stagnation window must be >= 1");
  }
};

struct SolveReport
{
  int iterations = 0;
  double final_residual = 0.0;  // ||(I + W chi) E - E_inc|| / ||E_inc||
  bool converged = false;
  double wall_time = 0.0;  // seconds
  int restarts = 0;
  double sampling_ratio = 0.0;  // k0 * pixel_length of the grid
  /// Best relative residual after each iteration that improved on it.
  std::vector<double> residual_history;
};

/// (I + W chi) x on raw arrays.
template <typename Scalar, typename Derived>
ComplexArray<Scalar> vie_operator(const WKernel<Scalar> &kernel, const ContrastMap<Scalar> &chi,
                                  const Eigen::ArrayBase<Derived> &x)
{
  return x + kernel.convolve(chi.values * x, false);
}

/// (I + W chi)^H x = x + conj(chi) (W^H x).
template <typename Scalar, typename Derived>
ComplexArray<Scalar> vie_operator_adjoint(const WKernel<Scalar> &kernel,
                                          const ContrastMap<Scalar> &chi,
                                          const Eigen::ArrayBase<Derived> &x)
{
  return x + chi.values.conjugate() * kernel.convolve(x, true);
}

namespace detail
{
template <typename Scalar>
std::complex<Scalar> dot(const ComplexArray<Scalar> &a, const ComplexArray<Scalar> &b)
{
  // sum conj(a) b
  return (a.conjugate() * b).sum();
}

template <typename Scalar>
Scalar norm(const ComplexArray<Scalar> &a)
{
  return std::sqrt(a.abs2().sum());
}
}  // namespace detail

/// Relative L2 norm of (I + W chi) E - E_inc.
template <typename Scalar>
Scalar forward_residual(const WKernel<Scalar> &kernel, const ContrastMap<Scalar> &chi,
                        const ComplexField<Scalar> &field, const ComplexField<Scalar> &incident)
{
  require_same_grid(kernel.grid(), chi.grid, "forward_residual");
  require_same_grid(kernel.grid(), field.grid, "forward_residual");
  require_same_grid(kernel.grid(), incident.grid, "forward_residual");
  const ComplexArray<Scalar> r = vie_operator(kernel, chi, field.values) - incident.values;
  const Scalar nb = detail::norm<Scalar>(incident.values);
  const Scalar nr = detail::norm<Scalar>(r);
  return nb > Scalar(0) ? nr / nb : nr;
}

/// BiCGSTAB on (I + W chi) E = E_inc, started from E_inc.
///
/// Returns the best iterate seen. Hitting max_iter is not an error: the
/// report comes back with converged = false. NaN/Inf in the recursion throws
/// NumericalBreakdown. Convergence is always confirmed on the true residual.
template <typename Scalar>
std::pair<ComplexField<Scalar>, SolveReport> solve_forward(const WKernel<Scalar> &kernel,
                                                           const ContrastMap<Scalar> &chi,
                                                           const ComplexField<Scalar> &incident,
                                                           const SolveOptions &opts = {})
{
  using C = std::complex<Scalar>;
  using Array = ComplexArray<Scalar>;
  opts.validate();
  require_same_grid(kernel.grid(), chi.grid, "solve_forward");
  require_same_grid(kernel.grid(), incident.grid, "solve_forward");
  const auto t0 = std::chrono::steady_clock::now();

  SolveReport report;
  report.sampling_ratio = kernel.grid().sampling_ratio();
  const Array &b = incident.values;
  const Scalar norm_b = detail::norm<Scalar>(b);
  const Scalar scale = norm_b > Scalar(0) ? norm_b : Scalar(1);
  const Scalar tol = static_cast<Scalar>(opts.tol);

  auto apply = [&](const Array &v) { return vie_operator(kernel, chi, v); };
  auto finish = [&](Array x, Scalar res, bool ok) {
    report.final_residual = static_cast<double>(res);
    report.converged = ok;
    report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return std::make_pair(ComplexField<Scalar>(incident.grid, std::move(x)), report);
  };

  Array x = b;
  Array r = b - apply(x);
  Scalar res = detail::norm<Scalar>(r) / scale;
  if (!std::isfinite(res))
  {
    throw NumericalBreakdown("non-finite initial residual");
  }
  report.residual_history.push_back(static_cast<double>(res));
  if (res <= tol)
  {
    return finish(std::move(x), res, true);
  }

  Array best_x = x;
  Scalar best_res = res;
  Scalar window_start_res = res;
  int window_start = 0;

  Array r_hat, p, v, s, t;
  C rho(1), alpha(1), omega(1);
  bool fresh = true;

  auto restart = [&](const Array &from) {
    x = from;
    r = b - apply(x);
    fresh = true;
    ++report.restarts;
  };

  for (int it = 1; it <= opts.max_iter; ++it)
  {
    if (fresh)
    {
      r_hat = r;
      p = r;
      rho = detail::dot<Scalar>(r_hat, r);
      fresh = false;
    }
    v = apply(p);
    const C denom = detail::dot<Scalar>(r_hat, v);
    if (denom == C(0) || rho == C(0))
    {
      report.iterations = it;
      restart(best_x);
      continue;
    }
    alpha = rho / denom;
    s = r - alpha * v;
    const Scalar s_res = detail::norm<Scalar>(s) / scale;
    if (s_res <= tol)
    {
      x += alpha * p;
      r = s;
    }
    else
    {
      t = apply(s);
      const Scalar tt = t.abs2().sum();
      omega = tt > Scalar(0) ? detail::dot<Scalar>(t, s) / tt : C(0);
      x += alpha * p + omega * s;
      r = s - omega * t;
    }
    res = detail::norm<Scalar>(r) / scale;
    report.iterations = it;
    if (!std::isfinite(res) || !std::isfinite(std::abs(alpha)) || !std::isfinite(std::abs(omega)))
    {
      throw NumericalBreakdown("BiCGSTAB produced a non-finite value at iteration " +
                               std::to_string(it));
    }

    if (res <= tol)
    {
      // guard against drift between the recursive and true residuals
      const Array true_r = b - apply(x);
      const Scalar true_res = detail::norm<Scalar>(true_r) / scale;
      if (true_res <= tol)
      {
        report.residual_history.push_back(static_cast<double>(std::min(true_res, best_res)));
        return finish(std::move(x), true_res, true);
      }
      res = true_res;
      r = true_r;
      fresh = true;
      ++report.restarts;
    }
    if (res < best_res)
    {
      best_res = res;
      best_x = x;
      report.residual_history.push_back(static_cast<double>(best_res));
    }

    bool stagnated = false;
    if (it - window_start >= opts.stagnation_window)
    {
      stagnated = best_res > window_start_res * Scalar(1.0 - opts.stagnation_drop);
      window_start = it;
      window_start_res = best_res;
    }
    if (stagnated)
    {
      restart(best_x);
    }
    else if (fresh)
    {
      // restarted above from the true residual
    }
    else if (omega == C(0))
    {
      restart(x);
    }
    else
    {
      const C rho_next = detail::dot<Scalar>(r_hat, r);
      const C beta = (rho_next / rho) * (alpha / omega);
      rho = rho_next;
      p = r + beta * (p - omega * v);
    }
  }
  const Scalar final_res = detail::norm<Scalar>(Array(b - apply(best_x))) / scale;
  return finish(std::move(best_x), final_res, final_res <= tol);
}

}  // namespace emfield
