#pragma once

// Cylindrical Bessel functions of orders 0 and 1 for real arguments, and the
// Hankel functions of the second kind built from them.
//
// Below kSeriesSwitch the ascending power series are summed in extended
// precision (the terms of J0 at x = 14 reach ~3e4 before cancelling down to
// O(0.1)); above it the Hankel asymptotic expansion is summed until the terms
// stop decreasing.

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>
#include <type_traits>

#include "emfield/errors.hpp"

namespace emfield::special
{

inline constexpr double kSeriesSwitch = 14.0;

namespace detail
{

// Accumulation type for the power series: at least long double.
template <typename Scalar>
using Wide = std::conditional_t<(sizeof(Scalar) < sizeof(long double)), long double, Scalar>;

template <typename W>
inline constexpr W kEulerGamma = W(0.57721566490153286060651209008240243104215933593992L);

template <typename Scalar>
void check_argument(Scalar x, bool allow_zero, const char *name)
{
  if (std::isnan(x) || !std::isfinite(x) || x < Scalar(0) || (!allow_zero && x == Scalar(0)))
  {
    throw ValidationError(std::string(name) + ": argument must be " +
                          (allow_zero ? "finite and >= 0" : "finite and > 0"));
  }
}

template <typename Scalar>
struct Pair
{
  Scalar j;
  Scalar y;
};

// J0 and (for x > 0) Y0 by ascending series.
template <typename Scalar>
Pair<Scalar> series_order0(Scalar xs)
{
  using W = Wide<Scalar>;
  const W x = xs;
  const W q = -x * x / W(4);
  W term = 1;
  W sum_j = 1;
  W sum_y = 0;
  W harmonic = 0;
  for (int k = 1; k < 200; ++k)
  {
    term *= q / (W(k) * W(k));
    harmonic += W(1) / W(k);
    sum_j += term;
    sum_y -= harmonic * term;
    if (std::abs(term) * harmonic < std::numeric_limits<W>::epsilon() * std::abs(sum_j) * W(1e-3) &&
        k > 2)
    {
      break;
    }
  }
  Pair<Scalar> out{static_cast<Scalar>(sum_j), std::numeric_limits<Scalar>::quiet_NaN()};
  if (x > 0)
  {
    const W two_over_pi = W(2) / std::numbers::pi_v<W>;
    out.y = static_cast<Scalar>(two_over_pi * ((std::log(x / W(2)) + kEulerGamma<W>) * sum_j + sum_y));
  }
  return out;
}

// J1 and (for x > 0) Y1 by ascending series.
template <typename Scalar>
Pair<Scalar> series_order1(Scalar xs)
{
  using W = Wide<Scalar>;
  const W x = xs;
  const W q = -x * x / W(4);
  // term_k = q^k / (k! (k+1)!), digamma(k+1) + digamma(k+2) = 2 H_k + 1/(k+1) - 2 gamma
  W term = 1;
  W sum_j = 1;
  W harmonic = 0;
  W sum_y = W(1) - W(2) * kEulerGamma<W>;
  for (int k = 1; k < 200; ++k)
  {
    term *= q / (W(k) * W(k + 1));
    harmonic += W(1) / W(k);
    const W psi_sum = W(2) * harmonic + W(1) / W(k + 1) - W(2) * kEulerGamma<W>;
    sum_j += term;
    sum_y += psi_sum * term;
    if (std::abs(term) * (std::abs(psi_sum) + 1) <
            std::numeric_limits<W>::epsilon() * std::abs(sum_j) * W(1e-3) &&
        k > 2)
    {
      break;
    }
  }
  const W half_x = x / W(2);
  Pair<Scalar> out{static_cast<Scalar>(half_x * sum_j), std::numeric_limits<Scalar>::quiet_NaN()};
  if (x > 0)
  {
    const W pi = std::numbers::pi_v<W>;
    const W j1 = half_x * sum_j;
    out.y = static_cast<Scalar>(W(2) / pi * std::log(half_x) * j1 - W(2) / (pi * x) -
                                half_x / pi * sum_y);
  }
  return out;
}

// Hankel asymptotic expansion: J = A (P cos chi - Q sin chi), Y = A (P sin chi + Q cos chi)
// with chi = x - (order/2 + 1/4) pi, A = sqrt(2 / (pi x)).
template <typename Scalar>
Pair<Scalar> asymptotic(Scalar xs, int order)
{
  using W = Wide<Scalar>;
  const W x = xs;
  const W mu = W(4 * order * order);
  W p = 1;
  W q = 0;
  W term = 1;  // a_k / x^k including alternating sign handling below
  W last = std::numeric_limits<W>::infinity();
  for (int k = 1; k < 200; ++k)
  {
    const W odd = W(2 * k - 1);
    const W next = term * (mu - odd * odd) / (W(k) * W(8) * x);
    if (std::abs(next) >= last)
    {
      break;  // optimal truncation
    }
    last = std::abs(next);
    term = next;
    // k odd contributes to Q with sign (-1)^((k-1)/2); k even to P with sign (-1)^(k/2)
    if (k % 2 == 1)
    {
      q += ((k / 2) % 2 == 0 ? term : -term);
    }
    else
    {
      p += ((k / 2) % 2 == 0 ? term : -term);
    }
    if (last < std::numeric_limits<W>::epsilon() * W(1e-2))
    {
      break;
    }
  }
  const W amp = std::sqrt(W(2) / (std::numbers::pi_v<W> * x));
  const W c = std::cos(x);
  const W s = std::sin(x);
  const W r2 = std::numbers::sqrt2_v<W> / W(2);
  W cos_chi, sin_chi;
  if (order == 0)
  {
    cos_chi = (c + s) * r2;
    sin_chi = (s - c) * r2;
  }
  else
  {
    cos_chi = (s - c) * r2;
    sin_chi = -(s + c) * r2;
  }
  return {static_cast<Scalar>(amp * (p * cos_chi - q * sin_chi)),
          static_cast<Scalar>(amp * (p * sin_chi + q * cos_chi))};
}

template <typename Scalar>
Pair<Scalar> order0(Scalar x)
{
  return x <= Scalar(kSeriesSwitch) ? series_order0(x) : asymptotic(x, 0);
}

template <typename Scalar>
Pair<Scalar> order1(Scalar x)
{
  return x <= Scalar(kSeriesSwitch) ? series_order1(x) : asymptotic(x, 1);
}

}  // namespace detail

template <typename Scalar>
Scalar bessel_j0(Scalar x)
{
  detail::check_argument(x, true, "bessel_j0");
  return detail::order0(x).j;
}

template <typename Scalar>
Scalar bessel_j1(Scalar x)
{
  detail::check_argument(x, true, "bessel_j1");
  return detail::order1(x).j;
}

template <typename Scalar>
Scalar bessel_y0(Scalar x)
{
  detail::check_argument(x, false, "bessel_y0");
  return detail::order0(x).y;
}

template <typename Scalar>
Scalar bessel_y1(Scalar x)
{
  detail::check_argument(x, false, "bessel_y1");
  return detail::order1(x).y;
}

/// H0^(2)(x) = J0(x) - j Y0(x), x > 0.
template <typename Scalar>
std::complex<Scalar> hankel2_0(Scalar x)
{
  detail::check_argument(x, false, "hankel2_0");
  const auto v = detail::order0(x);
  return {v.j, -v.y};
}

/// H1^(2)(x) = J1(x) - j Y1(x), x > 0.
template <typename Scalar>
std::complex<Scalar> hankel2_1(Scalar x)
{
  detail::check_argument(x, false, "hankel2_1");
  const auto v = detail::order1(x);
  return {v.j, -v.y};
}

}  // namespace emfield::special
