#pragma once

// 100-digit reference values for J0, J1, Y0, Y1. Ascending series up to
// x = 60, Hankel asymptotic expansion beyond (truncation error < e^{-120}).
// Shares no code with the library implementation.

#include <complex>

#include <boost/math/constants/constants.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

namespace emfield::oracle
{

using Big = boost::multiprecision::cpp_bin_float_100;

struct BesselValues
{
  double j0, j1, y0, y1;

  std::complex<double> h0() const { return {j0, -y0}; }
  std::complex<double> h1() const { return {j1, -y1}; }
};

inline BesselValues bessel_series(const Big &x)
{
  using boost::multiprecision::log;
  const Big pi = boost::math::constants::pi<Big>();
  const Big gamma = boost::math::constants::euler<Big>();
  const Big q = -x * x / 4;
  const Big tiny("1e-90");

  Big j0 = 0, s0 = 0, j1 = 0, s1 = 0, h = 0;
  Big t0 = 1;  // q^k / (k!)^2
  Big t1 = 1;  // q^k / (k! (k+1)!)
  for (int k = 0; k < 2000; ++k)
  {
    if (k > 0)
    {
      t0 *= q / (Big(k) * k);
      t1 *= q / (Big(k) * (k + 1));
      h += Big(1) / k;
    }
    j0 += t0;
    s0 += h * t0;
    j1 += t1;
    s1 += (2 * h + Big(1) / (k + 1) - 2 * gamma) * t1;
    if (k > 10 && abs(t0) < tiny && abs(t1) < tiny)
    {
      break;
    }
  }
  const Big half = x / 2;
  const Big J0 = j0;
  const Big Y0 = 2 / pi * ((log(half) + gamma) * j0 - s0);
  const Big J1 = half * j1;
  const Big Y1 = 2 / pi * log(half) * J1 - 2 / (pi * x) - half / pi * s1;
  return {J0.convert_to<double>(), J1.convert_to<double>(), Y0.convert_to<double>(),
          Y1.convert_to<double>()};
}

inline BesselValues bessel_asymptotic(const Big &x)
{
  using boost::multiprecision::cos;
  using boost::multiprecision::sin;
  using boost::multiprecision::sqrt;
  const Big pi = boost::math::constants::pi<Big>();
  auto eval = [&](int nu, Big &J, Big &Y) {
    const Big mu = 4 * nu * nu;
    Big P = 0, Q = 0;
    Big a = 1;  // a_k / x^k
    for (int k = 0; k < 60; ++k)
    {
      if (k > 0)
      {
        a *= (mu - Big(2 * k - 1) * (2 * k - 1)) / (Big(8) * k * x);
      }
      const int sign = ((k / 2) % 2 == 0) ? 1 : -1;
      if (k % 2 == 0)
      {
        P += sign * a;
      }
      else
      {
        Q += sign * a;
      }
    }
    const Big chi = x - (Big(nu) / 2 + Big(1) / 4) * pi;
    const Big amp = sqrt(2 / (pi * x));
    J = amp * (P * cos(chi) - Q * sin(chi));
    Y = amp * (P * sin(chi) + Q * cos(chi));
  };
  Big J0, Y0, J1, Y1;
  eval(0, J0, Y0);
  eval(1, J1, Y1);
  return {J0.convert_to<double>(), J1.convert_to<double>(), Y0.convert_to<double>(),
          Y1.convert_to<double>()};
}

/// Reference values at the exact double argument x.
inline BesselValues bessel_reference(double x)
{
  const Big bx(x);
  return x <= 60.0 ? bessel_series(bx) : bessel_asymptotic(bx);
}

}  // namespace emfield::oracle
