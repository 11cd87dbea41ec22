#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace emfield
{

struct SelfTestCheck
{
  std::string name;
  bool passed = false;
  double value = 0.0;      // measured error / quantity
  double threshold = 0.0;  // pass bound for value
};

/// Oracle checks on randomly generated instances of side `size`:
/// convolution vs dense operator (forward and adjoint), analytic vs finite
/// difference gradients, iterative vs dense direct solve, stencil exactness
/// and the Bessel Wronskian.
std::vector<SelfTestCheck> run_selftest(int size, std::uint64_t seed);

}  // namespace emfield
