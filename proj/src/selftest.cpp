#include "emfield/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include <Eigen/LU>

#include "emfield/greens_operator.hpp"
#include "emfield/physics_losses.hpp"
#include "emfield/special_functions.hpp"
#include "emfield/synthetic.hpp"
#include "emfield/vie_solver.hpp"

namespace emfield
{

namespace
{

using Vec = Eigen::VectorXcd;

Eigen::Map<const Vec> flat(const ComplexFieldd &f) { return {f.values.data(), f.values.size()}; }

double rel_l2(const ComplexFieldd &a, const ComplexFieldd &b)
{
  return (flat(a) - flat(b)).norm() / std::max(flat(b).norm(), 1e-300);
}

// max |analytic - fd| / max |fd| over every real degree of freedom
double gradient_error(const std::function<double(const ComplexFieldd &)> &loss,
                      const ComplexFieldd &analytic, const ComplexFieldd &at, double step)
{
  double max_err = 0.0;
  double max_ref = 0.0;
  ComplexFieldd probe = at;
  for (Eigen::Index i = 0; i < at.values.size(); ++i)
  {
    for (int part = 0; part < 2; ++part)
    {
      const std::complex<double> delta = part == 0 ? std::complex<double>(step, 0)
                                                   : std::complex<double>(0, step);
      probe.values.data()[i] = at.values.data()[i] + delta;
      const double up = loss(probe);
      probe.values.data()[i] = at.values.data()[i] - delta;
      const double down = loss(probe);
      probe.values.data()[i] = at.values.data()[i];
      const double fd = (up - down) / (2.0 * step);
      const double an = part == 0 ? analytic.values.data()[i].real() : analytic.values.data()[i].imag();
      max_err = std::max(max_err, std::abs(an - fd));
      max_ref = std::max(max_ref, std::abs(fd));
    }
  }
  return max_err / std::max(max_ref, 1e-300);
}

SelfTestCheck check(std::string name, double value, double threshold)
{
  return {std::move(name), std::isfinite(value) && value <= threshold, value, threshold};
}

}  // namespace

std::vector<SelfTestCheck> run_selftest(int size, std::uint64_t seed)
{
  detail::require(size >= 4 && size <= 64, "self-test size must lie in [4, 64]");
  std::mt19937_64 rng(seed);
  std::vector<SelfTestCheck> out;
  const Eigen::Index n = size;
  const GridSpec grid = make_grid(n, n, 1.0, frequency_for_sampling(0.5, 1.0));
  const WKerneld kernel(grid);
  const auto dense = build_dense_w(grid);

  {
    double worst = 0.0, worst_adj = 0.0;
    for (int k = 0; k < 20; ++k)
    {
      const auto x = random_field(grid, rng);
      worst = std::max(worst, rel_l2(apply_w(kernel, x), apply_dense(dense, x)));
      worst_adj = std::max(worst_adj, rel_l2(apply_w_adjoint(kernel, x), apply_dense(dense, x, true)));
    }
    out.push_back(check("fft_vs_dense_apply_w", worst, 1e-10));
    out.push_back(check("fft_vs_dense_apply_w_adjoint", worst_adj, 1e-10));
  }

  {
    const auto x = random_field(grid, rng);
    const auto y = random_field(grid, rng);
    const auto lhs = flat(y).dot(flat(apply_w(kernel, x)));          // <W x, y>
    const auto rhs = flat(apply_w_adjoint(kernel, y)).dot(flat(x));  // <x, W^H y>
    out.push_back(check("adjoint_identity", std::abs(lhs - rhs) / std::abs(lhs), 1e-10));
  }

  {
    const GridSpec small = make_grid(8, 8, 1.0, frequency_for_sampling(0.5, 1.0));
    const WKerneld k8(small);
    double worst_vie = 0.0, worst_pde = 0.0;
    for (int k = 0; k < 10; ++k)
    {
      const auto chi = random_contrast(small, rng);
      const auto e = random_field(small, rng);
      const auto inc = random_field(small, rng);
      worst_vie = std::max(
          worst_vie, gradient_error([&](const ComplexFieldd &f) { return loss_vie(k8, chi, f, inc); },
                                    grad_loss_vie(k8, chi, e, inc), e, 1e-6));
      for (int sign : {-1, 1})
      {
        const LossWeights w{0.5, 0.5, 0.1, sign};
        worst_pde = std::max(
            worst_pde, gradient_error([&](const ComplexFieldd &f) { return loss_pde(f, w); },
                                      grad_loss_pde(e, w), e, 1e-6));
      }
    }
    out.push_back(check("grad_loss_vie_vs_finite_difference", worst_vie, 1e-5));
    out.push_back(check("grad_loss_pde_vs_finite_difference", worst_pde, 1e-5));
  }

  {
    const Scene scene = centered_block_scene(n, n, std::max<Eigen::Index>(n / 4, 1), 0.5, 0.5);
    const auto chi = contrast_from_materials(scene);
    const auto inc = incident_field(scene);
    SolveOptions opts;
    opts.tol = 1e-10;
    const auto [solution, report] = solve_forward(kernel, chi, inc, opts);
    const Eigen::Map<const Vec> c(chi.values.data(), chi.values.size());
    const Eigen::MatrixXcd a =
        Eigen::MatrixXcd::Identity(grid.size(), grid.size()) + dense.matrix * c.asDiagonal();
    ComplexFieldd direct = ComplexFieldd::Zero(grid);
    Eigen::Map<Vec>(direct.values.data(), direct.values.size()) = a.partialPivLu().solve(flat(inc));
    out.push_back(check("solver_converged_residual", report.converged ? report.final_residual : 1.0, 1e-10));
    out.push_back(check("solver_vs_dense_direct", rel_l2(solution, direct), 1e-8));
  }

  {
    GridArray<double> f(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
    {
      for (Eigen::Index j = 0; j < n; ++j)
      {
        f(i, j) = double(i * i + j * j);
      }
    }
    const auto lap = laplacian_5pt(f);
    const double err = (lap.block(1, 1, n - 2, n - 2) - 4.0).abs().maxCoeff();
    out.push_back(check("laplacian_quadratic_interior", err, 1e-12));
  }

  {
    double worst = 0.0;
    for (int k = 0; k < 50; ++k)
    {
      const double x = 0.01 * std::pow(1e4, k / 49.0);
      const double w = special::bessel_j1(x) * special::bessel_y0(x) -
                       special::bessel_j0(x) * special::bessel_y1(x);
      const double expected = 2.0 / (std::numbers::pi * x);
      worst = std::max(worst, std::abs(w - expected) / expected);
    }
    out.push_back(check("bessel_wronskian", worst, 1e-10));
  }
  return out;
}

}  // namespace emfield
