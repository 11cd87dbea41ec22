#include <doctest.h>

#include <random>
#include <thread>
#include <vector>

#include <Eigen/LU>

#include "emfield/greens_operator.hpp"
#include "emfield/synthetic.hpp"
#include "emfield/vie_solver.hpp"
#include "test_support.hpp"

using namespace emfield;
using emfield::testing::flat;
using emfield::testing::rel_l2;

namespace
{

using C = std::complex<double>;

// (I + W chi) x = b by dense LU
ComplexFieldd dense_solve(const GridSpec &g, const ContrastMapd &chi, const ComplexFieldd &b)
{
  const auto dense = build_dense_w(g);
  const Eigen::Map<const Eigen::VectorXcd> c(chi.values.data(), chi.values.size());
  const Eigen::MatrixXcd a = Eigen::MatrixXcd::Identity(g.size(), g.size()) + dense.matrix * c.asDiagonal();
  ComplexFieldd out = ComplexFieldd::Zero(g);
  Eigen::Map<Eigen::VectorXcd>(out.values.data(), out.values.size()) = a.partialPivLu().solve(flat(b));
  return out;
}

struct Instance
{
  Scene scene;
  WKerneld kernel;
  ContrastMapd chi;
  ComplexFieldd inc;
};

Instance block_instance(Eigen::Index n, Eigen::Index block, double chi, double ratio = 0.5)
{
  Scene s = centered_block_scene(n, n, block, chi, ratio);
  WKerneld k(s.grid);
  auto c = contrast_from_materials(s);
  auto e = incident_field(s);
  return {std::move(s), std::move(k), std::move(c), std::move(e)};
}

}  // namespace

TEST_CASE("free space: the incident field is the solution")
{
  const auto inst = block_instance(16, 4, 0.0);
  REQUIRE(inst.chi.is_zero());
  const auto [e, report] = solve_forward(inst.kernel, inst.chi, inst.inc);
  CHECK((e.values == inst.inc.values).all());
  CHECK(report.iterations == 0);
  CHECK(report.final_residual == 0.0);
  CHECK(report.converged);
  CHECK(forward_residual(inst.kernel, inst.chi, inst.inc, inst.inc) == 0.0);
}

TEST_CASE("scatterer solve matches a dense direct solve")
{
  const auto inst = block_instance(24, 6, 0.5);
  SolveOptions opts;
  opts.tol = 1e-10;
  const auto [e, report] = solve_forward(inst.kernel, inst.chi, inst.inc, opts);
  CHECK(report.converged);
  CHECK(report.final_residual <= 1e-10);
  CHECK(report.sampling_ratio == doctest::Approx(0.5));
  CHECK(forward_residual(inst.kernel, inst.chi, e, inst.inc) <= 1e-10);
  CHECK(rel_l2(e, dense_solve(inst.scene.grid, inst.chi, inst.inc)) <= 1e-8);
}

TEST_CASE("lossy scatterer solve matches a dense direct solve")
{
  const GridSpec g = make_grid(20, 20, 1.0, frequency_for_sampling(0.8, 1.0));
  MaskArray mask = MaskArray::Zero(20, 20);
  mask.block(5, 8, 9, 4).setOnes();
  mask.block(14, 2, 3, 12).setOnes();
  const Scene scene = make_scene(g, mask, 2, 2, {5.0, 0.002});
  const WKerneld kernel(g);
  const auto chi = contrast_from_materials(scene);
  CHECK(chi.values(6, 9).imag() < 0.0);
  const auto inc = incident_field(scene);
  SolveOptions opts;
  opts.tol = 1e-10;
  const auto [e, report] = solve_forward(kernel, chi, inc, opts);
  CHECK(report.converged);
  CHECK(rel_l2(e, dense_solve(g, chi, inc)) <= 1e-8);
}

TEST_CASE("iteration cap returns the best iterate without throwing")
{
  const auto inst = block_instance(24, 6, 0.5);
  SolveOptions opts;
  opts.tol = 1e-10;
  opts.max_iter = 1;
  const auto [e, report] = solve_forward(inst.kernel, inst.chi, inst.inc, opts);
  CHECK_FALSE(report.converged);
  CHECK(report.iterations == 1);
  CHECK(report.final_residual > 1e-10);
  CHECK(report.final_residual == doctest::Approx(forward_residual(inst.kernel, inst.chi, e, inst.inc)));
  CHECK(report.final_residual < forward_residual(inst.kernel, inst.chi, inst.inc, inst.inc));
}

TEST_CASE("residual history is non-increasing")
{
  for (double chi : {0.3, 1.0, 2.0})
  {
    const auto inst = block_instance(20, 8, chi, 0.9);
    SolveOptions opts;
    opts.tol = 1e-11;
    const auto [e, report] = solve_forward(inst.kernel, inst.chi, inst.inc, opts);
    REQUIRE(report.residual_history.size() >= 2);
    for (std::size_t i = 1; i < report.residual_history.size(); ++i)
    {
      CHECK(report.residual_history[i] <= report.residual_history[i - 1]);
    }
    CHECK(report.converged);
  }
}

TEST_CASE("forward residual matches a dense evaluation")
{
  std::mt19937_64 rng(21);
  const GridSpec g = make_grid(8, 8, 1.0, frequency_for_sampling(0.5, 1.0));
  const WKerneld kernel(g);
  const auto dense = build_dense_w(g);
  for (int k = 0; k < 5; ++k)
  {
    const auto chi = random_contrast(g, rng);
    const auto e = random_field(g, rng);
    const auto inc = random_field(g, rng);
    const Eigen::Map<const Eigen::VectorXcd> c(chi.values.data(), chi.values.size());
    const Eigen::VectorXcd r = flat(e) + dense.matrix * (c.array() * flat(e).array()).matrix() - flat(inc);
    const double expected = r.norm() / flat(inc).norm();
    CHECK(forward_residual(kernel, chi, e, inc) == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("solution is linear in the excitation")
{
  const auto inst = block_instance(16, 4, 0.6);
  SolveOptions opts;
  opts.tol = 1e-11;
  const auto base = solve_forward(inst.kernel, inst.chi, inst.inc, opts).first;
  for (C alpha : {C(2.0), C(-1.0), C(0.0, 1.0)})
  {
    const ComplexFieldd scaled(inst.inc.grid, alpha * inst.inc.values);
    const auto e = solve_forward(inst.kernel, inst.chi, scaled, opts).first;
    const ComplexFieldd expected(inst.inc.grid, alpha * base.values);
    CHECK(rel_l2(e, expected) <= 1e-9);
  }
}

TEST_CASE("reciprocity between two free-space cells")
{
  const GridSpec g = make_grid(18, 18, 1.0, frequency_for_sampling(0.6, 1.0));
  MaskArray mask = MaskArray::Zero(18, 18);
  mask.block(6, 5, 5, 7).setOnes();
  const Eigen::Index pr = 2, pc = 3, qr = 15, qc = 14;
  const WKerneld kernel(g);
  SolveOptions opts;
  opts.tol = 1e-10;
  const Scene sp = make_scene(g, mask, pr, pc, {3.0, 0.001});
  const Scene sq = make_scene(g, mask, qr, qc, {3.0, 0.001});
  const auto chi = contrast_from_materials(sp);
  const auto ep = solve_forward(kernel, chi, incident_field(sp), opts).first;
  const auto eq = solve_forward(kernel, chi, incident_field(sq), opts).first;
  const C a = ep.values(qr, qc);
  const C b = eq.values(pr, pc);
  CHECK(std::abs(a - b) / std::abs(a) <= 10 * opts.tol);
  CHECK(std::abs(a - incident_field(sp).values(qr, qc)) > 1e-6 * std::abs(a));  // scattering matters
}

TEST_CASE("concurrent solves sharing one kernel")
{
  const auto inst = block_instance(20, 6, 0.5);
  SolveOptions opts;
  opts.tol = 1e-10;
  const auto reference = solve_forward(inst.kernel, inst.chi, inst.inc, opts).first;
  std::vector<int> identical(6, 0);
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < 6; ++t)
    {
      pool.emplace_back([&, t] {
        const auto e = solve_forward(inst.kernel, inst.chi, inst.inc, opts).first;
        identical[t] = (e.values == reference.values).all();
      });
    }
  }
  for (int t = 0; t < 6; ++t)
  {
    CHECK(identical[t] == 1);
  }
}

TEST_CASE("breakdown and argument errors")
{
  const auto inst = block_instance(8, 2, 0.5);
  ContrastMapd bad = inst.chi;
  bad.values(4, 4) = C(std::nan(""), 0.0);
  CHECK_THROWS_AS(solve_forward(inst.kernel, bad, inst.inc), NumericalBreakdown);
  SolveOptions opts;
  opts.tol = 1.0;
  CHECK_THROWS_AS(solve_forward(inst.kernel, inst.chi, inst.inc, opts), ValidationError);
  opts.tol = 1e-8;
  opts.max_iter = 0;
  CHECK_THROWS_AS(solve_forward(inst.kernel, inst.chi, inst.inc, opts), ValidationError);
  const auto other = ComplexFieldd::Zero(make_grid(8, 9, 1.0, 1e7));
  CHECK_THROWS_AS(forward_residual(inst.kernel, inst.chi, other, inst.inc), ValidationError);
}
