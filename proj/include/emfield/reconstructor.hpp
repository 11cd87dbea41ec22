#pragma once

// Recovers a total field by gradient descent on the composite physics loss,
// starting from the incident field.

#include <cmath>
#include <utility>
#include <vector>

#include "emfield/errors.hpp"
#include "emfield/physics_losses.hpp"

namespace emfield
{

struct OptimizerConfig
{
  int max_iters = 5000;
  double step_init = 1.0;
  double grad_tol = 1e-8;   // on the L2 norm of the packed gradient
  double loss_tol = 1e-12;  // on the relative decrease between accepted iterates
  bool line_search = true;
  double armijo_c = 1e-4;
  int max_backtracks = 60;

  void validate() const
  {
    detail::require(max_iters >= 1, "max_iters must be >= 1");
    detail::require(step_init > 0.0 && std::isfinite(step_init), "step_init must be > 0");
    detail::require(grad_tol > 0.0, "grad_tol must be > 0");
    detail::require(loss_tol > 0.0, "loss_tol must be > 0");
  }
};

struct ReconstructionReport
{
  /// Entry 0 is the initial iterate; one more per accepted step.
  std::vector<LossBreakdown> loss_history;
  int iterations = 0;
  bool converged = false;
  double final_grad_norm = 0.0;
};

/// Minimizes lambda_pde L_pde + lambda_vie L_vie over E.
///
/// Each iteration tries twice the previously accepted step (step_init on the
/// first) and halves until the Armijo condition holds. With line_search off
/// the trial step is always accepted.
template <typename Scalar>
std::pair<ComplexField<Scalar>, ReconstructionReport> reconstruct_field(
    const WKernel<Scalar> &kernel, const ContrastMap<Scalar> &chi,
    const ComplexField<Scalar> &incident, const LossWeights &weights,
    const OptimizerConfig &cfg = {}, const MaskArray *pde_region = nullptr)
{
  weights.validate();
  cfg.validate();
  detail::require(!(weights.lambda_vie == 0.0 && weights.lambda_pde > 0.0),
                  "lambda_vie = 0 with lambda_pde > 0 is ill-posed: the PDE loss alone is "
                  "minimized by E = 0");
  detail::require(weights.lambda_vie > 0.0, "reconstruction requires lambda_vie > 0");
  require_same_grid(kernel.grid(), chi.grid, "reconstruct_field");
  require_same_grid(kernel.grid(), incident.grid, "reconstruct_field");

  auto evaluate = [&](const ComplexField<Scalar> &e) {
    const LossBreakdown b = loss_composite(kernel, chi, e, incident, weights,
                                           static_cast<const RealMap<Scalar> *>(nullptr),
                                           static_cast<const RealMap<Scalar> *>(nullptr), pde_region);
    if (!std::isfinite(b.composite))
    {
      throw NumericalBreakdown("non-finite composite loss during reconstruction");
    }
    return b;
  };
  auto gradient = [&](const ComplexField<Scalar> &e) {
    ComplexArray<Scalar> g =
        static_cast<Scalar>(weights.lambda_vie) * grad_loss_vie(kernel, chi, e, incident).values;
    if (weights.lambda_pde > 0.0)
    {
      g += static_cast<Scalar>(weights.lambda_pde) * grad_loss_pde(e, weights, pde_region).values;
    }
    return g;
  };

  ReconstructionReport report;
  ComplexField<Scalar> e = incident;
  LossBreakdown current = evaluate(e);
  report.loss_history.push_back(current);
  double step = cfg.step_init;
  bool first = true;

  for (int it = 0;; ++it)
  {
    const ComplexArray<Scalar> g = gradient(e);
    const double g2 = static_cast<double>(g.abs2().sum());
    report.final_grad_norm = std::sqrt(g2);
    if (!std::isfinite(g2))
    {
      throw NumericalBreakdown("non-finite gradient during reconstruction");
    }
    if (current.composite == 0.0 || report.final_grad_norm <= cfg.grad_tol)
    {
      report.converged = true;
      break;
    }
    if (it >= cfg.max_iters)
    {
      break;
    }

    double trial = first ? cfg.step_init : 2.0 * step;
    first = false;
    ComplexField<Scalar> candidate;
    LossBreakdown next;
    bool accepted = false;
    for (int k = 0; k <= cfg.max_backtracks; ++k)
    {
      candidate = ComplexField<Scalar>(e.grid, e.values - static_cast<Scalar>(trial) * g);
      next = evaluate(candidate);
      if (!cfg.line_search || next.composite <= current.composite - cfg.armijo_c * trial * g2)
      {
        accepted = true;
        break;
      }
      trial *= 0.5;
    }
    if (!accepted)
    {
      break;  // no decrease representable at this precision
    }
    step = trial;
    const double decrease = current.composite - next.composite;
    e = std::move(candidate);
    current = next;
    report.loss_history.push_back(current);
    report.iterations = it + 1;
    if (current.composite == 0.0 ||
        (decrease >= 0.0 && decrease <= cfg.loss_tol * std::abs(current.composite + decrease)))
    {
      report.final_grad_norm = std::sqrt(static_cast<double>(gradient(e).abs2().sum()));
      report.converged = true;
      break;
    }
  }
  return {std::move(e), std::move(report)};
}

}  // namespace emfield
