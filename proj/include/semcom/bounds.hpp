#pragma once

#include <vector>

#include "semcom/graph.hpp"
#include "semcom/linalg.hpp"

namespace semcom {

enum class NormOrder { l1, l2, linf };

// Holder conjugate of p: l1 <-> linf, l2 <-> l2.
NormOrder conjugate(NormOrder p);

double norm_of(const double* v, std::size_t n, NormOrder order);
double norm_of(const Vec& v, NormOrder order);

// Dual norm ||v||_q of the L_p norm.
double dual_norm(const Vec& v, NormOrder p);

// Unit-norm direction achieving sup_{||x||_p <= 1} v.x = ||v||_q.
// Ties at p = 1 break toward the lowest index.
Vec dual_maximizer(const Vec& v, NormOrder p);

// Perturbation ball around the per-modality feature centers: one radius
// per modality, shared norm order.
struct PerturbationBall {
  NormOrder p = NormOrder::linf;
  Vec radii;
};

// Two lines sandwiching ReLU on a pre-activation interval [lo, hi].
struct ReluRelaxation {
  double upper_slope = 0.0;
  double upper_intercept = 0.0;
  double lower_slope = 0.0;
  double lower_intercept = 0.0;
};
ReluRelaxation relax_relu(double lo, double hi);

// Affine sandwich of a node's output in terms of the flattened graph
// input: lower_coef*u + lower_off <= h(u) <= upper_coef*u + upper_off
// for every u in the ball the bounds were propagated against.
// Columns are grouped in modality blocks (offsets includes the total).
struct LinearBounds {
  Mat lower_coef;
  Mat upper_coef;
  Vec lower_off;
  Vec upper_off;
  std::vector<std::size_t> block_offsets;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Backward bound propagation through the graph. Pre-activation boxes
// for ReLU nodes come from full backward concretization per node, which
// is quadratic in graph size but tightest within the framework. Affine
// graphs come out exact (lower == upper).
LinearBounds propagate_bounds(const CompGraph& graph, const std::vector<Vec>& center,
                              const PerturbationBall& ball);

// Worst-case output box of linear bounds over the ball:
//   hi_r = sum_m radius_m * ||A_U block||_q + A_U row . center + off
// and the mirrored lower expression.
std::vector<Interval> concretize(const LinearBounds& bounds, const std::vector<Vec>& center,
                                 const PerturbationBall& ball);

// Noise-only robustness bound and per-modality importance weights.
// gamma = sum_m radius_m * kappa_m drops the center-dependent terms of
// the full box; `output_box` carries the full concretization so the two
// are never conflated.
struct RobustnessReport {
  double gamma = 0.0;
  Vec kappa;
  NormOrder p = NormOrder::linf;
  Vec radii;
  std::vector<Interval> output_box;
};

RobustnessReport robustness_bound(const LinearBounds& bounds, const std::vector<Vec>& center,
                                  const PerturbationBall& ball);

}  // namespace semcom
