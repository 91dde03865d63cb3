#pragma once

#include <string>
#include <vector>

#include "semcom/fbl.hpp"
#include "semcom/linalg.hpp"

namespace semcom {

// One modality's inputs to the rate-allocation problem: payload size,
// importance weight, link parameters, and the quantization depth that
// converts error probability into feature distortion.
struct ModalityLink {
  double payload_bits = 1.0;  // D = d * B
  double kappa = 0.0;         // semantic importance, >= 0
  LinkParams link;
  unsigned bits_per_element = 8;

  // a = (1 - 2^-B) * kappa
  double importance_weight() const;
  // b = C + log2(L)/L
  double rate_ceiling() const;
  // k = sqrt(8L / (pi * V * log2(e)^2))
  double logistic_slope() const;
};

// Either a raw (a, k, b, D) tuple or a ModalityLink can drive the
// solver; raw tuples serve closed-form and synthetic instances.
struct RawModality {
  double a = 0.0;
  double k = 1.0;
  double b = 1.0;
  double payload_bits = 1.0;
};
ModalityLink link_from_raw(const RawModality& raw);

// f(tau) = sum_m a_m / (1 + exp[k_m (b_m - D_m tau)]) - delta0.
// Strictly increasing in tau for positive weights; evaluated from the
// dominant exponential side so large exponents cannot overflow.
double f_tau(const std::vector<ModalityLink>& links, double delta0, double tau);

struct FeasibilityReport {
  bool ok = false;
  std::string violation;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  double delta0 = 0.0;
  double half_weight_sum = 0.0;  // 0.5 * sum_m a_m
  double f_at_lo = 0.0;
  double f_at_hi = 0.0;
};

// Checks delta0 <= 0.5*sum(a), f(0) < 0, and f at the bracket top
// >= 0, and returns the bisection bracket [0, min_m b_m/D_m].
FeasibilityReport feasibility_check(const std::vector<ModalityLink>& links, double delta0);

struct RateSolution {
  double tau_star = 0.0;
  Vec rates;       // R_m = D_m * tau_star
  Vec eps;         // predicted error probability per modality
  double gamma_pred = 0.0;  // sum_m a_m * eps_m
  double delay = 0.0;       // common D_m / R_m = 1 / tau_star, channel uses
  int iterations = 0;
  double bracket_width = 0.0;
  double f_residual = 0.0;
};

// Bisection on f over the feasibility bracket until the bracket width
// drops below tol. Exact zeros return the midpoint immediately.
RateSolution solve_bisection(const std::vector<ModalityLink>& links, double delta0,
                             double tol = 1e-6, int max_iter = 200);

// R_fixed = max_m D_m / max_m (D_m / R_m): the uniform rate with the
// same end-to-end delay as the given per-modality rates.
double fixed_rate_baseline(const Vec& payload_bits, const Vec& rates);

// Numerical audit of the convexity of the distortion-budget constraint
// g(R) on the feasible region R <= b, via central second differences
// plus a cross-partial probe between modality pairs.
struct ConvexityAudit {
  bool ok = false;
  double min_second_difference = 0.0;   // over grid points with R <= b
  double max_cross_partial = 0.0;       // should be ~0: g is separable
  std::size_t points_checked = 0;
  std::size_t violations = 0;
  // Second differences just above b (outside the convex region) for
  // reference; negative values there are expected.
  double min_outside_second_difference = 0.0;
};

ConvexityAudit convexity_audit(const std::vector<ModalityLink>& links, std::size_t grid_points,
                               double fd_step = 1e-4);

}  // namespace semcom
