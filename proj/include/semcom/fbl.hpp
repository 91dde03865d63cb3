#pragma once

namespace semcom {

// Finite-blocklength link mathematics under the normal approximation:
// capacity, dispersion, Gaussian Q (exact and logistic), the achievable
// rate at a target error probability, and its closed-form inversion.
// Rates are in bits per channel use; logs are base 2 throughout,
// including the log(L)/L correction term.

// C = 0.5 * log2(1 + snr)
double capacity(double snr);

// V = 1 - (1 + snr)^-2, in [0, 1)
double dispersion(double snr);

// Q(z) = integral_z^inf exp(-t^2/2)/sqrt(2*pi) dt = 0.5*erfc(z/sqrt(2))
double q_exact(double z);

// Inverse of q_exact on (0, 1), safeguarded Newton + bisection.
double q_inv(double eps);

// Logistic approximation Q(z) ~ 1/(1 + exp(2*a*z)) with a = sqrt(2/pi).
double q_logistic(double z);

struct LinkParams {
  double snr = 0.0;          // linear scale, >= 0
  double blocklength = 2.0;  // channel uses, >= 2
  double capacity = 0.0;     // bits per use
  double dispersion = 0.0;   // dimensionless

  static LinkParams from_snr(double snr, double blocklength);
  // Recompute capacity/dispersion from snr and compare to the stored
  // fields; true when both agree to 1e-12.
  bool consistent() const;
};

// R <= C - sqrt(V/L)*Qinv(eps)*log2(e) + log2(L)/L. May exceed C for
// eps > 0.5 (negative Qinv); callers clamp where that matters.
double achievable_rate(const LinkParams& link, double eps);

// k = sqrt(8L / (pi * V * log2(e)^2)), the logistic slope constant.
double logistic_slope(const LinkParams& link);

// b = C + log2(L)/L, the rate at which the error probability hits 1/2.
double rate_ceiling(const LinkParams& link);

// eps(R) = 1/(1 + exp[k*(b - R)]): the logistic inversion of
// achievable_rate. V = 0 degenerates to a step at R = b.
double error_prob_of_rate(const LinkParams& link, double rate);

}  // namespace semcom
