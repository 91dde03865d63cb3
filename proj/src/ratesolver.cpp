#include "semcom/ratesolver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace semcom {

namespace {

double stable_logistic_eps(double k, double b, double rate) {
  const double x = k * (b - rate);
  if (x >= 0.0) {
    const double t = std::exp(-x);
    return t / (1.0 + t);
  }
  return 1.0 / (1.0 + std::exp(x));
}

// Error probability at a rate, honoring the V = 0 step limit for
// physical links.
double modality_eps(const ModalityLink& m, double rate) {
  if (m.link.dispersion <= 0.0) {
    const double b = m.rate_ceiling();
    if (rate < b) return 0.0;
    if (rate > b) return 1.0;
    return 0.5;
  }
  return stable_logistic_eps(m.logistic_slope(), m.rate_ceiling(), rate);
}

}  // namespace

double ModalityLink::importance_weight() const {
  return kappa * (1.0 - std::ldexp(1.0, -static_cast<int>(bits_per_element)));
}

double ModalityLink::rate_ceiling() const { return semcom::rate_ceiling(link); }

double ModalityLink::logistic_slope() const { return semcom::logistic_slope(link); }

ModalityLink link_from_raw(const RawModality& raw) {
  if (raw.payload_bits < 1.0) throw std::invalid_argument("link_from_raw: payload must be >= 1");
  if (raw.k <= 0.0) throw std::invalid_argument("link_from_raw: slope must be positive");
  // Synthesize link parameters that reproduce the requested constants:
  // k = sqrt(8L / (pi V log2(e)^2)) and b = C + log2(L)/L, with a large
  // blocklength so any k > 0 maps to a dispersion in (0, 1).
  constexpr double kPi = 3.14159265358979323846;
  constexpr double kLog2E = 1.4426950408889634;
  ModalityLink m;
  m.payload_bits = raw.payload_bits;
  m.bits_per_element = 62;  // 1 - 2^-B ~ 1, so a ~ kappa
  m.kappa = raw.a / (1.0 - std::ldexp(1.0, -62));
  double blocklength = 4096.0;
  double v = 8.0 * blocklength / (kPi * raw.k * raw.k * kLog2E * kLog2E);
  while (v >= 1.0) {
    // Raw slopes smaller than the physical range at this blocklength:
    // shrink L (allowed down to 2) until the dispersion is physical.
    blocklength /= 2.0;
    if (blocklength < 2.0)
      throw std::invalid_argument("link_from_raw: slope too small to realize");
    v = 8.0 * blocklength / (kPi * raw.k * raw.k * kLog2E * kLog2E);
  }
  const double snr = 1.0 / std::sqrt(1.0 - v) - 1.0;
  m.link.snr = snr;
  m.link.blocklength = blocklength;
  m.link.dispersion = v;
  // Free capacity choice absorbs the requested ceiling.
  m.link.capacity = raw.b - std::log2(blocklength) / blocklength;
  return m;
}

double f_tau(const std::vector<ModalityLink>& links, double delta0, double tau) {
  if (links.empty()) throw std::invalid_argument("f_tau: empty link list");
  if (tau < 0.0) throw std::invalid_argument("f_tau: tau must be >= 0");
  if (!(delta0 > 0.0)) throw std::invalid_argument("f_tau: delta0 must be positive");
  double acc = -delta0;
  for (const ModalityLink& m : links)
    acc += m.importance_weight() * modality_eps(m, m.payload_bits * tau);
  return acc;
}

FeasibilityReport feasibility_check(const std::vector<ModalityLink>& links, double delta0) {
  FeasibilityReport rep;
  rep.delta0 = delta0;
  if (links.empty()) {
    rep.violation = "no modalities";
    return rep;
  }
  if (!(delta0 > 0.0)) {
    rep.violation = "delta0 must be positive";
    return rep;
  }

  double a_sum = 0.0;
  double bracket_hi = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < links.size(); ++i) {
    const ModalityLink& m = links[i];
    if (m.payload_bits < 1.0) {
      rep.violation = "modality " + std::to_string(i) + " payload below one bit";
      return rep;
    }
    if (m.kappa < 0.0) {
      rep.violation = "modality " + std::to_string(i) + " has negative importance";
      return rep;
    }
    a_sum += m.importance_weight();
    const double ceiling = m.rate_ceiling();
    if (!(ceiling > 0.0)) {
      rep.violation = "modality " + std::to_string(i) + " has zero rate ceiling";
      return rep;
    }
    bracket_hi = std::min(bracket_hi, ceiling / m.payload_bits);
  }
  rep.half_weight_sum = 0.5 * a_sum;
  rep.bracket_lo = 0.0;
  rep.bracket_hi = bracket_hi;

  if (delta0 > rep.half_weight_sum) {
    rep.violation = "delta0 = " + std::to_string(delta0) + " exceeds 0.5*sum(a) = " +
                    std::to_string(rep.half_weight_sum);
    return rep;
  }
  rep.f_at_lo = f_tau(links, delta0, 0.0);
  rep.f_at_hi = f_tau(links, delta0, bracket_hi);
  if (!(rep.f_at_lo < 0.0)) {
    rep.violation = "zero-rate error floor already exceeds delta0 (f(0) = " +
                    std::to_string(rep.f_at_lo) + ")";
    return rep;
  }
  // delta0 <= 0.5*sum(a) alone guarantees a sign change only in the
  // single-modality case, so the bracket top is verified directly.
  if (rep.f_at_hi < 0.0) {
    rep.violation = "budget not reachable within the tau range (f at bracket top = " +
                    std::to_string(rep.f_at_hi) + ")";
    return rep;
  }
  rep.ok = true;
  return rep;
}

RateSolution solve_bisection(const std::vector<ModalityLink>& links, double delta0, double tol,
                             int max_iter) {
  if (!(tol > 0.0)) throw std::invalid_argument("solve_bisection: tol must be positive");
  FeasibilityReport feas = feasibility_check(links, delta0);
  if (!feas.ok) throw std::domain_error("solve_bisection: infeasible: " + feas.violation);

  double lo = feas.bracket_lo, hi = feas.bracket_hi;
  double tau = 0.5 * (lo + hi);
  int it = 0;
  while (hi - lo > tol && it < max_iter) {
    ++it;
    tau = 0.5 * (lo + hi);
    const double f = f_tau(links, delta0, tau);
    if (f == 0.0) break;  // exact tie: keep the midpoint
    if (f < 0.0)
      lo = tau;
    else
      hi = tau;
    tau = 0.5 * (lo + hi);
  }

  RateSolution sol;
  sol.tau_star = tau;
  sol.iterations = it;
  sol.bracket_width = hi - lo;
  sol.rates.reserve(links.size());
  sol.eps.reserve(links.size());
  for (const ModalityLink& m : links) {
    const double rate = m.payload_bits * tau;
    const double eps = modality_eps(m, rate);
    sol.rates.push_back(rate);
    sol.eps.push_back(eps);
    sol.gamma_pred += m.importance_weight() * eps;
  }
  sol.delay = 1.0 / tau;
  sol.f_residual = sol.gamma_pred - delta0;
  return sol;
}

double fixed_rate_baseline(const Vec& payload_bits, const Vec& rates) {
  if (payload_bits.empty() || payload_bits.size() != rates.size())
    throw std::invalid_argument("fixed_rate_baseline: size mismatch");
  double max_payload = 0.0;
  double max_delay = 0.0;
  for (std::size_t i = 0; i < payload_bits.size(); ++i) {
    if (!(payload_bits[i] > 0.0) || !(rates[i] > 0.0))
      throw std::invalid_argument("fixed_rate_baseline: entries must be positive");
    max_payload = std::max(max_payload, payload_bits[i]);
    max_delay = std::max(max_delay, payload_bits[i] / rates[i]);
  }
  return max_payload / max_delay;
}

ConvexityAudit convexity_audit(const std::vector<ModalityLink>& links, std::size_t grid_points,
                               double fd_step) {
  if (links.empty()) throw std::invalid_argument("convexity_audit: empty link list");
  if (grid_points < 2) throw std::invalid_argument("convexity_audit: need at least 2 points");
  const double h = fd_step;

  // g at an arbitrary rate vector; delta0 shifts cancel in differences.
  auto g_of = [&](const Vec& rates) {
    double acc = 0.0;
    for (std::size_t i = 0; i < links.size(); ++i)
      acc += links[i].importance_weight() * modality_eps(links[i], rates[i]);
    return acc;
  };

  Vec base(links.size());
  for (std::size_t i = 0; i < links.size(); ++i) base[i] = 0.5 * links[i].rate_ceiling();

  ConvexityAudit audit;
  audit.min_second_difference = std::numeric_limits<double>::infinity();
  audit.min_outside_second_difference = std::numeric_limits<double>::infinity();

  for (std::size_t m = 0; m < links.size(); ++m) {
    const double b = links[m].rate_ceiling();
    for (std::size_t i = 1; i <= grid_points; ++i) {
      const double r = b * static_cast<double>(i) / static_cast<double>(grid_points);
      if (r - h < 0.0) continue;
      Vec rates = base;
      rates[m] = r;
      const double g0 = g_of(rates);
      rates[m] = r + h;
      const double gp = g_of(rates);
      rates[m] = r - h;
      const double gm = g_of(rates);
      const double second = (gp - 2.0 * g0 + gm) / (h * h);
      audit.min_second_difference = std::min(audit.min_second_difference, second);
      ++audit.points_checked;
      if (second < -1e-6) ++audit.violations;
    }
    // Reference probes just outside the region, where the logistic
    // curvature flips sign.
    for (double frac : {1.05, 1.2, 1.5}) {
      const double r = b * frac;
      Vec rates = base;
      rates[m] = r;
      const double g0 = g_of(rates);
      rates[m] = r + h;
      const double gp = g_of(rates);
      rates[m] = r - h;
      const double gm = g_of(rates);
      audit.min_outside_second_difference =
          std::min(audit.min_outside_second_difference, (gp - 2.0 * g0 + gm) / (h * h));
    }
  }

  // Cross-partials: g is separable across modalities, so mixed second
  // differences must vanish.
  audit.max_cross_partial = 0.0;
  for (std::size_t m = 0; m + 1 < links.size(); ++m) {
    const std::size_t n = m + 1;
    Vec rates = base;
    const double g00 = g_of(rates);
    rates[m] = base[m] + h;
    const double g10 = g_of(rates);
    rates[n] = base[n] + h;
    const double g11 = g_of(rates);
    rates[m] = base[m];
    const double g01 = g_of(rates);
    const double cross = std::abs((g11 - g10 - g01 + g00) / (h * h));
    audit.max_cross_partial = std::max(audit.max_cross_partial, cross);
  }

  audit.ok = audit.violations == 0 && audit.max_cross_partial <= 1e-6;
  return audit;
}

}  // namespace semcom
