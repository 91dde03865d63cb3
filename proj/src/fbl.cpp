#include "semcom/fbl.hpp"

#include <cmath>
#include <stdexcept>

namespace semcom {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kLog2E = 1.4426950408889634;  // log2(e)
}  // namespace

double capacity(double snr) {
  if (snr < 0.0) throw std::invalid_argument("capacity: snr must be >= 0");
  return 0.5 * std::log2(1.0 + snr);
}

double dispersion(double snr) {
  if (snr < 0.0) throw std::invalid_argument("dispersion: snr must be >= 0");
  const double t = 1.0 + snr;
  return 1.0 - 1.0 / (t * t);
}

double q_exact(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

double q_inv(double eps) {
  if (!(eps > 0.0) || !(eps < 1.0)) throw std::invalid_argument("q_inv: eps must be in (0,1)");
  // Q is strictly decreasing; bracket then polish with Newton steps,
  // falling back to bisection whenever Newton leaves the bracket.
  double lo = -40.0, hi = 40.0;  // Q(40) underflows well past double eps
  double z = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double f = q_exact(z) - eps;
    if (f > 0.0)
      lo = z;  // Q too large -> z too small
    else if (f < 0.0)
      hi = z;
    else
      return z;
    const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi);
    double step = pdf > 0.0 ? f / pdf : 0.0;
    double next = z + step;
    if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
    if (next == z) break;
    z = next;
  }
  return z;
}

double q_logistic(double z) {
  const double a = std::sqrt(2.0 / kPi);
  const double x = 2.0 * a * z;
  // Evaluated from the dominant side so neither branch can overflow.
  if (x >= 0.0) {
    const double t = std::exp(-x);
    return t / (1.0 + t);
  }
  return 1.0 / (1.0 + std::exp(x));
}

LinkParams LinkParams::from_snr(double snr, double blocklength) {
  if (blocklength < 2.0) throw std::invalid_argument("LinkParams: blocklength must be >= 2");
  LinkParams p;
  p.snr = snr;
  p.blocklength = blocklength;
  p.capacity = semcom::capacity(snr);
  p.dispersion = semcom::dispersion(snr);
  return p;
}

bool LinkParams::consistent() const {
  return std::abs(capacity - semcom::capacity(snr)) <= 1e-12 &&
         std::abs(dispersion - semcom::dispersion(snr)) <= 1e-12;
}

double achievable_rate(const LinkParams& link, double eps) {
  if (!(eps > 0.0) || !(eps < 1.0))
    throw std::invalid_argument("achievable_rate: eps must be in (0,1)");
  const double penalty = std::sqrt(link.dispersion / link.blocklength) * q_inv(eps) * kLog2E;
  return link.capacity - penalty + std::log2(link.blocklength) / link.blocklength;
}

double logistic_slope(const LinkParams& link) {
  return std::sqrt(8.0 * link.blocklength / (kPi * link.dispersion * kLog2E * kLog2E));
}

double rate_ceiling(const LinkParams& link) {
  return link.capacity + std::log2(link.blocklength) / link.blocklength;
}

double error_prob_of_rate(const LinkParams& link, double rate) {
  if (rate < 0.0) throw std::invalid_argument("error_prob_of_rate: rate must be >= 0");
  const double b = rate_ceiling(link);
  if (link.dispersion <= 0.0) {
    // Zero-SNR limit: the logistic sharpens to a step at b.
    if (rate < b) return 0.0;
    if (rate > b) return 1.0;
    return 0.5;
  }
  const double x = logistic_slope(link) * (b - rate);
  if (x >= 0.0) {
    const double t = std::exp(-x);
    return t / (1.0 + t);
  }
  return 1.0 / (1.0 + std::exp(x));
}

}  // namespace semcom
