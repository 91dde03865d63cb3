#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "semcom/ratesolver.hpp"
#include "semcom/rng.hpp"

using namespace semcom;

namespace {

ModalityLink physical_link(double payload, double kappa, double snr, double blocklength = 256.0,
                           unsigned bits = 8) {
  ModalityLink m;
  m.payload_bits = payload;
  m.kappa = kappa;
  m.link = LinkParams::from_snr(snr, blocklength);
  m.bits_per_element = bits;
  return m;
}

std::vector<ModalityLink> random_feasible_instance(std::uint64_t seed, std::size_t max_modalities,
                                                   double* delta0_out) {
  RngStream rng(substream(seed, 0x50F7));
  const std::size_t m_count = 1 + rng.next_u64() % max_modalities;
  std::vector<ModalityLink> links;
  double a_sum = 0.0;
  for (std::size_t m = 0; m < m_count; ++m) {
    const double payload = 8.0 * (1.0 + static_cast<double>(rng.next_u64() % 24));
    const double kappa = 0.2 + 3.0 * rng.next_unit();
    const double snr = 0.5 + 8.0 * rng.next_unit();
    links.push_back(physical_link(payload, kappa, snr));
    a_sum += links.back().importance_weight();
  }
  // Budget above the zero-rate floor and below the midpoint cap.
  *delta0_out = std::max(1e-3, 0.4 * a_sum * rng.next_unit());
  return links;
}

}  // namespace

TEST_CASE("raw links reproduce the requested constants") {
  const ModalityLink m = link_from_raw({0.5, 10.0, 1.0, 1.0});
  CHECK(m.importance_weight() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(m.logistic_slope() == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(m.rate_ceiling() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.payload_bits == 1.0);
}

TEST_CASE("f at the midpoint rate of a single modality") {
  const std::vector<ModalityLink> links{link_from_raw({0.5, 10.0, 1.0, 2.0})};
  const double tau_mid = links[0].rate_ceiling() / links[0].payload_bits;
  const double delta0 = 0.05;
  CHECK(f_tau(links, delta0, tau_mid) == doctest::Approx(0.25 - delta0).epsilon(1e-12));
}

TEST_CASE("f at zero rate sits at the negative budget for quiet links") {
  // phi >= 1 at L = 256: the zero-rate logistic floor is about 1.93e-5
  // per unit weight, so small weights keep |f(0) + delta0| under 1e-6.
  std::vector<ModalityLink> links;
  for (double snr : {1.0, 2.0, 4.0}) links.push_back(physical_link(64.0, 0.01, snr));
  const double delta0 = 1e-3;
  CHECK(std::abs(f_tau(links, delta0, 0.0) + delta0) < 1e-6);

  // With order-one weights the floor is visible; freeze its value.
  std::vector<ModalityLink> heavy{physical_link(64.0, 1.0, 1.0)};
  const double floor = f_tau(heavy, delta0, 0.0) + delta0;
  CHECK(floor ==
        doctest::Approx(1.928141879744e-5 * heavy[0].importance_weight()).epsilon(1e-6));
}

TEST_CASE("f is non-decreasing in tau on random feasible instances") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    double delta0 = 0.0;
    const auto links = random_feasible_instance(seed, 5, &delta0);
    double hi = 1e18;
    for (const auto& m : links) hi = std::min(hi, m.rate_ceiling() / m.payload_bits);
    double prev = -1e18;
    for (int i = 0; i <= 1000; ++i) {
      const double f = f_tau(links, delta0, hi * i / 1000.0);
      CHECK(f >= prev - 1e-15);
      prev = f;
    }
  }
}

TEST_CASE("f rejects bad arguments") {
  CHECK_THROWS_AS(f_tau({}, 1e-3, 0.1), std::invalid_argument);
  const std::vector<ModalityLink> links{link_from_raw({0.5, 10.0, 1.0, 1.0})};
  CHECK_THROWS_AS(f_tau(links, 1e-3, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(f_tau(links, 0.0, 0.1), std::invalid_argument);
}

TEST_CASE("feasibility rejects an oversized budget with both sides reported") {
  std::vector<ModalityLink> links{physical_link(16.0, 1.0, 2.0), physical_link(64.0, 0.5, 2.0)};
  double a_sum = 0.0;
  for (const auto& m : links) a_sum += m.importance_weight();
  const FeasibilityReport rep = feasibility_check(links, 0.6 * a_sum);
  CHECK(!rep.ok);
  CHECK(rep.violation.find("0.5*sum(a)") != std::string::npos);
  CHECK(rep.half_weight_sum == doctest::Approx(0.5 * a_sum).epsilon(1e-12));
  CHECK(rep.delta0 == doctest::Approx(0.6 * a_sum).epsilon(1e-12));
}

TEST_CASE("a three-link setting with a small budget is feasible") {
  std::vector<ModalityLink> links;
  for (double snr : {1.0, 2.0, 4.0}) links.push_back(physical_link(64.0, 1.0, snr));
  const FeasibilityReport rep = feasibility_check(links, 1e-3);
  CHECK(rep.ok);
  CHECK(rep.bracket_lo == 0.0);
  CHECK(rep.bracket_hi > 0.0);
  CHECK(rep.f_at_lo < 0.0);
  CHECK(rep.f_at_hi >= 0.0);
}

TEST_CASE("single modality at the boundary budget solves to the bracket top") {
  const std::vector<ModalityLink> links{link_from_raw({0.5, 10.0, 1.0, 2.0})};
  const double delta0 = 0.25;  // a/2
  const FeasibilityReport rep = feasibility_check(links, delta0);
  CHECK(rep.ok);
  const RateSolution sol = solve_bisection(links, delta0, 1e-9);
  CHECK(sol.tau_star == doctest::Approx(0.5).epsilon(1e-6));  // b/D = 1/2
}

TEST_CASE("single-modality closed form") {
  // f(tau) = 0.5/(1+exp(10(1-tau))) - 0.05 = 0 at tau = 1 - ln(9)/10.
  const std::vector<ModalityLink> links{link_from_raw({0.5, 10.0, 1.0, 1.0})};
  const double expected = 1.0 - std::log(9.0) / 10.0;
  CHECK(expected == doctest::Approx(0.7802775).epsilon(1e-6));
  const RateSolution sol = solve_bisection(links, 0.05, 1e-6);
  CHECK(std::abs(sol.tau_star - expected) <= 1e-6);
  // Cross-check with the independent fine-grid oracle.
  const double grid = oracles::grid_tau(links, 0.05, 1e-7);
  CHECK(std::abs(sol.tau_star - grid) <= 2e-6);
}

TEST_CASE("bisection matches the grid oracle on random feasible instances") {
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    double delta0 = 0.0;
    const auto links = random_feasible_instance(seed, 3, &delta0);
    if (!feasibility_check(links, delta0).ok) continue;
    const RateSolution sol = solve_bisection(links, delta0, 1e-6);
    const double grid = oracles::grid_tau(links, delta0, 1e-8);
    CHECK(std::abs(sol.tau_star - grid) <= 2e-6);
  }
}

TEST_CASE("iteration count respects the bisection bound") {
  const std::vector<ModalityLink> links{link_from_raw({0.5, 10.0, 1.0, 1.0})};
  for (double tol : {1e-3, 1e-6, 1e-9}) {
    const FeasibilityReport rep = feasibility_check(links, 0.05);
    const RateSolution sol = solve_bisection(links, 0.05, tol);
    const int bound =
        static_cast<int>(std::ceil(std::log2((rep.bracket_hi - rep.bracket_lo) / tol)));
    CHECK(sol.iterations <= bound);
    CHECK(sol.iterations >= bound - 1);
    CHECK(sol.bracket_width <= tol);
  }
}

TEST_CASE("solver output satisfies the solution contracts") {
  for (std::uint64_t seed = 200; seed < 215; ++seed) {
    double delta0 = 0.0;
    const auto links = random_feasible_instance(seed, 5, &delta0);
    if (!feasibility_check(links, delta0).ok) continue;
    const RateSolution sol = solve_bisection(links, delta0, 1e-6);

    // Equal delay is exact by construction R = D tau.
    for (std::size_t m = 0; m < links.size(); ++m) {
      CHECK(sol.rates[m] == links[m].payload_bits * sol.tau_star);
      CHECK(std::abs(links[m].payload_bits / sol.rates[m] - sol.delay) <= 1e-9);
      CHECK(sol.rates[m] > 0.0);
    }

    // Constraint tightness within the bisection slack times the slope.
    double slope_bound = 0.0;
    for (const auto& m : links)
      slope_bound += m.importance_weight() * m.logistic_slope() * m.payload_bits / 4.0;
    CHECK(std::abs(sol.gamma_pred - delta0) <= 10.0 * 1e-6 * slope_bound);
    CHECK(sol.gamma_pred <= delta0 + 10.0 * 1e-6 * slope_bound);
  }
}

TEST_CASE("solver throws a domain error on infeasible budgets") {
  const std::vector<ModalityLink> links{link_from_raw({0.5, 10.0, 1.0, 1.0})};
  CHECK_THROWS_AS(solve_bisection(links, 0.3, 1e-6), std::domain_error);
}

TEST_CASE("tau responds monotonically to kappa and the budget") {
  std::vector<ModalityLink> links{physical_link(16.0, 1.0, 2.0), physical_link(64.0, 0.7, 3.0)};
  const double base_tau = solve_bisection(links, 1e-3, 1e-9).tau_star;

  // Raising any kappa never raises tau.
  for (std::size_t m = 0; m < links.size(); ++m) {
    auto perturbed = links;
    perturbed[m].kappa *= 1.5;
    CHECK(solve_bisection(perturbed, 1e-3, 1e-9).tau_star <= base_tau + 2e-9);
  }
  // Raising the budget never lowers tau.
  CHECK(solve_bisection(links, 2e-3, 1e-9).tau_star >= base_tau - 2e-9);

  // A kappa = 0 modality keeps its rate share but drops from f.
  auto degenerate = links;
  degenerate[0].kappa = 0.0;
  const RateSolution sol = solve_bisection(degenerate, 1e-3, 1e-9);
  CHECK(sol.rates[0] == degenerate[0].payload_bits * sol.tau_star);
}

TEST_CASE("optimal rates are non-decreasing in snr") {
  Vec prev_rates;
  for (double snr = 1.0; snr <= 64.0; snr *= 2.0) {
    std::vector<ModalityLink> links{physical_link(16.0, 1.2, snr),
                                    physical_link(128.0, 0.6, snr),
                                    physical_link(64.0, 0.9, snr)};
    const RateSolution sol = solve_bisection(links, 1e-3, 1e-9);
    if (!prev_rates.empty())
      for (std::size_t m = 0; m < sol.rates.size(); ++m) CHECK(sol.rates[m] >= prev_rates[m]);
    prev_rates = sol.rates;
  }
}

TEST_CASE("fixed rate baseline") {
  CHECK(fixed_rate_baseline({10.0, 100.0}, {1.0, 5.0}) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(fixed_rate_baseline({64.0, 64.0, 64.0}, {2.0, 1.0, 4.0}) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fixed_rate_baseline({42.0}, {1.7}) == doctest::Approx(1.7).epsilon(1e-12));
  CHECK_THROWS_AS(fixed_rate_baseline({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(fixed_rate_baseline({1.0}, {0.0}), std::invalid_argument);
}

TEST_CASE("convexity audit accepts the feasible region") {
  std::vector<ModalityLink> links{physical_link(16.0, 1.0, 1.0), physical_link(64.0, 0.5, 3.0)};
  const ConvexityAudit audit = convexity_audit(links, 1000);
  CHECK(audit.ok);
  CHECK(audit.violations == 0);
  CHECK(audit.min_second_difference >= -1e-6);
  CHECK(audit.max_cross_partial <= 1e-6);
  CHECK(audit.points_checked >= 1990);
  // Outside the region the curvature flips sign.
  CHECK(audit.min_outside_second_difference < -1e-6);
}

TEST_CASE("numeric curvature matches the analytic second derivative") {
  const ModalityLink m = link_from_raw({1.0, 5.0, 1.0, 1.0});
  const std::vector<ModalityLink> links{m};
  auto analytic = [&](double r) {
    const double a = 1.0, k = 5.0, b = 1.0;
    const double e = std::exp(k * (b - r));
    return a * k * k * e * (e - 1.0) / std::pow(1.0 + e, 3.0);
  };
  const double h = 1e-4;
  for (double r : {0.5, 0.8, 0.95}) {
    const double num = (f_tau(links, 1e-3, r + h) - 2.0 * f_tau(links, 1e-3, r) +
                        f_tau(links, 1e-3, r - h)) /
                       (h * h);
    CHECK(num == doctest::Approx(analytic(r)).epsilon(1e-4));
    CHECK(num > 0.0);
  }
  // At r = b the curvature vanishes; above b it is negative.
  const double at_b = (f_tau(links, 1e-3, 1.0 + h) - 2.0 * f_tau(links, 1e-3, 1.0) +
                       f_tau(links, 1e-3, 1.0 - h)) /
                      (h * h);
  CHECK(std::abs(at_b) <= 1e-6);
  CHECK(analytic(1.2) < 0.0);
}
