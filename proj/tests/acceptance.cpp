#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "drm/cli.hpp"
#include "drm/equilibrium.hpp"
#include "drm/gsaa_convex.hpp"
#include "drm/gsaa_quad.hpp"
#include "drm/model.hpp"
#include "drm/scenario_io.hpp"
#include "drm/solver.hpp"
#include "test_support.hpp"

// Acceptance gate: each test case checks one shipping criterion end to end
// and prints a single PASS/FAIL line. Tolerances are pinned here, not taken
// from configuration.

using namespace drm;
using Eigen::VectorXd;

namespace {

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", criterion, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

double seconds_since(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Scenario make_scenario(int h, double b0, std::vector<Prosumer> prosumers) {
  Scenario s;
  s.horizon.periods = h;
  s.utility.marginal_cost = VectorXd::Constant(h, b0);
  s.prosumers = std::move(prosumers);
  return s;
}

// Random quadratic market: up to 24 periods, up to 3 prosumers with up to 3
// appliances each, mixed kinds, occasional energy windows. Feasible by
// construction (the all-zeros allocation satisfies every row).
Scenario rich_quad_scenario(TestRng& rng) {
  const int h = rng.uniform_int(1, 24);
  const int count = rng.uniform_int(1, 3);
  std::vector<Prosumer> prosumers;
  for (int i = 0; i < count; ++i) {
    Prosumer p;
    p.id = "p" + std::to_string(i + 1);
    p.behavior = rng.uniform() < 0.5 ? Behavior::NetBuyer : Behavior::NetSeller;
    const int appliances = rng.uniform_int(1, 3);
    for (int a = 0; a < appliances; ++a) {
      const int kind = rng.uniform_int(0, 2);
      if (kind == 0) {
        const double up = rng.uniform(1.0, 5.0);
        Appliance ev = quad_appliance("ev" + std::to_string(a), ApplianceKind::EV, h,
                                      rng.uniform(-0.04, -0.01), rng.uniform(0.1, 0.5), 0.0, up);
        if (rng.uniform() < 0.4) {
          EnergyWindow window;
          for (int t = 1; t <= h; ++t) window.periods.push_back(t);
          window.alpha = VectorXd::Ones(h);
          window.total_lower = 0.0;
          window.total_upper = rng.uniform(0.3, 0.9) * up * h;
          ev.windows.push_back(window);
        }
        p.appliances.push_back(std::move(ev));
      } else if (kind == 1) {
        const double band = rng.uniform() < 0.5 ? rng.uniform(2.0, 6.0) : kInf;
        p.appliances.push_back(quad_appliance("st" + std::to_string(a), ApplianceKind::Storage,
                                              h, rng.uniform(-0.05, -0.02), 0.0, -band, band));
      } else {
        p.appliances.push_back(quad_appliance("ac" + std::to_string(a),
                                              ApplianceKind::ThermostatLike, h,
                                              rng.uniform(-0.04, -0.01), rng.uniform(0.1, 0.5),
                                              0.0, rng.uniform(1.0, 4.0)));
      }
    }
    prosumers.push_back(compiled(std::move(p), {h}));
  }
  return make_scenario(h, rng.uniform(0.2, 0.6), std::move(prosumers));
}

// Random general-convex market carrying the tightest derived constants. With
// `cone` the EV upper bound stays infinite, so every compiled row (power
// lower rows plus any net-buyer rows) has a zero right-hand side.
Scenario random_convex_scenario(TestRng& rng, bool cone) {
  const int h = rng.uniform_int(1, 4);
  const int count = rng.uniform_int(1, 2);
  std::vector<Prosumer> prosumers;
  for (int i = 0; i < count; ++i) {
    Prosumer p;
    p.id = "p" + std::to_string(i + 1);
    p.behavior = rng.uniform() < 0.5 ? Behavior::NetBuyer : Behavior::NetSeller;
    p.appliances.push_back(quad_appliance("ev", ApplianceKind::EV, h,
                                          rng.uniform(-0.04, -0.01), rng.uniform(0.1, 0.28), 0.0,
                                          cone ? kInf : rng.uniform(1.0, 4.0)));
    if (rng.uniform() < 0.5) {
      p.appliances.push_back(quad_appliance("battery", ApplianceKind::Storage, h,
                                            rng.uniform(-0.05, -0.02), 0.0, -kInf, kInf));
    }
    prosumers.push_back(compiled(std::move(p), {h}));
  }
  Scenario s = make_scenario(h, rng.uniform(0.3, 0.6), std::move(prosumers));
  s.setting = Setting::GeneralConvex;
  for (auto& p : s.prosumers) p.convex = quadratic_oracle(p, s.horizon);
  return s;
}

// Up to three well-spread row indices of the prosumer.
std::vector<int> probe_rows(const Prosumer& p) {
  const int m = static_cast<int>(p.constraints.size());
  std::vector<int> rows;
  for (int j : {0, m / 2, m - 1}) {
    if (j >= 0 && j < m && std::find(rows.begin(), rows.end(), j) == rows.end()) {
      rows.push_back(j);
    }
  }
  return rows;
}

bool homogeneous_rows(const Prosumer& p) {
  for (const auto& row : p.constraints) {
    if (row.rhs != 0.0) return false;
  }
  return true;
}

// Shifts a one-coordinate oracle's linear part so the marginal utility of the
// first unit becomes `x`; curvature and declared constants are untouched.
ConvexNetUtility with_rate(const ConvexNetUtility& base, double x) {
  ConvexNetUtility out = base;
  const double shift = -base.grad_at_zero(0) - x;
  out.value = [value = base.value, shift](const VectorXd& q) { return value(q) + shift * q(0); };
  out.gradient = [gradient = base.gradient, shift](const VectorXd& q) {
    VectorXd g = gradient(q);
    g(0) += shift;
    return g;
  };
  out.grad_at_zero = VectorXd::Constant(1, -x);
  return out;
}

}  // namespace

TEST_CASE("criterion 1: closed form matches the numeric dual on random quadratic markets") {
  const auto start = std::chrono::steady_clock::now();
  TestRng rng(101);
  int used = 0;
  int attempts = 0;
  int rows_checked = 0;
  double worst = 0.0;
  while (used < 200 && attempts < 400) {
    ++attempts;
    const Scenario s = rich_quad_scenario(rng);
    const EquilibriumResult market = solve_dso(s);
    bool any = false;
    for (const auto& p : s.prosumers) {
      for (int j = 0; j < static_cast<int>(p.constraints.size()); ++j) {
        const ShadowPriceEstimate e = shadow_price_closed_form(s, market, {p.id, j});
        if (!e.tightness_assumption_held) continue;
        any = true;
        ++rows_checked;
        worst = std::max(worst, std::abs(e.value - e.numeric_dual));
      }
    }
    if (any) ++used;
  }
  const double elapsed = seconds_since(start);
  const bool pass = used >= 200 && worst <= 1e-6 && elapsed <= 60.0;
  CHECK(used >= 200);
  CHECK(worst <= 1e-6);
  CHECK(elapsed <= 60.0);
  report(1, pass,
         "closed form vs numeric dual <= 1e-6 on " + std::to_string(used) +
             " scenarios with a tight row (" + std::to_string(rows_checked) +
             " rows, worst gap " + num(worst) + ", " + num(elapsed) + " s)");
}

TEST_CASE("criterion 2: discharge-pair ranking reproduces the documented estimates") {
  const Scenario s = preset_scenario("ev-pair");
  const ShadowPriceEstimate one = shadow_price_ev(s, "one", 1);
  const ShadowPriceEstimate two = shadow_price_ev(s, "two", 1);
  const auto ranked = rank_estimates({two, one});

  const bool values_ok = std::abs(one.value - 0.3) <= 1e-12 && std::abs(two.value - 0.2) <= 1e-12;
  const bool duals_ok = std::abs(one.value - one.numeric_dual) <= 1e-8 &&
                        std::abs(two.value - two.numeric_dual) <= 1e-8;
  const bool order_ok = ranked.size() == 2 && ranked[0].constraint.prosumer == "one" &&
                        ranked[1].constraint.prosumer == "two";
  CHECK(values_ok);
  CHECK(duals_ok);
  CHECK(order_ok);
  report(2, values_ok && duals_ok && order_ok,
         "discharge estimates 0.3 and 0.2 match duals within 1e-8; prosumer one ranks first");
}

TEST_CASE("criterion 3: projected gains bound realized gains in every sweep") {
  constexpr double kSlack = 1e-8;
  bool upper_ok = true;
  bool gap_ok = true;
  int sweeps_run = 0;
  int steps_checked = 0;

  const auto check_sweep = [&](const Scenario& s, const ConstraintRef& ref, double delta,
                               int steps, bool require_monotone_gap) {
    const SweepResult sweep = incremental_gsaa_sweep(s, ref, delta, steps);
    ++sweeps_run;
    double previous_gap = 0.0;
    for (std::size_t i = 0; i < sweep.steps.size(); ++i) {
      const SweepStep& step = sweep.steps[i];
      ++steps_checked;
      upper_ok =
          upper_ok && step.projected_cumulative - step.realized_cumulative >= -kSlack &&
          step.projected_delta - step.realized_delta >= -kSlack;
      const double gap = step.projected_cumulative - step.realized_cumulative;
      if (require_monotone_gap && i > 0) gap_ok = gap_ok && gap >= previous_gap - 1e-12;
      previous_gap = gap;
    }
  };

  // Quadratic presets: EV discharge rows and net-selling rows, with the
  // monotone-gap shape required there.
  const Scenario discharge = preset_scenario("ev-pair");
  for (const auto& p : discharge.prosumers) {
    check_sweep(discharge, locate_ev_row(discharge, p.id, 1), 0.25, 12, true);
  }
  const Scenario selling = preset_scenario("net-sell-pair");
  for (const auto& p : selling.prosumers) {
    check_sweep(selling, locate_net_sell_row(selling, p.id, 1), 0.25, 12, true);
    check_sweep(selling, locate_ev_row(selling, p.id, 1), 0.25, 12, true);
  }

  // Randomized generated markets: upper-bound property only.
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Scenario s = random_scenario(seed);
    TestRng rng(900 + seed);
    const double delta = rng.uniform(0.1, 0.4);
    for (const auto& p : s.prosumers) {
      check_sweep(s, locate_net_sell_row(s, p.id, 1), delta, 6, false);
      check_sweep(s, locate_ev_row(s, p.id, 1), delta, 6, false);
    }
  }

  CHECK(upper_ok);
  CHECK(gap_ok);
  report(3, upper_ok && gap_ok,
         "projected >= realized (slack >= -1e-8) on " + std::to_string(sweeps_run) +
             " sweeps / " + std::to_string(steps_checked) +
             " steps; gap non-decreasing on the quadratic presets");
}

TEST_CASE("criterion 4: market solves verify as equilibria; bent prices fail") {
  TestRng rng(404);
  bool verify_ok = true;
  bool residual_ok = true;
  bool perturb_ok = true;
  int scenarios = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const Scenario s =
        trial < 100 ? rich_quad_scenario(rng) : random_convex_scenario(rng, trial % 2 == 0);
    const EquilibriumResult market = solve_dso(s);
    ++scenarios;
    const EquilibriumVerdict verdict = verify_equilibrium(s, market, 1e-6);
    verify_ok = verify_ok && verdict.equilibrium;
    residual_ok = residual_ok && verdict.clearing_residual <= 1e-6 &&
                  verdict.utility_company_residual <= 1e-6;
    for (const auto& agent : verdict.agents) {
      residual_ok = residual_ok && agent.kkt.max_residual() <= 1e-6;
    }

    EquilibriumResult bent = market;
    bent.price(0) += 1e-2;
    perturb_ok = perturb_ok && !verify_equilibrium(s, bent, 1e-6).equilibrium;
    bent.price = market.price;
    bent.price(s.horizon.periods - 1) -= 1e-2;
    perturb_ok = perturb_ok && !verify_equilibrium(s, bent, 1e-6).equilibrium;
    bent.price = market.price.array() + 1e-2;
    perturb_ok = perturb_ok && !verify_equilibrium(s, bent, 1e-6).equilibrium;
  }
  CHECK(verify_ok);
  CHECK(residual_ok);
  CHECK(perturb_ok);
  report(4, verify_ok && residual_ok && perturb_ok,
         "all residuals <= 1e-6 and every 1e-2 price perturbation rejected on " +
             std::to_string(scenarios) + " scenarios");
}

TEST_CASE("criterion 5: joint and per-prosumer solves decouple in both settings") {
  TestRng rng(505);
  double worst_primal = 0.0;
  double worst_dual = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const DecouplingReport quad = check_decoupling(rich_quad_scenario(rng));
    worst_primal = std::max(worst_primal, quad.max_primal_gap);
    worst_dual = std::max(worst_dual, quad.max_dual_gap);
  }
  for (int trial = 0; trial < 100; ++trial) {
    const DecouplingReport convex = check_decoupling(random_convex_scenario(rng, trial % 2 == 0));
    worst_primal = std::max(worst_primal, convex.max_primal_gap);
    worst_dual = std::max(worst_dual, convex.max_dual_gap);
  }
  const bool pass = worst_primal <= 1e-6 && worst_dual <= 1e-6;
  CHECK(worst_primal <= 1e-6);
  CHECK(worst_dual <= 1e-6);
  report(5, pass,
         "100 quadratic + 100 convex instances; worst primal gap " + num(worst_primal) +
             ", worst dual gap " + num(worst_dual));
}

TEST_CASE("criterion 6: certified interval sandwiches the multiplier; exact anchors collapse it") {
  TestRng rng(606);
  int used = 0;
  int attempts = 0;
  int rows_checked = 0;
  double worst_slack = 0.0;  // most negative sandwich slack seen, as a positive number
  int identity_rows = 0;
  double identity_worst = 0.0;
  while (used < 200 && attempts < 320) {
    ++attempts;
    const Scenario s = random_convex_scenario(rng, attempts % 2 == 0);
    bool any = false;
    for (const auto& p : s.prosumers) {
      const bool cone = homogeneous_rows(p);
      for (int j : probe_rows(p)) {
        const DualBounds b = dual_bounds_zero_anchor(s, p.id, j);
        if (!b.tightness_held) continue;
        any = true;
        ++rows_checked;
        worst_slack = std::max({worst_slack, b.lower - b.numeric_dual, b.numeric_dual - b.upper});
        if (cone && p.constraints[static_cast<std::size_t>(j)].rhs == 0.0) {
          ++identity_rows;
          identity_worst =
              std::max(identity_worst, std::abs(p.convex->mu * b.norm_primal_mu -
                                                p.convex->lipschitz * b.norm_primal_lip));
        }
      }
    }
    if (any) ++used;
  }
  const bool sandwich_ok = used >= 200 && worst_slack <= 1e-8;

  // Collapse: anchors at the exact optimum with equal curvature constants, on
  // the family whose pinned rows make that optimum the zero allocation.
  bool collapse_ok = true;
  TestRng collapse_rng(616);
  for (int trial = 0; trial < 50; ++trial) {
    Prosumer p;
    p.id = "p1";
    p.behavior = Behavior::NetSeller;
    p.appliances.push_back(quad_appliance("ev", ApplianceKind::EV, 1,
                                          collapse_rng.uniform(-0.04, -0.01),
                                          collapse_rng.uniform(0.1, 0.3), 0.0, kInf));
    Scenario s = make_scenario(1, collapse_rng.uniform(0.35, 0.6), {compiled(std::move(p), {1})});
    s.setting = Setting::GeneralConvex;
    s.prosumers[0].convex = quadratic_oracle(s.prosumers[0], s.horizon);

    SurrogateAnchors anchors;
    anchors.r_lower = VectorXd::Zero(1);  // equals the pinned optimum
    anchors.r_upper = VectorXd::Zero(1);
    const DualBounds b = dual_bounds(s, "p1", 0, anchors);
    collapse_ok = collapse_ok && s.prosumers[0].convex->mu == s.prosumers[0].convex->lipschitz &&
                  b.anchored_at_optimum && std::abs(b.lower - b.numeric_dual) <= 1e-6 &&
                  std::abs(b.upper - b.numeric_dual) <= 1e-6;
  }
  CHECK(sandwich_ok);
  CHECK(collapse_ok);
  report(6, sandwich_ok && collapse_ok,
         "lower <= dual <= upper (slack >= -1e-8) on " + std::to_string(used) +
             " instances / " + std::to_string(rows_checked) +
             " tight rows; 50 exact-anchor instances collapse within 1e-6");

  // Criterion 7 runs over the same instance set, so it reports here.
  CHECK(identity_rows >= 50);
  CHECK(identity_worst <= 1e-6);
  report(7, identity_rows >= 50 && identity_worst <= 1e-6,
         "mu*|primal(mu)| = L*|primal(L)| within 1e-6 on " + std::to_string(identity_rows) +
             " zero-rhs rows with zero anchors (worst " + num(identity_worst) + ")");
}

TEST_CASE("criterion 8: strict dual ordering inside both classification regions") {
  const Scenario base_scenario = preset_scenario("convex-pair");
  const ConvexNetUtility& base = *base_scenario.prosumers[0].convex;
  const double b0 = 0.4;
  const double cap = 1.0;

  TestRng rng(808);
  int red_ok = 0;
  int blue_ok = 0;
  int red_attempts = 0;
  int blue_attempts = 0;
  bool ordering_ok = true;

  while (red_ok < 50 && red_attempts < 500) {
    ++red_attempts;
    const double x = rng.uniform(0.05, 0.3);
    const ConvexNetUtility rated = with_rate(base, x);
    const BetaComparison probe = beta_case_study(rated, 2.0, b0, cap);
    const double lo = probe.f1 + 0.02 * (probe.f0 - probe.f1);
    const double hi = probe.f0 - 0.02 * (probe.f0 - probe.f1);
    if (!(probe.f1 > 1.001) || !(hi > lo)) continue;
    const BetaComparison cell = beta_case_study(rated, rng.uniform(lo, hi), b0, cap);
    if (cell.region != BetaRegion::KDominates) continue;
    if (cell.beta <= cell.f1 + 1e-3 || cell.beta >= cell.f0 - 1e-3) continue;
    ++red_ok;
    ordering_ok = ordering_ok && cell.ordering_verified && cell.lambda_k > cell.lambda_l;
  }
  while (blue_ok < 50 && blue_attempts < 500) {
    ++blue_attempts;
    const double x = rng.uniform(0.42, 0.58);
    const ConvexNetUtility rated = with_rate(base, x);
    const BetaComparison probe = beta_case_study(rated, 0.1, b0, cap);
    if (!(probe.f0 < 0.999) || !(probe.f2 > 0.02) || !(probe.f2 < probe.f0 - 1e-3)) continue;
    const BetaComparison cell =
        beta_case_study(rated, rng.uniform(0.01, 0.8 * probe.f2), b0, cap);
    if (cell.region != BetaRegion::LDominates) continue;
    if (cell.beta >= cell.f2 - 1e-3 || cell.f2 >= cell.f0 - 1e-3) continue;
    ++blue_ok;
    ordering_ok = ordering_ok && cell.ordering_verified && cell.lambda_l > cell.lambda_k;
  }

  // Region grid artifact, one cell per (rate, scale) pair.
  std::vector<BetaComparison> cells;
  int k_cells = 0;
  int l_cells = 0;
  for (int i = 1; i <= 30; ++i) {
    const ConvexNetUtility rated = with_rate(base, 2.0 * b0 * i / 30);
    for (int j = 1; j <= 45; ++j) {
      cells.push_back(beta_case_study(rated, 3.0 * j / 45, b0, cap));
      k_cells += cells.back().region == BetaRegion::KDominates ? 1 : 0;
      l_cells += cells.back().region == BetaRegion::LDominates ? 1 : 0;
    }
  }
  const std::string grid_path = "fig_region_grid.csv";
  std::ofstream(grid_path, std::ios::binary) << region_csv(cells);
  const bool grid_ok = k_cells > 0 && l_cells > 0;

  const bool pass = red_ok == 50 && blue_ok == 50 && ordering_ok && grid_ok;
  CHECK(red_ok == 50);
  CHECK(blue_ok == 50);
  CHECK(ordering_ok);
  CHECK(grid_ok);
  report(8, pass,
         "50/50 interior samples per region with strict numeric ordering; grid " + grid_path +
             " has " + std::to_string(k_cells) + " k-cells and " + std::to_string(l_cells) +
             " l-cells");
}

TEST_CASE("criterion 9: some allowed discharge separates the scaled pair's intervals") {
  const Scenario base = preset_scenario("convex-pair");
  double found_cap = -1.0;
  double found_margin = 0.0;
  for (int m = 1; m <= 20; ++m) {
    const double cap = 0.1 * m;
    Scenario relaxed = base;
    for (auto& p : relaxed.prosumers) p.constraints[0].rhs = cap;
    const DualBounds one = dual_bounds_zero_anchor(relaxed, "one", 0);
    const DualBounds two = dual_bounds_zero_anchor(relaxed, "two", 0);
    if (one.lower > two.upper) {
      found_cap = cap;
      found_margin = one.lower - two.upper;
      break;
    }
  }
  const bool pass = found_cap > 0.0 && found_cap <= 2.0;
  CHECK(pass);
  report(9, pass,
         pass ? "at allowed discharge " + num(found_cap) +
                    " the first prosumer's lower bound exceeds the second's upper by " +
                    num(found_margin)
              : "no separating allowed discharge <= 2 found");
}

TEST_CASE("criterion 10: dual solver agrees with the brute-force oracle") {
  TestRng rng(1010);
  double worst_primal = 0.0;
  double worst_dual = 0.0;
  double worst_gap = 0.0;
  int dual_comparisons = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const QpProblem qp = random_feasible_qp(rng, 4, 6);
    const SolveOutcome fast = solve_qp_dual(qp);
    const SolveOutcome oracle = brute_force_active_set(qp);
    REQUIRE(fast.status == SolveStatus::Optimal);
    REQUIRE(oracle.status == SolveStatus::Optimal);
    worst_primal = std::max(worst_primal, (fast.primal - oracle.primal).cwiseAbs().maxCoeff());
    if (oracle.duals_unique && qp.rhs.size() > 0) {
      ++dual_comparisons;
      worst_dual = std::max(worst_dual, (fast.duals - oracle.duals).cwiseAbs().maxCoeff());
    }
    // Strong duality: the dual function at the returned multipliers meets the
    // primal objective.
    const VectorXd residual =
        qp.linear - (qp.rhs.size() > 0 ? VectorXd(qp.constraint_matrix.transpose() * fast.duals)
                                       : VectorXd::Zero(qp.linear.size()));
    const double dual_value = -0.5 * (residual.array().square() / qp.curvature.array()).sum() +
                              (qp.rhs.size() > 0 ? fast.duals.dot(qp.rhs) : 0.0);
    worst_gap = std::max(worst_gap, std::abs(dual_value - fast.objective));
  }
  const bool pass = worst_primal <= 1e-6 && worst_dual <= 1e-6 && worst_gap <= 1e-6;
  CHECK(worst_primal <= 1e-6);
  CHECK(worst_dual <= 1e-6);
  CHECK(worst_gap <= 1e-6);
  report(10, pass,
         "500 instances; worst primal gap " + num(worst_primal) + ", worst dual gap " +
             num(worst_dual) + " (" + std::to_string(dual_comparisons) +
             " unique-dual comparisons), worst duality gap " + num(worst_gap));
}
