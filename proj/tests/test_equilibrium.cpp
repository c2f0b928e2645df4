#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

#include "drm/equilibrium.hpp"
#include "test_support.hpp"

using namespace drm;
using Eigen::VectorXd;

namespace {

// Two-appliance net-buying prosumer: storage plus EV, both box-bounded.
Prosumer storage_ev_prosumer(const std::string& id, int h, double a_storage, double a_ev,
                             double b_ev) {
  Prosumer p;
  p.id = id;
  p.behavior = Behavior::NetBuyer;
  p.appliances.push_back(
      quad_appliance("storage", ApplianceKind::Storage, h, a_storage, 0.0, -5.0, 5.0));
  p.appliances.push_back(quad_appliance("ev", ApplianceKind::EV, h, a_ev, b_ev, 0.0, 10.0));
  return compiled(std::move(p), {h});
}

Scenario single_ev_scenario(double a_hat, double b_hat, double b0) {
  Scenario s;
  s.horizon = {1};
  s.utility.marginal_cost = VectorXd::Constant(1, b0);
  s.prosumers.push_back(ev_prosumer("p1", 1, a_hat, b_hat));
  return s;
}

// Quadratic oracle wrapper so the same prosumer solves in the convex path.
void attach_convex_oracle(Prosumer& p, const Horizon& horizon) {
  auto vars = VariableMap::for_prosumer(p, horizon);
  Eigen::VectorXd a(vars.size()), b(vars.size());
  for (int c = 0; c < vars.size(); ++c) {
    const auto& u = p.appliances[0].utility;  // single-appliance helper
    a(c) = u.a_hat(vars.key(c).period - 1);
    b(c) = u.b_hat(vars.key(c).period - 1);
  }
  ConvexNetUtility f;
  f.value = [a, b](const VectorXd& q) {
    return (-a.cwiseProduct(q).cwiseProduct(q) - b.cwiseProduct(q)).sum();
  };
  f.gradient = [a, b](const VectorXd& q) { return VectorXd(-2.0 * a.cwiseProduct(q) - b); };
  f.mu = (-2.0 * a).minCoeff();
  f.lipschitz = (-2.0 * a).maxCoeff();
  f.grad_at_zero = -b;
  p.convex = f;
}

}  // namespace

TEST_CASE("single EV held at zero prices its discharge row at the margin gap") {
  Scenario s = single_ev_scenario(-0.01, 0.1, 0.4);
  auto eq = solve_dso(s);

  REQUIRE(eq.prosumers.size() == 1);
  const auto& p1 = eq.prosumers[0];
  CHECK(p1.quantities(0) == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(eq.price(0) == doctest::Approx(0.4));
  REQUIRE(p1.duals.size() == 1);
  CHECK(p1.duals(0) == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(eq.welfare == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(eq.supply(0) == doctest::Approx(0.0));
  CHECK(eq.kkt.within(1e-8));
}

TEST_CASE("huge bounds reduce to the per-column stationary point") {
  Scenario s;
  s.horizon = {3};
  s.utility.marginal_cost = VectorXd::Constant(3, 0.4);
  Prosumer p;
  p.id = "p1";
  p.behavior = Behavior::NetSeller;
  p.appliances.push_back(
      quad_appliance("ac", ApplianceKind::ThermostatLike, 3, -0.02, 0.1, -1e6, 1e6));
  p.appliances.push_back(quad_appliance("ev", ApplianceKind::EV, 3, -0.01, 0.1, -1e6, 1e6));
  s.prosumers.push_back(compiled(std::move(p), s.horizon));

  auto eq = solve_dso(s);
  const auto& out = eq.prosumers[0];
  for (int c = 0; c < out.variables.size(); ++c) {
    const auto& key = out.variables.key(c);
    const auto& u = s.prosumers[0].appliances[key.appliance == "ac" ? 0 : 1].utility;
    const double expected =
        (u.b_hat(key.period - 1) - 0.4) / (2.0 * std::abs(u.a_hat(key.period - 1)));
    CHECK(out.quantities(c) == doctest::Approx(expected).epsilon(1e-8));
  }
  // Every row slack: duals vanish.
  CHECK(out.duals.cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("identical prosumers receive identical allocations") {
  Scenario s;
  s.horizon = {4};
  s.utility.marginal_cost = VectorXd::Constant(4, 0.4);
  s.prosumers.push_back(storage_ev_prosumer("p1", 4, -0.02, -0.01, 0.1));
  s.prosumers.push_back(storage_ev_prosumer("p2", 4, -0.02, -0.01, 0.1));

  auto eq = solve_dso(s);
  REQUIRE(eq.prosumers.size() == 2);
  CHECK((eq.prosumers[0].quantities - eq.prosumers[1].quantities).cwiseAbs().maxCoeff() == 0.0);
  CHECK((eq.prosumers[0].duals - eq.prosumers[1].duals).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("supply aggregates every appliance draw per period") {
  Scenario s;
  s.horizon = {2};
  s.utility.marginal_cost = VectorXd::Constant(2, 0.3);
  s.prosumers.push_back(storage_ev_prosumer("p1", 2, -0.02, -0.01, 0.5));
  s.prosumers.push_back(storage_ev_prosumer("p2", 2, -0.035, -0.015, 0.45));

  auto eq = solve_dso(s);
  VectorXd total = VectorXd::Zero(2);
  for (const auto& o : eq.prosumers) {
    for (int c = 0; c < o.variables.size(); ++c) {
      total(o.variables.key(c).period - 1) += o.quantities(c);
    }
  }
  CHECK((eq.supply - total).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(eq.welfare ==
        doctest::Approx(social_welfare(s, eq.prosumers)).epsilon(1e-12));
}

TEST_CASE("infeasible prosumer is reported by name") {
  Scenario s;
  s.horizon = {2};
  s.utility.marginal_cost = VectorXd::Constant(2, 0.4);
  Prosumer p;
  p.id = "greedy";
  p.behavior = Behavior::NetSeller;
  Appliance a = quad_appliance("heater", ApplianceKind::ThermostatLike, 2, -0.02, 0.5, 0.0, 5.0);
  EnergyWindow w;
  w.periods = {1, 2};
  w.alpha = VectorXd::Constant(2, 1.0);
  w.total_lower = 100.0;
  a.windows.push_back(w);
  p.appliances.push_back(a);
  s.prosumers.push_back(compiled(std::move(p), s.horizon));

  try {
    solve_dso(s);
    FAIL("expected an infeasibility error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("greedy") != std::string::npos);
  }
}

TEST_CASE("marginal cost length must match the horizon") {
  Scenario s = single_ev_scenario(-0.01, 0.1, 0.4);
  s.utility.marginal_cost = VectorXd::Constant(3, 0.4);
  CHECK_THROWS_AS(solve_dso(s), std::invalid_argument);
}

TEST_CASE("joint and decoupled solves coincide") {
  SUBCASE("single prosumer is literally the same problem") {
    Scenario s = single_ev_scenario(-0.01, 0.1, 0.4);
    auto report = check_decoupling(s);
    CHECK(report.max_primal_gap == 0.0);
    CHECK(report.max_dual_gap == 0.0);
  }
  SUBCASE("several coupled-looking prosumers still decouple") {
    Scenario s;
    s.horizon = {3};
    s.utility.marginal_cost = VectorXd::LinSpaced(3, 0.3, 0.5);
    s.prosumers.push_back(storage_ev_prosumer("p1", 3, -0.02, -0.01, 0.1));
    s.prosumers.push_back(storage_ev_prosumer("p2", 3, -0.035, -0.015, 0.2));
    s.prosumers.push_back(ev_prosumer("p3", 3, -0.012, 0.25));
    auto report = check_decoupling(s);
    CHECK(report.max_primal_gap <= 1e-6);
    CHECK(report.max_dual_gap <= 1e-6);
  }
  SUBCASE("convex setting decouples within the looser tolerance") {
    Scenario s;
    s.horizon = {2};
    s.setting = Setting::GeneralConvex;
    s.utility.marginal_cost = VectorXd::Constant(2, 0.4);
    Prosumer p1 = ev_prosumer("p1", 2, -0.01, 0.1);
    attach_convex_oracle(p1, s.horizon);
    Prosumer p2 = ev_prosumer("p2", 2, -0.018, 0.2);
    attach_convex_oracle(p2, s.horizon);
    s.prosumers = {p1, p2};
    auto report = check_decoupling(s);
    CHECK(report.max_primal_gap <= 1e-5);
    CHECK(report.max_dual_gap <= 1e-5);
  }
}

TEST_CASE("convex-setting market solve matches the quadratic answer") {
  Scenario s = single_ev_scenario(-0.01, 0.1, 0.4);
  s.setting = Setting::GeneralConvex;
  attach_convex_oracle(s.prosumers[0], s.horizon);

  auto eq = solve_dso(s);
  CHECK(eq.prosumers[0].quantities(0) == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(eq.prosumers[0].duals(0) == doctest::Approx(0.3).epsilon(1e-7));
  CHECK(eq.prosumers[0].net_utility == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("equilibrium verification") {
  Scenario s;
  s.horizon = {3};
  s.utility.marginal_cost = VectorXd::LinSpaced(3, 0.3, 0.5);
  s.prosumers.push_back(storage_ev_prosumer("p1", 3, -0.02, -0.01, 0.1));
  s.prosumers.push_back(ev_prosumer("p2", 3, -0.015, 0.2));
  auto eq = solve_dso(s);

  SUBCASE("the solved market passes") {
    auto verdict = verify_equilibrium(s, eq, 1e-6);
    CHECK(verdict.equilibrium);
    CHECK(verdict.clearing_residual <= 1e-8);
    CHECK(verdict.utility_company_residual == 0.0);
    for (const auto& agent : verdict.agents) CHECK(agent.kkt.within(1e-6));
  }
  SUBCASE("welfare of any verified pair matches the optimum") {
    auto verdict = verify_equilibrium(s, eq, 1e-6);
    REQUIRE(verdict.equilibrium);
    CHECK(std::abs(social_welfare(s, eq.prosumers) - eq.welfare) <= 1e-6);
  }
  SUBCASE("a price nudge breaks the supplier's optimality") {
    EquilibriumResult tampered = eq;
    tampered.price(1) += 0.01;
    auto verdict = verify_equilibrium(s, tampered, 1e-6);
    CHECK_FALSE(verdict.equilibrium);
    CHECK(verdict.utility_company_residual == doctest::Approx(0.01));
  }
  SUBCASE("a clearing violation is measured exactly") {
    EquilibriumResult tampered = eq;
    tampered.supply(0) += 0.5;
    auto verdict = verify_equilibrium(s, tampered, 1e-6);
    CHECK_FALSE(verdict.equilibrium);
    CHECK(verdict.clearing_residual == doctest::Approx(0.5));
  }
  SUBCASE("multipliers are re-derived when omitted") {
    EquilibriumResult stripped = eq;
    for (auto& o : stripped.prosumers) o.duals.resize(0);
    CHECK(verify_equilibrium(s, stripped, 1e-6).equilibrium);
    // A non-optimal allocation without multipliers still fails.
    stripped.prosumers[0].quantities(0) += 0.2;
    CHECK_FALSE(verify_equilibrium(s, stripped, 1e-6).equilibrium);
  }
  SUBCASE("a marginal-cost oracle replaces the stored rates") {
    auto steeper = [](const VectorXd& supply) {
      return VectorXd(VectorXd::Constant(supply.size(), 0.9));
    };
    auto verdict = verify_equilibrium(s, eq, 1e-6, steeper);
    CHECK_FALSE(verdict.equilibrium);
    CHECK(verdict.utility_company_residual > 0.3);
  }
}
