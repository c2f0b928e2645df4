#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "drm/equilibrium.hpp"
#include "drm/model.hpp"
#include "drm/solver.hpp"

// Closed-form shadow prices in the quadratic setting. For a single tight row
// j (the owner's other rows slack), the multiplier is
//   [ (sum over row terms of alpha (b_hat - b0) / (2 a_hat) + h_j)
//     / (sum of alpha^2 / (2 a_hat)) ]+.
// The tightness precondition is checked against a numeric market solve, not
// assumed; a failed check flags the estimate instead of raising.

namespace drm {

struct ConstraintRef {
  std::string prosumer;
  int index = 0;  // 0-based compiled row
};

struct ShadowPriceEstimate {
  ConstraintRef constraint;
  double value = 0.0;            // clamped closed form
  double unclamped_value = 0.0;  // same ratio before the positive part
  double numeric_dual = 0.0;     // multiplier from the market solve
  double k_units = 1.0;
  double welfare_projection = 0.0;  // k_units * value
  bool tightness_assumption_held = true;
  std::string warning;  // set when the flag is false
};

struct TightnessReport {
  bool held = true;
  double target_slack = 0.0;  // a_j^T q - h_j at the optimum
  std::string warning;
};

// Row j must be tight (|slack| <= 1e-7) while every other row of the same
// system that shares a variable with it stays slack (< -1e-7) with a
// multiplier <= 1e-9. Rows touching disjoint variables cannot perturb the
// target row's price and are ignored.
TightnessReport check_row_tightness(const Eigen::MatrixXd& constraint_matrix,
                                    const Eigen::VectorXd& rhs, const Eigen::VectorXd& primal,
                                    const Eigen::VectorXd& duals, int row);

// Summation form of the closed-form shadow price. The overload without a
// precomputed market result solves the scenario first.
ShadowPriceEstimate shadow_price_closed_form(const Scenario& scenario,
                                             const EquilibriumResult& market,
                                             const ConstraintRef& constraint,
                                             double k_units = 1.0);
ShadowPriceEstimate shadow_price_closed_form(const Scenario& scenario,
                                             const ConstraintRef& constraint,
                                             double k_units = 1.0,
                                             const SolverOptions& options = {});

// Matrix route to the same number: [A L^-1 bbar + h]_j / [A L^-1 A^T]_jj,
// clamped. Kept separate so tests can cross-check the two derivations.
double shadow_price_matrix_form(const Scenario& scenario, const ConstraintRef& constraint);

// Comfort-zone relaxation: the thermostat appliance's energy-window upper
// row over periods 1..t, priced at capacity q_bar (replacing the compiled
// rhs). Throws std::invalid_argument when no such appliance/window exists.
ShadowPriceEstimate shadow_price_ac(const Scenario& scenario, const std::string& prosumer,
                                    int t, double q_bar, double k_units = 1.0,
                                    const SolverOptions& options = {});

// Net-selling relaxation: the net-buyer row at period t. The prosumer must
// be a net buyer.
ShadowPriceEstimate shadow_price_net_sell(const Scenario& scenario, const std::string& prosumer,
                                          int t, double k_units = 1.0,
                                          const SolverOptions& options = {});

// EV discharge relaxation: the EV's power-lower row -q(t) <= 0. The bound
// must sit exactly at zero.
ShadowPriceEstimate shadow_price_ev(const Scenario& scenario, const std::string& prosumer,
                                    int t, double k_units = 1.0,
                                    const SolverOptions& options = {});

// Row locators behind the specialized entry points, shared with the convex
// bounds. Each throws std::invalid_argument when no matching compiled row
// exists (for the EV locator, also when the bound is not exactly zero).
ConstraintRef locate_ac_row(const Scenario& scenario, const std::string& prosumer, int t);
ConstraintRef locate_net_sell_row(const Scenario& scenario, const std::string& prosumer, int t);
ConstraintRef locate_ev_row(const Scenario& scenario, const std::string& prosumer, int t);

struct SweepStep {
  int step = 0;
  double rhs = 0.0;       // h_j before this relaxation
  double estimate = 0.0;  // shadow price at this rhs
  double projected_delta = 0.0;
  double realized_delta = 0.0;
  double projected_cumulative = 0.0;
  double realized_cumulative = 0.0;
  bool tight = true;  // tightness check at this rhs
};

struct SweepResult {
  ConstraintRef constraint;
  double delta = 0.0;
  std::vector<SweepStep> steps;
  bool stopped = false;  // a re-solve failed; remaining steps skipped
};

// Relax h_j by delta, `steps` times. Each step records the shadow-price
// estimate before the relaxation (closed form while the tightness check
// holds, the numeric multiplier otherwise; always the numeric multiplier in
// the general convex setting), the projected welfare gain delta * estimate,
// and the realized gain from a fresh market solve.
SweepResult incremental_gsaa_sweep(const Scenario& scenario, const ConstraintRef& constraint,
                                   double delta, int steps, const SolverOptions& options = {});

}  // namespace drm
