#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

#include "drm/model.hpp"
#include "drm/solver.hpp"

// Market clearing: the operator maximizes total net utility minus the energy
// cost b0^T qS with supply pinned to total demand. Substituting the balance
// rows out leaves one strictly concave program per prosumer; the price that
// supports the allocation is the marginal cost b0 itself.

namespace drm {

// One prosumer's slice of the market outcome.
struct ProsumerOutcome {
  std::string id;
  Eigen::VectorXd quantities;  // per (appliance, period) column of `variables`
  Eigen::VectorXd duals;       // per compiled row, same order as constraints
  KktReport kkt;
  double net_utility = 0.0;  // sum of per-appliance net utilities at `quantities`
  bool duals_unique = true;
  VariableMap variables;
};

struct EquilibriumResult {
  Eigen::VectorXd supply;  // per period, equals total demand by construction
  Eigen::VectorXd price;   // p(t); the balance-row multiplier equals this
  std::vector<ProsumerOutcome> prosumers;
  double welfare = 0.0;  // sum of net utilities minus b0 . supply
  KktReport kkt;         // worst residuals across prosumers
};

// Per-prosumer quadratic program: curvature 2*a_hat, linear b_hat - b0.
QpProblem build_prosumer_qp(const Prosumer& prosumer, const UtilityCompany& utility,
                            const Horizon& horizon);

// All prosumers stacked into one program; block-diagonal by construction.
QpProblem build_joint_qp(const Scenario& scenario);

// General convex setting: minimize F_i(q) + b0 . q over the compiled rows.
ConvexProgram build_prosumer_convex(const Prosumer& prosumer, const UtilityCompany& utility,
                                    const Horizon& horizon);

// Wraps the appliances' quadratic coefficients into a gradient oracle over
// the prosumer's stacked coordinates, F(q) = -sum (a q^2 + b q + c). The
// defaults mu = min 2|a_hat| and lipschitz = max 2|a_hat| are the tightest
// valid constants; explicit values may be looser but never tighter. Throws
// std::invalid_argument for nonnegative a_hat or constants outside the
// curvature range.
ConvexNetUtility quadratic_oracle(const Prosumer& prosumer, const Horizon& horizon,
                                  double mu = 0.0, double lipschitz = 0.0);

// Solves the operator's problem prosumer by prosumer, reassembles supply,
// and posts the price p = b0. Throws std::runtime_error naming the prosumer
// when one of them has an empty feasible set.
EquilibriumResult solve_dso(const Scenario& scenario, const SolverOptions& options = {});

struct DecouplingReport {
  double max_primal_gap = 0.0;  // inf-norm over all variables
  double max_dual_gap = 0.0;    // inf-norm over all rows
};

// Solves the joint stacked problem and the per-prosumer problems and reports
// the largest discrepancies; both must vanish for a correct decomposition.
DecouplingReport check_decoupling(const Scenario& scenario, const SolverOptions& options = {});

struct AgentCheck {
  std::string id;
  KktReport kkt;
};

struct EquilibriumVerdict {
  bool equilibrium = false;
  double clearing_residual = 0.0;         // max_t |supply(t) - total demand(t)|
  double utility_company_residual = 0.0;  // max_t |price(t) - marginal cost(t)|
  std::vector<AgentCheck> agents;         // per-prosumer optimality at the price
  double tol = 0.0;
};

// Checks that `candidate` is a competitive equilibrium: the market clears,
// each prosumer's allocation satisfies its own first-order conditions at the
// posted price (multipliers are re-derived when the candidate omits them),
// and the price matches the supplier's marginal cost. `marginal_cost` maps
// total supply to the per-period marginal cost; the default is the
// scenario's constant b0. Failure is a verdict, never an exception.
EquilibriumVerdict verify_equilibrium(
    const Scenario& scenario, const EquilibriumResult& candidate, double tol = 1e-6,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& marginal_cost = {});

// Total net utility minus supply cost for an arbitrary allocation.
double social_welfare(const Scenario& scenario, const std::vector<ProsumerOutcome>& allocation);

}  // namespace drm
