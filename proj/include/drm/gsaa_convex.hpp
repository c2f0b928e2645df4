#pragma once

#include <Eigen/Dense>

#include <string>

#include "drm/gsaa_quad.hpp"
#include "drm/model.hpp"
#include "drm/solver.hpp"

// Shadow-price bounds in the general convex setting. The true multiplier of
// a single tight row is sandwiched between the closed-form multipliers of
// two quadratic surrogates built at anchor points r: one replaces F with its
// mu-strong lower model, the other with its L-smooth upper model. The
// sandwich half-widths come from the Lipschitz/strong-convexity gap and the
// norms of the three optimizers, so the bounds need only mu, L, gradient
// values at the anchors, and measured operating points, never the functional
// form of F itself.

namespace drm {

struct SurrogateAnchors {
  Eigen::VectorXd r_lower;  // anchor of the strong-convexity surrogate
  Eigen::VectorXd r_upper;  // anchor of the smoothness surrogate
};

struct DualBounds {
  ConstraintRef constraint;
  double lower = 0.0;
  double upper = 0.0;
  // Closed-form multipliers of the two surrogates and the sandwich
  // half-widths attached to each.
  double lambda_mu = 0.0;
  double lambda_lip = 0.0;
  double halfwidth_mu = 0.0;
  double halfwidth_lip = 0.0;
  double eta = 0.0;  // inverse squared row norm, restricted to the row terms
  // Norms entering the half-widths.
  double norm_primal_mu = 0.0;   // surrogate optimizer, strong-convexity side
  double norm_primal = 0.0;      // true optimizer
  double norm_primal_lip = 0.0;  // surrogate optimizer, smoothness side
  double norm_anchor_mu = 0.0;
  double norm_anchor_lip = 0.0;
  // Numeric duals backing the closed forms.
  double surrogate_dual_mu = 0.0;
  double surrogate_dual_lip = 0.0;
  double numeric_dual = 0.0;  // multiplier of the exact problem
  bool anchored_at_optimum = false;  // tighter half-widths in force
  bool tightness_held = true;
  std::string warning;
};

// Sandwich bounds for the multiplier of `row`, built at the given anchors.
// Solves the two surrogate QPs and the exact program; the single-tight-row
// precondition is checked on all three solves and a failure flags the result
// (bounds are still reported).
DualBounds dual_bounds(const Scenario& scenario, const std::string& prosumer, int row,
                       const SurrogateAnchors& anchors, const SolverOptions& options = {});

// Anchors at the origin; only the initial utility increasing rate
// -grad F(0) enters the closed forms.
DualBounds dual_bounds_zero_anchor(const Scenario& scenario, const std::string& prosumer,
                                   int row, const SolverOptions& options = {});

// Zero-anchor bounds on the located rows (thermostat energy-window upper
// over periods 1..t, net-buyer row at t, EV power-lower row at t).
DualBounds bounds_ac(const Scenario& scenario, const std::string& prosumer, int t,
                     const SolverOptions& options = {});
DualBounds bounds_net_sell(const Scenario& scenario, const std::string& prosumer, int t,
                           const SolverOptions& options = {});
DualBounds bounds_ev(const Scenario& scenario, const std::string& prosumer, int t,
                     const SolverOptions& options = {});

enum class BetaRegion { KDominates, LDominates, Indecisive };

// Two single-EV prosumers over one period whose net disutilities differ by
// the factor beta. The region functions f0, f1, f2 of the initial utility
// increasing rate x = -grad F_k(0) decide, from bounds alone, which prosumer
// contributes more welfare per unit of allowed discharge.
struct BetaComparison {
  double beta = 1.0;
  double x = 0.0;
  BetaRegion region = BetaRegion::Indecisive;
  double f0 = 0.0;
  double f1 = 0.0;
  double f2 = 0.0;
  double lambda_k = 0.0;  // numeric multiplier of k's discharge row
  double lambda_l = 0.0;
  double norm_k = 0.0;  // measured operating points entering f1, f2
  double norm_l = 0.0;
  bool k_row_tight = false;
  bool l_row_tight = false;
  bool ordering_verified = false;  // numeric duals confirm the region's claim
  std::string note;
};

// base is prosumer k's one-coordinate disutility oracle; prosumer l uses
// beta * base. Both EVs may discharge up to discharge_cap. Classification
// is strict: within 1e-6 of a region boundary the comparison is Indecisive.
BetaComparison beta_case_study(const ConvexNetUtility& base, double beta, double b0,
                               double discharge_cap, const SolverOptions& options = {});

}  // namespace drm
