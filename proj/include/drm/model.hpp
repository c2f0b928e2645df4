#pragma once

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

// Core market model: prosumers own appliances, each appliance consumes (or
// produces, negative) power per period; linear constraints couple those
// quantities; the utility company posts a per-period marginal cost.
//
// Conventions used throughout the library:
//  - periods t are 1-based in every user-visible structure (JSON, CSV, rows);
//    raw Eigen vectors of length H are indexed with t-1,
//  - compiled constraint indices j are 0-based stable positions in the
//    documented row order (power bounds, then energy windows, then behavior
//    rows),
//  - all model objects are immutable while a solve is running; nothing here
//    spawns threads or shares mutable state.

namespace drm {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Horizon {
  int periods = 1;  // H >= 1

  bool contains(int t) const { return t >= 1 && t <= periods; }
};

// Appliance archetypes; they differ only in the admissible signs of the
// quadratic net-utility coefficients (see validate_coefficients).
enum class ApplianceKind { Inflexible, ThermostatLike, EV, Storage };

// Per-period quadratic net utility  a_hat*q^2 + b_hat*q + c_hat  with
// a_hat < 0 (strict concavity). c_hat never enters a solver objective; it is
// carried so welfare reports stay comparable across scenarios.
struct QuadraticNetUtility {
  Eigen::VectorXd a_hat;
  Eigen::VectorXd b_hat;
  Eigen::VectorXd c_hat;

  double value(int t, double q) const {
    return a_hat(t - 1) * q * q + b_hat(t - 1) * q + c_hat(t - 1);
  }
};

// Whole-prosumer net utility in the general convex setting, handed to the
// solver as a gradient oracle for F = -(U - C) over the prosumer's stacked
// (appliance, period) coordinates. mu-strong convexity and an L-Lipschitz
// gradient are required inputs, never estimated from the oracle.
struct ConvexNetUtility {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  double mu = 0.0;
  double lipschitz = 0.0;
  Eigen::VectorXd grad_at_zero;  // must satisfy -grad_at_zero > 0 element-wise
};

// Energy requirement over a set of periods: total_lower <= sum alpha(t)*q(t)
// <= total_upper. Either side may be +-inf (that side compiles to no row).
struct EnergyWindow {
  std::vector<int> periods;    // 1-based, within the horizon
  Eigen::VectorXd alpha;       // aligned with `periods`, not all zero
  double total_lower = -kInf;
  double total_upper = kInf;
};

struct Appliance {
  std::string id;
  ApplianceKind kind = ApplianceKind::Inflexible;
  // Per-period power bounds, length H; +-inf entries compile to no row.
  Eigen::VectorXd power_lower;
  Eigen::VectorXd power_upper;
  std::vector<EnergyWindow> windows;
  QuadraticNetUtility utility;
};

// Where a compiled row came from; kept so sensitivity tools can locate the
// row for a given appliance/period without re-deriving the compilation order.
enum class RowOrigin { PowerUpper, PowerLower, WindowUpper, WindowLower, NetBuyer };

struct ConstraintTerm {
  std::string appliance;
  int period = 1;  // 1-based
  double alpha = 0.0;
};

// One row of the prosumer's linear constraint system:
//   sum over terms of alpha * q(appliance, period) <= rhs.
struct GeneralLinearConstraint {
  std::string owner;  // prosumer id
  int index = 0;      // 0-based position among the owner's compiled rows
  std::vector<ConstraintTerm> terms;
  double rhs = 0.0;
  RowOrigin origin = RowOrigin::PowerUpper;
  std::string origin_appliance;  // empty for behavior rows
  int origin_period = 0;         // period for power/behavior rows, window ordinal otherwise
};

enum class Behavior { SimpleBuyer, NetBuyer, NetSeller };

struct Prosumer {
  std::string id;
  Behavior behavior = Behavior::NetSeller;
  std::vector<Appliance> appliances;
  // Compiled rows; the single source of truth for every solve. Produced by
  // compile_constraints, after which sensitivity tools may relax rhs values
  // directly (appliance fields are not re-read by solvers).
  std::vector<GeneralLinearConstraint> constraints;
  // Present in the general convex setting.
  std::optional<ConvexNetUtility> convex;
};

struct UtilityCompany {
  Eigen::VectorXd marginal_cost;  // b0 per period, >= 0
};

enum class Setting { Quadratic, GeneralConvex };

struct Scenario {
  Horizon horizon;
  Setting setting = Setting::Quadratic;
  UtilityCompany utility;
  std::vector<Prosumer> prosumers;

  const Prosumer& prosumer(const std::string& id) const;
  int prosumer_position(const std::string& id) const;  // -1 when absent
};

// Builds the owner's rows in the deterministic order: per appliance (in
// declaration order) power-upper then power-lower per period, then window
// rows (upper then lower per window), then behavior rows per period.
// Throws std::invalid_argument on structural defects: periods outside the
// horizon, coefficient/period length mismatches, all-zero window alphas,
// SimpleBuyer appliances admitting negative power.
std::vector<GeneralLinearConstraint> compile_constraints(const Prosumer& prosumer,
                                                         const Horizon& horizon);

struct CoefficientIssue {
  std::string appliance;
  int period = 1;
  std::string coefficient;  // "a_hat" | "b_hat" | "c_hat"
  double value = 0.0;
  std::string rule;  // human-readable sign rule that failed
};

struct CoefficientReport {
  bool ok = true;
  std::vector<CoefficientIssue> issues;
};

// Sign discipline per appliance kind, every period:
//   Inflexible:     a_hat < 0, b_hat > 0, c_hat = 0
//   ThermostatLike: a_hat < 0, b_hat > 0, c_hat free
//   EV:             a_hat < 0, b_hat > 0, c_hat = 0
//   Storage:        a_hat < 0, b_hat = 0, c_hat = 0
CoefficientReport validate_coefficients(const Appliance& appliance);
CoefficientReport validate_coefficients(const Prosumer& prosumer);

struct FeasibilityResult {
  bool feasible = false;
  Eigen::VectorXd point;          // best point found (feasible when `feasible`)
  double max_violation = 0.0;     // max_j (a_j^T q - h_j) at `point`
  Eigen::VectorXd certificate;    // when infeasible: y >= 0 with A^T y ~ 0, h^T y < 0
};

// Phase-1 search over the prosumer's compiled rows; a point is accepted as
// feasible when its maximum violation is <= 1e-6.
FeasibilityResult feasibility_probe(const Prosumer& prosumer, const Horizon& horizon);

}  // namespace drm
