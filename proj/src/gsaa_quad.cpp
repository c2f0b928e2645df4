#include "drm/gsaa_quad.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace drm {
namespace {

double pos(double x) { return x > 0.0 ? x : 0.0; }

const Appliance& find_appliance(const Prosumer& prosumer, const std::string& id) {
  for (const Appliance& a : prosumer.appliances)
    if (a.id == id) return a;
  throw std::invalid_argument("constraint references unknown appliance '" + id + "'");
}

const GeneralLinearConstraint& row_at(const Prosumer& prosumer, int index) {
  if (index < 0 || index >= static_cast<int>(prosumer.constraints.size())) {
    std::ostringstream out;
    out << "prosumer '" << prosumer.id << "' has no constraint row " << index;
    throw std::invalid_argument(out.str());
  }
  return prosumer.constraints[static_cast<size_t>(index)];
}

const ProsumerOutcome& outcome_for(const EquilibriumResult& market, const std::string& id) {
  for (const ProsumerOutcome& o : market.prosumers)
    if (o.id == id) return o;
  throw std::invalid_argument("market result has no prosumer '" + id + "'");
}

// Ratio behind the closed form, with the rhs taken from the caller so the
// comfort-zone variant can price a capacity other than the compiled one.
double closed_form_ratio(const Scenario& scenario, const Prosumer& prosumer,
                         const GeneralLinearConstraint& row, double rhs) {
  double numerator = rhs;
  double denominator = 0.0;
  for (const ConstraintTerm& term : row.terms) {
    const Appliance& appliance = find_appliance(prosumer, term.appliance);
    const int t = term.period - 1;
    const double a2 = 2.0 * appliance.utility.a_hat(t);
    const double margin = appliance.utility.b_hat(t) - scenario.utility.marginal_cost(t);
    numerator += term.alpha * margin / a2;
    denominator += term.alpha * term.alpha / a2;
  }
  return numerator / denominator;
}

ShadowPriceEstimate estimate_for_row(const Scenario& scenario, const EquilibriumResult& market,
                                     const ConstraintRef& constraint, double k_units,
                                     double rhs_override, bool use_override) {
  if (scenario.setting != Setting::Quadratic)
    throw std::invalid_argument("closed-form shadow prices need the quadratic setting");
  const Prosumer& prosumer = scenario.prosumer(constraint.prosumer);
  const GeneralLinearConstraint& row = row_at(prosumer, constraint.index);
  const double rhs = use_override ? rhs_override : row.rhs;

  ShadowPriceEstimate estimate;
  estimate.constraint = constraint;
  estimate.unclamped_value = closed_form_ratio(scenario, prosumer, row, rhs);
  estimate.value = pos(estimate.unclamped_value);
  estimate.k_units = k_units;
  estimate.welfare_projection = k_units * estimate.value;

  const ProsumerOutcome& outcome = outcome_for(market, prosumer.id);
  auto [matrix, compiled_rhs] = assemble_rows(prosumer.constraints, outcome.variables);
  TightnessReport report = check_row_tightness(matrix, compiled_rhs, outcome.quantities,
                                               outcome.duals, constraint.index);
  estimate.numeric_dual = outcome.duals(constraint.index);
  estimate.tightness_assumption_held = report.held;
  estimate.warning = report.warning;
  return estimate;
}

}  // namespace

ConstraintRef locate_ac_row(const Scenario& scenario, const std::string& prosumer, int t) {
  const Prosumer& owner = scenario.prosumer(prosumer);
  for (size_t j = 0; j < owner.constraints.size(); ++j) {
    const GeneralLinearConstraint& row = owner.constraints[j];
    if (row.origin != RowOrigin::WindowUpper) continue;
    const Appliance& appliance = find_appliance(owner, row.origin_appliance);
    if (appliance.kind != ApplianceKind::ThermostatLike) continue;
    const EnergyWindow& window = appliance.windows[static_cast<size_t>(row.origin_period)];
    if (static_cast<int>(window.periods.size()) != t) continue;
    bool leading = true;
    for (int tau = 0; tau < t; ++tau)
      if (window.periods[static_cast<size_t>(tau)] != tau + 1) leading = false;
    if (!leading) continue;
    return {prosumer, static_cast<int>(j)};
  }
  std::ostringstream out;
  out << "prosumer '" << prosumer
      << "' has no thermostat energy-window upper row covering periods 1.." << t;
  throw std::invalid_argument(out.str());
}

ConstraintRef locate_net_sell_row(const Scenario& scenario, const std::string& prosumer, int t) {
  const Prosumer& owner = scenario.prosumer(prosumer);
  for (size_t j = 0; j < owner.constraints.size(); ++j) {
    const GeneralLinearConstraint& row = owner.constraints[j];
    if (row.origin == RowOrigin::NetBuyer && row.origin_period == t)
      return {prosumer, static_cast<int>(j)};
  }
  std::ostringstream out;
  out << "prosumer '" << prosumer << "' has no net-buyer row at period " << t;
  throw std::invalid_argument(out.str());
}

ConstraintRef locate_ev_row(const Scenario& scenario, const std::string& prosumer, int t) {
  const Prosumer& owner = scenario.prosumer(prosumer);
  for (size_t j = 0; j < owner.constraints.size(); ++j) {
    const GeneralLinearConstraint& row = owner.constraints[j];
    if (row.origin != RowOrigin::PowerLower || row.origin_period != t) continue;
    const Appliance& appliance = find_appliance(owner, row.origin_appliance);
    if (appliance.kind != ApplianceKind::EV) continue;
    if (row.rhs != 0.0) {
      std::ostringstream out;
      out << "EV discharge row for '" << prosumer << "' at period " << t << " has lower bound "
          << -row.rhs << ", expected 0";
      throw std::invalid_argument(out.str());
    }
    return {prosumer, static_cast<int>(j)};
  }
  std::ostringstream out;
  out << "prosumer '" << prosumer << "' has no EV power-lower row at period " << t;
  throw std::invalid_argument(out.str());
}

TightnessReport check_row_tightness(const Eigen::MatrixXd& constraint_matrix,
                                    const Eigen::VectorXd& rhs, const Eigen::VectorXd& primal,
                                    const Eigen::VectorXd& duals, int row) {
  constexpr double kSlackTol = 1e-7;
  constexpr double kDualTol = 1e-9;
  if (row < 0 || row >= constraint_matrix.rows())
    throw std::invalid_argument("tightness check: row out of range");

  TightnessReport report;
  const Eigen::VectorXd slack = constraint_matrix * primal - rhs;
  report.target_slack = slack(row);
  std::ostringstream warning;
  if (std::abs(report.target_slack) > kSlackTol) {
    report.held = false;
    warning << "target row " << row << " is not tight (slack " << report.target_slack << ")";
    report.warning = warning.str();
    return report;
  }
  for (int l = 0; l < constraint_matrix.rows(); ++l) {
    if (l == row) continue;
    bool shares = false;
    for (int c = 0; c < constraint_matrix.cols(); ++c)
      if (constraint_matrix(row, c) != 0.0 && constraint_matrix(l, c) != 0.0) shares = true;
    if (!shares) continue;
    if (slack(l) >= -kSlackTol) {
      report.held = false;
      warning << "row " << l << " shares variables with the target and is also tight (slack "
              << slack(l) << ")";
      report.warning = warning.str();
      return report;
    }
    if (duals(l) > kDualTol) {
      report.held = false;
      warning << "row " << l << " shares variables with the target and carries multiplier "
              << duals(l);
      report.warning = warning.str();
      return report;
    }
  }
  return report;
}

ShadowPriceEstimate shadow_price_closed_form(const Scenario& scenario,
                                             const EquilibriumResult& market,
                                             const ConstraintRef& constraint, double k_units) {
  return estimate_for_row(scenario, market, constraint, k_units, 0.0, false);
}

ShadowPriceEstimate shadow_price_closed_form(const Scenario& scenario,
                                             const ConstraintRef& constraint, double k_units,
                                             const SolverOptions& options) {
  EquilibriumResult market = solve_dso(scenario, options);
  return estimate_for_row(scenario, market, constraint, k_units, 0.0, false);
}

double shadow_price_matrix_form(const Scenario& scenario, const ConstraintRef& constraint) {
  if (scenario.setting != Setting::Quadratic)
    throw std::invalid_argument("closed-form shadow prices need the quadratic setting");
  const Prosumer& prosumer = scenario.prosumer(constraint.prosumer);
  row_at(prosumer, constraint.index);
  QpProblem qp = build_prosumer_qp(prosumer, scenario.utility, scenario.horizon);
  const Eigen::VectorXd scaled_linear = qp.linear.cwiseQuotient(qp.curvature);
  const Eigen::MatrixXd scaled_rows =
      qp.constraint_matrix * qp.curvature.cwiseInverse().asDiagonal();
  const int j = constraint.index;
  const double numerator = qp.constraint_matrix.row(j).dot(scaled_linear) + qp.rhs(j);
  const double denominator = scaled_rows.row(j).dot(qp.constraint_matrix.row(j));
  return pos(numerator / denominator);
}

ShadowPriceEstimate shadow_price_ac(const Scenario& scenario, const std::string& prosumer,
                                    int t, double q_bar, double k_units,
                                    const SolverOptions& options) {
  const ConstraintRef located = locate_ac_row(scenario, prosumer, t);
  EquilibriumResult market = solve_dso(scenario, options);
  return estimate_for_row(scenario, market, located, k_units, q_bar, true);
}

ShadowPriceEstimate shadow_price_net_sell(const Scenario& scenario, const std::string& prosumer,
                                          int t, double k_units, const SolverOptions& options) {
  const ConstraintRef located = locate_net_sell_row(scenario, prosumer, t);
  EquilibriumResult market = solve_dso(scenario, options);
  return estimate_for_row(scenario, market, located, k_units, 0.0, false);
}

ShadowPriceEstimate shadow_price_ev(const Scenario& scenario, const std::string& prosumer,
                                    int t, double k_units, const SolverOptions& options) {
  const ConstraintRef located = locate_ev_row(scenario, prosumer, t);
  EquilibriumResult market = solve_dso(scenario, options);
  return estimate_for_row(scenario, market, located, k_units, 0.0, false);
}

SweepResult incremental_gsaa_sweep(const Scenario& scenario, const ConstraintRef& constraint,
                                   double delta, int steps, const SolverOptions& options) {
  if (delta < 0.0) throw std::invalid_argument("sweep delta must be nonnegative");
  if (steps < 0) throw std::invalid_argument("sweep step count must be nonnegative");

  Scenario relaxed = scenario;
  const int position = relaxed.prosumer_position(constraint.prosumer);
  if (position < 0) throw std::invalid_argument("unknown prosumer '" + constraint.prosumer + "'");
  Prosumer& prosumer = relaxed.prosumers[static_cast<size_t>(position)];
  row_at(prosumer, constraint.index);
  GeneralLinearConstraint& row = prosumer.constraints[static_cast<size_t>(constraint.index)];

  SweepResult result;
  result.constraint = constraint;
  result.delta = delta;

  EquilibriumResult market;
  try {
    market = solve_dso(relaxed, options);
  } catch (const std::runtime_error&) {
    result.stopped = true;
    return result;
  }

  double projected_cumulative = 0.0;
  double realized_cumulative = 0.0;
  for (int step = 0; step < steps; ++step) {
    SweepStep entry;
    entry.step = step;
    entry.rhs = row.rhs;
    if (relaxed.setting == Setting::Quadratic) {
      ShadowPriceEstimate estimate = shadow_price_closed_form(relaxed, market, constraint);
      entry.tight = estimate.tightness_assumption_held;
      entry.estimate = entry.tight ? estimate.value : estimate.numeric_dual;
    } else {
      const ProsumerOutcome& outcome = outcome_for(market, constraint.prosumer);
      auto [matrix, rhs] = assemble_rows(prosumer.constraints, outcome.variables);
      entry.tight = check_row_tightness(matrix, rhs, outcome.quantities, outcome.duals,
                                        constraint.index)
                        .held;
      entry.estimate = outcome.duals(constraint.index);
    }
    entry.projected_delta = delta * entry.estimate;

    row.rhs += delta;
    EquilibriumResult next;
    try {
      next = solve_dso(relaxed, options);
    } catch (const std::runtime_error&) {
      result.stopped = true;
      break;
    }
    entry.realized_delta = next.welfare - market.welfare;
    projected_cumulative += entry.projected_delta;
    realized_cumulative += entry.realized_delta;
    entry.projected_cumulative = projected_cumulative;
    entry.realized_cumulative = realized_cumulative;
    result.steps.push_back(entry);
    market = std::move(next);
  }
  return result;
}

}  // namespace drm
