#include "drm/equilibrium.hpp"

#include <algorithm>
#include <stdexcept>

namespace drm {

namespace {

using Eigen::VectorXd;

void validate_scenario_shape(const Scenario& scenario) {
  if (scenario.horizon.periods < 1) {
    throw std::invalid_argument("scenario horizon must have at least one period");
  }
  if (static_cast<int>(scenario.utility.marginal_cost.size()) != scenario.horizon.periods) {
    throw std::invalid_argument("marginal cost vector length does not match the horizon");
  }
}

const Appliance& appliance_of(const Prosumer& prosumer, const std::string& id) {
  for (const auto& a : prosumer.appliances) {
    if (a.id == id) return a;
  }
  throw std::invalid_argument("prosumer '" + prosumer.id + "' has no appliance '" + id + "'");
}

double quadratic_net_utility(const Prosumer& prosumer, const VariableMap& variables,
                             const VectorXd& quantities) {
  double total = 0.0;
  for (int c = 0; c < variables.size(); ++c) {
    const VarKey& key = variables.key(c);
    total += appliance_of(prosumer, key.appliance).utility.value(key.period, quantities(c));
  }
  return total;
}

KktReport worst_of(const KktReport& a, const KktReport& b) {
  KktReport w;
  w.primal_feasibility_residual =
      std::max(a.primal_feasibility_residual, b.primal_feasibility_residual);
  w.dual_feasibility_residual = std::max(a.dual_feasibility_residual, b.dual_feasibility_residual);
  w.complementary_slackness_residual =
      std::max(a.complementary_slackness_residual, b.complementary_slackness_residual);
  w.stationarity_residual = std::max(a.stationarity_residual, b.stationarity_residual);
  return w;
}

// Stacked b0: the cost rate of the column's period.
VectorXd stacked_marginal_cost(const VariableMap& variables, const VectorXd& b0) {
  VectorXd stacked(variables.size());
  for (int c = 0; c < variables.size(); ++c) stacked(c) = b0(variables.key(c).period - 1);
  return stacked;
}

}  // namespace

QpProblem build_prosumer_qp(const Prosumer& prosumer, const UtilityCompany& utility,
                            const Horizon& horizon) {
  QpProblem qp;
  qp.variables = VariableMap::for_prosumer(prosumer, horizon);
  const int n = qp.variables.size();
  qp.curvature.resize(n);
  qp.linear.resize(n);
  for (int c = 0; c < n; ++c) {
    const VarKey& key = qp.variables.key(c);
    const auto& u = appliance_of(prosumer, key.appliance).utility;
    qp.curvature(c) = 2.0 * u.a_hat(key.period - 1);
    qp.linear(c) = u.b_hat(key.period - 1) - utility.marginal_cost(key.period - 1);
  }
  std::tie(qp.constraint_matrix, qp.rhs) = assemble_rows(prosumer.constraints, qp.variables);
  return qp;
}

QpProblem build_joint_qp(const Scenario& scenario) {
  QpProblem qp;
  qp.variables = VariableMap::for_scenario(scenario);
  const int n = qp.variables.size();
  qp.curvature.resize(n);
  qp.linear.resize(n);
  for (int c = 0; c < n; ++c) {
    const VarKey& key = qp.variables.key(c);
    const auto& u = appliance_of(scenario.prosumer(key.prosumer), key.appliance).utility;
    qp.curvature(c) = 2.0 * u.a_hat(key.period - 1);
    qp.linear(c) = u.b_hat(key.period - 1) - scenario.utility.marginal_cost(key.period - 1);
  }
  std::vector<GeneralLinearConstraint> rows;
  for (const auto& p : scenario.prosumers) {
    rows.insert(rows.end(), p.constraints.begin(), p.constraints.end());
  }
  std::tie(qp.constraint_matrix, qp.rhs) = assemble_rows(rows, qp.variables);
  return qp;
}

ConvexNetUtility quadratic_oracle(const Prosumer& prosumer, const Horizon& horizon,
                                  double mu, double lipschitz) {
  const VariableMap variables = VariableMap::for_prosumer(prosumer, horizon);
  const int n = variables.size();
  VectorXd a(n);
  VectorXd b(n);
  double constant = 0.0;
  for (int c = 0; c < n; ++c) {
    const VarKey& key = variables.key(c);
    const auto& u = appliance_of(prosumer, key.appliance).utility;
    a(c) = u.a_hat(key.period - 1);
    b(c) = u.b_hat(key.period - 1);
    constant += u.c_hat(key.period - 1);
    if (!(a(c) < 0.0)) {
      throw std::invalid_argument("quadratic oracle for '" + prosumer.id +
                                  "' needs strictly negative a_hat on appliance '" +
                                  key.appliance + "'");
    }
  }
  const double floor = -2.0 * a.maxCoeff();    // 2 min |a_hat|
  const double ceiling = -2.0 * a.minCoeff();  // 2 max |a_hat|
  if (mu == 0.0) mu = floor;
  if (lipschitz == 0.0) lipschitz = ceiling;
  if (!(mu > 0.0) || mu > floor) {
    throw std::invalid_argument("declared mu for '" + prosumer.id +
                                "' must lie in (0, 2 min|a_hat|]");
  }
  if (lipschitz < ceiling) {
    throw std::invalid_argument("declared lipschitz for '" + prosumer.id +
                                "' must be at least 2 max|a_hat|");
  }
  ConvexNetUtility oracle;
  oracle.value = [a, b, constant](const VectorXd& q) {
    return -((a.array() * q.array().square() + b.array() * q.array()).sum() + constant);
  };
  oracle.gradient = [a, b](const VectorXd& q) {
    return VectorXd(-(2.0 * a.array() * q.array() + b.array()));
  };
  oracle.mu = mu;
  oracle.lipschitz = lipschitz;
  oracle.grad_at_zero = -b;
  return oracle;
}

ConvexProgram build_prosumer_convex(const Prosumer& prosumer, const UtilityCompany& utility,
                                    const Horizon& horizon) {
  if (!prosumer.convex.has_value()) {
    throw std::invalid_argument("prosumer '" + prosumer.id + "' carries no convex net utility");
  }
  ConvexProgram cp;
  cp.variables = VariableMap::for_prosumer(prosumer, horizon);
  cp.dimension = cp.variables.size();
  const VectorXd cost = stacked_marginal_cost(cp.variables, utility.marginal_cost);
  const ConvexNetUtility& f = *prosumer.convex;
  cp.value = [f, cost](const VectorXd& q) { return f.value(q) + cost.dot(q); };
  cp.gradient = [f, cost](const VectorXd& q) { return VectorXd(f.gradient(q) + cost); };
  cp.mu = f.mu;
  cp.lipschitz = f.lipschitz;
  std::tie(cp.constraint_matrix, cp.rhs) = assemble_rows(prosumer.constraints, cp.variables);
  return cp;
}

EquilibriumResult solve_dso(const Scenario& scenario, const SolverOptions& options) {
  validate_scenario_shape(scenario);
  EquilibriumResult result;
  result.price = scenario.utility.marginal_cost;
  result.supply = VectorXd::Zero(scenario.horizon.periods);

  for (const auto& prosumer : scenario.prosumers) {
    ProsumerOutcome outcome;
    outcome.id = prosumer.id;
    outcome.variables = VariableMap::for_prosumer(prosumer, scenario.horizon);
    if (outcome.variables.size() == 0) {
      outcome.quantities.resize(0);
      outcome.duals.resize(0);
      result.prosumers.push_back(std::move(outcome));
      continue;
    }

    SolveOutcome solved;
    if (scenario.setting == Setting::Quadratic) {
      solved = solve_qp_dual(build_prosumer_qp(prosumer, scenario.utility, scenario.horizon),
                             options);
    } else {
      solved = solve_convex_primal(
          build_prosumer_convex(prosumer, scenario.utility, scenario.horizon), options);
    }
    if (solved.status == SolveStatus::Infeasible) {
      throw std::runtime_error("prosumer '" + prosumer.id + "' has no feasible allocation");
    }

    outcome.quantities = solved.primal;
    outcome.duals = solved.duals;
    outcome.kkt = solved.kkt;
    outcome.duals_unique = solved.duals_unique;
    outcome.net_utility =
        scenario.setting == Setting::Quadratic
            ? quadratic_net_utility(prosumer, outcome.variables, outcome.quantities)
            : -prosumer.convex->value(outcome.quantities);

    for (int c = 0; c < outcome.variables.size(); ++c) {
      result.supply(outcome.variables.key(c).period - 1) += outcome.quantities(c);
    }
    result.kkt = worst_of(result.kkt, outcome.kkt);
    result.prosumers.push_back(std::move(outcome));
  }

  result.welfare = 0.0;
  for (const auto& o : result.prosumers) result.welfare += o.net_utility;
  result.welfare -= scenario.utility.marginal_cost.dot(result.supply);
  return result;
}

DecouplingReport check_decoupling(const Scenario& scenario, const SolverOptions& options) {
  validate_scenario_shape(scenario);
  auto decoupled = solve_dso(scenario, options);

  SolveOutcome joint;
  if (scenario.setting == Setting::Quadratic) {
    joint = solve_qp_dual(build_joint_qp(scenario), options);
  } else {
    ConvexProgram cp;
    cp.variables = VariableMap::for_scenario(scenario);
    cp.dimension = cp.variables.size();
    std::vector<ConvexProgram> parts;
    std::vector<int> offsets;
    int offset = 0;
    for (const auto& p : scenario.prosumers) {
      parts.push_back(build_prosumer_convex(p, scenario.utility, scenario.horizon));
      offsets.push_back(offset);
      offset += parts.back().dimension;
    }
    cp.mu = kInf;
    cp.lipschitz = 0.0;
    for (const auto& part : parts) {
      cp.mu = std::min(cp.mu, part.mu);
      cp.lipschitz = std::max(cp.lipschitz, part.lipschitz);
    }
    cp.value = [parts, offsets](const VectorXd& q) {
      double total = 0.0;
      for (std::size_t i = 0; i < parts.size(); ++i) {
        total += parts[i].value(q.segment(offsets[i], parts[i].dimension));
      }
      return total;
    };
    cp.gradient = [parts, offsets, n = cp.dimension](const VectorXd& q) {
      VectorXd g(n);
      for (std::size_t i = 0; i < parts.size(); ++i) {
        g.segment(offsets[i], parts[i].dimension) =
            parts[i].gradient(q.segment(offsets[i], parts[i].dimension));
      }
      return g;
    };
    std::vector<GeneralLinearConstraint> rows;
    for (const auto& p : scenario.prosumers) {
      rows.insert(rows.end(), p.constraints.begin(), p.constraints.end());
    }
    std::tie(cp.constraint_matrix, cp.rhs) = assemble_rows(rows, cp.variables);
    joint = solve_convex_primal(cp, options);
  }

  DecouplingReport report;
  int var_offset = 0;
  int row_offset = 0;
  for (const auto& outcome : decoupled.prosumers) {
    const int nv = static_cast<int>(outcome.quantities.size());
    const int nr = static_cast<int>(outcome.duals.size());
    if (nv > 0) {
      report.max_primal_gap =
          std::max(report.max_primal_gap,
                   (joint.primal.segment(var_offset, nv) - outcome.quantities)
                       .cwiseAbs()
                       .maxCoeff());
    }
    if (nr > 0) {
      report.max_dual_gap = std::max(
          report.max_dual_gap,
          (joint.duals.segment(row_offset, nr) - outcome.duals).cwiseAbs().maxCoeff());
    }
    var_offset += nv;
    row_offset += nr;
  }
  return report;
}

EquilibriumVerdict verify_equilibrium(
    const Scenario& scenario, const EquilibriumResult& candidate, double tol,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& marginal_cost) {
  validate_scenario_shape(scenario);
  if (candidate.prosumers.size() != scenario.prosumers.size()) {
    throw std::invalid_argument("candidate allocation does not cover every prosumer");
  }
  if (static_cast<int>(candidate.price.size()) != scenario.horizon.periods ||
      static_cast<int>(candidate.supply.size()) != scenario.horizon.periods) {
    throw std::invalid_argument("candidate price/supply length does not match the horizon");
  }

  EquilibriumVerdict verdict;
  verdict.tol = tol;

  VectorXd demand = VectorXd::Zero(scenario.horizon.periods);
  for (const auto& outcome : candidate.prosumers) {
    const Prosumer& prosumer = scenario.prosumer(outcome.id);
    auto variables = VariableMap::for_prosumer(prosumer, scenario.horizon);
    if (outcome.quantities.size() != variables.size()) {
      throw std::invalid_argument("allocation for prosumer '" + outcome.id +
                                  "' has the wrong length");
    }
    for (int c = 0; c < variables.size(); ++c) {
      demand(variables.key(c).period - 1) += outcome.quantities(c);
    }
  }
  verdict.clearing_residual =
      scenario.horizon.periods ? (candidate.supply - demand).cwiseAbs().maxCoeff() : 0.0;

  // Each prosumer must be individually optimal at the posted price. When the
  // candidate omits multipliers, re-derive them from a fresh solve; a
  // non-optimal allocation then fails stationarity or complementarity.
  UtilityCompany at_price{candidate.price};
  for (const auto& outcome : candidate.prosumers) {
    const Prosumer& prosumer = scenario.prosumer(outcome.id);
    AgentCheck check;
    check.id = outcome.id;
    if (outcome.quantities.size() == 0) {
      verdict.agents.push_back(std::move(check));
      continue;
    }
    if (scenario.setting == Setting::Quadratic) {
      QpProblem qp = build_prosumer_qp(prosumer, at_price, scenario.horizon);
      VectorXd duals = outcome.duals;
      if (duals.size() != qp.rhs.size()) duals = solve_qp_dual(qp).duals;
      check.kkt = kkt_residuals(qp, outcome.quantities, duals);
    } else {
      ConvexProgram cp = build_prosumer_convex(prosumer, at_price, scenario.horizon);
      VectorXd duals = outcome.duals;
      if (duals.size() != cp.rhs.size()) duals = solve_convex_primal(cp).duals;
      check.kkt = kkt_residuals(cp, outcome.quantities, duals);
    }
    verdict.agents.push_back(std::move(check));
  }

  const VectorXd mc =
      marginal_cost ? marginal_cost(candidate.supply) : scenario.utility.marginal_cost;
  if (static_cast<int>(mc.size()) != scenario.horizon.periods) {
    throw std::invalid_argument("marginal cost oracle returned the wrong length");
  }
  verdict.utility_company_residual = (candidate.price - mc).cwiseAbs().maxCoeff();

  verdict.equilibrium = verdict.clearing_residual <= tol &&
                        verdict.utility_company_residual <= tol &&
                        std::all_of(verdict.agents.begin(), verdict.agents.end(),
                                    [&](const AgentCheck& a) { return a.kkt.within(tol); });
  return verdict;
}

double social_welfare(const Scenario& scenario, const std::vector<ProsumerOutcome>& allocation) {
  validate_scenario_shape(scenario);
  double welfare = 0.0;
  VectorXd demand = VectorXd::Zero(scenario.horizon.periods);
  for (const auto& outcome : allocation) {
    const Prosumer& prosumer = scenario.prosumer(outcome.id);
    auto variables = VariableMap::for_prosumer(prosumer, scenario.horizon);
    if (outcome.quantities.size() != variables.size()) {
      throw std::invalid_argument("allocation for prosumer '" + outcome.id +
                                  "' has the wrong length");
    }
    welfare += scenario.setting == Setting::Quadratic
                   ? quadratic_net_utility(prosumer, variables, outcome.quantities)
                   : -prosumer.convex->value(outcome.quantities);
    for (int c = 0; c < variables.size(); ++c) {
      demand(variables.key(c).period - 1) += outcome.quantities(c);
    }
  }
  return welfare - scenario.utility.marginal_cost.dot(demand);
}

}  // namespace drm
