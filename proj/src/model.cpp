#include "drm/model.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "drm/solver.hpp"

namespace drm {

namespace {

[[noreturn]] void structural_error(const std::string& what) {
  throw std::invalid_argument(what);
}

void check_length(const Eigen::VectorXd& v, int h, const std::string& appliance,
                  const std::string& field) {
  if (static_cast<int>(v.size()) != h) {
    structural_error("appliance '" + appliance + "': " + field + " has length " +
                     std::to_string(v.size()) + ", horizon is " + std::to_string(h));
  }
}

}  // namespace

const Prosumer& Scenario::prosumer(const std::string& id) const {
  for (const auto& p : prosumers) {
    if (p.id == id) return p;
  }
  throw std::invalid_argument("unknown prosumer '" + id + "'");
}

int Scenario::prosumer_position(const std::string& id) const {
  for (std::size_t i = 0; i < prosumers.size(); ++i) {
    if (prosumers[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

std::vector<GeneralLinearConstraint> compile_constraints(const Prosumer& prosumer,
                                                         const Horizon& horizon) {
  if (horizon.periods < 1) structural_error("horizon must have at least one period");
  const int h = horizon.periods;

  std::set<std::string> seen_ids;
  for (const auto& a : prosumer.appliances) {
    if (!seen_ids.insert(a.id).second) {
      structural_error("prosumer '" + prosumer.id + "': duplicate appliance id '" + a.id + "'");
    }
  }

  std::vector<GeneralLinearConstraint> rows;
  auto push = [&](GeneralLinearConstraint row) {
    row.owner = prosumer.id;
    row.index = static_cast<int>(rows.size());
    rows.push_back(std::move(row));
  };

  // Power bounds: q(t) <= upper as a +1 row, q(t) >= lower as a -1 row with
  // rhs -lower. Infinite bounds produce no row.
  for (const auto& a : prosumer.appliances) {
    check_length(a.power_lower, h, a.id, "power_lower");
    check_length(a.power_upper, h, a.id, "power_upper");
    for (int t = 1; t <= h; ++t) {
      const double lo = a.power_lower(t - 1);
      const double up = a.power_upper(t - 1);
      if (lo > up) {
        structural_error("appliance '" + a.id + "': power_lower > power_upper at period " +
                         std::to_string(t));
      }
      if (prosumer.behavior == Behavior::SimpleBuyer && lo < 0.0) {
        structural_error("prosumer '" + prosumer.id + "' is a simple buyer but appliance '" +
                         a.id + "' admits negative power at period " + std::to_string(t));
      }
      if (std::isfinite(up)) {
        push({.owner = {},
              .index = 0,
              .terms = {{a.id, t, 1.0}},
              .rhs = up,
              .origin = RowOrigin::PowerUpper,
              .origin_appliance = a.id,
              .origin_period = t});
      }
      if (std::isfinite(lo)) {
        push({.owner = {},
              .index = 0,
              .terms = {{a.id, t, -1.0}},
              .rhs = -lo,
              .origin = RowOrigin::PowerLower,
              .origin_appliance = a.id,
              .origin_period = t});
      }
    }
  }

  // Energy windows: sum alpha(t) q(t) <= upper and >= lower, the lower side
  // emitted with negated coefficients.
  for (const auto& a : prosumer.appliances) {
    for (std::size_t w = 0; w < a.windows.size(); ++w) {
      const auto& win = a.windows[w];
      if (win.periods.empty()) {
        structural_error("appliance '" + a.id + "': window " + std::to_string(w) +
                         " covers no periods");
      }
      if (static_cast<int>(win.periods.size()) != static_cast<int>(win.alpha.size())) {
        structural_error("appliance '" + a.id + "': window " + std::to_string(w) +
                         " has mismatched periods/alpha lengths");
      }
      std::set<int> dedupe;
      for (int t : win.periods) {
        if (!horizon.contains(t)) {
          structural_error("appliance '" + a.id + "': window " + std::to_string(w) +
                           " references period " + std::to_string(t) + " outside the horizon");
        }
        if (!dedupe.insert(t).second) {
          structural_error("appliance '" + a.id + "': window " + std::to_string(w) +
                           " repeats period " + std::to_string(t));
        }
      }
      if (win.alpha.cwiseAbs().maxCoeff() == 0.0) {
        structural_error("appliance '" + a.id + "': window " + std::to_string(w) +
                         " has all-zero coefficients");
      }
      if (win.total_lower > win.total_upper) {
        structural_error("appliance '" + a.id + "': window " + std::to_string(w) +
                         " has total_lower > total_upper");
      }
      auto terms_with_sign = [&](double sign) {
        std::vector<ConstraintTerm> terms;
        terms.reserve(win.periods.size());
        for (std::size_t k = 0; k < win.periods.size(); ++k) {
          terms.push_back({a.id, win.periods[k], sign * win.alpha(k)});
        }
        return terms;
      };
      if (std::isfinite(win.total_upper)) {
        push({.owner = {},
              .index = 0,
              .terms = terms_with_sign(1.0),
              .rhs = win.total_upper,
              .origin = RowOrigin::WindowUpper,
              .origin_appliance = a.id,
              .origin_period = static_cast<int>(w)});
      }
      if (std::isfinite(win.total_lower)) {
        push({.owner = {},
              .index = 0,
              .terms = terms_with_sign(-1.0),
              .rhs = -win.total_lower,
              .origin = RowOrigin::WindowLower,
              .origin_appliance = a.id,
              .origin_period = static_cast<int>(w)});
      }
    }
  }

  // Net-buyer behavior: per period, the prosumer's total draw stays
  // nonnegative, i.e. -sum_a q_a(t) <= 0.
  if (prosumer.behavior == Behavior::NetBuyer) {
    for (int t = 1; t <= h; ++t) {
      std::vector<ConstraintTerm> terms;
      terms.reserve(prosumer.appliances.size());
      for (const auto& a : prosumer.appliances) terms.push_back({a.id, t, -1.0});
      push({.owner = {},
            .index = 0,
            .terms = std::move(terms),
            .rhs = 0.0,
            .origin = RowOrigin::NetBuyer,
            .origin_appliance = {},
            .origin_period = t});
    }
  }

  return rows;
}

namespace {

void check_entry(CoefficientReport& report, const Appliance& a, int t, const char* name,
                 double v, bool ok, const char* rule) {
  if (ok) return;
  report.ok = false;
  report.issues.push_back({a.id, t, name, v, rule});
}

}  // namespace

CoefficientReport validate_coefficients(const Appliance& appliance) {
  CoefficientReport report;
  const auto& u = appliance.utility;
  const int h = static_cast<int>(u.a_hat.size());
  if (h == 0 || u.b_hat.size() != h || u.c_hat.size() != h) {
    report.ok = false;
    report.issues.push_back(
        {appliance.id, 0, "a_hat", 0.0, "coefficient vectors empty or of unequal length"});
    return report;
  }
  for (int t = 1; t <= h; ++t) {
    const double a = u.a_hat(t - 1);
    const double b = u.b_hat(t - 1);
    const double c = u.c_hat(t - 1);
    check_entry(report, appliance, t, "a_hat", a, a < 0.0, "a_hat < 0");
    switch (appliance.kind) {
      case ApplianceKind::Inflexible:
      case ApplianceKind::EV:
        check_entry(report, appliance, t, "b_hat", b, b > 0.0, "b_hat > 0");
        check_entry(report, appliance, t, "c_hat", c, c == 0.0, "c_hat = 0");
        break;
      case ApplianceKind::ThermostatLike:
        check_entry(report, appliance, t, "b_hat", b, b > 0.0, "b_hat > 0");
        break;
      case ApplianceKind::Storage:
        check_entry(report, appliance, t, "b_hat", b, b == 0.0, "b_hat = 0");
        check_entry(report, appliance, t, "c_hat", c, c == 0.0, "c_hat = 0");
        break;
    }
  }
  return report;
}

CoefficientReport validate_coefficients(const Prosumer& prosumer) {
  CoefficientReport report;
  for (const auto& a : prosumer.appliances) {
    auto r = validate_coefficients(a);
    if (!r.ok) {
      report.ok = false;
      report.issues.insert(report.issues.end(), r.issues.begin(), r.issues.end());
    }
  }
  return report;
}

FeasibilityResult feasibility_probe(const Prosumer& prosumer, const Horizon& horizon) {
  auto variables = VariableMap::for_prosumer(prosumer, horizon);
  auto [A, h] = assemble_rows(prosumer.constraints, variables);
  return find_feasible_point(A, h);
}

}  // namespace drm
