#include "drm/scenario_io.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "drm/solver.hpp"

namespace drm {

using Eigen::VectorXd;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

[[noreturn]] void fail(const std::string& message) { throw std::invalid_argument(message); }

const json& require(const json& object, const char* key, const std::string& where) {
  const auto it = object.find(key);
  if (it == object.end()) fail("missing field '" + std::string(key) + "' in " + where);
  return *it;
}

void reject_unknown(const json& object, const std::string& where,
                    std::initializer_list<const char*> allowed) {
  for (const auto& item : object.items()) {
    bool known = false;
    for (const char* name : allowed) known = known || item.key() == name;
    if (!known) fail("unknown field '" + item.key() + "' in " + where);
  }
}

const json& expect_object(const json& value, const std::string& where) {
  if (!value.is_object()) fail(where + " must be an object");
  return value;
}

const json& expect_array(const json& value, const std::string& where) {
  if (!value.is_array()) fail("field '" + where + "' must be an array");
  return value;
}

std::string expect_string(const json& value, const std::string& where) {
  if (!value.is_string()) fail("field '" + where + "' must be a string");
  return value.get<std::string>();
}

int expect_int(const json& value, const std::string& where) {
  if (!value.is_number_integer()) fail("field '" + where + "' must be an integer");
  return value.get<int>();
}

double expect_number(const json& value, const std::string& where) {
  if (!value.is_number()) fail("field '" + where + "' must be a number");
  return value.get<double>();
}

// Number (constant over the horizon) or array with one entry per period.
VectorXd parse_series(const json& value, int h, const std::string& where) {
  if (value.is_number()) return VectorXd::Constant(h, value.get<double>());
  if (value.is_array()) {
    if (static_cast<int>(value.size()) != h) {
      fail("field '" + where + "' must have " + std::to_string(h) + " entries, got " +
           std::to_string(value.size()));
    }
    VectorXd out(h);
    for (int i = 0; i < h; ++i) out(i) = expect_number(value[i], where + "[" + std::to_string(i) + "]");
    return out;
  }
  fail("field '" + where + "' must be a number or an array of numbers");
}

// Same, with null (whole field or per entry) meaning `unbounded`.
VectorXd parse_bound_series(const json& value, int h, const std::string& where, double unbounded) {
  if (value.is_null()) return VectorXd::Constant(h, unbounded);
  if (value.is_number()) return VectorXd::Constant(h, value.get<double>());
  if (value.is_array()) {
    if (static_cast<int>(value.size()) != h) {
      fail("field '" + where + "' must have " + std::to_string(h) + " entries, got " +
           std::to_string(value.size()));
    }
    VectorXd out(h);
    for (int i = 0; i < h; ++i) {
      const json& entry = value[i];
      if (entry.is_null()) {
        out(i) = unbounded;
      } else {
        out(i) = expect_number(entry, where + "[" + std::to_string(i) + "]");
      }
    }
    return out;
  }
  fail("field '" + where + "' must be null, a number, or an array of numbers and nulls");
}

ApplianceKind parse_kind(const std::string& text, const std::string& where) {
  if (text == "inflexible") return ApplianceKind::Inflexible;
  if (text == "thermostat_like") return ApplianceKind::ThermostatLike;
  if (text == "ev") return ApplianceKind::EV;
  if (text == "storage") return ApplianceKind::Storage;
  fail("field '" + where +
       "' must be one of \"inflexible\", \"thermostat_like\", \"ev\", \"storage\"");
}

const char* kind_name(ApplianceKind kind) {
  switch (kind) {
    case ApplianceKind::Inflexible: return "inflexible";
    case ApplianceKind::ThermostatLike: return "thermostat_like";
    case ApplianceKind::EV: return "ev";
    case ApplianceKind::Storage: return "storage";
  }
  return "?";
}

Behavior parse_behavior(const std::string& text, const std::string& where) {
  if (text == "simple_buyer") return Behavior::SimpleBuyer;
  if (text == "net_buyer") return Behavior::NetBuyer;
  if (text == "net_seller") return Behavior::NetSeller;
  fail("field '" + where + "' must be one of \"simple_buyer\", \"net_buyer\", \"net_seller\"");
}

const char* behavior_name(Behavior behavior) {
  switch (behavior) {
    case Behavior::SimpleBuyer: return "simple_buyer";
    case Behavior::NetBuyer: return "net_buyer";
    case Behavior::NetSeller: return "net_seller";
  }
  return "?";
}

EnergyWindow parse_window(const json& value, int h, const std::string& where) {
  expect_object(value, where);
  reject_unknown(value, where, {"periods", "alpha", "total_lower", "total_upper"});
  EnergyWindow window;
  const json& periods = expect_array(require(value, "periods", where), where + ".periods");
  for (std::size_t i = 0; i < periods.size(); ++i) {
    window.periods.push_back(
        expect_int(periods[i], where + ".periods[" + std::to_string(i) + "]"));
  }
  if (value.contains("alpha")) {
    const json& alpha = expect_array(value["alpha"], where + ".alpha");
    if (alpha.size() != periods.size()) {
      fail("field '" + where + ".alpha' must have " + std::to_string(periods.size()) +
           " entries, got " + std::to_string(alpha.size()));
    }
    window.alpha.resize(static_cast<int>(alpha.size()));
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      window.alpha(static_cast<int>(i)) =
          expect_number(alpha[i], where + ".alpha[" + std::to_string(i) + "]");
    }
  } else {
    window.alpha = VectorXd::Ones(static_cast<int>(window.periods.size()));
  }
  if (value.contains("total_lower") && !value["total_lower"].is_null()) {
    window.total_lower = expect_number(value["total_lower"], where + ".total_lower");
  }
  if (value.contains("total_upper") && !value["total_upper"].is_null()) {
    window.total_upper = expect_number(value["total_upper"], where + ".total_upper");
  }
  (void)h;
  return window;
}

Appliance parse_appliance(const json& value, int h, const std::string& where) {
  expect_object(value, where);
  reject_unknown(value, where,
                 {"id", "kind", "a_hat", "b_hat", "c_hat", "power_lower", "power_upper",
                  "windows"});
  Appliance appliance;
  appliance.id = expect_string(require(value, "id", where), where + ".id");
  appliance.kind =
      parse_kind(expect_string(require(value, "kind", where), where + ".kind"), where + ".kind");
  appliance.utility.a_hat = parse_series(require(value, "a_hat", where), h, where + ".a_hat");
  appliance.utility.b_hat = parse_series(require(value, "b_hat", where), h, where + ".b_hat");
  appliance.utility.c_hat = value.contains("c_hat")
                                ? parse_series(value["c_hat"], h, where + ".c_hat")
                                : VectorXd::Zero(h);
  appliance.power_lower =
      value.contains("power_lower")
          ? parse_bound_series(value["power_lower"], h, where + ".power_lower", -kInf)
          : VectorXd::Constant(h, -kInf);
  appliance.power_upper =
      value.contains("power_upper")
          ? parse_bound_series(value["power_upper"], h, where + ".power_upper", kInf)
          : VectorXd::Constant(h, kInf);
  if (value.contains("windows")) {
    const json& windows = expect_array(value["windows"], where + ".windows");
    for (std::size_t i = 0; i < windows.size(); ++i) {
      appliance.windows.push_back(
          parse_window(windows[i], h, where + ".windows[" + std::to_string(i) + "]"));
    }
  }
  return appliance;
}

Prosumer parse_prosumer(const json& value, const Horizon& horizon, Setting setting,
                        const std::string& where) {
  expect_object(value, where);
  reject_unknown(value, where, {"id", "behavior", "appliances", "convex"});
  Prosumer prosumer;
  prosumer.id = expect_string(require(value, "id", where), where + ".id");
  prosumer.behavior = parse_behavior(
      expect_string(require(value, "behavior", where), where + ".behavior"), where + ".behavior");

  const json& appliances = expect_array(require(value, "appliances", where), where + ".appliances");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < appliances.size(); ++i) {
    Appliance appliance = parse_appliance(appliances[i], horizon.periods,
                                          where + ".appliances[" + std::to_string(i) + "]");
    if (!seen.insert(appliance.id).second) {
      fail("duplicate appliance id '" + appliance.id + "' in " + where);
    }
    prosumer.appliances.push_back(std::move(appliance));
  }

  double mu = 0.0;
  double lipschitz = 0.0;
  if (value.contains("convex")) {
    if (setting != Setting::GeneralConvex) {
      fail("field '" + where + ".convex' is only allowed when setting is \"general_convex\"");
    }
    const json& convex = expect_object(value["convex"], where + ".convex");
    reject_unknown(convex, where + ".convex", {"mu", "lipschitz"});
    if (convex.contains("mu") && !convex["mu"].is_null()) {
      mu = expect_number(convex["mu"], where + ".convex.mu");
    }
    if (convex.contains("lipschitz") && !convex["lipschitz"].is_null()) {
      lipschitz = expect_number(convex["lipschitz"], where + ".convex.lipschitz");
    }
  }

  const CoefficientReport report = validate_coefficients(prosumer);
  if (!report.ok) {
    const CoefficientIssue& issue = report.issues.front();
    fail("invalid coefficient in " + where + ": appliance '" + issue.appliance + "' period " +
         std::to_string(issue.period) + " " + issue.coefficient + " = " + fmt(issue.value) +
         " violates \"" + issue.rule + "\"" +
         (report.issues.size() > 1
              ? " (and " + std::to_string(report.issues.size() - 1) + " more)"
              : ""));
  }

  prosumer.constraints = compile_constraints(prosumer, horizon);
  if (setting == Setting::GeneralConvex) {
    prosumer.convex = quadratic_oracle(prosumer, horizon, mu, lipschitz);
  }
  return prosumer;
}

json series_to_json(const VectorXd& values) {
  json out = json::array();
  for (int i = 0; i < values.size(); ++i) out.push_back(values(i));
  return out;
}

json bound_series_to_json(const VectorXd& values) {
  json out = json::array();
  for (int i = 0; i < values.size(); ++i) {
    if (std::isfinite(values(i))) {
      out.push_back(values(i));
    } else {
      out.push_back(nullptr);
    }
  }
  return out;
}

VectorXd parse_vector(const json& value, int length, const std::string& where) {
  const json& array = expect_array(value, where);
  if (static_cast<int>(array.size()) != length) {
    fail("field '" + where + "' must have " + std::to_string(length) + " entries, got " +
         std::to_string(array.size()));
  }
  VectorXd out(length);
  for (int i = 0; i < length; ++i) {
    out(i) = expect_number(array[i], where + "[" + std::to_string(i) + "]");
  }
  return out;
}

const char* region_name(BetaRegion region) {
  switch (region) {
    case BetaRegion::KDominates: return "k_dominates";
    case BetaRegion::LDominates: return "l_dominates";
    case BetaRegion::Indecisive: return "indecisive";
  }
  return "?";
}

Appliance storage_unit(const std::string& id, int h, double a_hat) {
  Appliance appliance;
  appliance.id = id;
  appliance.kind = ApplianceKind::Storage;
  appliance.power_lower = VectorXd::Constant(h, -kInf);
  appliance.power_upper = VectorXd::Constant(h, kInf);
  appliance.utility.a_hat = VectorXd::Constant(h, a_hat);
  appliance.utility.b_hat = VectorXd::Zero(h);
  appliance.utility.c_hat = VectorXd::Zero(h);
  return appliance;
}

Appliance ev_unit(const std::string& id, int h, double a_hat, double b_hat) {
  Appliance appliance;
  appliance.id = id;
  appliance.kind = ApplianceKind::EV;
  appliance.power_lower = VectorXd::Zero(h);
  appliance.power_upper = VectorXd::Constant(h, kInf);
  appliance.utility.a_hat = VectorXd::Constant(h, a_hat);
  appliance.utility.b_hat = VectorXd::Constant(h, b_hat);
  appliance.utility.c_hat = VectorXd::Zero(h);
  return appliance;
}

// Two prosumers, storage plus EV each, constant coefficients over 24 periods.
Scenario pair_scenario(Behavior behavior) {
  Scenario scenario;
  scenario.horizon.periods = 24;
  scenario.setting = Setting::Quadratic;
  scenario.utility.marginal_cost = VectorXd::Constant(24, 0.4);

  Prosumer one;
  one.id = "one";
  one.behavior = behavior;
  one.appliances.push_back(storage_unit("storage", 24, -0.02));
  one.appliances.push_back(ev_unit("ev", 24, -0.01, 0.1));
  one.constraints = compile_constraints(one, scenario.horizon);

  Prosumer two;
  two.id = "two";
  two.behavior = behavior;
  two.appliances.push_back(storage_unit("storage", 24, -0.035));
  two.appliances.push_back(ev_unit("ev", 24, -0.015, 0.2));
  two.constraints = compile_constraints(two, scenario.horizon);

  scenario.prosumers.push_back(std::move(one));
  scenario.prosumers.push_back(std::move(two));
  return scenario;
}

}  // namespace

Scenario scenario_from_json(const json& root) {
  expect_object(root, "scenario");
  reject_unknown(root, "scenario", {"horizon", "setting", "marginal_cost", "prosumers"});

  Scenario scenario;
  scenario.horizon.periods = expect_int(require(root, "horizon", "scenario"), "horizon");
  if (scenario.horizon.periods < 1) fail("field 'horizon' must be >= 1");

  const std::string setting = expect_string(require(root, "setting", "scenario"), "setting");
  if (setting == "quadratic") {
    scenario.setting = Setting::Quadratic;
  } else if (setting == "general_convex") {
    scenario.setting = Setting::GeneralConvex;
  } else {
    fail("field 'setting' must be \"quadratic\" or \"general_convex\"");
  }

  scenario.utility.marginal_cost =
      parse_series(require(root, "marginal_cost", "scenario"), scenario.horizon.periods,
                   "marginal_cost");
  if (scenario.utility.marginal_cost.minCoeff() < 0.0) {
    fail("field 'marginal_cost' must be non-negative in every period");
  }

  const json& prosumers = expect_array(require(root, "prosumers", "scenario"), "prosumers");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < prosumers.size(); ++i) {
    Prosumer prosumer = parse_prosumer(prosumers[i], scenario.horizon, scenario.setting,
                                       "prosumers[" + std::to_string(i) + "]");
    if (!seen.insert(prosumer.id).second) fail("duplicate prosumer id '" + prosumer.id + "'");
    scenario.prosumers.push_back(std::move(prosumer));
  }
  return scenario;
}

json scenario_to_json(const Scenario& scenario) {
  json root;
  root["horizon"] = scenario.horizon.periods;
  root["setting"] = scenario.setting == Setting::Quadratic ? "quadratic" : "general_convex";
  root["marginal_cost"] = series_to_json(scenario.utility.marginal_cost);
  root["prosumers"] = json::array();
  for (const auto& prosumer : scenario.prosumers) {
    json p;
    p["id"] = prosumer.id;
    p["behavior"] = behavior_name(prosumer.behavior);
    p["appliances"] = json::array();
    for (const auto& appliance : prosumer.appliances) {
      json a;
      a["id"] = appliance.id;
      a["kind"] = kind_name(appliance.kind);
      a["a_hat"] = series_to_json(appliance.utility.a_hat);
      a["b_hat"] = series_to_json(appliance.utility.b_hat);
      a["c_hat"] = series_to_json(appliance.utility.c_hat);
      a["power_lower"] = bound_series_to_json(appliance.power_lower);
      a["power_upper"] = bound_series_to_json(appliance.power_upper);
      if (!appliance.windows.empty()) {
        a["windows"] = json::array();
        for (const auto& window : appliance.windows) {
          json w;
          w["periods"] = window.periods;
          w["alpha"] = series_to_json(window.alpha);
          w["total_lower"] =
              std::isfinite(window.total_lower) ? json(window.total_lower) : json(nullptr);
          w["total_upper"] =
              std::isfinite(window.total_upper) ? json(window.total_upper) : json(nullptr);
          a["windows"].push_back(std::move(w));
        }
      }
      p["appliances"].push_back(std::move(a));
    }
    if (scenario.setting == Setting::GeneralConvex && prosumer.convex) {
      p["convex"] = {{"mu", prosumer.convex->mu}, {"lipschitz", prosumer.convex->lipschitz}};
    }
    root["prosumers"].push_back(std::move(p));
  }
  return root;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw std::runtime_error("cannot open scenario file '" + path + "'");
  json root;
  try {
    root = json::parse(file);
  } catch (const json::parse_error& error) {
    throw std::invalid_argument("scenario file '" + path + "' is not valid JSON: " +
                                std::string(error.what()));
  }
  return scenario_from_json(root);
}

void save_scenario(const Scenario& scenario, const std::string& path) {
  std::ofstream file(path);
  if (!file) throw std::runtime_error("cannot open '" + path + "' for writing");
  file << scenario_to_json(scenario).dump(2) << '\n';
  if (!file) throw std::runtime_error("failed writing '" + path + "'");
}

json equilibrium_to_json(const Scenario& scenario, const EquilibriumResult& result) {
  json root;
  root["price"] = series_to_json(result.price);
  root["supply"] = series_to_json(result.supply);
  root["welfare"] = result.welfare;
  root["prosumers"] = json::array();
  for (const auto& outcome : result.prosumers) {
    const Prosumer& prosumer = scenario.prosumer(outcome.id);
    json p;
    p["id"] = outcome.id;
    p["net_utility"] = outcome.net_utility;
    p["duals"] = series_to_json(outcome.duals);
    p["appliances"] = json::array();
    for (const auto& appliance : prosumer.appliances) {
      VectorXd quantities(scenario.horizon.periods);
      for (int t = 1; t <= scenario.horizon.periods; ++t) {
        quantities(t - 1) =
            outcome.quantities(outcome.variables.column(outcome.id, appliance.id, t));
      }
      p["appliances"].push_back({{"id", appliance.id}, {"quantities", series_to_json(quantities)}});
    }
    root["prosumers"].push_back(std::move(p));
  }
  return root;
}

EquilibriumResult equilibrium_from_json(const Scenario& scenario, const json& root) {
  expect_object(root, "result");
  reject_unknown(root, "result", {"price", "supply", "welfare", "prosumers"});
  const int h = scenario.horizon.periods;

  EquilibriumResult result;
  result.price = parse_vector(require(root, "price", "result"), h, "price");
  const json& prosumers = expect_array(require(root, "prosumers", "result"), "prosumers");

  std::set<std::string> seen;
  std::vector<const json*> by_position(scenario.prosumers.size(), nullptr);
  for (std::size_t i = 0; i < prosumers.size(); ++i) {
    const std::string where = "prosumers[" + std::to_string(i) + "]";
    expect_object(prosumers[i], where);
    const std::string id = expect_string(require(prosumers[i], "id", where), where + ".id");
    const int position = scenario.prosumer_position(id);
    if (position < 0) fail("result names unknown prosumer '" + id + "'");
    if (!seen.insert(id).second) fail("duplicate prosumer id '" + id + "' in result");
    by_position[static_cast<std::size_t>(position)] = &prosumers[i];
  }
  for (std::size_t i = 0; i < scenario.prosumers.size(); ++i) {
    if (by_position[i] == nullptr) {
      fail("result is missing prosumer '" + scenario.prosumers[i].id + "'");
    }
  }

  result.supply = VectorXd::Zero(h);
  for (std::size_t i = 0; i < scenario.prosumers.size(); ++i) {
    const Prosumer& prosumer = scenario.prosumers[i];
    const json& value = *by_position[i];
    const std::string where = "prosumers['" + prosumer.id + "']";
    reject_unknown(value, where, {"id", "net_utility", "duals", "appliances"});

    ProsumerOutcome outcome;
    outcome.id = prosumer.id;
    outcome.variables = VariableMap::for_prosumer(prosumer, scenario.horizon);
    outcome.quantities = VectorXd::Zero(outcome.variables.size());

    const json& appliances = expect_array(require(value, "appliances", where), where + ".appliances");
    std::set<std::string> filled;
    for (std::size_t k = 0; k < appliances.size(); ++k) {
      const std::string awhere = where + ".appliances[" + std::to_string(k) + "]";
      expect_object(appliances[k], awhere);
      reject_unknown(appliances[k], awhere, {"id", "quantities"});
      const std::string aid = expect_string(require(appliances[k], "id", awhere), awhere + ".id");
      if (!filled.insert(aid).second) fail("duplicate appliance id '" + aid + "' in " + where);
      const VectorXd quantities =
          parse_vector(require(appliances[k], "quantities", awhere), h, awhere + ".quantities");
      for (int t = 1; t <= h; ++t) {
        const int column = outcome.variables.column(prosumer.id, aid, t);
        if (column < 0) {
          fail("result names unknown appliance '" + aid + "' for prosumer '" + prosumer.id + "'");
        }
        outcome.quantities(column) = quantities(t - 1);
      }
    }
    for (const auto& appliance : prosumer.appliances) {
      if (filled.find(appliance.id) == filled.end()) {
        fail("result is missing appliance '" + appliance.id + "' for prosumer '" + prosumer.id +
             "'");
      }
    }

    if (value.contains("duals")) {
      outcome.duals = parse_vector(value["duals"], static_cast<int>(prosumer.constraints.size()),
                                   where + ".duals");
    }
    for (int c = 0; c < outcome.variables.size(); ++c) {
      result.supply(outcome.variables.key(c).period - 1) += outcome.quantities(c);
    }
    result.prosumers.push_back(std::move(outcome));
  }

  if (root.contains("supply")) {
    result.supply = parse_vector(root["supply"], h, "supply");
  }

  for (auto& outcome : result.prosumers) {
    const Prosumer& prosumer = scenario.prosumer(outcome.id);
    if (scenario.setting == Setting::Quadratic) {
      double total = 0.0;
      for (int c = 0; c < outcome.variables.size(); ++c) {
        const VarKey& key = outcome.variables.key(c);
        for (const auto& appliance : prosumer.appliances) {
          if (appliance.id == key.appliance) {
            total += appliance.utility.value(key.period, outcome.quantities(c));
          }
        }
      }
      outcome.net_utility = total;
    } else {
      outcome.net_utility = -prosumer.convex->value(outcome.quantities);
    }
  }

  result.welfare = root.contains("welfare")
                       ? expect_number(root["welfare"], "welfare")
                       : social_welfare(scenario, result.prosumers);
  return result;
}

std::string row_label(const GeneralLinearConstraint& row) {
  switch (row.origin) {
    case RowOrigin::PowerUpper:
      return "power-upper " + row.origin_appliance + " t=" + std::to_string(row.origin_period);
    case RowOrigin::PowerLower:
      return "power-lower " + row.origin_appliance + " t=" + std::to_string(row.origin_period);
    case RowOrigin::WindowUpper:
      return "window-upper " + row.origin_appliance + " w=" + std::to_string(row.origin_period);
    case RowOrigin::WindowLower:
      return "window-lower " + row.origin_appliance + " w=" + std::to_string(row.origin_period);
    case RowOrigin::NetBuyer:
      return "net-sell t=" + std::to_string(row.origin_period);
  }
  return "?";
}

std::string allocation_csv(const Scenario& scenario, const EquilibriumResult& result) {
  std::string out = "prosumer,appliance,period,quantity,price\n";
  for (const auto& outcome : result.prosumers) {
    const Prosumer& prosumer = scenario.prosumer(outcome.id);
    for (const auto& appliance : prosumer.appliances) {
      for (int t = 1; t <= scenario.horizon.periods; ++t) {
        const int column = outcome.variables.column(outcome.id, appliance.id, t);
        out += outcome.id + "," + appliance.id + "," + std::to_string(t) + "," +
               fmt(outcome.quantities(column)) + "," + fmt(result.price(t - 1)) + "\n";
      }
    }
  }
  return out;
}

namespace {

const GeneralLinearConstraint& row_of(const Scenario& scenario, const ConstraintRef& ref) {
  const Prosumer& prosumer = scenario.prosumer(ref.prosumer);
  if (ref.index < 0 || ref.index >= static_cast<int>(prosumer.constraints.size())) {
    fail("constraint index " + std::to_string(ref.index) + " out of range for prosumer '" +
         ref.prosumer + "'");
  }
  return prosumer.constraints[static_cast<std::size_t>(ref.index)];
}

}  // namespace

std::string estimate_csv(const Scenario& scenario,
                         const std::vector<ShadowPriceEstimate>& estimates) {
  std::string out =
      "rank,prosumer,constraint,label,estimate,unclamped,numeric_dual,k_units,"
      "welfare_projection,tight\n";
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const ShadowPriceEstimate& e = estimates[i];
    out += std::to_string(i + 1) + "," + e.constraint.prosumer + "," +
           std::to_string(e.constraint.index) + "," + row_label(row_of(scenario, e.constraint)) +
           "," + fmt(e.value) + "," + fmt(e.unclamped_value) + "," + fmt(e.numeric_dual) + "," +
           fmt(e.k_units) + "," + fmt(e.welfare_projection) + "," +
           (e.tightness_assumption_held ? "1" : "0") + "\n";
  }
  return out;
}

std::string bounds_csv(const Scenario& scenario, const std::vector<DualBounds>& bounds) {
  std::string out =
      "rank,prosumer,constraint,label,lower,upper,lambda_mu,halfwidth_mu,lambda_lip,"
      "halfwidth_lip,numeric_dual,eta,anchored,tight\n";
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    const DualBounds& b = bounds[i];
    out += std::to_string(i + 1) + "," + b.constraint.prosumer + "," +
           std::to_string(b.constraint.index) + "," + row_label(row_of(scenario, b.constraint)) +
           "," + fmt(b.lower) + "," + fmt(b.upper) + "," + fmt(b.lambda_mu) + "," +
           fmt(b.halfwidth_mu) + "," + fmt(b.lambda_lip) + "," + fmt(b.halfwidth_lip) + "," +
           fmt(b.numeric_dual) + "," + fmt(b.eta) + "," + (b.anchored_at_optimum ? "1" : "0") +
           "," + (b.tightness_held ? "1" : "0") + "\n";
  }
  return out;
}

std::string sweep_csv(const Scenario& scenario, const std::vector<SweepResult>& sweeps) {
  std::string out =
      "prosumer,constraint,label,step,rhs,estimate,projected_delta,realized_delta,"
      "projected_cumulative,realized_cumulative,tight\n";
  for (const auto& sweep : sweeps) {
    const std::string label = row_label(row_of(scenario, sweep.constraint));
    for (const auto& step : sweep.steps) {
      out += sweep.constraint.prosumer + "," + std::to_string(sweep.constraint.index) + "," +
             label + "," + std::to_string(step.step) + "," + fmt(step.rhs) + "," +
             fmt(step.estimate) + "," + fmt(step.projected_delta) + "," +
             fmt(step.realized_delta) + "," + fmt(step.projected_cumulative) + "," +
             fmt(step.realized_cumulative) + "," + (step.tight ? "1" : "0") + "\n";
    }
  }
  return out;
}

std::string region_csv(const std::vector<BetaComparison>& cells) {
  std::string out = "x,beta,region,f0,f1,f2,lambda_k,lambda_l,norm_k,norm_l,ordering_verified\n";
  for (const auto& cell : cells) {
    out += fmt(cell.x) + "," + fmt(cell.beta) + "," + region_name(cell.region) + "," +
           fmt(cell.f0) + "," + fmt(cell.f1) + "," + fmt(cell.f2) + "," + fmt(cell.lambda_k) +
           "," + fmt(cell.lambda_l) + "," + fmt(cell.norm_k) + "," + fmt(cell.norm_l) + "," +
           (cell.ordering_verified ? "1" : "0") + "\n";
  }
  return out;
}

std::string capacity_bounds_csv(const std::vector<std::pair<double, DualBounds>>& rows) {
  std::string out = "capacity,prosumer,lower,upper,lambda_mu,lambda_lip,numeric_dual,tight\n";
  for (const auto& [capacity, bounds] : rows) {
    out += fmt(capacity) + "," + bounds.constraint.prosumer + "," + fmt(bounds.lower) + "," +
           fmt(bounds.upper) + "," + fmt(bounds.lambda_mu) + "," + fmt(bounds.lambda_lip) + "," +
           fmt(bounds.numeric_dual) + "," + (bounds.tightness_held ? "1" : "0") + "\n";
  }
  return out;
}

std::vector<std::string> preset_names() { return {"ev-pair", "net-sell-pair", "convex-pair"}; }

Scenario preset_scenario(const std::string& name) {
  if (name == "ev-pair") return pair_scenario(Behavior::NetSeller);
  if (name == "net-sell-pair") return pair_scenario(Behavior::NetBuyer);
  if (name == "convex-pair") {
    Scenario scenario;
    scenario.horizon.periods = 1;
    scenario.setting = Setting::GeneralConvex;
    scenario.utility.marginal_cost = VectorXd::Constant(1, 0.4);

    Prosumer one;
    one.id = "one";
    one.behavior = Behavior::NetSeller;
    one.appliances.push_back(ev_unit("ev", 1, -0.01, 0.1));
    one.constraints = compile_constraints(one, scenario.horizon);
    one.convex = quadratic_oracle(one, scenario.horizon, 0.018, 0.022);

    Prosumer two;
    two.id = "two";
    two.behavior = Behavior::NetSeller;
    two.appliances.push_back(ev_unit("ev", 1, -0.02, 0.2));
    two.constraints = compile_constraints(two, scenario.horizon);
    two.convex = quadratic_oracle(two, scenario.horizon, 0.036, 0.044);

    scenario.prosumers.push_back(std::move(one));
    scenario.prosumers.push_back(std::move(two));
    return scenario;
  }
  std::string known;
  for (const auto& preset : preset_names()) known += (known.empty() ? "" : ", ") + preset;
  fail("unknown preset '" + name + "' (available: " + known + ")");
}

Scenario random_scenario(std::uint64_t seed) {
  DeterministicRng rng(seed);
  Scenario scenario;
  scenario.horizon.periods = 24;
  scenario.setting = Setting::Quadratic;
  scenario.utility.marginal_cost = VectorXd::Constant(24, rng.uniform(0.2, 0.6));
  for (const char* id : {"one", "two"}) {
    Prosumer prosumer;
    prosumer.id = id;
    prosumer.behavior = Behavior::NetBuyer;
    prosumer.appliances.push_back(storage_unit("storage", 24, rng.uniform(-0.05, -0.02)));
    prosumer.appliances.push_back(
        ev_unit("ev", 24, rng.uniform(-0.04, -0.01), rng.uniform(0.1, 0.5)));
    prosumer.constraints = compile_constraints(prosumer, scenario.horizon);
    scenario.prosumers.push_back(std::move(prosumer));
  }
  return scenario;
}

}  // namespace drm
