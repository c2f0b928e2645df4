#pragma once

#include <json.hpp>

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "drm/equilibrium.hpp"
#include "drm/gsaa_convex.hpp"
#include "drm/gsaa_quad.hpp"
#include "drm/model.hpp"

// Scenario files are JSON:
//   {
//     "horizon": 24,
//     "setting": "quadratic" | "general_convex",
//     "marginal_cost": <series>,
//     "prosumers": [
//       { "id": "...", "behavior": "simple_buyer"|"net_buyer"|"net_seller",
//         "appliances": [
//           { "id": "...", "kind": "inflexible"|"thermostat_like"|"ev"|"storage",
//             "a_hat": <series>, "b_hat": <series>, "c_hat": <series>?,
//             "power_lower": <bound series>?, "power_upper": <bound series>?,
//             "windows": [ { "periods": [1,2], "alpha": [..]?,
//                            "total_lower": number|null?, "total_upper": number|null? } ]? }
//         ],
//         "convex": { "mu": number?, "lipschitz": number? }? }
//     ]
//   }
// A <series> is a number (constant over the horizon) or an array with one
// entry per period; bound series additionally accept null entries (or null
// for the whole field) meaning that side is unbounded. Parsing is strict:
// unknown fields, wrong lengths, and sign-rule violations are rejected with
// the offending field named. Loading compiles every prosumer's rows; in the
// general convex setting each prosumer gets the oracle of its quadratic
// coefficients with the declared (mu, lipschitz), defaulted to the tightest
// valid constants when omitted.

namespace drm {

Scenario scenario_from_json(const nlohmann::json& root);
nlohmann::json scenario_to_json(const Scenario& scenario);

// File variants; IO failures raise std::runtime_error, schema violations
// std::invalid_argument.
Scenario load_scenario(const std::string& path);
void save_scenario(const Scenario& scenario, const std::string& path);

// Market result as JSON: price, supply, welfare, per-prosumer allocations
// grouped by appliance, per-row duals.
nlohmann::json equilibrium_to_json(const Scenario& scenario, const EquilibriumResult& result);

// Inverse of the above for externally supplied candidates. duals, supply,
// welfare and net utilities are optional (re-derived when absent).
EquilibriumResult equilibrium_from_json(const Scenario& scenario, const nlohmann::json& root);

// Short human label for a compiled row, e.g. "power-lower ev t=1".
std::string row_label(const GeneralLinearConstraint& row);

// CSV exports. Numbers are printed with %.12g; rows end with '\n'; the first
// line is the header. Vectors are written in the order given (rank columns
// number from 1).
std::string allocation_csv(const Scenario& scenario, const EquilibriumResult& result);
std::string estimate_csv(const Scenario& scenario,
                         const std::vector<ShadowPriceEstimate>& estimates);
std::string bounds_csv(const Scenario& scenario, const std::vector<DualBounds>& bounds);
std::string sweep_csv(const Scenario& scenario, const std::vector<SweepResult>& sweeps);
std::string region_csv(const std::vector<BetaComparison>& cells);
std::string capacity_bounds_csv(const std::vector<std::pair<double, DualBounds>>& rows);

// Built-in scenarios. "ev-pair" and "net-sell-pair" are the 24-period
// two-prosumer quadratic markets (storage plus EV each) behind the discharge
// and net-selling studies; "convex-pair" is the one-period declared-constant
// pair whose second prosumer doubles the first.
std::vector<std::string> preset_names();
Scenario preset_scenario(const std::string& name);

// Seeded 24-period two-prosumer market with coefficients drawn from the
// documented uniform ranges. Identical seeds give identical scenarios on
// every platform.
Scenario random_scenario(std::uint64_t seed);

// Uniform sampler with a fixed bit-to-double mapping so artifacts are
// reproducible across standard libraries.
struct DeterministicRng {
  std::mt19937_64 engine;

  explicit DeterministicRng(std::uint64_t seed) : engine(seed) {}

  double uniform() { return (engine() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
};

}  // namespace drm
