#include "drm/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "drm/equilibrium.hpp"
#include "drm/scenario_io.hpp"
#include "drm/solver.hpp"

namespace drm {

namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

const char* region_word(BetaRegion region) {
  switch (region) {
    case BetaRegion::KDominates: return "k_dominates";
    case BetaRegion::LDominates: return "l_dominates";
    case BetaRegion::Indecisive: return "indecisive";
  }
  return "?";
}

// Scenario input: exactly one of a file path or a preset name.
Scenario load_input(const std::string& path, const std::string& preset) {
  if (path.empty() == preset.empty()) {
    throw std::invalid_argument("pass exactly one of --scenario or --preset");
  }
  if (!preset.empty()) return preset_scenario(preset);
  try {
    return load_scenario(path);
  } catch (const std::runtime_error& error) {
    // Unreadable files are an input mistake, not an operational failure.
    throw std::invalid_argument(error.what());
  }
}

void write_file(const std::string& dir, const std::string& name, const std::string& content,
                std::ostream& out) {
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/" + name;
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open '" + path + "' for writing");
  file << content;
  if (!file) throw std::runtime_error("failed writing '" + path + "'");
  out << "wrote " << path << "\n";
}

// Row selection shared by the analysis subcommands. Specialized selectors
// pick one row per prosumer; --prosumer/--row address a single row directly.
struct Selection {
  bool ev = false;
  bool net_sell = false;
  bool ac = false;
  int t = 1;
  double q_bar = 0.0;
  bool q_bar_set = false;
  std::string prosumer;
  int row = -1;
};

void add_selection(CLI::App* cmd, Selection& selection, bool with_q_bar) {
  auto* ev = cmd->add_flag("--ev", selection.ev, "target the EV discharge row (default)");
  auto* ns = cmd->add_flag("--net-sell", selection.net_sell, "target the net-selling row");
  auto* ac = cmd->add_flag("--ac", selection.ac, "target the comfort power-upper row");
  ev->excludes(ns);
  ev->excludes(ac);
  ns->excludes(ac);
  cmd->add_option("-t,--t", selection.t, "period, 1-based")->capture_default_str();
  if (with_q_bar) {
    cmd->add_option("--q-bar", selection.q_bar, "comfort bound for --ac (default: compiled rhs)")
        ->each([&selection](const std::string&) { selection.q_bar_set = true; });
  }
  cmd->add_option("--prosumer", selection.prosumer, "address one prosumer by id (with --row)");
  cmd->add_option("--row", selection.row, "address one compiled row by index (with --prosumer)");
}

ConstraintRef locate_selected(const Scenario& scenario, const std::string& prosumer,
                              const Selection& selection) {
  if (selection.net_sell) return locate_net_sell_row(scenario, prosumer, selection.t);
  if (selection.ac) return locate_ac_row(scenario, prosumer, selection.t);
  return locate_ev_row(scenario, prosumer, selection.t);
}

// Per-prosumer references for the selection; prosumers without a matching
// row are skipped with a note.
std::vector<ConstraintRef> resolve_rows(const Scenario& scenario, const Selection& selection,
                                        std::vector<std::string>& notes) {
  std::vector<ConstraintRef> refs;
  if (selection.row >= 0 || !selection.prosumer.empty()) {
    if (selection.row < 0 || selection.prosumer.empty()) {
      throw std::invalid_argument("--prosumer and --row must be passed together");
    }
    const Prosumer& prosumer = scenario.prosumer(selection.prosumer);
    if (selection.row >= static_cast<int>(prosumer.constraints.size())) {
      throw std::invalid_argument("prosumer '" + selection.prosumer + "' has no row " +
                                  std::to_string(selection.row));
    }
    refs.push_back({selection.prosumer, selection.row});
    return refs;
  }
  for (const auto& prosumer : scenario.prosumers) {
    try {
      refs.push_back(locate_selected(scenario, prosumer.id, selection));
    } catch (const std::invalid_argument& error) {
      notes.push_back("note: skipping prosumer '" + prosumer.id + "': " + error.what());
    }
  }
  if (refs.empty()) throw std::runtime_error("no prosumer has a row matching the selection");
  return refs;
}

std::string flags_or_ok(std::vector<std::string> flags) {
  if (flags.empty()) return "ok";
  std::string joined;
  for (const auto& flag : flags) joined += (joined.empty() ? "" : "+") + flag;
  return joined;
}

void print_estimate_table(const Scenario& scenario,
                          const std::vector<ShadowPriceEstimate>& ranked, std::ostream& out) {
  std::size_t pw = 8, lw = 10;
  for (const auto& e : ranked) {
    pw = std::max(pw, e.constraint.prosumer.size());
    const Prosumer& p = scenario.prosumer(e.constraint.prosumer);
    lw = std::max(lw, row_label(p.constraints[static_cast<std::size_t>(e.constraint.index)]).size());
  }
  out << std::left << std::setw(4) << "rank" << "  " << std::setw(static_cast<int>(pw))
      << "prosumer" << "  " << std::setw(static_cast<int>(lw)) << "constraint" << "  "
      << std::setw(12) << "estimate" << "  " << std::setw(8) << "k" << "  " << std::setw(12)
      << "projection" << "  " << "flags\n";
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const ShadowPriceEstimate& e = ranked[i];
    const Prosumer& p = scenario.prosumer(e.constraint.prosumer);
    std::vector<std::string> flags;
    if (!e.tightness_assumption_held) flags.push_back("tightness");
    out << std::left << std::setw(4) << (i + 1) << "  " << std::setw(static_cast<int>(pw))
        << e.constraint.prosumer << "  " << std::setw(static_cast<int>(lw))
        << row_label(p.constraints[static_cast<std::size_t>(e.constraint.index)]) << "  "
        << std::setw(12) << fmt(e.value) << "  " << std::setw(8) << fmt(e.k_units) << "  "
        << std::setw(12) << fmt(e.welfare_projection) << "  " << flags_or_ok(flags) << "\n";
  }
}

void print_bounds_table(const Scenario& scenario, const std::vector<DualBounds>& ranked,
                        std::ostream& out) {
  std::size_t pw = 8, lw = 10;
  for (const auto& b : ranked) {
    pw = std::max(pw, b.constraint.prosumer.size());
    const Prosumer& p = scenario.prosumer(b.constraint.prosumer);
    lw = std::max(lw, row_label(p.constraints[static_cast<std::size_t>(b.constraint.index)]).size());
  }
  out << std::left << std::setw(4) << "rank" << "  " << std::setw(static_cast<int>(pw))
      << "prosumer" << "  " << std::setw(static_cast<int>(lw)) << "constraint" << "  "
      << std::setw(22) << "interval" << "  " << std::setw(12) << "center-mu" << "  "
      << std::setw(12) << "center-lip" << "  " << "flags\n";
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const DualBounds& b = ranked[i];
    const Prosumer& p = scenario.prosumer(b.constraint.prosumer);
    std::vector<std::string> flags;
    // Adjacent ranked intervals that overlap cannot be ordered: flag both.
    if (i + 1 < ranked.size() && ranked[i + 1].upper >= b.lower) flags.push_back("indecisive");
    if (i > 0 && b.upper >= ranked[i - 1].lower) flags.push_back("indecisive");
    if (!b.tightness_held) flags.push_back("tightness");
    if (b.anchored_at_optimum) flags.push_back("anchored");
    out << std::left << std::setw(4) << (i + 1) << "  " << std::setw(static_cast<int>(pw))
        << b.constraint.prosumer << "  " << std::setw(static_cast<int>(lw))
        << row_label(p.constraints[static_cast<std::size_t>(b.constraint.index)]) << "  "
        << std::setw(22) << ("[" + fmt(b.lower) + ", " + fmt(b.upper) + "]") << "  "
        << std::setw(12) << fmt(b.lambda_mu) << "  " << std::setw(12) << fmt(b.lambda_lip)
        << "  " << flags_or_ok(flags) << "\n";
  }
}

int do_solve(const Scenario& scenario, double tol, const std::string& out_dir,
             std::ostream& out) {
  SolverOptions options;
  options.tol = tol;
  const EquilibriumResult market = solve_dso(scenario, options);
  out << "setting: " << (scenario.setting == Setting::Quadratic ? "quadratic" : "general_convex")
      << ", periods: " << scenario.horizon.periods << ", prosumers: " << scenario.prosumers.size()
      << "\n";
  out << "welfare: " << fmt(market.welfare) << "\n";
  out << "price range: [" << fmt(market.price.minCoeff()) << ", " << fmt(market.price.maxCoeff())
      << "]\n";
  for (const auto& outcome : market.prosumers) {
    out << "prosumer " << outcome.id << ": net utility " << fmt(outcome.net_utility) << "\n";
  }
  out << "kkt residual: " << fmt(market.kkt.max_residual()) << "\n";
  if (!out_dir.empty()) {
    write_file(out_dir, "equilibrium.json", equilibrium_to_json(scenario, market).dump(2) + "\n",
               out);
    write_file(out_dir, "allocation.csv", allocation_csv(scenario, market), out);
  }
  return 0;
}

int do_verify(const Scenario& scenario, const std::string& result_path, double tol,
              std::ostream& out) {
  std::ifstream file(result_path);
  if (!file) throw std::invalid_argument("cannot open result file '" + result_path + "'");
  json root;
  try {
    root = json::parse(file);
  } catch (const json::parse_error& error) {
    throw std::invalid_argument("result file '" + result_path + "' is not valid JSON: " +
                                std::string(error.what()));
  }
  const EquilibriumResult candidate = equilibrium_from_json(scenario, root);
  const EquilibriumVerdict verdict = verify_equilibrium(scenario, candidate, tol);
  out << "clearing residual: " << fmt(verdict.clearing_residual) << "\n";
  out << "price residual: " << fmt(verdict.utility_company_residual) << "\n";
  for (const auto& agent : verdict.agents) {
    out << "prosumer " << agent.id << " kkt residual: " << fmt(agent.kkt.max_residual()) << "\n";
  }
  out << "verdict: " << (verdict.equilibrium ? "equilibrium" : "not an equilibrium") << " (tol "
      << fmt(verdict.tol) << ")\n";
  return verdict.equilibrium ? 0 : 2;
}

int do_gsaa_quad(const Scenario& scenario, const Selection& selection, double k_units, double tol,
                 const std::string& out_dir, std::ostream& out) {
  if (scenario.setting != Setting::Quadratic) {
    throw std::invalid_argument("gsaa-quad needs a quadratic-setting scenario");
  }
  SolverOptions options;
  options.tol = tol;
  std::vector<std::string> notes;
  const std::vector<ConstraintRef> refs = resolve_rows(scenario, selection, notes);
  const EquilibriumResult market = solve_dso(scenario, options);

  std::vector<ShadowPriceEstimate> estimates;
  for (const auto& ref : refs) {
    if (selection.ac && selection.q_bar_set) {
      estimates.push_back(
          shadow_price_ac(scenario, ref.prosumer, selection.t, selection.q_bar, k_units, options));
    } else {
      estimates.push_back(shadow_price_closed_form(scenario, market, ref, k_units));
    }
  }
  const auto ranked = rank_estimates(std::move(estimates));
  print_estimate_table(scenario, ranked, out);
  for (const auto& note : notes) out << note << "\n";
  if (!out_dir.empty()) write_file(out_dir, "ranking.csv", estimate_csv(scenario, ranked), out);
  return 0;
}

int do_gsaa_bounds(const Scenario& scenario, const Selection& selection, double tol,
                   const std::string& out_dir, std::ostream& out) {
  if (scenario.setting != Setting::GeneralConvex) {
    throw std::invalid_argument("gsaa-bounds needs a general-convex scenario");
  }
  SolverOptions options;
  options.tol = tol;
  std::vector<std::string> notes;
  const std::vector<ConstraintRef> refs = resolve_rows(scenario, selection, notes);

  std::vector<DualBounds> bounds;
  for (const auto& ref : refs) {
    bounds.push_back(dual_bounds_zero_anchor(scenario, ref.prosumer, ref.index, options));
  }
  const auto ranked = rank_bounds(std::move(bounds));
  print_bounds_table(scenario, ranked, out);
  for (const auto& note : notes) out << note << "\n";
  if (!out_dir.empty()) write_file(out_dir, "bounds.csv", bounds_csv(scenario, ranked), out);
  return 0;
}

int do_sweep(const Scenario& scenario, const Selection& selection, double delta, int steps,
             double tol, const std::string& out_dir, std::ostream& out) {
  SolverOptions options;
  options.tol = tol;
  std::vector<std::string> notes;
  const std::vector<ConstraintRef> refs = resolve_rows(scenario, selection, notes);

  std::vector<SweepResult> sweeps;
  for (const auto& ref : refs) {
    sweeps.push_back(incremental_gsaa_sweep(scenario, ref, delta, steps, options));
  }
  for (const auto& sweep : sweeps) {
    const Prosumer& p = scenario.prosumer(sweep.constraint.prosumer);
    const auto& label =
        row_label(p.constraints[static_cast<std::size_t>(sweep.constraint.index)]);
    if (sweep.steps.empty()) {
      out << sweep.constraint.prosumer << " " << label << ": no steps\n";
      continue;
    }
    const SweepStep& last = sweep.steps.back();
    out << sweep.constraint.prosumer << " " << label << ": projected "
        << fmt(last.projected_cumulative) << ", realized " << fmt(last.realized_cumulative)
        << ", gap " << fmt(last.projected_cumulative - last.realized_cumulative) << " over "
        << sweep.steps.size() << " steps" << (sweep.stopped ? " (stopped early)" : "") << "\n";
  }
  for (const auto& note : notes) out << note << "\n";
  if (!out_dir.empty()) write_file(out_dir, "sweep.csv", sweep_csv(scenario, sweeps), out);
  return 0;
}

// Shifts the base oracle's linear part so marginal utility at zero becomes
// `x`; curvature and the declared constants are untouched.
ConvexNetUtility with_rate(const ConvexNetUtility& base, double x) {
  ConvexNetUtility out = base;
  const double shift = -base.grad_at_zero(0) - x;
  out.value = [value = base.value, shift](const Eigen::VectorXd& q) {
    return value(q) + shift * q(0);
  };
  out.gradient = [gradient = base.gradient, shift](const Eigen::VectorXd& q) {
    Eigen::VectorXd g = gradient(q);
    g(0) += shift;
    return g;
  };
  out.grad_at_zero = Eigen::VectorXd::Constant(1, -x);
  return out;
}

int do_case_study(const Scenario& scenario, double beta, double cap, int grid, double tol,
                  const std::string& out_dir, std::ostream& out) {
  if (scenario.setting != Setting::GeneralConvex) {
    throw std::invalid_argument("case-study needs a general-convex scenario");
  }
  if (scenario.prosumers.empty() || !scenario.prosumers.front().convex ||
      scenario.prosumers.front().convex->grad_at_zero.size() != 1) {
    throw std::invalid_argument(
        "case-study needs a one-period, single-appliance first prosumer as the base");
  }
  SolverOptions options;
  options.tol = tol;
  const ConvexNetUtility& base = *scenario.prosumers.front().convex;
  const double b0 = scenario.utility.marginal_cost(0);

  const BetaComparison headline = beta_case_study(base, beta, b0, cap, options);
  out << "base rate x: " << fmt(headline.x) << ", beta: " << fmt(beta)
      << ", allowed discharge: " << fmt(cap) << "\n";
  out << "region: " << region_word(headline.region) << " (f0 " << fmt(headline.f0) << ", f1 "
      << fmt(headline.f1) << ", f2 " << fmt(headline.f2) << ")\n";
  out << "multipliers: k " << fmt(headline.lambda_k) << ", l " << fmt(headline.lambda_l)
      << (headline.ordering_verified ? " (ordering verified)" : "")
      << (headline.note.empty() ? "" : " [" + headline.note + "]") << "\n";

  // Classification grid over (x, beta) at this allowed discharge.
  std::vector<BetaComparison> cells;
  const int beta_points = (3 * grid) / 2;
  for (int i = 1; i <= grid; ++i) {
    const double x = 2.0 * b0 * i / grid;
    const ConvexNetUtility rated = with_rate(base, x);
    for (int j = 1; j <= beta_points; ++j) {
      cells.push_back(beta_case_study(rated, 3.0 * j / beta_points, b0, cap, options));
    }
  }

  // Interval table over allowed-discharge caps, one row per prosumer, using
  // each prosumer's own first-period discharge row.
  std::vector<std::pair<std::string, int>> discharge_rows;
  for (const auto& prosumer : scenario.prosumers) {
    for (const auto& row : prosumer.constraints) {
      if (row.origin == RowOrigin::PowerLower && row.origin_period == 1) {
        discharge_rows.emplace_back(prosumer.id, row.index);
        break;
      }
    }
  }
  if (discharge_rows.empty()) {
    throw std::invalid_argument("case-study scenario has no first-period discharge rows");
  }
  std::vector<std::pair<double, DualBounds>> table;
  std::vector<DualBounds> at_cap;
  for (int m = 0; m <= 20; ++m) {
    const double capacity = 0.1 * m;
    Scenario relaxed = scenario;
    for (const auto& [id, index] : discharge_rows) {
      const int position = relaxed.prosumer_position(id);
      relaxed.prosumers[static_cast<std::size_t>(position)]
          .constraints[static_cast<std::size_t>(index)]
          .rhs = capacity;
    }
    for (const auto& [id, index] : discharge_rows) {
      table.emplace_back(capacity, dual_bounds_zero_anchor(relaxed, id, index, options));
    }
  }
  {
    Scenario relaxed = scenario;
    for (const auto& [id, index] : discharge_rows) {
      const int position = relaxed.prosumer_position(id);
      relaxed.prosumers[static_cast<std::size_t>(position)]
          .constraints[static_cast<std::size_t>(index)]
          .rhs = cap;
    }
    for (const auto& [id, index] : discharge_rows) {
      at_cap.push_back(dual_bounds_zero_anchor(relaxed, id, index, options));
    }
  }
  out << "at allowed discharge " << fmt(cap) << ":";
  for (const auto& bounds : at_cap) {
    out << " " << bounds.constraint.prosumer << " [" << fmt(bounds.lower) << ", "
        << fmt(bounds.upper) << "]";
  }
  out << "\n";

  if (!out_dir.empty()) {
    write_file(out_dir, "region.csv", region_csv(cells), out);
    write_file(out_dir, "bounds_by_capacity.csv", capacity_bounds_csv(table), out);
  }
  return 0;
}

int do_gen(std::uint64_t seed, std::string path, std::ostream& out) {
  if (path.empty()) path = "scenario-" + std::to_string(seed) + ".json";
  const Scenario scenario = random_scenario(seed);
  save_scenario(scenario, path);
  out << "wrote " << path << "\n";
  return 0;
}

}  // namespace

std::vector<ShadowPriceEstimate> rank_estimates(std::vector<ShadowPriceEstimate> estimates) {
  std::sort(estimates.begin(), estimates.end(),
            [](const ShadowPriceEstimate& a, const ShadowPriceEstimate& b) {
              if (a.value != b.value) return a.value > b.value;
              if (a.constraint.prosumer != b.constraint.prosumer) {
                return a.constraint.prosumer < b.constraint.prosumer;
              }
              return a.constraint.index < b.constraint.index;
            });
  return estimates;
}

std::vector<DualBounds> rank_bounds(std::vector<DualBounds> bounds) {
  std::sort(bounds.begin(), bounds.end(), [](const DualBounds& a, const DualBounds& b) {
    if (a.lower != b.lower) return a.lower > b.lower;
    if (a.upper != b.upper) return a.upper > b.upper;
    if (a.constraint.prosumer != b.constraint.prosumer) {
      return a.constraint.prosumer < b.constraint.prosumer;
    }
    return a.constraint.index < b.constraint.index;
  });
  return bounds;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"demand-response market tools: competitive equilibria and constraint pricing"};
  app.name("drmarket");
  app.require_subcommand(1);

  std::string preset_help = "built-in scenario (";
  {
    bool first = true;
    for (const auto& name : preset_names()) {
      preset_help += (first ? "" : ", ") + name;
      first = false;
    }
    preset_help += ")";
  }

  struct Common {
    std::string scenario;
    std::string preset;
    std::string out_dir;
    double tol = 1e-8;
  };

  auto add_common = [&preset_help](CLI::App* cmd, Common& common) {
    cmd->add_option("--scenario", common.scenario, "scenario JSON file");
    cmd->add_option("--preset", common.preset, preset_help);
    cmd->add_option("--out", common.out_dir, "directory for artifacts");
    cmd->add_option("--tol", common.tol, "solver tolerance")->capture_default_str();
  };

  Common solve_common;
  CLI::App* solve_cmd = app.add_subcommand("solve", "compute the competitive equilibrium");
  add_common(solve_cmd, solve_common);

  Common verify_common;
  verify_common.tol = 1e-6;
  std::string verify_result;
  CLI::App* verify_cmd =
      app.add_subcommand("verify", "check a stored allocation/price against the scenario");
  add_common(verify_cmd, verify_common);
  verify_cmd->add_option("--result", verify_result, "equilibrium JSON to check")->required();

  Common quad_common;
  Selection quad_selection;
  double quad_k = 1.0;
  CLI::App* quad_cmd =
      app.add_subcommand("gsaa-quad", "closed-form shadow prices and prosumer ranking");
  add_common(quad_cmd, quad_common);
  add_selection(quad_cmd, quad_selection, true);
  quad_cmd->add_option("--k", quad_k, "relaxation units for the welfare projection")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  Common bounds_common;
  Selection bounds_selection;
  CLI::App* bounds_cmd =
      app.add_subcommand("gsaa-bounds", "certified dual intervals and prosumer ranking");
  add_common(bounds_cmd, bounds_common);
  add_selection(bounds_cmd, bounds_selection, false);

  Common sweep_common;
  Selection sweep_selection;
  double sweep_delta = 0.0;
  int sweep_steps = 1;
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "repeated rhs relaxation: projected vs realized welfare");
  add_common(sweep_cmd, sweep_common);
  add_selection(sweep_cmd, sweep_selection, false);
  sweep_cmd->add_option("--delta", sweep_delta, "rhs increase per step")
      ->required()
      ->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--steps", sweep_steps, "number of relaxations")
      ->required()
      ->check(CLI::Range(1, 1000000));

  Common case_common;
  double case_beta = 1.0;
  double case_cap = 1.0;
  int case_grid = 40;
  CLI::App* case_cmd = app.add_subcommand(
      "case-study", "scaled-pair comparison: dominance regions and capacity table");
  add_common(case_cmd, case_common);
  case_cmd->add_option("--beta", case_beta, "scale factor for the second prosumer")
      ->required()
      ->check(CLI::PositiveNumber);
  case_cmd->add_option("--cap", case_cap, "allowed discharge for the classification")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  case_cmd->add_option("--grid", case_grid, "rate-axis resolution of the region grid")
      ->check(CLI::Range(2, 400))
      ->capture_default_str();

  std::uint64_t gen_seed = 0;
  std::string gen_out;
  CLI::App* gen_cmd = app.add_subcommand("gen", "write a seeded random scenario");
  gen_cmd->add_option("--seed", gen_seed, "random seed")->required();
  gen_cmd->add_option("--out", gen_out, "output file (default scenario-<seed>.json)");

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("drmarket");
  for (const auto& arg : args) argv.push_back(arg.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (solve_cmd->parsed()) {
      return do_solve(load_input(solve_common.scenario, solve_common.preset), solve_common.tol,
                      solve_common.out_dir, out);
    }
    if (verify_cmd->parsed()) {
      return do_verify(load_input(verify_common.scenario, verify_common.preset), verify_result,
                       verify_common.tol, out);
    }
    if (quad_cmd->parsed()) {
      return do_gsaa_quad(load_input(quad_common.scenario, quad_common.preset), quad_selection,
                          quad_k, quad_common.tol, quad_common.out_dir, out);
    }
    if (bounds_cmd->parsed()) {
      return do_gsaa_bounds(load_input(bounds_common.scenario, bounds_common.preset),
                            bounds_selection, bounds_common.tol, bounds_common.out_dir, out);
    }
    if (sweep_cmd->parsed()) {
      return do_sweep(load_input(sweep_common.scenario, sweep_common.preset), sweep_selection,
                      sweep_delta, sweep_steps, sweep_common.tol, sweep_common.out_dir, out);
    }
    if (case_cmd->parsed()) {
      return do_case_study(load_input(case_common.scenario, case_common.preset), case_beta,
                           case_cap, case_grid, case_common.tol, case_common.out_dir, out);
    }
    if (gen_cmd->parsed()) return do_gen(gen_seed, gen_out, out);
  } catch (const std::invalid_argument& error) {
    err << "error: " << error.what() << "\n";
    return 1;
  } catch (const std::exception& error) {
    err << "error: " << error.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace drm
