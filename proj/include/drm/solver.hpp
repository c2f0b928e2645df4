#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "drm/model.hpp"

// Quadratic and strongly-convex program solvers plus the exhaustive
// active-set oracle used to cross-check them. The QP form throughout is the
// maximization
//     max_q  1/2 q^T diag(curvature) q + linear^T q
//     s.t.   constraint_matrix q <= rhs
// with every curvature entry < 0, so the objective is strictly concave.

namespace drm {

struct VarKey {
  std::string prosumer;
  std::string appliance;
  int period = 1;

  friend bool operator==(const VarKey&, const VarKey&) = default;
};

// (prosumer, appliance, period) <-> column mapping. Columns are ordered
// prosumer-major, then appliance declaration order, then period ascending.
class VariableMap {
 public:
  VariableMap() = default;

  int append(VarKey key);
  int size() const { return static_cast<int>(keys_.size()); }
  const VarKey& key(int column) const { return keys_.at(column); }
  // -1 when the triple is unknown.
  int column(const std::string& prosumer, const std::string& appliance, int period) const;

  static VariableMap for_prosumer(const Prosumer& prosumer, const Horizon& horizon);
  static VariableMap for_scenario(const Scenario& scenario);

 private:
  std::vector<VarKey> keys_;
  std::map<std::tuple<std::string, std::string, int>, int> lookup_;
};

struct QpProblem {
  Eigen::VectorXd curvature;          // diagonal of Lambda, all entries < 0
  Eigen::VectorXd linear;             // b-bar
  Eigen::MatrixXd constraint_matrix;  // m x n
  Eigen::VectorXd rhs;                // h
  VariableMap variables;

  int cols() const { return static_cast<int>(curvature.size()); }
  int rows() const { return static_cast<int>(rhs.size()); }
  double objective(const Eigen::VectorXd& q) const {
    return 0.5 * q.dot(curvature.cwiseProduct(q)) + linear.dot(q);
  }
};

struct KktReport {
  double primal_feasibility_residual = 0.0;   // max_j [a_j^T q - h_j]+
  double dual_feasibility_residual = 0.0;     // max_j [-lambda_j]+
  double complementary_slackness_residual = 0.0;  // max_j |lambda_j (a_j^T q - h_j)|
  double stationarity_residual = 0.0;         // inf-norm of the first-order condition

  double max_residual() const;
  bool within(double tol) const { return max_residual() <= tol; }
};

enum class SolveStatus { Optimal, Infeasible, MaxIterations };

struct SolveOutcome {
  Eigen::VectorXd primal;
  Eigen::VectorXd duals;
  double objective = 0.0;
  SolveStatus status = SolveStatus::MaxIterations;
  KktReport kkt;
  bool duals_unique = true;  // cleared by the oracle when several multipliers fit
  int iterations = 0;
};

struct SolverOptions {
  double tol = 1e-8;
  // 0 means the default cap of 100 * (rows + vars) gradient iterations.
  int max_iterations = 0;
};

// Projected-gradient ascent on the nonnegatively-constrained dual with step
// 1/||A Lambda^-1 A^T|| (spectral bound via 50 power iterations), accelerated
// by restarted momentum; the primal is recovered from the stationarity map
// q(lambda) = -Lambda^-1 (b-bar - A^T lambda). Periodic active-set polishing
// solves the equality-constrained KKT system on the rows the iterate marks
// tight and is accepted only when every KKT residual is <= tol.
SolveOutcome solve_qp_dual(const QpProblem& problem, const SolverOptions& options = {});

// Minimization oracle form used in the general convex setting:
//     min_q F(q)  s.t.  constraint_matrix q <= rhs
// with F mu-strongly convex and gradient L-Lipschitz.
struct ConvexProgram {
  int dimension = 0;
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  double mu = 0.0;
  double lipschitz = 0.0;
  Eigen::MatrixXd constraint_matrix;
  Eigen::VectorXd rhs;
  VariableMap variables;
};

// Augmented-Lagrangian outer loop with accelerated projected-gradient inner
// steps (inner step size <= 1/L), finished by the same gradient-only
// active-set polish. Throws std::invalid_argument unless 0 < mu <= L.
SolveOutcome solve_convex_primal(const ConvexProgram& program, const SolverOptions& options = {});

// Independent oracle: enumerates every candidate active set (all row
// subsets), solves each equality-constrained KKT system in closed form,
// and keeps every KKT-consistent pair. Reports the minimum-norm multiplier
// and clears duals_unique when distinct multipliers support the optimum.
// Throws std::invalid_argument for problems with more than 20 rows.
SolveOutcome brute_force_active_set(const QpProblem& problem);

KktReport kkt_residuals(const QpProblem& problem, const Eigen::VectorXd& primal,
                        const Eigen::VectorXd& duals);
// Same residuals for the minimization form: stationarity is grad F + A^T l.
KktReport kkt_residuals(const ConvexProgram& program, const Eigen::VectorXd& primal,
                        const Eigen::VectorXd& duals);

// Phase-1 search: accelerated descent on 1/2 ||[Aq - h]+||^2, stopping as
// soon as the max violation reaches <= 0. Points within `tol` violation count
// as feasible; otherwise the positive-part vector at the minimizer acts as a
// Farkas-style infeasibility certificate.
FeasibilityResult find_feasible_point(const Eigen::MatrixXd& A, const Eigen::VectorXd& h,
                                      double tol = 1e-6);

// Spectral norm estimate via 50 power iterations with a deterministic start.
double spectral_norm_estimate(const Eigen::MatrixXd& m);

// Dense (A, h) for a set of compiled rows against a column map. Throws when a
// term references a variable absent from the map.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> assemble_rows(
    const std::vector<GeneralLinearConstraint>& rows, const VariableMap& variables);

}  // namespace drm
