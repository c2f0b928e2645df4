#include "drm/solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace drm {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double inf_norm(const VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

// Positive part, elementwise.
VectorXd pos(const VectorXd& v) { return v.cwiseMax(0.0); }

}  // namespace

int VariableMap::append(VarKey key) {
  const int col = size();
  lookup_.emplace(std::make_tuple(key.prosumer, key.appliance, key.period), col);
  keys_.push_back(std::move(key));
  return col;
}

int VariableMap::column(const std::string& prosumer, const std::string& appliance,
                        int period) const {
  auto it = lookup_.find(std::make_tuple(prosumer, appliance, period));
  return it == lookup_.end() ? -1 : it->second;
}

VariableMap VariableMap::for_prosumer(const Prosumer& prosumer, const Horizon& horizon) {
  VariableMap map;
  for (const auto& a : prosumer.appliances) {
    for (int t = 1; t <= horizon.periods; ++t) map.append({prosumer.id, a.id, t});
  }
  return map;
}

VariableMap VariableMap::for_scenario(const Scenario& scenario) {
  VariableMap map;
  for (const auto& p : scenario.prosumers) {
    for (const auto& a : p.appliances) {
      for (int t = 1; t <= scenario.horizon.periods; ++t) map.append({p.id, a.id, t});
    }
  }
  return map;
}

std::pair<MatrixXd, VectorXd> assemble_rows(const std::vector<GeneralLinearConstraint>& rows,
                                            const VariableMap& variables) {
  MatrixXd A = MatrixXd::Zero(static_cast<int>(rows.size()), variables.size());
  VectorXd h(static_cast<int>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const auto& term : rows[r].terms) {
      const int col = variables.column(rows[r].owner, term.appliance, term.period);
      if (col < 0) {
        throw std::invalid_argument("constraint term references unknown variable (" +
                                    rows[r].owner + ", " + term.appliance + ", t=" +
                                    std::to_string(term.period) + ")");
      }
      A(static_cast<int>(r), col) += term.alpha;
    }
    h(static_cast<int>(r)) = rows[r].rhs;
  }
  return {std::move(A), std::move(h)};
}

double KktReport::max_residual() const {
  return std::max({primal_feasibility_residual, dual_feasibility_residual,
                   complementary_slackness_residual, stationarity_residual});
}

double spectral_norm_estimate(const MatrixXd& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  VectorXd x = VectorXd::LinSpaced(m.cols(), 1.0, 2.0).normalized();
  double sigma2 = 0.0;
  for (int k = 0; k < 50; ++k) {
    VectorXd y = m.transpose() * (m * x);
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    sigma2 = norm;  // since ||x|| = 1, ||M^T M x|| -> sigma_max^2
    x = y / norm;
  }
  return std::sqrt(sigma2);
}

FeasibilityResult find_feasible_point(const MatrixXd& A, const VectorXd& h, double tol) {
  FeasibilityResult result;
  const int n = static_cast<int>(A.cols());
  const int m = static_cast<int>(A.rows());
  if (m == 0) {
    result.feasible = true;
    result.point = VectorXd::Zero(n);
    result.max_violation = 0.0;
    return result;
  }

  VectorXd q = VectorXd::Zero(n);
  auto violation = [&](const VectorXd& v) { return (A * v - h).maxCoeff(); };

  double best_viol = violation(q);
  VectorXd best_q = q;
  if (best_viol <= 0.0) {
    result.feasible = true;
    result.point = q;
    result.max_violation = best_viol;
    return result;
  }

  const double norm_a = spectral_norm_estimate(A);
  const double step = norm_a > 0.0 ? 1.0 / (norm_a * norm_a) : 1.0;

  // Accelerated descent on s(q) = 1/2 ||(Aq - h)+||^2 with function restart.
  VectorXd y = q;
  VectorXd q_prev = q;
  double t_mom = 1.0;
  auto s_value = [&](const VectorXd& v) { return 0.5 * pos(A * v - h).squaredNorm(); };
  double s_prev = s_value(q);
  int stall = 0;
  for (int k = 0; k < 5000; ++k) {
    VectorXd grad = A.transpose() * pos(A * y - h);
    VectorXd q_next = y - step * grad;
    const double viol = violation(q_next);
    if (viol < best_viol) {
      best_viol = viol;
      best_q = q_next;
      stall = 0;
    } else {
      ++stall;
    }
    if (best_viol <= 0.0) break;
    const double s_next = s_value(q_next);
    if (s_next > s_prev) {  // restart momentum
      y = q_next;
      t_mom = 1.0;
    } else {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_mom * t_mom));
      y = q_next + ((t_mom - 1.0) / t_next) * (q_next - q_prev);
      t_mom = t_next;
    }
    if (std::abs(s_prev - s_next) <= 1e-18 * (1.0 + s_prev) && stall > 50) break;
    s_prev = s_next;
    q_prev = q_next;
    q = q_next;
  }

  result.point = best_q;
  result.max_violation = best_viol;
  result.feasible = best_viol <= tol;
  if (!result.feasible) {
    // At the minimizer of s, y = (Aq - h)+ satisfies A^T y ~ 0 and h^T y < 0:
    // a certificate that no point satisfies Aq <= h.
    result.certificate = pos(A * best_q - h);
  }
  return result;
}

KktReport kkt_residuals(const QpProblem& problem, const VectorXd& primal,
                        const VectorXd& duals) {
  KktReport report;
  const VectorXd slack = problem.constraint_matrix * primal - problem.rhs;
  report.primal_feasibility_residual = slack.size() ? pos(slack).maxCoeff() : 0.0;
  report.dual_feasibility_residual = duals.size() ? pos(-duals).maxCoeff() : 0.0;
  report.complementary_slackness_residual =
      duals.size() ? duals.cwiseProduct(slack).cwiseAbs().maxCoeff() : 0.0;
  VectorXd stat = problem.curvature.cwiseProduct(primal) + problem.linear;
  if (duals.size()) stat -= problem.constraint_matrix.transpose() * duals;
  report.stationarity_residual = inf_norm(stat);
  return report;
}

namespace {

void validate_qp(const QpProblem& p) {
  const int n = p.cols();
  if (n == 0) throw std::invalid_argument("qp has no variables");
  if (p.linear.size() != n) throw std::invalid_argument("qp linear term has wrong length");
  if (p.curvature.maxCoeff() >= 0.0) {
    throw std::invalid_argument("qp curvature must be negative in every coordinate");
  }
  if (p.constraint_matrix.rows() != p.rhs.size() ||
      (p.rows() > 0 && p.constraint_matrix.cols() != n)) {
    throw std::invalid_argument("qp constraint dimensions are inconsistent");
  }
}

// q(lambda) = -Lambda^-1 (b-bar - A^T lambda), the stationarity map.
VectorXd primal_from_duals(const QpProblem& p, const VectorXd& duals) {
  VectorXd v = p.linear;
  if (duals.size()) v -= p.constraint_matrix.transpose() * duals;
  return -v.cwiseQuotient(p.curvature);
}

struct PolishResult {
  bool accepted = false;
  SolveOutcome outcome;
};

// Solves the equality-constrained KKT system on the guessed active rows,
// dropping rows whose multiplier comes out negative, and accepts only when
// the full residual set meets the tolerance.
PolishResult polish_active_set(const QpProblem& p, std::vector<int> active, double tol) {
  PolishResult result;
  const VectorXd linv_b = p.linear.cwiseQuotient(p.curvature);
  for (int round = 0; round < p.rows() + 1; ++round) {
    VectorXd duals = VectorXd::Zero(p.rows());
    if (!active.empty()) {
      const int k = static_cast<int>(active.size());
      MatrixXd aj(k, p.cols());
      VectorXd rhs_j(k);
      for (int i = 0; i < k; ++i) {
        aj.row(i) = p.constraint_matrix.row(active[i]);
        rhs_j(i) = p.rhs(active[i]) + aj.row(i).dot(linv_b);
      }
      MatrixXd m = aj * p.curvature.cwiseInverse().asDiagonal() * aj.transpose();
      VectorXd lam_j = m.completeOrthogonalDecomposition().solve(rhs_j);
      if (inf_norm(m * lam_j - rhs_j) > 1e-8 * (1.0 + inf_norm(rhs_j))) return result;
      int worst = -1;
      double worst_val = -1e-12;
      for (int i = 0; i < k; ++i) {
        if (lam_j(i) < worst_val) {
          worst_val = lam_j(i);
          worst = i;
        }
      }
      if (worst >= 0) {
        active.erase(active.begin() + worst);
        continue;
      }
      for (int i = 0; i < k; ++i) duals(active[i]) = std::max(lam_j(i), 0.0);
    }
    VectorXd q = primal_from_duals(p, duals);
    KktReport report = kkt_residuals(p, q, duals);
    if (report.within(tol)) {
      result.accepted = true;
      result.outcome = {q, duals, p.objective(q), SolveStatus::Optimal, report, true, 0};
    }
    return result;
  }
  return result;
}

std::vector<int> guess_active(const QpProblem& p, const VectorXd& duals, const VectorXd& q) {
  const double slack_scale = 1.0 + (p.rhs.size() ? inf_norm(p.rhs) : 0.0);
  const VectorXd slack = p.constraint_matrix * q - p.rhs;
  std::vector<int> active;
  for (int j = 0; j < p.rows(); ++j) {
    if (duals(j) > 1e-10 || slack(j) >= -1e-7 * slack_scale) active.push_back(j);
  }
  return active;
}

}  // namespace

SolveOutcome solve_qp_dual(const QpProblem& problem, const SolverOptions& options) {
  validate_qp(problem);
  const int n = problem.cols();
  const int m = problem.rows();

  if (m == 0) {
    VectorXd q = primal_from_duals(problem, VectorXd());
    KktReport report = kkt_residuals(problem, q, VectorXd());
    return {q, VectorXd(), problem.objective(q),
            report.within(options.tol) ? SolveStatus::Optimal : SolveStatus::MaxIterations,
            report, true, 0};
  }

  auto feas = find_feasible_point(problem.constraint_matrix, problem.rhs);
  if (!feas.feasible) {
    SolveOutcome out;
    out.primal = feas.point;
    out.duals = VectorXd::Zero(m);
    out.objective = problem.objective(feas.point);
    out.status = SolveStatus::Infeasible;
    out.kkt = kkt_residuals(problem, feas.point, out.duals);
    return out;
  }

  // Dual of the concave QP: maximize psi(l) = 1/2 l^T P l - l^T d over l >= 0
  // with P = A Lambda^-1 A^T (negative semidefinite).
  const MatrixXd linv_at =
      problem.curvature.cwiseInverse().asDiagonal() * problem.constraint_matrix.transpose();
  const MatrixXd p_mat = problem.constraint_matrix * linv_at;
  const VectorXd d =
      problem.constraint_matrix * problem.linear.cwiseQuotient(problem.curvature) + problem.rhs;

  const double p_norm = spectral_norm_estimate(p_mat);
  const double step = p_norm > 0.0 ? 1.0 / p_norm : 1.0;
  const int cap = options.max_iterations > 0 ? options.max_iterations : 100 * (m + n);

  auto psi = [&](const VectorXd& l) { return 0.5 * l.dot(p_mat * l) - l.dot(d); };

  VectorXd lam = VectorXd::Zero(m);
  VectorXd lam_prev = lam;
  VectorXd y = lam;
  double t_mom = 1.0;
  double psi_prev = psi(lam);

  SolveOutcome best;
  best.primal = primal_from_duals(problem, lam);
  best.duals = lam;
  best.kkt = kkt_residuals(problem, best.primal, lam);
  best.objective = problem.objective(best.primal);
  best.status = SolveStatus::MaxIterations;

  auto try_polish = [&](const VectorXd& l) -> bool {
    VectorXd q = primal_from_duals(problem, l);
    auto polish = polish_active_set(problem, guess_active(problem, l, q), options.tol);
    if (polish.accepted) {
      best = polish.outcome;
      return true;
    }
    return false;
  };

  if (try_polish(lam)) return best;

  int iter = 0;
  for (; iter < cap; ++iter) {
    VectorXd lam_next = pos(y + step * (p_mat * y - d));
    const double psi_next = psi(lam_next);
    if (psi_next < psi_prev) {
      y = lam_next;
      t_mom = 1.0;
    } else {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_mom * t_mom));
      y = lam_next + ((t_mom - 1.0) / t_next) * (lam_next - lam_prev);
      t_mom = t_next;
    }
    lam_prev = lam;
    lam = lam_next;
    psi_prev = std::max(psi_prev, psi_next);

    VectorXd q = primal_from_duals(problem, lam);
    KktReport report = kkt_residuals(problem, q, lam);
    if (report.max_residual() < best.kkt.max_residual()) {
      best.primal = q;
      best.duals = lam;
      best.kkt = report;
      best.objective = problem.objective(q);
    }
    if (report.within(options.tol)) {
      best.status = SolveStatus::Optimal;
      best.iterations = iter + 1;
      return best;
    }
    if ((iter + 1) % 25 == 0 && try_polish(lam)) {
      best.iterations = iter + 1;
      return best;
    }
  }

  if (try_polish(lam)) {
    best.iterations = iter;
    return best;
  }
  best.iterations = iter;
  best.status = best.kkt.within(options.tol) ? SolveStatus::Optimal : SolveStatus::MaxIterations;
  return best;
}

SolveOutcome brute_force_active_set(const QpProblem& problem) {
  validate_qp(problem);
  const int n = problem.cols();
  const int m = problem.rows();
  if (m > 20) {
    throw std::invalid_argument("active-set enumeration refuses problems with more than 20 rows");
  }

  auto feas = find_feasible_point(problem.constraint_matrix, problem.rhs);
  if (m > 0 && !feas.feasible) {
    SolveOutcome out;
    out.primal = feas.point;
    out.duals = VectorXd::Zero(m);
    out.objective = problem.objective(feas.point);
    out.status = SolveStatus::Infeasible;
    out.kkt = kkt_residuals(problem, feas.point, out.duals);
    return out;
  }

  const VectorXd linv_b = problem.linear.cwiseQuotient(problem.curvature);
  const double slack_scale = 1.0 + (m ? inf_norm(problem.rhs) : 0.0);

  struct Candidate {
    VectorXd primal;
    VectorXd duals;
    double objective;
  };
  std::vector<Candidate> candidates;

  auto consider = [&](const std::vector<int>& subset) {
    VectorXd duals = VectorXd::Zero(m);
    if (!subset.empty()) {
      const int k = static_cast<int>(subset.size());
      MatrixXd aj(k, n);
      VectorXd rhs_j(k);
      for (int i = 0; i < k; ++i) {
        aj.row(i) = problem.constraint_matrix.row(subset[i]);
        rhs_j(i) = problem.rhs(subset[i]) + aj.row(i).dot(linv_b);
      }
      MatrixXd mj = aj * problem.curvature.cwiseInverse().asDiagonal() * aj.transpose();
      VectorXd lam_j = mj.completeOrthogonalDecomposition().solve(rhs_j);
      if (inf_norm(mj * lam_j - rhs_j) > 1e-9 * (1.0 + inf_norm(rhs_j))) return;
      if (lam_j.minCoeff() < -1e-8) return;
      for (int i = 0; i < k; ++i) duals(subset[i]) = std::max(lam_j(i), 0.0);
    }
    VectorXd q = primal_from_duals(problem, duals);
    if (m > 0) {
      const VectorXd slack = problem.constraint_matrix * q - problem.rhs;
      if (pos(slack).maxCoeff() > 1e-7 * slack_scale) return;
    }
    candidates.push_back({q, duals, problem.objective(q)});
  };

  // Every row subset: supports larger than the variable count still matter
  // because the minimum-norm multiplier may spread across dependent rows.
  const int max_size = m;
  std::vector<int> subset;
  auto enumerate = [&](auto&& self, int start) -> void {
    consider(subset);
    if (static_cast<int>(subset.size()) == max_size) return;
    for (int j = start; j < m; ++j) {
      subset.push_back(j);
      self(self, j + 1);
      subset.pop_back();
    }
  };
  enumerate(enumerate, 0);

  if (candidates.empty()) {
    SolveOutcome out;
    out.primal = feas.point;
    out.duals = VectorXd::Zero(m);
    out.objective = problem.objective(feas.point);
    out.status = SolveStatus::MaxIterations;
    out.kkt = kkt_residuals(problem, out.primal, out.duals);
    return out;
  }

  const Candidate* top = &candidates.front();
  for (const auto& c : candidates) {
    if (c.objective > top->objective) top = &c;
  }

  // The primal optimum is unique; distinct multipliers supporting it mean a
  // degenerate dual. Keep the minimum-norm one and flag the degeneracy.
  std::vector<const Candidate*> optimal;
  for (const auto& c : candidates) {
    if (inf_norm(c.primal - top->primal) <= 1e-6) optimal.push_back(&c);
  }
  const Candidate* chosen = optimal.front();
  bool unique = true;
  for (const auto* c : optimal) {
    if (inf_norm(c->duals - optimal.front()->duals) > 1e-7) unique = false;
    if (c->duals.norm() < chosen->duals.norm()) chosen = c;
  }

  SolveOutcome out;
  out.primal = chosen->primal;
  out.duals = chosen->duals;
  out.objective = chosen->objective;
  out.status = SolveStatus::Optimal;
  out.kkt = kkt_residuals(problem, out.primal, out.duals);
  out.duals_unique = unique;
  return out;
}

KktReport kkt_residuals(const ConvexProgram& p, const VectorXd& q, const VectorXd& duals) {
  KktReport report;
  const VectorXd slack = p.constraint_matrix * q - p.rhs;
  report.primal_feasibility_residual = slack.size() ? pos(slack).maxCoeff() : 0.0;
  report.dual_feasibility_residual = duals.size() ? pos(-duals).maxCoeff() : 0.0;
  report.complementary_slackness_residual =
      duals.size() ? duals.cwiseProduct(slack).cwiseAbs().maxCoeff() : 0.0;
  VectorXd stat = p.gradient(q);
  if (duals.size()) stat += p.constraint_matrix.transpose() * duals;
  report.stationarity_residual = inf_norm(stat);
  return report;
}

namespace {

// Equality-constrained minimization on the guessed rows using only the
// gradient oracle: null-space accelerated descent, then a least-squares
// multiplier fit, dropping rows with negative multipliers.
PolishResult polish_convex(const ConvexProgram& p, std::vector<int> active, double tol) {
  PolishResult result;
  const int n = p.dimension;
  const int m = static_cast<int>(p.rhs.size());
  for (int round = 0; round < m + 1; ++round) {
    VectorXd q;
    MatrixXd aj(static_cast<int>(active.size()), n);
    for (std::size_t i = 0; i < active.size(); ++i) aj.row(i) = p.constraint_matrix.row(active[i]);
    MatrixXd kernel;
    if (active.empty()) {
      q = VectorXd::Zero(n);
      kernel = MatrixXd::Identity(n, n);
    } else {
      Eigen::FullPivLU<MatrixXd> lu(aj);
      VectorXd hj(static_cast<int>(active.size()));
      for (std::size_t i = 0; i < active.size(); ++i) hj(i) = p.rhs(active[i]);
      q = lu.solve(hj);
      if (inf_norm(aj * q - hj) > 1e-9 * (1.0 + inf_norm(hj))) return result;
      kernel = lu.kernel();
      if (lu.rank() == n) kernel = MatrixXd::Zero(n, 0);
    }
    if (kernel.cols() > 0) {
      Eigen::JacobiSVD<MatrixXd> svd(kernel);
      const double smax = svd.singularValues()(0);
      const double smin = svd.singularValues()(svd.singularValues().size() - 1);
      if (smin <= 0.0) return result;
      const double lip = p.lipschitz * smax * smax;
      const double mu = p.mu * smin * smin;
      const double kappa = lip / mu;
      const double momentum = (std::sqrt(kappa) - 1.0) / (std::sqrt(kappa) + 1.0);
      VectorXd yv = VectorXd::Zero(kernel.cols());
      VectorXd v = yv;
      for (int it = 0; it < 20000; ++it) {
        VectorXd grad = kernel.transpose() * p.gradient(q + kernel * yv);
        if (inf_norm(grad) <= std::min(1e-10, 0.05 * tol) * (1.0 + mu)) {
          v = yv;  // gradient was verified at the momentum point
          break;
        }
        VectorXd v_next = yv - grad / lip;
        yv = v_next + momentum * (v_next - v);
        v = v_next;
      }
      q = q + kernel * v;
    }
    VectorXd grad = p.gradient(q);
    VectorXd duals = VectorXd::Zero(m);
    if (!active.empty()) {
      VectorXd lam_j = aj.transpose().completeOrthogonalDecomposition().solve(-grad);
      int worst = -1;
      double worst_val = -1e-10;
      for (std::size_t i = 0; i < active.size(); ++i) {
        if (lam_j(i) < worst_val) {
          worst_val = lam_j(i);
          worst = static_cast<int>(i);
        }
      }
      if (worst >= 0) {
        active.erase(active.begin() + worst);
        continue;
      }
      for (std::size_t i = 0; i < active.size(); ++i) duals(active[i]) = std::max(lam_j(i), 0.0);
    }
    KktReport report = kkt_residuals(p, q, duals);
    if (report.within(tol)) {
      result.accepted = true;
      result.outcome = {q, duals, p.value(q), SolveStatus::Optimal, report, true, 0};
    }
    return result;
  }
  return result;
}

}  // namespace

SolveOutcome solve_convex_primal(const ConvexProgram& program, const SolverOptions& options) {
  if (!(program.mu > 0.0)) {
    throw std::invalid_argument("convex program requires mu > 0");
  }
  if (program.lipschitz < program.mu) {
    throw std::invalid_argument("convex program requires lipschitz >= mu");
  }
  if (!program.gradient || !program.value) {
    throw std::invalid_argument("convex program requires value and gradient oracles");
  }
  const int n = program.dimension;
  const int m = static_cast<int>(program.rhs.size());
  if (n <= 0) throw std::invalid_argument("convex program has no variables");

  if (m > 0) {
    auto feas = find_feasible_point(program.constraint_matrix, program.rhs);
    if (!feas.feasible) {
      SolveOutcome out;
      out.primal = feas.point;
      out.duals = VectorXd::Zero(m);
      out.objective = program.value(feas.point);
      out.status = SolveStatus::Infeasible;
      out.kkt = kkt_residuals(program, feas.point, out.duals);
      return out;
    }
  }

  const double norm_a = m > 0 ? spectral_norm_estimate(program.constraint_matrix) : 0.0;

  VectorXd q = VectorXd::Zero(n);
  VectorXd lam = VectorXd::Zero(m);
  double rho = std::max(program.lipschitz, 1e-2);

  SolveOutcome best;
  best.primal = q;
  best.duals = lam;
  best.kkt = kkt_residuals(program, q, lam);
  best.objective = program.value(q);
  best.status = SolveStatus::MaxIterations;

  double prev_viol = kInf;
  int total_inner = 0;
  const int inner_budget = options.max_iterations > 0 ? options.max_iterations : 400000;

  for (int outer = 0; outer < 80 && total_inner < inner_budget; ++outer) {
    // Inner: accelerated descent on the augmented Lagrangian, strong
    // convexity mu, smoothness L + rho ||A||^2; inner step <= 1/L.
    const double lip = program.lipschitz + rho * norm_a * norm_a;
    const double kappa = lip / program.mu;
    const double momentum = (std::sqrt(kappa) - 1.0) / (std::sqrt(kappa) + 1.0);
    const double inner_tol = std::max(0.02 * options.tol, 1e-4 * std::pow(0.2, outer));
    VectorXd y = q;
    for (int it = 0; it < 8000 && total_inner < inner_budget; ++it, ++total_inner) {
      VectorXd aug = m > 0 ? VectorXd(pos(lam + rho * (program.constraint_matrix * y - program.rhs)))
                           : VectorXd();
      VectorXd grad = program.gradient(y);
      if (m > 0) grad += program.constraint_matrix.transpose() * aug;
      if (inf_norm(grad) <= inner_tol) {
        q = y;
        break;
      }
      VectorXd q_next = y - grad / lip;
      y = q_next + momentum * (q_next - q);
      q = q_next;
    }

    if (m > 0) lam = pos(lam + rho * (program.constraint_matrix * q - program.rhs));
    KktReport report = kkt_residuals(program, q, lam);
    if (report.max_residual() < best.kkt.max_residual()) {
      best.primal = q;
      best.duals = lam;
      best.kkt = report;
      best.objective = program.value(q);
    }
    if (report.within(options.tol)) {
      best.status = SolveStatus::Optimal;
      best.iterations = total_inner;
      return best;
    }

    if (outer >= 1 && m > 0) {
      const double slack_scale = 1.0 + inf_norm(program.rhs);
      const VectorXd slack = program.constraint_matrix * q - program.rhs;
      std::vector<int> active;
      for (int j = 0; j < m; ++j) {
        if (lam(j) > 1e-10 || slack(j) >= -1e-6 * slack_scale) active.push_back(j);
      }
      auto polish = polish_convex(program, active, options.tol);
      if (polish.accepted) {
        polish.outcome.iterations = total_inner;
        return polish.outcome;
      }
    }

    const double viol = m > 0 ? pos(program.constraint_matrix * q - program.rhs).maxCoeff() : 0.0;
    if (viol > 0.5 * prev_viol) rho = std::min(rho * 5.0, 1e10);
    prev_viol = viol;
  }

  if (m == 0) {
    best.status = best.kkt.within(options.tol) ? SolveStatus::Optimal : SolveStatus::MaxIterations;
  }
  best.iterations = total_inner;
  return best;
}

}  // namespace drm
