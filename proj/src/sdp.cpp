// SPDX-License-Identifier: Apache-2.0
// Dense primal log-barrier interior-point solver for small semidefinite
// programs, plus the standard-form assemblies for the two power-allocation
// subproblems (cooperating-satellite powers and reference-satellite powers).
#include "leopos/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace leopos {

namespace {

constexpr double kCenterTight = 2e-10;  // Newton decrement^2 at which a point counts as centered
constexpr double kCenterLoose = 2e-5;   // accepted when rounding noise blocks further progress
constexpr double kBarrierGrowth = 25.0;
constexpr double kPhaseOneMargin = 1e-4;  // required feasibility slack (scaled units)

struct PreparedBlock {
  Eigen::MatrixXd constant;
  std::vector<std::pair<int, Eigen::MatrixXd>> terms;  // one entry per variable, sorted
  int dim = 0;
};

// Problem preprocessed for repeated barrier evaluations: per-block terms merged
// by variable, linear constraints split into inequality/equality matrices.
// Newton runs inside the equality manifold x = x0 + nullbasis * y; eliminating
// the equalities (instead of a KKT saddle solve) avoids the cancellation that
// would otherwise leave an equality-violating component in the step.
struct Prepared {
  std::vector<PreparedBlock> blocks;
  Eigen::MatrixXd a_in;  // rows a^T with a^T x <= b_in
  Eigen::VectorXd b_in;
  Eigen::MatrixXd a_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd nullbasis;  // orthonormal basis of null(a_eq); empty when no equalities
  double degree = 0.0;        // sum of block dims + #inequalities (barrier parameter)
  int n = 0;
};

void validate_problem(const SdpProblem& p) {
  if (p.num_vars <= 0) throw std::invalid_argument("sdp: num_vars must be positive");
  if (p.objective.size() != p.num_vars)
    throw std::invalid_argument("sdp: objective size does not match num_vars");
  if (p.blocks.empty() && p.linear.empty())
    throw std::invalid_argument("sdp: problem has no constraints");
  for (const auto& blk : p.blocks) {
    const int d = static_cast<int>(blk.constant.rows());
    if (d <= 0 || blk.constant.cols() != d)
      throw std::invalid_argument("sdp: block constant must be square and nonempty");
    double scale = 1.0 + blk.constant.cwiseAbs().maxCoeff();
    if ((blk.constant - blk.constant.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
      throw std::invalid_argument("sdp: block constant must be symmetric");
    for (const auto& [idx, m] : blk.terms) {
      if (idx < 0 || idx >= p.num_vars)
        throw std::invalid_argument("sdp: block term references an unknown variable");
      if (m.rows() != d || m.cols() != d)
        throw std::invalid_argument("sdp: block term shape mismatch");
      double ms = 1.0 + m.cwiseAbs().maxCoeff();
      if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * ms)
        throw std::invalid_argument("sdp: block term must be symmetric");
    }
  }
  for (const auto& lc : p.linear)
    if (lc.coeffs.size() != p.num_vars)
      throw std::invalid_argument("sdp: linear constraint size mismatch");
  if (p.start.size() != 0 && p.start.size() != p.num_vars)
    throw std::invalid_argument("sdp: start size mismatch");
}

Prepared prepare(const SdpProblem& p) {
  Prepared pr;
  pr.n = p.num_vars;
  for (const auto& blk : p.blocks) {
    PreparedBlock pb;
    pb.dim = static_cast<int>(blk.constant.rows());
    pb.constant = 0.5 * (blk.constant + blk.constant.transpose());
    std::map<int, Eigen::MatrixXd> merged;
    for (const auto& [idx, m] : blk.terms) {
      Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
      auto it = merged.find(idx);
      if (it == merged.end())
        merged.emplace(idx, std::move(sym));
      else
        it->second += sym;
    }
    for (auto& [idx, m] : merged) pb.terms.push_back({idx, std::move(m)});
    pr.degree += pb.dim;
    pr.blocks.push_back(std::move(pb));
  }
  int n_in = 0, n_eq = 0;
  for (const auto& lc : p.linear) (lc.sense == Sense::kLessEq ? n_in : n_eq)++;
  pr.a_in.resize(n_in, pr.n);
  pr.b_in.resize(n_in);
  pr.a_eq.resize(n_eq, pr.n);
  pr.b_eq.resize(n_eq);
  int ki = 0, ke = 0;
  for (const auto& lc : p.linear) {
    if (lc.sense == Sense::kLessEq) {
      pr.a_in.row(ki) = lc.coeffs.transpose();
      pr.b_in[ki++] = lc.bound;
    } else {
      pr.a_eq.row(ke) = lc.coeffs.transpose();
      pr.b_eq[ke++] = lc.bound;
    }
  }
  pr.degree += n_in;
  if (n_eq > 0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(pr.a_eq.transpose());
    pr.nullbasis = Eigen::MatrixXd(qr.householderQ()).rightCols(pr.n - qr.rank());
  }
  return pr;
}

// Barrier value (and optionally gradient/Hessian) at x. Returns false when x is
// outside the open feasible region (then outputs are unspecified).
bool eval_point(const Prepared& pr, const Eigen::VectorXd& x, double* phi,
                Eigen::VectorXd* grad, Eigen::MatrixXd* hess) {
  if (!x.allFinite()) return false;
  double value = 0.0;
  if (grad) {
    grad->setZero(pr.n);
    hess->setZero(pr.n, pr.n);
  }
  for (const auto& blk : pr.blocks) {
    Eigen::MatrixXd f = blk.constant;
    for (const auto& [idx, m] : blk.terms) f.noalias() += x[idx] * m;
    Eigen::LLT<Eigen::MatrixXd> llt(f);
    if (llt.info() != Eigen::Success) return false;
    double logdet = 0.0;
    for (int d = 0; d < blk.dim; ++d) {
      double l = llt.matrixLLT()(d, d);
      if (!(l > 0.0)) return false;
      logdet += std::log(l);
    }
    value -= 2.0 * logdet;
    if (grad) {
      Eigen::MatrixXd s = llt.solve(Eigen::MatrixXd::Identity(blk.dim, blk.dim));
      const int k = static_cast<int>(blk.terms.size());
      std::vector<Eigen::MatrixXd> sm(k);
      for (int r = 0; r < k; ++r) sm[r].noalias() = s * blk.terms[r].second;
      for (int r = 0; r < k; ++r) (*grad)[blk.terms[r].first] -= sm[r].trace();
      for (int r1 = 0; r1 < k; ++r1)
        for (int r2 = r1; r2 < k; ++r2) {
          double h = (sm[r1].array() * sm[r2].transpose().array()).sum();
          int i = blk.terms[r1].first, j = blk.terms[r2].first;
          (*hess)(i, j) += h;
          if (i != j) (*hess)(j, i) += h;
        }
    }
  }
  if (pr.a_in.rows() > 0) {
    Eigen::VectorXd slack = pr.b_in - pr.a_in * x;
    if (!(slack.array() > 0.0).all()) return false;
    value -= slack.array().log().sum();
    if (grad) {
      Eigen::VectorXd inv = slack.cwiseInverse();
      grad->noalias() += pr.a_in.transpose() * inv;
      Eigen::MatrixXd scaled = inv.asDiagonal() * pr.a_in;
      hess->noalias() += scaled.transpose() * scaled;
    }
  }
  if (phi) *phi = value;
  return true;
}

// Damped Cholesky solve for the (reduced) Newton system.
bool newton_direction(const Eigen::MatrixXd& hess, const Eigen::VectorXd& grad,
                      Eigen::VectorXd* dx) {
  const int k = static_cast<int>(hess.rows());
  const double base = 1e-12 * (1.0 + hess.trace() / k);
  for (int attempt = 0; attempt < 18; ++attempt) {
    Eigen::MatrixXd h = hess;
    if (attempt > 0) h.diagonal().array() += base * std::pow(10.0, attempt - 1);
    Eigen::LLT<Eigen::MatrixXd> hl(h);
    if (hl.info() != Eigen::Success) continue;
    *dx = -hl.solve(grad);
    if (dx->allFinite()) return true;
  }
  return false;
}

struct CoreOut {
  Eigen::VectorXd x;
  bool converged = false;
  bool early = false;
  double gap = kInf;
};

// Barrier outer loop from a strictly feasible x. Counts accepted Newton steps
// against *steps/budget. If early_var >= 0, returns as soon as x[early_var]
// drops below early_thresh (phase-I shortcut).
CoreOut barrier_minimize(const Prepared& pr, const Eigen::VectorXd& c, Eigen::VectorXd x,
                         double tol, int budget, int* steps, int early_var,
                         double early_thresh) {
  CoreOut out;
  out.x = x;
  double t = 1.0;
  for (int stage = 0; stage < 200; ++stage) {
    bool stalled = false;
    int stage_steps = 0;
    int noise_steps = 0;
    for (;;) {
      if (stage_steps >= 60) break;  // practical centering cap; gap bound degrades gracefully
      if (*steps >= budget) {
        out.x = x;
        out.gap = pr.degree / t;
        return out;
      }
      double phi = 0.0;
      Eigen::VectorXd gphi;
      Eigen::MatrixXd h;
      if (!eval_point(pr, x, &phi, &gphi, &h)) {
        stalled = true;  // should not happen: iterates stay strictly feasible
        break;
      }
      Eigen::VectorXd g = t * c + gphi;
      Eigen::VectorXd dx;
      double lambda2 = 0.0;
      if (pr.a_eq.rows() > 0) {
        if (pr.nullbasis.cols() == 0) break;  // equalities pin x completely
        Eigen::MatrixXd hy = pr.nullbasis.transpose() * h * pr.nullbasis;
        Eigen::VectorXd gy = pr.nullbasis.transpose() * g;
        Eigen::VectorXd dy;
        if (!newton_direction(hy, gy, &dy)) {
          stalled = true;
          break;
        }
        dx = pr.nullbasis * dy;
        lambda2 = -gy.dot(dy);
      } else {
        if (!newton_direction(h, g, &dx)) {
          stalled = true;
          break;
        }
        lambda2 = -g.dot(dx);
      }
      if (!std::isfinite(lambda2)) {
        stalled = true;
        break;
      }
      if (lambda2 <= kCenterTight) break;
      double f0 = t * c.dot(x) + phi;
      double slope = g.dot(dx);
      double sigma = 1.0;
      bool moved = false;
      double accepted_fc = f0;
      for (int halving = 0; halving < 120; ++halving) {
        Eigen::VectorXd cand = x + sigma * dx;
        double phic = 0.0;
        if (eval_point(pr, cand, &phic, nullptr, nullptr)) {
          double fc = t * c.dot(cand) + phic;
          if (fc <= f0 + 0.25 * sigma * slope) {
            x = std::move(cand);
            moved = true;
            accepted_fc = fc;
            break;
          }
        }
        sigma *= 0.5;
      }
      if (!moved) {
        if (lambda2 > kCenterLoose) stalled = true;
        break;
      }
      ++*steps;
      ++stage_steps;
      // Decreases at rounding level mean the point is as centered as doubles allow.
      if (f0 - accepted_fc <= 8.0 * std::numeric_limits<double>::epsilon() * std::abs(f0)) {
        if (++noise_steps >= 2) break;
      } else {
        noise_steps = 0;
      }
      if (early_var >= 0 && x[early_var] < early_thresh) {
        out.x = x;
        out.early = true;
        return out;
      }
    }
    out.x = x;
    out.gap = pr.degree / t;
    if (stalled) return out;
    if (out.gap <= tol) {
      out.converged = true;
      return out;
    }
    t *= kBarrierGrowth;
  }
  return out;
}

void audit_point(const SdpProblem& p, const Eigen::VectorXd& x, double* min_eig,
                 double* max_viol) {
  double me = kInf;
  for (const auto& blk : p.blocks) {
    Eigen::MatrixXd f = blk.constant;
    for (const auto& [idx, m] : blk.terms) f.noalias() += x[idx] * m;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (f + f.transpose()),
                                                      Eigen::EigenvaluesOnly);
    me = std::min(me, es.eigenvalues().minCoeff());
  }
  if (p.blocks.empty()) me = 0.0;
  double mv = 0.0;
  for (const auto& lc : p.linear) {
    double r = lc.coeffs.dot(x) - lc.bound;
    mv = std::max(mv, lc.sense == Sense::kEqual ? std::abs(r) : std::max(0.0, r));
  }
  *min_eig = me;
  *max_viol = mv;
}

enum class PhaseOne { kFeasible, kInfeasible, kBudget };

// Find a strictly feasible point by minimizing the uniform infeasibility s over
// the relaxed system F(x) + s I >= 0, a.x - s <= b. The search region is kept
// bounded (s >= -1 and a generous box on x), so the minimization terminates even
// when the target feasible set is unbounded.
PhaseOne phase_one(const SdpProblem& p, const Prepared& pr_main, Eigen::VectorXd* x_out,
                   int budget, int* steps) {
  const int n = p.num_vars;
  SdpProblem q;
  q.num_vars = n + 1;
  q.objective = Eigen::VectorXd::Zero(n + 1);
  q.objective[n] = 1.0;
  for (const auto& blk : p.blocks) {
    LmiBlock b2;
    b2.constant = blk.constant;
    b2.terms = blk.terms;
    b2.terms.push_back({n, Eigen::MatrixXd::Identity(blk.constant.rows(), blk.constant.rows())});
    q.blocks.push_back(std::move(b2));
  }
  for (const auto& lc : p.linear) {
    LinearConstraint l2;
    l2.coeffs = Eigen::VectorXd::Zero(n + 1);
    l2.coeffs.head(n) = lc.coeffs;
    l2.bound = lc.bound;
    l2.sense = lc.sense;
    if (lc.sense == Sense::kLessEq) l2.coeffs[n] = -1.0;
    q.linear.push_back(std::move(l2));
  }
  {
    LinearConstraint floor;  // s >= -1 bounds the objective below
    floor.coeffs = Eigen::VectorXd::Zero(n + 1);
    floor.coeffs[n] = -1.0;
    floor.bound = 1.0;
    q.linear.push_back(std::move(floor));
  }

  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n);
  if (pr_main.a_eq.rows() > 0) {
    Eigen::MatrixXd aat = pr_main.a_eq * pr_main.a_eq.transpose();
    aat.diagonal().array() += 1e-12 * (1.0 + aat.trace() / aat.rows());
    x0 = pr_main.a_eq.transpose() * Eigen::LLT<Eigen::MatrixXd>(aat).solve(pr_main.b_eq);
  }
  const double r_box = 1e6 * (1.0 + (n > 0 ? x0.cwiseAbs().maxCoeff() : 0.0));
  for (int i = 0; i < n; ++i) {
    LinearConstraint lo, hi;
    lo.coeffs = Eigen::VectorXd::Zero(n + 1);
    lo.coeffs[i] = -1.0;
    lo.bound = r_box;
    hi.coeffs = Eigen::VectorXd::Zero(n + 1);
    hi.coeffs[i] = 1.0;
    hi.bound = r_box;
    q.linear.push_back(std::move(lo));
    q.linear.push_back(std::move(hi));
  }

  double deficit = 0.0;
  for (const auto& blk : p.blocks) {
    Eigen::MatrixXd f = blk.constant;
    for (const auto& [idx, m] : blk.terms) f.noalias() += x0[idx] * m;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (f + f.transpose()),
                                                      Eigen::EigenvaluesOnly);
    deficit = std::max(deficit, -es.eigenvalues().minCoeff());
  }
  for (const auto& lc : p.linear)
    if (lc.sense == Sense::kLessEq) deficit = std::max(deficit, lc.coeffs.dot(x0) - lc.bound);

  Eigen::VectorXd z0(n + 1);
  z0 << x0, 1.0 + 1.5 * deficit;
  Prepared pq = prepare(q);
  CoreOut r = barrier_minimize(pq, q.objective, z0, 1e-6, budget, steps, n, -kPhaseOneMargin);
  *x_out = r.x.head(n);
  if (r.early || r.x[n] < -kPhaseOneMargin) return PhaseOne::kFeasible;
  if (r.converged) return PhaseOne::kInfeasible;
  return PhaseOne::kBudget;
}

}  // namespace

SdpSolution solve_sdp(const SdpProblem& p, double tol, int max_iter) {
  validate_problem(p);
  if (!(tol > 0.0)) throw std::invalid_argument("sdp: tol must be positive");
  if (max_iter <= 0) throw std::invalid_argument("sdp: max_iter must be positive");
  Prepared pr = prepare(p);
  int steps = 0;
  SdpSolution sol;

  Eigen::VectorXd x;
  bool have_start = false;
  if (p.start.size() == p.num_vars) {
    x = p.start;
    if (pr.a_eq.rows() > 0) {
      Eigen::VectorXd resid = pr.b_eq - pr.a_eq * x;
      if (resid.cwiseAbs().maxCoeff() > 0.0) {
        Eigen::MatrixXd aat = pr.a_eq * pr.a_eq.transpose();
        aat.diagonal().array() += 1e-12 * (1.0 + aat.trace() / aat.rows());
        x += pr.a_eq.transpose() * Eigen::LLT<Eigen::MatrixXd>(aat).solve(resid);
      }
    }
    have_start = eval_point(pr, x, nullptr, nullptr, nullptr);
  }
  if (!have_start) {
    PhaseOne verdict = phase_one(p, pr, &x, max_iter, &steps);
    if (verdict != PhaseOne::kFeasible) {
      sol.x = x;
      sol.objective = p.objective.dot(x);
      sol.status =
          verdict == PhaseOne::kInfeasible ? SdpStatus::kInfeasible : SdpStatus::kMaxIter;
      sol.newton_steps = steps;
      audit_point(p, sol.x, &sol.min_block_eig, &sol.max_linear_violation);
      return sol;
    }
  }

  CoreOut r = barrier_minimize(pr, p.objective, x, tol, max_iter, &steps, -1, 0.0);
  sol.x = r.x;
  sol.objective = p.objective.dot(r.x);
  sol.status = r.converged ? SdpStatus::kOptimal : SdpStatus::kMaxIter;
  sol.gap_surrogate = r.gap;
  sol.newton_steps = steps;
  audit_point(p, sol.x, &sol.min_block_eig, &sol.max_linear_violation);
  return sol;
}

VerifyReport verify_solution(const SdpProblem& p, const SdpSolution& s, double tol) {
  validate_problem(p);
  if (s.x.size() != p.num_vars)
    throw std::invalid_argument("sdp verify: solution size mismatch");
  VerifyReport rep;
  double me = kInf;
  for (const auto& blk : p.blocks) {
    Eigen::MatrixXd f = blk.constant;
    for (const auto& [idx, m] : blk.terms) f.noalias() += s.x[idx] * m;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (f + f.transpose()),
                                                      Eigen::EigenvaluesOnly);
    me = std::min(me, es.eigenvalues().minCoeff());
  }
  rep.min_block_eig = p.blocks.empty() ? 0.0 : me;
  for (const auto& lc : p.linear) {
    double r = lc.coeffs.dot(s.x) - lc.bound;
    if (lc.sense == Sense::kEqual)
      rep.max_equality_violation = std::max(rep.max_equality_violation, std::abs(r));
    else
      rep.max_inequality_violation = std::max(rep.max_inequality_violation, std::max(0.0, r));
  }
  double obj = p.objective.dot(s.x);
  rep.objective_abs_error = std::abs(obj - s.objective);
  rep.ok = rep.min_block_eig >= -tol && rep.max_inequality_violation <= tol &&
           rep.max_equality_violation <= tol &&
           rep.objective_abs_error <= tol * (1.0 + std::abs(obj));
  return rep;
}

std::string dump_problem(const SdpProblem& p) {
  std::ostringstream os;
  os << "sdp standard form\n";
  os << "variables: " << p.num_vars << "\n";
  os << "minimize: [" << p.objective.transpose() << "]\n";
  for (size_t b = 0; b < p.blocks.size(); ++b) {
    const auto& blk = p.blocks[b];
    os << "block " << b << " (" << blk.constant.rows() << "x" << blk.constant.cols()
       << ") constant:\n"
       << blk.constant << "\n";
    for (const auto& [idx, m] : blk.terms) os << "  + x[" << idx << "] *\n" << m << "\n";
  }
  for (size_t k = 0; k < p.linear.size(); ++k) {
    const auto& lc = p.linear[k];
    os << "linear " << k << ": [" << lc.coeffs.transpose() << "] "
       << (lc.sense == Sense::kEqual ? "==" : "<=") << " " << lc.bound << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Power-allocation assemblies.

namespace {

// Packing order for a symmetric 3x3 variable: diag(0,0),(1,1),(2,2) then
// off-diagonals (0,1),(0,2),(1,2).
constexpr int kSymIdx[6][2] = {{0, 0}, {1, 1}, {2, 2}, {0, 1}, {0, 2}, {1, 2}};

// Clamp powers strictly inside the per-beam box, then rescale any group that
// sits on (or past) its budget so the start point is strictly interior.
void interiorize(Eigen::VectorXd* p0, double cap,
                 const std::vector<std::pair<std::vector<int>, double>>& budgets) {
  const double margin = 1e-7;
  for (int i = 0; i < p0->size(); ++i)
    (*p0)[i] = std::clamp((*p0)[i], margin * cap, (1.0 - margin) * cap);
  for (const auto& [vars, budget] : budgets) {
    double total = 0.0;
    for (int v : vars) total += (*p0)[v];
    double limit = (1.0 - margin) * budget;
    if (total > limit)
      for (int v : vars) (*p0)[v] *= limit / total;
  }
}

}  // namespace

Eigen::VectorXd PowerSdpLayout::extract_powers_w(const Eigen::VectorXd& x) const {
  if (x.size() < num_power_vars)
    throw std::invalid_argument("power sdp: solution vector too short");
  return x.head(num_power_vars) * power_scale_w;
}

double PowerSdpLayout::objective_km2(const SdpSolution& s) const {
  return s.objective * objective_scale;
}

PowerSdpLayout assemble_power_sdp(const PowerSdpInputs& in) {
  const int np = in.num_power_vars;
  const int nj = static_cast<int>(in.users.size());
  if (np <= 0) throw std::invalid_argument("power sdp: no power variables");
  if (nj == 0) throw std::invalid_argument("power sdp: no users");
  if (!(in.p_tot_beam_w > 0.0)) throw std::invalid_argument("power sdp: beam cap must be positive");
  if (in.start_powers_w.size() != np)
    throw std::invalid_argument("power sdp: start power size mismatch");
  for (const auto& u : in.users) {
    if (u.rows.size() < 3)
      throw std::invalid_argument("power sdp: a user needs at least three cooperating rows");
    if (u.rows.size() != u.power_var.size() || u.rows.size() != u.kappa.size())
      throw std::invalid_argument("power sdp: user row/var/kappa size mismatch");
    for (int v : u.power_var)
      if (v < 0 || v >= np) throw std::invalid_argument("power sdp: power variable out of range");
    for (double k : u.kappa)
      if (!(k > 0.0)) throw std::invalid_argument("power sdp: kappa must be positive");
  }
  for (const auto& [vars, budget] : in.sat_budgets) {
    if (!(budget > 0.0)) throw std::invalid_argument("power sdp: budget must be positive");
    for (int v : vars)
      if (v < 0 || v >= np) throw std::invalid_argument("power sdp: budget variable out of range");
  }

  const double cap = in.p_tot_beam_w;
  Eigen::VectorXd p0 = in.start_powers_w;
  interiorize(&p0, cap, in.sat_budgets);

  // Start information matrices and the scale normalizing their entries to O(1).
  std::vector<Eigen::Matrix3d> y0(nj);
  double s_y = 0.0, s_x = 0.0;
  for (int j = 0; j < nj; ++j) {
    const auto& u = in.users[j];
    Eigen::Matrix3d y = Eigen::Matrix3d::Zero();
    for (size_t r = 0; r < u.rows.size(); ++r)
      y.noalias() += u.kappa[r] * p0[u.power_var[r]] * (u.rows[r] * u.rows[r].transpose());
    Eigen::LLT<Eigen::Matrix3d> llt(y);
    if (llt.info() != Eigen::Success)
      throw std::domain_error("power sdp: degenerate positioning geometry for a user");
    y0[j] = y;
    s_y = std::max(s_y, y.cwiseAbs().maxCoeff());
    s_x = std::max(s_x, in.users[j].frozen_v.squaredNorm());
  }
  if (s_x <= 0.0) s_x = 1.0;

  const int n = np + 12 * nj;
  auto w_base = [&](int j) { return np + 12 * j; };
  auto x_base = [&](int j) { return np + 12 * j + 6; };

  SdpProblem prob;
  prob.num_vars = n;
  Eigen::VectorXd c_raw = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n);
  x0.head(np) = p0 / cap;

  for (int j = 0; j < nj; ++j) {
    const auto& u = in.users[j];
    // Epigraph block [[Y~, I], [I, W~]] >= 0 so that tr W >= tr Y^-1.
    LmiBlock epi;
    epi.constant = Eigen::MatrixXd::Zero(6, 6);
    epi.constant.block(0, 3, 3, 3) = Eigen::Matrix3d::Identity();
    epi.constant.block(3, 0, 3, 3) = Eigen::Matrix3d::Identity();
    std::map<int, Eigen::Matrix3d> acc;
    for (size_t r = 0; r < u.rows.size(); ++r) {
      Eigen::Matrix3d term = (u.kappa[r] * cap / s_y) * (u.rows[r] * u.rows[r].transpose());
      auto it = acc.find(u.power_var[r]);
      if (it == acc.end())
        acc.emplace(u.power_var[r], term);
      else
        it->second += term;
    }
    for (const auto& [var, m3] : acc) {
      Eigen::MatrixXd t6 = Eigen::MatrixXd::Zero(6, 6);
      t6.block(0, 0, 3, 3) = m3;
      epi.terms.push_back({var, std::move(t6)});
    }
    for (int k = 0; k < 6; ++k) {
      Eigen::MatrixXd t6 = Eigen::MatrixXd::Zero(6, 6);
      t6(3 + kSymIdx[k][0], 3 + kSymIdx[k][1]) = 1.0;
      t6(3 + kSymIdx[k][1], 3 + kSymIdx[k][0]) = 1.0;
      epi.terms.push_back({w_base(j) + k, std::move(t6)});
    }
    prob.blocks.push_back(std::move(epi));

    // Correction block [[1, v~^T], [v~, X~]] >= 0 so that X >= v v^T.
    Eigen::Vector3d vt = u.frozen_v / std::sqrt(s_x);
    LmiBlock corr;
    corr.constant = Eigen::MatrixXd::Zero(4, 4);
    corr.constant(0, 0) = 1.0;
    corr.constant.block(1, 0, 3, 1) = vt;
    corr.constant.block(0, 1, 1, 3) = vt.transpose();
    for (int k = 0; k < 6; ++k) {
      Eigen::MatrixXd t4 = Eigen::MatrixXd::Zero(4, 4);
      t4(1 + kSymIdx[k][0], 1 + kSymIdx[k][1]) = 1.0;
      t4(1 + kSymIdx[k][1], 1 + kSymIdx[k][0]) = 1.0;
      corr.terms.push_back({x_base(j) + k, std::move(t4)});
    }
    prob.blocks.push_back(std::move(corr));

    // Objective: mean over users of tr W + tr X (in km^2).
    for (int k = 0; k < 3; ++k) {
      c_raw[w_base(j) + k] = 1.0 / (nj * s_y);
      c_raw[x_base(j) + k] = s_x / nj;
    }

    // Strictly feasible start: W~ = 2 (Y~0)^-1, X~ = v~ v~^T + I.
    Eigen::Matrix3d y_t = y0[j] / s_y;
    Eigen::Matrix3d w0 = 2.0 * Eigen::LLT<Eigen::Matrix3d>(y_t).solve(Eigen::Matrix3d::Identity());
    Eigen::Matrix3d xx0 = vt * vt.transpose() + Eigen::Matrix3d::Identity();
    for (int k = 0; k < 6; ++k) {
      x0[w_base(j) + k] = w0(kSymIdx[k][0], kSymIdx[k][1]);
      x0[x_base(j) + k] = xx0(kSymIdx[k][0], kSymIdx[k][1]);
    }
  }

  for (int i = 0; i < np; ++i) {
    LinearConstraint hi, lo;
    hi.coeffs = Eigen::VectorXd::Zero(n);
    hi.coeffs[i] = 1.0;
    hi.bound = 1.0;
    lo.coeffs = Eigen::VectorXd::Zero(n);
    lo.coeffs[i] = -1.0;
    lo.bound = 0.0;
    prob.linear.push_back(std::move(hi));
    prob.linear.push_back(std::move(lo));
  }
  for (const auto& [vars, budget] : in.sat_budgets) {
    LinearConstraint lc;
    lc.coeffs = Eigen::VectorXd::Zero(n);
    for (int v : vars) lc.coeffs[v] += 1.0;
    lc.bound = budget / cap;
    prob.linear.push_back(std::move(lc));
  }

  double s_obj = c_raw.dot(x0);
  if (!(s_obj > 0.0)) s_obj = 1.0;
  prob.objective = c_raw / s_obj;
  prob.start = x0;

  PowerSdpLayout out;
  out.problem = std::move(prob);
  out.power_scale_w = cap;
  out.objective_scale = s_obj;
  out.num_power_vars = np;
  return out;
}

PowerSdpLayout assemble_reference_power_sdp(const RefPowerSdpInputs& in) {
  const int np = in.num_power_vars;
  const int nj = static_cast<int>(in.users.size());
  if (np <= 0) throw std::invalid_argument("ref power sdp: no power variables");
  if (nj == 0) throw std::invalid_argument("ref power sdp: no users");
  if (!(in.p_tot_beam_w > 0.0) || !(in.sat_budget_w > 0.0))
    throw std::invalid_argument("ref power sdp: caps must be positive");
  if (in.start_powers_w.size() != np)
    throw std::invalid_argument("ref power sdp: start power size mismatch");
  for (const auto& u : in.users) {
    if (u.power_var < 0 || u.power_var >= np)
      throw std::invalid_argument("ref power sdp: power variable out of range");
    if (!(u.kappa > 0.0)) throw std::invalid_argument("ref power sdp: kappa must be positive");
    if (u.g_km2 < 0.0 || u.d_per_s2 < 0.0)
      throw std::invalid_argument("ref power sdp: negative numerator or offset");
  }

  const double cap = in.p_tot_beam_w;
  Eigen::VectorXd p0 = in.start_powers_w;
  std::vector<std::pair<std::vector<int>, double>> budget_groups;
  {
    std::vector<int> all(np);
    for (int i = 0; i < np; ++i) all[i] = i;
    budget_groups.push_back({all, in.sat_budget_w});
  }
  interiorize(&p0, cap, budget_groups);

  double s_den = 0.0, s_corr = 0.0;
  std::vector<double> den0(nj);
  for (int j = 0; j < nj; ++j) {
    const auto& u = in.users[j];
    den0[j] = u.kappa * p0[u.power_var] + u.d_per_s2;
    s_den = std::max(s_den, den0[j]);
    if (u.g_km2 > 0.0) s_corr = std::max(s_corr, u.g_km2 / den0[j]);
  }
  if (!(s_den > 0.0)) throw std::domain_error("ref power sdp: zero denominators");
  if (s_corr <= 0.0) s_corr = 1.0;

  const int n = np + nj;  // powers then per-user epigraph scalars
  SdpProblem prob;
  prob.num_vars = n;
  Eigen::VectorXd c_raw = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n);
  x0.head(np) = p0 / cap;

  for (int j = 0; j < nj; ++j) {
    const auto& u = in.users[j];
    // [[tau~, q], [q, den~(p~)]] >= 0 encodes tau >= g / (kappa P + d).
    double q = std::sqrt(u.g_km2 / (s_corr * s_den));
    LmiBlock blk;
    blk.constant = Eigen::MatrixXd::Zero(2, 2);
    blk.constant(0, 1) = blk.constant(1, 0) = q;
    blk.constant(1, 1) = u.d_per_s2 / s_den;
    Eigen::MatrixXd t_tau = Eigen::MatrixXd::Zero(2, 2);
    t_tau(0, 0) = 1.0;
    blk.terms.push_back({np + j, std::move(t_tau)});
    Eigen::MatrixXd t_pow = Eigen::MatrixXd::Zero(2, 2);
    t_pow(1, 1) = u.kappa * cap / s_den;
    blk.terms.push_back({u.power_var, std::move(t_pow)});
    prob.blocks.push_back(std::move(blk));

    c_raw[np + j] = s_corr / nj;
    x0[np + j] = u.g_km2 > 0.0 ? 2.0 * (u.g_km2 / den0[j]) / s_corr : 1.0;
  }

  for (int i = 0; i < np; ++i) {
    LinearConstraint hi, lo;
    hi.coeffs = Eigen::VectorXd::Zero(n);
    hi.coeffs[i] = 1.0;
    hi.bound = 1.0;
    lo.coeffs = Eigen::VectorXd::Zero(n);
    lo.coeffs[i] = -1.0;
    lo.bound = 0.0;
    prob.linear.push_back(std::move(hi));
    prob.linear.push_back(std::move(lo));
  }
  {
    LinearConstraint lc;
    lc.coeffs = Eigen::VectorXd::Zero(n);
    lc.coeffs.head(np).setOnes();
    lc.bound = in.sat_budget_w / cap;
    prob.linear.push_back(std::move(lc));
  }

  double s_obj = c_raw.dot(x0);
  if (!(s_obj > 0.0)) s_obj = 1.0;
  prob.objective = c_raw / s_obj;
  prob.start = x0;

  PowerSdpLayout out;
  out.problem = std::move(prob);
  out.power_scale_w = cap;
  out.objective_scale = s_obj;
  out.num_power_vars = np;
  return out;
}

}  // namespace leopos
