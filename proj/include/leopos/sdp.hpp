// SPDX-License-Identifier: Apache-2.0
// Small dense semidefinite-program solver (logarithmic-barrier interior point)
// and the standard-form assemblies for the per-cluster power-allocation steps.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "leopos/common.hpp"

namespace leopos {

// One linear-matrix-inequality block: constant + sum_i x_i * terms[i] must be PSD.
struct LmiBlock {
  Eigen::MatrixXd constant;
  std::vector<std::pair<int, Eigen::MatrixXd>> terms;  // (variable index, symmetric matrix)
};

enum class Sense { kLessEq, kEqual };

struct LinearConstraint {
  Eigen::VectorXd coeffs;
  double bound = 0.0;
  Sense sense = Sense::kLessEq;
};

struct SdpProblem {
  int num_vars = 0;
  Eigen::VectorXd objective;  // minimize objective . x
  std::vector<LmiBlock> blocks;
  std::vector<LinearConstraint> linear;
  Eigen::VectorXd start;  // optional strictly feasible start; size 0 invokes phase I
};

enum class SdpStatus { kOptimal, kInfeasible, kMaxIter };

struct SdpSolution {
  Eigen::VectorXd x;
  double objective = 0.0;
  SdpStatus status = SdpStatus::kMaxIter;
  double gap_surrogate = kInf;          // barrier-degree / t at exit
  double min_block_eig = -kInf;         // across LMI blocks at x
  double max_linear_violation = kInf;   // inequalities and equalities at x
  int newton_steps = 0;
};

// Deterministic primal log-barrier interior-point solve: Newton steps with
// backtracking line search, dense Cholesky per block, equality constraints kept
// exact through the KKT system. Returns kOptimal when the duality-gap surrogate
// drops to tol, kMaxIter when the Newton-step budget runs out first.
SdpSolution solve_sdp(const SdpProblem& p, double tol = 1e-7, int max_iter = 200);

struct VerifyReport {
  double min_block_eig = 0.0;
  double max_inequality_violation = 0.0;
  double max_equality_violation = 0.0;
  double objective_abs_error = 0.0;
  bool ok = false;
};

// Independent feasibility/objective audit of a returned solution.
VerifyReport verify_solution(const SdpProblem& p, const SdpSolution& s, double tol = 1e-6);

// Plain-text standard-form listing (for external cross-checks).
std::string dump_problem(const SdpProblem& p);

// ---------------------------------------------------------------------------
// Power-allocation assemblies. Interference is frozen at the previous iterate,
// so each non-reference TOA information term is affine in its serving beam's
// power: 1/sigma_i^2 = kappa_i * P_watts.

// Per-user data for the cooperating-satellite (non-reference) power problem.
struct PowerSdpUser {
  // One entry per non-reference positioning satellite of this user.
  std::vector<Eigen::Vector3d> rows;  // TDOA geometry rows a_i in s/km
  std::vector<int> power_var;         // serving-beam power variable per row
  std::vector<double> kappa;          // 1/(s^2 W): information per transmit watt
  Eigen::Vector3d frozen_v = Eigen::Vector3d::Zero();  // frozen correction direction (km)
};

struct PowerSdpInputs {
  int num_power_vars = 0;
  std::vector<PowerSdpUser> users;
  double p_tot_beam_w = 110.0;  // C3 box bound per beam
  // C4: per satellite, the variable indices of its beams and the satellite budget.
  std::vector<std::pair<std::vector<int>, double>> sat_budgets;
  Eigen::VectorXd start_powers_w;  // previous iterate, strictly feasible
};

// Assembled problem plus the scaling needed to map between watts/km^2 and the
// solver's normalized variables.
struct PowerSdpLayout {
  SdpProblem problem;
  double power_scale_w = 0.0;   // watts per unit of a power variable
  double objective_scale = 1.0; // km^2 per unit of solver objective
  int num_power_vars = 0;

  Eigen::VectorXd extract_powers_w(const Eigen::VectorXd& x) const;
  double objective_km2(const SdpSolution& s) const;
};

// Cooperating-satellite power SDP: variables are the active serving-beam powers
// plus per-user 3x3 epigraph matrices W (tr{Y^-1} <= tr{W} via a Schur block) and
// frozen-direction correction matrices X (PSD block X >= v v^T); objective is the
// averaged tr{W} + tr{X}; constraints are the C3 box and per-satellite C4 budgets.
PowerSdpLayout assemble_power_sdp(const PowerSdpInputs& in);

// Per-user data for the reference-satellite power problem: the squared-CRLB
// correction is G / (kappa * P + d) with everything else frozen.
struct RefPowerUser {
  double g_km2 = 0.0;    // numerator (km^2 * 1/s^2 scale folded in)
  double d_per_s2 = 0.0; // frozen denominator offset Omega_rest - g (nonnegative)
  double kappa = 0.0;    // 1/(s^2 W) for the reference serving beam
  int power_var = 0;
};

struct RefPowerSdpInputs {
  int num_power_vars = 0;
  std::vector<RefPowerUser> users;
  double p_tot_beam_w = 110.0;
  double sat_budget_w = 6100.0;
  Eigen::VectorXd start_powers_w;
};

// Reference-satellite power SDP: hyperbolic epigraphs tau_j >= G/(kappa P + d)
// as 2x2 blocks [[tau, sqrt(G)], [sqrt(G), kappa P + d]], averaged objective,
// C3 box and the satellite budget.
PowerSdpLayout assemble_reference_power_sdp(const RefPowerSdpInputs& in);

}  // namespace leopos
