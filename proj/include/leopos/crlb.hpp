// SPDX-License-Identifier: Apache-2.0
// TOA measurement variance, TDOA positioning CRLB assembly, and the
// rank-one covariance decomposition used by the power optimizer.
#pragma once

#include <vector>

#include <Eigen/Dense>

#include "leopos/geometry.hpp"

namespace leopos {

// OFDM reference-signal shape for TOA measurement.
struct SignalSpec {
  int num_symbols = 4;                       // Ns
  int num_subcarriers = 240;                 // K (even, >= 2); indices -K/2 .. K/2-1
  double symbol_energy = 1.0;                // flat |S_l(k)|^2
  double symbol_duration_s = 1.0 / 15000.0;  // Ts (15 kHz subcarrier spacing)
};

// Per-satellite TOA variance set for one user. sigma_sq_s2[i] may be +infinity
// (satellite unusable); ref_index designates the TDOA reference satellite.
struct ToaStats {
  std::vector<double> sigma_sq_s2;
  int ref_index = 0;
};

// Gamma = sum_l sum_k k^2 |S_l(k)|^2 over k in [-K/2, K/2).
double gamma_term(const SignalSpec& spec);

// TOA variance Ts^2 / (8 pi^2 beta delta Gamma) in s^2; +infinity when delta = 0.
double toa_variance(double beta_linear, int delta, const SignalSpec& spec);

// TDOA geometry matrix, (N-1) x 3 in s/km: row for satellite i != ref is
// (1/c)[unit(s - s_i) - unit(s - s_ref)]^T, rows in satellite order with ref skipped.
Eigen::MatrixXd build_A(const GroundPosition& ue, const std::vector<SatelliteState>& sats,
                        int ref_index);

// TDOA covariance, (N-1) x (N-1) in s^2: diag(sigma_i^2, i != ref) + sigma_ref^2 * 11^T.
Eigen::MatrixXd build_R(const ToaStats& toa);

// sqrt(tr{(A^T R^-1 A)^-1}), reported in meters. Throws on rank-deficient geometry.
double tdoa_crlb_m(const Eigen::MatrixXd& A, const Eigen::MatrixXd& R);

// Matrix-inversion-lemma split of R^-1 into a diagonal part minus a rank-one part:
// R^-1 = R0^-1 - H with R0^-1 = diag(1/sigma_i^2) and H = w w^T / Omega,
// w_i = 1/sigma_i^2 (non-reference), Omega = sum over ALL satellites of 1/sigma_i^2.
struct InvRDecomposition {
  Eigen::MatrixXd r0_inv;
  Eigen::MatrixXd h;
  double omega = 0.0;
};
InvRDecomposition inv_r_decomposition(const ToaStats& toa);

// Squared-CRLB split driven by the decomposition: with Y = A^T R0^-1 A and the
// rank-one Z = A^T H A, total squared CRLB (km^2) = trace_y_inv + correction where
// correction = tr{Y^-1 Z (Z - Z Y^-1 Z)^+ Z Y^-1} evaluated on Z's range.
struct DecomposedCrlb {
  double trace_y_inv_km2 = 0.0;
  double correction_km2 = 0.0;
};
DecomposedCrlb crlb_decomposed(const Eigen::MatrixXd& A, const ToaStats& toa);

}  // namespace leopos
