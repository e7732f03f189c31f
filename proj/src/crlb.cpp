// SPDX-License-Identifier: Apache-2.0
#include "leopos/crlb.hpp"

#include <cmath>
#include <stdexcept>

#include "leopos/common.hpp"

namespace leopos {

namespace {

void validate_signal(const SignalSpec& spec) {
  if (spec.num_symbols < 1) throw std::invalid_argument("num_symbols must be >= 1");
  if (spec.num_subcarriers < 2 || spec.num_subcarriers % 2 != 0)
    throw std::invalid_argument("num_subcarriers must be even and >= 2");
  if (spec.symbol_energy <= 0.0) throw std::invalid_argument("symbol_energy must be positive");
  if (spec.symbol_duration_s <= 0.0)
    throw std::invalid_argument("symbol_duration_s must be positive");
}

void validate_variances(const ToaStats& toa) {
  if (toa.sigma_sq_s2.size() < 2)
    throw std::invalid_argument("at least two satellites are required for TDOA");
  if (toa.ref_index < 0 || static_cast<size_t>(toa.ref_index) >= toa.sigma_sq_s2.size())
    throw std::invalid_argument("reference index out of range");
  for (double s2 : toa.sigma_sq_s2)
    if (!(s2 > 0.0) || std::isinf(s2))
      throw std::invalid_argument("every TOA variance must be finite and positive");
}

}  // namespace

double gamma_term(const SignalSpec& spec) {
  validate_signal(spec);
  // sum_{k=-K/2}^{K/2-1} k^2 = sum_{1}^{K/2} k^2 + sum_{1}^{K/2-1} k^2.
  long long m = spec.num_subcarriers / 2;
  long long sum_k2 = m * (m + 1) * (2 * m + 1) / 6 + (m - 1) * m * (2 * m - 1) / 6;
  return spec.num_symbols * spec.symbol_energy * static_cast<double>(sum_k2);
}

double toa_variance(double beta_linear, int delta, const SignalSpec& spec) {
  if (!(beta_linear > 0.0)) throw std::invalid_argument("SINR must be positive");
  if (delta != 0 && delta != 1) throw std::invalid_argument("association must be 0 or 1");
  if (delta == 0) return kInf;
  double ts = spec.symbol_duration_s;
  return ts * ts / (8.0 * kPi * kPi * beta_linear * gamma_term(spec));
}

Eigen::MatrixXd build_A(const GroundPosition& ue, const std::vector<SatelliteState>& sats,
                        int ref_index) {
  const int n = static_cast<int>(sats.size());
  if (n < 4) throw std::invalid_argument("TDOA positioning requires at least 4 satellites");
  if (ref_index < 0 || ref_index >= n)
    throw std::invalid_argument("reference index out of range");

  auto unit_from_sat = [&](const SatelliteState& s) {
    Eigen::Vector3d diff = ue.ecef_km - s.position_km;
    double d = diff.norm();
    if (d <= 0.0) throw std::domain_error("user colocated with a positioning satellite");
    return Eigen::Vector3d(diff / d);
  };

  Eigen::Vector3d ref_unit = unit_from_sat(sats[ref_index]);
  Eigen::MatrixXd a(n - 1, 3);
  int row = 0;
  for (int i = 0; i < n; ++i) {
    if (i == ref_index) continue;
    a.row(row++) = ((unit_from_sat(sats[i]) - ref_unit) / kSpeedOfLightKmPerS).transpose();
  }
  return a;
}

Eigen::MatrixXd build_R(const ToaStats& toa) {
  validate_variances(toa);
  const int n = static_cast<int>(toa.sigma_sq_s2.size());
  const double ref_var = toa.sigma_sq_s2[toa.ref_index];
  Eigen::MatrixXd r = Eigen::MatrixXd::Constant(n - 1, n - 1, ref_var);
  int row = 0;
  for (int i = 0; i < n; ++i) {
    if (i == toa.ref_index) continue;
    r(row, row) += toa.sigma_sq_s2[i];
    ++row;
  }
  return r;
}

double tdoa_crlb_m(const Eigen::MatrixXd& A, const Eigen::MatrixXd& R) {
  if (A.cols() != 3) throw std::invalid_argument("geometry matrix must have 3 columns");
  if (A.rows() != R.rows() || R.rows() != R.cols())
    throw std::invalid_argument("geometry and covariance dimensions disagree");
  if (A.rows() < 3)
    throw std::invalid_argument("at least 3 TDOA rows are required for a 3-D fix");

  Eigen::LLT<Eigen::MatrixXd> llt(R);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("TDOA covariance is not positive definite");
  Eigen::Matrix3d fim = A.transpose() * llt.solve(A);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(fim);
  double max_eig = es.eigenvalues().maxCoeff();
  if (!(max_eig > 0.0) || es.eigenvalues().minCoeff() <= 1e-12 * max_eig)
    throw std::domain_error("degenerate positioning geometry (rank-deficient information)");
  double crlb_sq_km2 = es.eigenvalues().cwiseInverse().sum();
  return 1000.0 * std::sqrt(crlb_sq_km2);
}

InvRDecomposition inv_r_decomposition(const ToaStats& toa) {
  validate_variances(toa);
  const int n = static_cast<int>(toa.sigma_sq_s2.size());
  InvRDecomposition dec;
  dec.omega = 0.0;
  for (double s2 : toa.sigma_sq_s2) dec.omega += 1.0 / s2;

  Eigen::VectorXd w(n - 1);
  int row = 0;
  for (int i = 0; i < n; ++i) {
    if (i == toa.ref_index) continue;
    w[row++] = 1.0 / toa.sigma_sq_s2[i];
  }
  dec.r0_inv = w.asDiagonal();
  dec.h = (w * w.transpose()) / dec.omega;
  return dec;
}

DecomposedCrlb crlb_decomposed(const Eigen::MatrixXd& A, const ToaStats& toa) {
  validate_variances(toa);
  const int m = static_cast<int>(toa.sigma_sq_s2.size()) - 1;
  if (A.rows() != m || A.cols() != 3)
    throw std::invalid_argument("geometry matrix does not match the variance set");

  Eigen::VectorXd w(m);
  double omega = 0.0;
  for (double s2 : toa.sigma_sq_s2) omega += 1.0 / s2;
  int row = 0;
  for (size_t i = 0; i < toa.sigma_sq_s2.size(); ++i) {
    if (static_cast<int>(i) == toa.ref_index) continue;
    w[row++] = 1.0 / toa.sigma_sq_s2[i];
  }

  Eigen::Matrix3d y = A.transpose() * w.asDiagonal() * A;
  Eigen::LLT<Eigen::Matrix3d> llt(y);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("diagonal-information matrix is singular");

  DecomposedCrlb out;
  out.trace_y_inv_km2 = llt.solve(Eigen::Matrix3d::Identity()).trace();
  // Z = A^T H A = z z^T with z = A^T w / sqrt(Omega); the pseudo-inverse factor
  // (Z - Z Y^-1 Z)^+ on Z's range collapses to the scalar 1/(1 - z^T Y^-1 z).
  Eigen::Vector3d z = (A.transpose() * w) / std::sqrt(omega);
  Eigen::Vector3d yz = llt.solve(z);
  double alpha = 1.0 - z.dot(yz);
  if (alpha <= 1e-14)
    throw std::domain_error("information correction is numerically singular");
  out.correction_km2 = yz.squaredNorm() / alpha;
  return out;
}

}  // namespace leopos
