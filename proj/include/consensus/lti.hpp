#pragma once

#include <Eigen/Core>

#include <complex>
#include <vector>

namespace consensus::lti {

/// The agent model (A, B): n states, m inputs, common to all agents.
struct Plant {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;

  Plant() = default;
  Plant(Eigen::MatrixXd A_in, Eigen::MatrixXd B_in);

  int state_dim() const { return static_cast<int>(A.rows()); }
  int input_dim() const { return static_cast<int>(B.cols()); }
};

/// [B, AB, ..., A^{n-1}B], an n x (n*m) matrix.
Eigen::MatrixXd controllability_matrix(const Plant& p);

/// [C; CA; ...; CA^{n-1}] stacked, a (q*n) x n matrix.
Eigen::MatrixXd observability_matrix(const Eigen::Ref<const Eigen::MatrixXd>& A,
                                     const Eigen::Ref<const Eigen::MatrixXd>& C);

/// Kalman rank test with a relative singular-value threshold.
bool is_controllable(const Plant& p, double tol = 1e-8);

bool is_observable(const Eigen::Ref<const Eigen::MatrixXd>& A,
                   const Eigen::Ref<const Eigen::MatrixXd>& C, double tol = 1e-8);

/// True iff every eigenvalue of A has real part >= -tol.
bool spectrum_in_closed_rhp(const Eigen::Ref<const Eigen::MatrixXd>& A, double tol = 1e-9);

/// True iff all eigenvalues are (numerically) on the imaginary axis and
/// semisimple, i.e. A admits P > 0 with A^T P + P A = 0.
bool is_neutrally_stable(const Eigen::Ref<const Eigen::MatrixXd>& A, double tol = 1e-8);

/// One eigenvalue of A with a left eigenvector v (unit norm, v^H A = lambda v^H)
/// and the PBH verdict: controllable=false iff ||v^H B|| <= tol. `degenerate`
/// marks eigenvalues whose geometric multiplicity falls short of the algebraic
/// one; their eigenvector is a representative of the Jordan-chain head.
struct ModeReport {
  std::complex<double> eigenvalue;
  Eigen::VectorXcd left_eigenvector;
  bool controllable = true;
  bool degenerate = false;
};

/// PBH mode analysis: one report per eigenvalue of A. Conjugate pairs share
/// their controllability flag. Agrees with is_controllable at the same tol.
std::vector<ModeReport> pbh_modes(const Plant& p, double tol = 1e-8);

/// Matrix exponential e^A via scaling-and-squaring with a diagonal Pade
/// approximant. Throws on non-finite entries.
Eigen::MatrixXd expm(const Eigen::Ref<const Eigen::MatrixXd>& A);

/// e^{A t}.
Eigen::MatrixXd expm(const Eigen::Ref<const Eigen::MatrixXd>& A, double t);

}  // namespace consensus::lti
