#pragma once

#include <Eigen/Core>

#include <functional>

namespace consensus::design {

/// Reorders a real Schur decomposition (T quasi upper triangular, U
/// orthogonal) in place so that every diagonal block whose eigenvalues
/// satisfy `select` is moved to the top-left. Adjacent 1x1/2x2 blocks are
/// swapped through small Sylvester solves followed by an orthogonal update
/// (the LAPACK dtrexc approach). Returns the dimension of the leading
/// invariant subspace, i.e. the number of selected eigenvalues.
int reorder_schur(Eigen::MatrixXd& T, Eigen::MatrixXd& U,
                  const std::function<bool(const std::complex<double>&)>& select);

/// Solves the Sylvester equation A X - X B = C by a dense Kronecker solve.
/// Intended for small blocks; throws when the pencil is singular.
Eigen::MatrixXd solve_sylvester(const Eigen::Ref<const Eigen::MatrixXd>& A,
                                const Eigen::Ref<const Eigen::MatrixXd>& B,
                                const Eigen::Ref<const Eigen::MatrixXd>& C);

/// Solves the continuous Lyapunov equation A^T X + X A + W = 0 for symmetric
/// W (dense Kronecker solve; A must have no eigenvalue pair summing to zero,
/// which holds in particular for Hurwitz A).
Eigen::MatrixXd solve_lyapunov(const Eigen::Ref<const Eigen::MatrixXd>& A,
                               const Eigen::Ref<const Eigen::MatrixXd>& W);

}  // namespace consensus::design
