#include "consensus/schur.hpp"

#include <Eigen/Dense>
#include <Eigen/QR>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace consensus::design {

namespace {

// Eigenvalue of a diagonal block (for 2x2 blocks: one of the complex pair;
// selection functions must treat conjugates alike).
std::complex<double> block_eigenvalue(const Eigen::MatrixXd& T, int start, int size) {
  if (size == 1) return {T(start, start), 0.0};
  const double a = T(start, start), b = T(start, start + 1);
  const double c = T(start + 1, start), d = T(start + 1, start + 1);
  const double mean = 0.5 * (a + d);
  const double disc = 0.25 * (a - d) * (a - d) + b * c;
  if (disc >= 0.0) return {mean + std::sqrt(disc), 0.0};
  return {mean, std::sqrt(-disc)};
}

std::vector<std::pair<int, int>> diagonal_blocks(const Eigen::MatrixXd& T) {
  const int n = static_cast<int>(T.rows());
  std::vector<std::pair<int, int>> blocks;
  int i = 0;
  while (i < n) {
    if (i + 1 < n && T(i + 1, i) != 0.0) {
      blocks.emplace_back(i, 2);
      i += 2;
    } else {
      blocks.emplace_back(i, 1);
      i += 1;
    }
  }
  return blocks;
}

// Swaps the adjacent diagonal blocks T11 (p x p at `i1`) and T22 (q x q just
// below) by an orthogonal similarity, updating T and U in place.
void swap_adjacent_blocks(Eigen::MatrixXd& T, Eigen::MatrixXd& U, int i1, int p, int q) {
  const int n = static_cast<int>(T.rows());
  const int w = p + q;
  const Eigen::MatrixXd T11 = T.block(i1, i1, p, p);
  const Eigen::MatrixXd T12 = T.block(i1, i1 + p, p, q);
  const Eigen::MatrixXd T22 = T.block(i1 + p, i1 + p, q, q);

  // T11 Y - Y T22 = -T12, so the columns of [Y; I] span the T22-invariant
  // subspace of [T11 T12; 0 T22].
  const Eigen::MatrixXd Y = solve_sylvester(T11, T22, -T12);
  Eigen::MatrixXd basis(w, q);
  basis.topRows(p) = Y;
  basis.bottomRows(q) = Eigen::MatrixXd::Identity(q, q);

  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
  const Eigen::MatrixXd Qw = qr.householderQ();

  T.block(i1, 0, w, n) = (Qw.transpose() * T.block(i1, 0, w, n)).eval();
  T.block(0, i1, n, w) = (T.block(0, i1, n, w) * Qw).eval();
  U.block(0, i1, n, w) = (U.block(0, i1, n, w) * Qw).eval();

  // the similarity annihilates the block below the new leading block
  T.block(i1 + q, i1, p, q).setZero();
}

}  // namespace

Eigen::MatrixXd solve_sylvester(const Eigen::Ref<const Eigen::MatrixXd>& A,
                                const Eigen::Ref<const Eigen::MatrixXd>& B,
                                const Eigen::Ref<const Eigen::MatrixXd>& C) {
  const int p = static_cast<int>(A.rows());
  const int q = static_cast<int>(B.rows());
  if (A.cols() != p || B.cols() != q || C.rows() != p || C.cols() != q)
    throw std::invalid_argument("solve_sylvester: dimension mismatch");
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(p * q, p * q);
  // vec(AX - XB) = (I_q (x) A - B^T (x) I_p) vec(X), column-major vec
  for (int j = 0; j < q; ++j) {
    M.block(j * p, j * p, p, p) += A;
    for (int k = 0; k < q; ++k) {
      M.block(j * p, k * p, p, p).diagonal().array() -= B(k, j);
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
  if (!lu.isInvertible())
    throw std::runtime_error("solve_sylvester: spectra of A and B overlap");
  Eigen::VectorXd vecC(p * q);
  for (int j = 0; j < q; ++j) vecC.segment(j * p, p) = C.col(j);
  const Eigen::VectorXd vecX = lu.solve(vecC);
  Eigen::MatrixXd X(p, q);
  for (int j = 0; j < q; ++j) X.col(j) = vecX.segment(j * p, p);
  return X;
}

Eigen::MatrixXd solve_lyapunov(const Eigen::Ref<const Eigen::MatrixXd>& A,
                               const Eigen::Ref<const Eigen::MatrixXd>& W) {
  // A^T X + X A + W = 0  <=>  A^T X - X (-A) = -W
  Eigen::MatrixXd X = solve_sylvester(A.transpose(), -A, -W);
  return 0.5 * (X + X.transpose().eval());
}

int reorder_schur(Eigen::MatrixXd& T, Eigen::MatrixXd& U,
                  const std::function<bool(const std::complex<double>&)>& select) {
  const int n = static_cast<int>(T.rows());
  int target = 0;
  while (target < n) {
    auto blocks = diagonal_blocks(T);
    int sel = -1;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      if (blocks[b].first < target) continue;
      if (select(block_eigenvalue(T, blocks[b].first, blocks[b].second))) {
        sel = static_cast<int>(b);
        break;
      }
    }
    if (sel < 0) break;
    while (blocks[sel].first > target) {
      swap_adjacent_blocks(T, U, blocks[sel - 1].first, blocks[sel - 1].second,
                           blocks[sel].second);
      blocks = diagonal_blocks(T);
      --sel;
    }
    target += blocks[sel].second;
  }
  return target;
}

}  // namespace consensus::design
