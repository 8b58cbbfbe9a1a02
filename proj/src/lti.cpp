#include "consensus/lti.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace consensus::lti {

Plant::Plant(Eigen::MatrixXd A_in, Eigen::MatrixXd B_in) : A(std::move(A_in)), B(std::move(B_in)) {
  if (A.rows() < 1 || A.rows() != A.cols())
    throw std::invalid_argument("Plant: A must be square and nonempty");
  if (B.rows() != A.rows() || B.cols() < 1)
    throw std::invalid_argument("Plant: B must have as many rows as A and at least one column");
  if (!A.allFinite() || !B.allFinite())
    throw std::invalid_argument("Plant: matrices must be finite");
}

Eigen::MatrixXd controllability_matrix(const Plant& p) {
  const int n = p.state_dim();
  const int m = p.input_dim();
  Eigen::MatrixXd ctrb(n, n * m);
  Eigen::MatrixXd block = p.B;
  for (int k = 0; k < n; ++k) {
    ctrb.middleCols(k * m, m) = block;
    if (k + 1 < n) block = p.A * block;
  }
  return ctrb;
}

Eigen::MatrixXd observability_matrix(const Eigen::Ref<const Eigen::MatrixXd>& A,
                                     const Eigen::Ref<const Eigen::MatrixXd>& C) {
  if (A.rows() != A.cols() || C.cols() != A.rows())
    throw std::invalid_argument("observability_matrix: dimension mismatch");
  const int n = static_cast<int>(A.rows());
  const int q = static_cast<int>(C.rows());
  Eigen::MatrixXd obsv(q * n, n);
  Eigen::MatrixXd block = C;
  for (int k = 0; k < n; ++k) {
    obsv.middleRows(k * q, q) = block;
    if (k + 1 < n) block = block * A;
  }
  return obsv;
}

namespace {

int numerical_rank(const Eigen::MatrixXd& M, double rel_tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > rel_tol * sv(0)) ++rank;
  return rank;
}

}  // namespace

bool is_controllable(const Plant& p, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("is_controllable: tol > 0 required");
  return numerical_rank(controllability_matrix(p), tol) == p.state_dim();
}

bool is_observable(const Eigen::Ref<const Eigen::MatrixXd>& A,
                   const Eigen::Ref<const Eigen::MatrixXd>& C, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("is_observable: tol > 0 required");
  return numerical_rank(observability_matrix(A, C), tol) == A.rows();
}

bool spectrum_in_closed_rhp(const Eigen::Ref<const Eigen::MatrixXd>& A, double tol) {
  if (tol < 0.0) throw std::invalid_argument("spectrum_in_closed_rhp: tol >= 0 required");
  const Eigen::VectorXcd eig = A.eigenvalues();
  for (int i = 0; i < eig.size(); ++i)
    if (eig(i).real() < -tol) return false;
  return true;
}

namespace {

struct EigenvalueCluster {
  std::complex<double> value;          // representative
  int algebraic = 0;
  int geometric = 0;
  Eigen::MatrixXcd left_eigenvectors;  // n x geometric, unit columns, v^H A = lambda v^H
};

// Groups the spectrum into clusters of (numerically) equal eigenvalues and
// extracts left eigenvectors from the left null space of (A - lambda I):
// v^H (A - lambda I) = 0 picks the left singular vectors at zero singular
// values, which is robust for defective eigenvalues too.
std::vector<EigenvalueCluster> eigenvalue_clusters(const Eigen::MatrixXd& A) {
  const int n = static_cast<int>(A.rows());
  Eigen::VectorXcd eig = A.eigenvalues();
  const double scale = std::max(1.0, A.norm());
  const double cluster_tol = 1e-7 * scale;

  std::vector<bool> used(n, false);
  std::vector<EigenvalueCluster> clusters;
  for (int i = 0; i < n; ++i) {
    if (used[i]) continue;
    EigenvalueCluster cl;
    std::complex<double> sum = 0.0;
    for (int j = i; j < n; ++j) {
      if (!used[j] && std::abs(eig(j) - eig(i)) <= cluster_tol) {
        used[j] = true;
        sum += eig(j);
        ++cl.algebraic;
      }
    }
    cl.value = sum / static_cast<double>(cl.algebraic);

    Eigen::MatrixXcd shifted = A.cast<std::complex<double>>();
    shifted.diagonal().array() -= cl.value;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(shifted, Eigen::ComputeFullU);
    const auto& sv = svd.singularValues();
    const double rank_tol = std::max(1e-8 * scale, 1e3 * cluster_tol);
    int null_dim = 0;
    for (int k = 0; k < sv.size(); ++k)
      if (sv(k) <= rank_tol) ++null_dim;
    cl.geometric = std::max(1, null_dim);
    cl.left_eigenvectors = svd.matrixU().rightCols(cl.geometric);
    clusters.push_back(std::move(cl));
  }
  return clusters;
}

}  // namespace

bool is_neutrally_stable(const Eigen::Ref<const Eigen::MatrixXd>& A, double tol) {
  const double scale = std::max(1.0, A.norm());
  const Eigen::VectorXcd eig = A.eigenvalues();
  for (int i = 0; i < eig.size(); ++i)
    if (std::abs(eig(i).real()) > tol * scale) return false;
  for (const auto& cl : eigenvalue_clusters(A))
    if (cl.geometric < cl.algebraic) return false;
  return true;
}

std::vector<ModeReport> pbh_modes(const Plant& p, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("pbh_modes: tol > 0 required");
  const Eigen::MatrixXcd Bc = p.B.cast<std::complex<double>>();

  std::vector<ModeReport> modes;
  for (const auto& cl : eigenvalue_clusters(p.A)) {
    const bool degenerate = cl.geometric < cl.algebraic;
    for (int k = 0; k < cl.geometric; ++k) {
      ModeReport mode;
      mode.eigenvalue = cl.value;
      mode.left_eigenvector = cl.left_eigenvectors.col(k).normalized();
      mode.controllable = (mode.left_eigenvector.adjoint() * Bc).norm() > tol;
      mode.degenerate = degenerate;
      modes.push_back(std::move(mode));
    }
  }

  // conjugate pairs carry one verdict: uncontrollable if either side is
  for (std::size_t i = 0; i < modes.size(); ++i) {
    if (modes[i].eigenvalue.imag() == 0.0) continue;
    for (std::size_t j = i + 1; j < modes.size(); ++j) {
      if (std::abs(modes[j].eigenvalue - std::conj(modes[i].eigenvalue)) < 1e-10 &&
          modes[i].controllable != modes[j].controllable) {
        modes[i].controllable = modes[j].controllable = false;
      }
    }
  }
  return modes;
}

namespace {

// Diagonal Pade approximants for the scaled exponential (numerators only;
// the denominator shares coefficients with alternating signs).
void expm_pade13(const Eigen::MatrixXd& A, Eigen::MatrixXd& U, Eigen::MatrixXd& V) {
  static const double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                             1187353796428800.0,  129060195264000.0,   10559470521600.0,
                             670442572800.0,      33522128640.0,       1323241920.0,
                             40840800.0,          960960.0,            16380.0,
                             182.0,               1.0};
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(A.rows(), A.cols());
  const Eigen::MatrixXd A2 = A * A;
  const Eigen::MatrixXd A4 = A2 * A2;
  const Eigen::MatrixXd A6 = A2 * A4;
  U = A * (A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 +
           b[1] * I);
  V = A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
}

void expm_pade_low(const Eigen::MatrixXd& A, int order, Eigen::MatrixXd& U, Eigen::MatrixXd& V) {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(A.rows(), A.cols());
  const Eigen::MatrixXd A2 = A * A;
  if (order == 3) {
    static const double b[] = {120.0, 60.0, 12.0, 1.0};
    U = A * (b[3] * A2 + b[1] * I);
    V = b[2] * A2 + b[0] * I;
    return;
  }
  const Eigen::MatrixXd A4 = A2 * A2;
  if (order == 5) {
    static const double b[] = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
    U = A * (b[5] * A4 + b[3] * A2 + b[1] * I);
    V = b[4] * A4 + b[2] * A2 + b[0] * I;
    return;
  }
  const Eigen::MatrixXd A6 = A2 * A4;
  if (order == 7) {
    static const double b[] = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                               25200.0,    1512.0,    56.0,      1.0};
    U = A * (b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I);
    V = b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
    return;
  }
  static const double b[] = {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
                             2162160.0,     110880.0,     3960.0,       90.0,        1.0};
  const Eigen::MatrixXd A8 = A4 * A4;
  U = A * (b[9] * A8 + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I);
  V = b[8] * A8 + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
}

}  // namespace

Eigen::MatrixXd expm(const Eigen::Ref<const Eigen::MatrixXd>& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("expm: square matrix required");
  if (!A.allFinite()) throw std::invalid_argument("expm: non-finite entries");
  if (A.rows() == 0) return Eigen::MatrixXd(0, 0);
  if (A.rows() == 1) return Eigen::MatrixXd::Constant(1, 1, std::exp(A(0, 0)));

  // Higham (2005): order thresholds on the 1-norm.
  static const double theta3 = 1.495585217958292e-2;
  static const double theta5 = 2.539398330063230e-1;
  static const double theta7 = 9.504178996162932e-1;
  static const double theta9 = 2.097847961257068e0;
  static const double theta13 = 5.371920351148152e0;

  const double norm = A.cwiseAbs().colwise().sum().maxCoeff();
  Eigen::MatrixXd U, V;
  int squarings = 0;
  if (norm <= theta3) {
    expm_pade_low(A, 3, U, V);
  } else if (norm <= theta5) {
    expm_pade_low(A, 5, U, V);
  } else if (norm <= theta7) {
    expm_pade_low(A, 7, U, V);
  } else if (norm <= theta9) {
    expm_pade_low(A, 9, U, V);
  } else {
    squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / theta13))));
    const Eigen::MatrixXd As = A / std::pow(2.0, squarings);
    expm_pade13(As, U, V);
  }

  Eigen::MatrixXd numer = V + U;
  Eigen::MatrixXd denom = V - U;
  Eigen::MatrixXd F = denom.partialPivLu().solve(numer);
  for (int i = 0; i < squarings; ++i) F = F * F;
  return F;
}

Eigen::MatrixXd expm(const Eigen::Ref<const Eigen::MatrixXd>& A, double t) {
  if (!std::isfinite(t)) throw std::invalid_argument("expm: non-finite time");
  return expm(Eigen::MatrixXd(A * t));
}

}  // namespace consensus::lti
