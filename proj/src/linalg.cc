#include "delaystab/linalg.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <lapacke.h>

namespace delaystab {

MatrixXd Expm(const MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  if (n == 0) return MatrixXd(0, 0);
  constexpr double kTheta13 = 5.371920351148152;
  constexpr double b[] = {64764752532480000.0, 32382376266240000.0,
                          7771770303897600.0,  1187353796428800.0,
                          129060195264000.0,   10559470521600.0,
                          670442572800.0,      33522128640.0,
                          1323241920.0,        40840800.0,
                          960960.0,            16380.0,
                          182.0,               1.0};
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  if (norm1 == 0.0) return MatrixXd::Identity(n, n);
  int s = 0;
  if (norm1 > kTheta13) {
    s = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / kTheta13))));
  }
  const MatrixXd as = a / std::ldexp(1.0, s);
  const MatrixXd id = MatrixXd::Identity(n, n);
  const MatrixXd a2 = as * as;
  const MatrixXd a4 = a2 * a2;
  const MatrixXd a6 = a4 * a2;
  const MatrixXd u =
      as * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 +
            b[5] * a4 + b[3] * a2 + b[1] * id);
  const MatrixXd v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 +
                     b[4] * a4 + b[2] * a2 + b[0] * id;
  MatrixXd r = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < s; ++k) r = r * r;
  return r;
}

OrderedSchur ComputeOrderedSchur(
    const MatrixXd& a, const std::function<bool(std::complex<double>)>& keep) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  OrderedSchur out;
  out.t = a;
  out.q = MatrixXd::Identity(n, n);
  out.eigenvalues.resize(n);
  if (n == 0) return out;

  std::vector<double> wr(n), wi(n);
  lapack_int sdim = 0;
  lapack_int info =
      LAPACKE_dgees(LAPACK_COL_MAJOR, 'V', 'N', nullptr, n, out.t.data(), n,
                    &sdim, wr.data(), wi.data(), out.q.data(), n);
  if (info != 0) throw std::runtime_error("dgees failed to converge");

  std::vector<lapack_logical> select(n);
  for (lapack_int k = 0; k < n; ++k) {
    select[k] = keep({wr[k], wi[k]}) ? 1 : 0;
  }
  // A complex pair must be selected or rejected as a unit.
  for (lapack_int k = 0; k + 1 < n; ++k) {
    if (wi[k] != 0.0 && wi[k] == -wi[k + 1]) {
      const lapack_logical both = select[k] || select[k + 1];
      select[k] = select[k + 1] = both;
      ++k;
    }
  }
  // Direct Fortran call: the LAPACKE wrapper hands a null iwork to a routine
  // that always writes iwork(1).
  lapack_int m = 0;
  double cond_s = 0.0, cond_sep = 0.0;
  const char job = 'N', compq = 'V';
  const lapack_int lwork = std::max<lapack_int>(1, n), liwork = 1;
  std::vector<double> work(lwork);
  lapack_int iwork = 0;
  LAPACK_dtrsen(&job, &compq, select.data(), &n, out.t.data(), &n,
                out.q.data(), &n, wr.data(), wi.data(), &m, &cond_s, &cond_sep,
                work.data(), &lwork, &iwork, &liwork, &info);
  if (info != 0) throw std::runtime_error("dtrsen failed to reorder");
  out.leading = static_cast<int>(m);
  for (lapack_int k = 0; k < n; ++k) out.eigenvalues(k) = {wr[k], wi[k]};
  return out;
}

MatrixXd SolveQuasiTriangularSylvester(const MatrixXd& a, const MatrixXd& b,
                                       const MatrixXd& c) {
  MatrixXd x = c;
  const lapack_int m = static_cast<lapack_int>(a.rows());
  const lapack_int n = static_cast<lapack_int>(b.rows());
  if (m == 0 || n == 0) return x;
  double scale = 1.0;
  const lapack_int info = LAPACKE_dtrsyl(
      LAPACK_COL_MAJOR, 'N', 'N', -1, m, n, a.data(), m, b.data(), n,
      x.data(), m, &scale);
  if (info < 0) throw std::runtime_error("dtrsyl: invalid argument");
  if (info == 1) {
    throw std::runtime_error("Sylvester blocks share (nearly) an eigenvalue");
  }
  return x / scale;
}

bool SolveContinuousAlgebraicRiccati(const MatrixXd& a, const MatrixXd& b,
                                     const MatrixXd& q, const MatrixXd& r,
                                     MatrixXd* x) {
  const int n = static_cast<int>(a.rows());
  if (n == 0) {
    *x = MatrixXd(0, 0);
    return true;
  }
  MatrixXd h(2 * n, 2 * n);
  h.topLeftCorner(n, n) = a;
  h.topRightCorner(n, n) = -b * r.ldlt().solve(b.transpose());
  h.bottomLeftCorner(n, n) = -q;
  h.bottomRightCorner(n, n) = -a.transpose();

  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  const OrderedSchur schur = ComputeOrderedSchur(
      h, [](std::complex<double> z) { return z.real() < 0.0; });
  if (schur.leading != n) return false;
  for (int k = 0; k < 2 * n; ++k) {
    if (std::abs(schur.eigenvalues(k).real()) < 1e-12 * scale) return false;
  }
  const MatrixXd u11 = schur.q.topLeftCorner(n, n);
  const MatrixXd u21 = schur.q.bottomLeftCorner(n, n);
  Eigen::FullPivLU<MatrixXd> lu(u11.transpose());
  lu.setThreshold(1e-12);
  if (lu.rank() < n) return false;
  MatrixXd sol = lu.solve(u21.transpose()).transpose();
  *x = 0.5 * (sol + sol.transpose());
  return x->allFinite();
}

MatrixXcd NullSpace(const MatrixXcd& a, double cutoff) {
  const int cols = static_cast<int>(a.cols());
  if (cols == 0) return MatrixXcd(0, 0);
  if (a.rows() == 0) return MatrixXcd::Identity(cols, cols);
  Eigen::JacobiSVD<MatrixXcd> svd(a, Eigen::ComputeFullV);
  const VectorXd& sv = svd.singularValues();
  int rank = 0;
  for (int k = 0; k < sv.size(); ++k) {
    if (sv(k) > cutoff) ++rank;
  }
  return svd.matrixV().rightCols(cols - rank);
}

MatrixXd RangeBasis(const MatrixXd& a, double cutoff) {
  if (a.size() == 0) return MatrixXd(a.rows(), 0);
  Eigen::JacobiSVD<MatrixXd> svd(a, Eigen::ComputeThinU);
  const VectorXd& sv = svd.singularValues();
  int rank = 0;
  for (int k = 0; k < sv.size(); ++k) {
    if (sv(k) > cutoff) ++rank;
  }
  return svd.matrixU().leftCols(rank);
}

int NumericalRank(const MatrixXcd& a, double cutoff) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXcd> svd(a);
  int rank = 0;
  for (int k = 0; k < svd.singularValues().size(); ++k) {
    if (svd.singularValues()(k) > cutoff) ++rank;
  }
  return rank;
}

double SpectralAbscissa(const MatrixXd& a) {
  if (a.rows() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<MatrixXd> es(a, false);
  return es.eigenvalues().real().maxCoeff();
}

}  // namespace delaystab
