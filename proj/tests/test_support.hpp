#pragma once

#include <vector>

#include "ethsim/linalg.hpp"
#include "ethsim/rng.hpp"

namespace ethsim::testing {

inline bool approx(double a, double b, double tol) { return std::abs(a - b) <= tol; }

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

// Characteristic polynomial coefficients of A by the Faddeev-LeVerrier
// recursion: p(x) = x^n + c[0] x^{n-1} + ... + c[n-1].
inline std::vector<double> char_poly_coeffs(const Matrix& a) {
  const long n = a.rows();
  std::vector<double> c;
  Matrix m = a;  // M_1
  c.push_back(-m.trace().real());
  for (long k = 2; k <= n; ++k) {
    Matrix shifted = m;
    for (long i = 0; i < n; ++i) shifted(i, i) += c.back();
    m = Matrix(a * shifted);  // M_k = A (M_{k-1} + c_{k-1} 1)
    c.push_back(-(m.trace().real()) / double(k));
  }
  return c;
}

// Roots of the (real-coefficient) characteristic polynomial via the companion
// matrix and the general unsymmetric eigensolver; an eigenvalue oracle fully
// independent of the Hermitian solver path.
inline std::vector<double> companion_roots(const std::vector<double>& coeffs) {
  const long n = long(coeffs.size());
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  for (long i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
  for (long i = 0; i < n; ++i) companion(i, n - 1) = -coeffs[std::size_t(n - 1 - i)];
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion);
  std::vector<double> roots;
  for (long i = 0; i < n; ++i) roots.push_back(es.eigenvalues()(i).real());
  std::sort(roots.begin(), roots.end(), std::greater<double>());
  return roots;
}

}  // namespace ethsim::testing
