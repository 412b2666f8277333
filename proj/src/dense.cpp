#include "acuc/dense.hpp"

#include <algorithm>

namespace acuc {

void cholesky_factor(DenseMat& m) {
  const int n = m.rows;
  for (int j = 0; j < n; ++j) {
    double d = m(j, j);
    for (int k = 0; k < j; ++k) d -= m(j, k) * m(j, k);
    if (!(d > 0.0)) throw SolverError("cholesky: matrix not positive definite");
    d = std::sqrt(d);
    m(j, j) = d;
    for (int i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (int k = 0; k < j; ++k) s -= m(i, k) * m(j, k);
      m(i, j) = s / d;
    }
  }
}

void cholesky_solve_factored(const DenseMat& chol, std::vector<double>& b) {
  const int n = chol.rows;
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= chol(i, k) * b[k];
    b[i] = s / chol(i, i);
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int k = i + 1; k < n; ++k) s -= chol(k, i) * b[k];
    b[i] = s / chol(i, i);
  }
}

std::vector<double> cholesky_solve(const DenseMat& a,
                                   const std::vector<double>& b) {
  DenseMat f = a;
  cholesky_factor(f);
  std::vector<double> x = b;
  cholesky_solve_factored(f, x);
  return x;
}

void LdltFactor::factor(const DenseMat& a, double shift) {
  const int n = a.rows;
  l = DenseMat(n, n);
  d.assign(n, 0.0);
  for (int j = 0; j < n; ++j) {
    double dj = a(j, j) + shift;
    for (int k = 0; k < j; ++k) dj -= l(j, k) * l(j, k) * d[k];
    if (std::abs(dj) < 1e-300) dj = dj >= 0 ? 1e-300 : -1e-300;
    d[j] = dj;
    l(j, j) = 1.0;
    for (int i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k) * d[k];
      l(i, j) = s / dj;
    }
  }
}

void LdltFactor::solve(std::vector<double>& b) const {
  const int n = l.rows;
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= l(i, k) * b[k];
    b[i] = s;
  }
  for (int i = 0; i < n; ++i) b[i] /= d[i];
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int k = i + 1; k < n; ++k) s -= l(k, i) * b[k];
    b[i] = s;
  }
}

std::vector<double> lu_solve(DenseMat a, std::vector<double> b) {
  const int n = a.rows;
  std::vector<int> piv(n);
  for (int i = 0; i < n; ++i) piv[i] = i;
  for (int k = 0; k < n; ++k) {
    int p = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
    if (std::abs(a(p, k)) < 1e-14) throw SolverError("lu: singular matrix");
    if (p != k) {
      for (int j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
      std::swap(b[k], b[p]);
    }
    for (int i = k + 1; i < n; ++i) {
      double f = a(i, k) / a(k, k);
      a(i, k) = f;
      for (int j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
      b[i] -= f * b[k];
    }
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int j = i + 1; j < n; ++j) s -= a(i, j) * b[j];
    b[i] = s / a(i, i);
  }
  return b;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm_inf(const std::vector<double>& a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

}  // namespace acuc
