#include "acuc/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace acuc {

void SparseCsr::matvec(const std::vector<double>& x,
                       std::vector<double>& y) const {
  y.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int k = ptr[i]; k < ptr[i + 1]; ++k) s += val[k] * x[idx[k]];
    y[i] = s;
  }
}

double SparseCsr::at(int i, int j) const {
  for (int k = ptr[i]; k < ptr[i + 1]; ++k)
    if (idx[k] == j) return val[k];
  return 0.0;
}

SparseCsr SparseCsr::from_triplets(int n, std::vector<int> ti,
                                   std::vector<int> tj,
                                   std::vector<double> tv) {
  std::vector<std::map<int, double>> rows(n);
  for (size_t k = 0; k < ti.size(); ++k) rows[ti[k]][tj[k]] += tv[k];
  SparseCsr m;
  m.n = n;
  m.ptr.assign(n + 1, 0);
  for (int i = 0; i < n; ++i) m.ptr[i + 1] = m.ptr[i] + int(rows[i].size());
  m.idx.resize(m.ptr[n]);
  m.val.resize(m.ptr[n]);
  for (int i = 0; i < n; ++i) {
    int k = m.ptr[i];
    for (const auto& [j, v] : rows[i]) {
      m.idx[k] = j;
      m.val[k] = v;
      ++k;
    }
  }
  return m;
}

IldlPrecond build_ildl(const SparseCsr& a) {
  const int n = a.n;
  IldlPrecond p;
  p.d.assign(n, 0.0);
  p.lptr.assign(n + 1, 0);
  // strictly-lower pattern of A, row by row
  for (int i = 0; i < n; ++i) {
    int cnt = 0;
    for (int k = a.ptr[i]; k < a.ptr[i + 1]; ++k)
      if (a.idx[k] < i) ++cnt;
    p.lptr[i + 1] = p.lptr[i] + cnt;
  }
  p.lidx.resize(p.lptr[n]);
  p.lval.assign(p.lptr[n], 0.0);
  for (int i = 0; i < n; ++i) {
    int w = p.lptr[i];
    for (int k = a.ptr[i]; k < a.ptr[i + 1]; ++k)
      if (a.idx[k] < i) p.lidx[w++] = a.idx[k];
  }

  bool ok = true;
  for (int i = 0; i < n && ok; ++i) {
    for (int k = p.lptr[i]; k < p.lptr[i + 1]; ++k) {
      const int j = p.lidx[k];
      double s = a.at(i, j);
      // intersect row i and row j of L below column j
      int ki = p.lptr[i], kj = p.lptr[j];
      while (ki < p.lptr[i + 1] && kj < p.lptr[j + 1]) {
        if (p.lidx[ki] >= j || p.lidx[kj] >= j) break;
        if (p.lidx[ki] == p.lidx[kj]) {
          s -= p.lval[ki] * p.lval[kj] * p.d[p.lidx[ki]];
          ++ki;
          ++kj;
        } else if (p.lidx[ki] < p.lidx[kj]) {
          ++ki;
        } else {
          ++kj;
        }
      }
      p.lval[k] = s / p.d[j];
    }
    double di = a.at(i, i);
    for (int k = p.lptr[i]; k < p.lptr[i + 1]; ++k)
      di -= p.lval[k] * p.lval[k] * p.d[p.lidx[k]];
    if (!(di > 1e-13)) {
      ok = false;
      break;
    }
    p.d[i] = di;
  }
  if (!ok) {
    // Jacobi fallback
    IldlPrecond jp;
    jp.jacobi = true;
    jp.d.assign(n, 1.0);
    for (int i = 0; i < n; ++i) {
      double di = a.at(i, i);
      jp.d[i] = di > 1e-13 ? 1.0 / di : 1.0;
    }
    return jp;
  }
  return p;
}

void IldlPrecond::apply(const std::vector<double>& r,
                        std::vector<double>& z) const {
  const int n = int(d.size());
  z = r;
  if (jacobi) {
    for (int i = 0; i < n; ++i) z[i] *= d[i];
    return;
  }
  for (int i = 0; i < n; ++i) {
    double s = z[i];
    for (int k = lptr[i]; k < lptr[i + 1]; ++k) s -= lval[k] * z[lidx[k]];
    z[i] = s;
  }
  for (int i = 0; i < n; ++i) z[i] /= d[i];
  // L^T backward solve (column-oriented scatter)
  for (int i = n - 1; i >= 0; --i) {
    const double zi = z[i];
    for (int k = lptr[i]; k < lptr[i + 1]; ++k) z[lidx[k]] -= lval[k] * zi;
  }
}

PcgResult pcg_solve(const SparseCsr& a, const std::vector<double>& b,
                    const IldlPrecond* prec, double eps, int max_iter,
                    std::vector<double>& x) {
  const int n = a.n;
  PcgResult res;
  x.assign(n, 0.0);
  double bnorm = 0.0;
  for (double v : b) bnorm += v * v;
  bnorm = std::sqrt(bnorm);
  if (bnorm == 0.0) return res;  // zero rhs: zero solution, zero iterations

  std::vector<double> r = b, z(n), p(n), ap(n);
  if (prec)
    prec->apply(r, z);
  else
    z = r;
  p = z;
  double rz = 0.0;
  for (int i = 0; i < n; ++i) rz += r[i] * z[i];
  double best_res = 1.0;
  std::vector<double> best_x = x;

  for (int it = 1; it <= max_iter; ++it) {
    a.matvec(p, ap);
    double pap = 0.0;
    for (int i = 0; i < n; ++i) pap += p[i] * ap[i];
    if (!(std::abs(pap) > 0)) break;
    const double alpha = rz / pap;
    double rnorm = 0.0;
    for (int i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
      rnorm += r[i] * r[i];
    }
    rnorm = std::sqrt(rnorm);
    res.iterations = it;
    res.rel_residual = rnorm / bnorm;
    if (res.rel_residual < best_res) {
      best_res = res.rel_residual;
      best_x = x;
    }
    if (res.rel_residual <= eps) {
      res.converged = true;
      return res;
    }
    if (prec)
      prec->apply(r, z);
    else
      z = r;
    double rz_new = 0.0;
    for (int i = 0; i < n; ++i) rz_new += r[i] * z[i];
    const double beta = rz_new / rz;
    rz = rz_new;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  x = best_x;
  res.rel_residual = best_res;
  res.converged = false;
  return res;
}

}  // namespace acuc
