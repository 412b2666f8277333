#pragma once

#include <cmath>
#include <vector>

#include "acuc/util.hpp"

namespace acuc {

// Row-major dense matrix, sized for desk-scale direct solves.
struct DenseMat {
  int rows = 0, cols = 0;
  std::vector<double> a;

  DenseMat() = default;
  DenseMat(int r, int c) : rows(r), cols(c), a(size_t(r) * c, 0.0) {}
  double& operator()(int i, int j) { return a[size_t(i) * cols + j]; }
  double operator()(int i, int j) const { return a[size_t(i) * cols + j]; }
};

// In-place lower Cholesky; throws SolverError if not positive definite.
void cholesky_factor(DenseMat& m);
void cholesky_solve_factored(const DenseMat& chol, std::vector<double>& b);
// One-shot SPD solve, A preserved.
std::vector<double> cholesky_solve(const DenseMat& a, const std::vector<double>& b);

// LDL^T with symmetric diagonal pivoting disabled (plain), tolerant of
// indefinite KKT blocks via Bunch-Kaufman-free 1x1 pivots + regularization.
struct LdltFactor {
  DenseMat l;              // unit lower triangle
  std::vector<double> d;   // diagonal
  void factor(const DenseMat& a, double shift = 0.0);
  void solve(std::vector<double>& b) const;
};

// Gaussian elimination with partial pivoting.
std::vector<double> lu_solve(DenseMat a, std::vector<double> b);

double dot(const std::vector<double>& a, const std::vector<double>& b);
double norm_inf(const std::vector<double>& a);
double norm2(const std::vector<double>& a);

}  // namespace acuc
