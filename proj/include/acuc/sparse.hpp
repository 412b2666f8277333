#pragma once

#include <vector>

#include "acuc/util.hpp"

namespace acuc {

// Compressed sparse row, square, used for the reduced DC admittance.
struct SparseCsr {
  int n = 0;
  std::vector<int> ptr, idx;
  std::vector<double> val;

  void matvec(const std::vector<double>& x, std::vector<double>& y) const;
  double at(int i, int j) const;  // 0 when absent

  // from (i, j, v) triplets with duplicate accumulation
  static SparseCsr from_triplets(int n, std::vector<int> ti,
                                 std::vector<int> tj, std::vector<double> tv);
};

// Zero-fill incomplete LDL^T on the lower-triangular pattern of A. On a
// tree-structured (no-fill) or diagonal matrix this is the exact
// factorization. Breakdown falls back to a Jacobi diagonal with a flag.
struct IldlPrecond {
  bool jacobi = false;
  std::vector<int> lptr, lidx;  // strictly-lower rows of L
  std::vector<double> lval;
  std::vector<double> d;        // pivots (or inverse diagonal for jacobi)

  void apply(const std::vector<double>& r, std::vector<double>& z) const;
};

IldlPrecond build_ildl(const SparseCsr& a);

struct PcgResult {
  int iterations = 0;
  double rel_residual = 0.0;
  bool converged = true;
};

// Preconditioned conjugate gradient; terminates when the relative residual
// ||Ax-b||/||b|| drops below eps. x is overwritten with the best iterate.
PcgResult pcg_solve(const SparseCsr& a, const std::vector<double>& b,
                    const IldlPrecond* prec, double eps, int max_iter,
                    std::vector<double>& x);

}  // namespace acuc
