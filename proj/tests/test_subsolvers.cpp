#include <algorithm>
#include <cmath>

#include "acuc/dense.hpp"
#include "acuc/solvers.hpp"
#include "acuc/util.hpp"
#include "doctest.h"

using namespace acuc;

TEST_CASE("lp single lower bound") {
  LpProblem p;
  p.add_var(3.0, kInf, 1.0);
  SolveResult r = solve_lp(p);
  REQUIRE(r.optimal());
  CHECK(r.x[0] == doctest::Approx(3.0).epsilon(1e-7));
}

TEST_CASE("lp textbook simplex") {
  LpProblem p;
  int x = p.add_var(0.0, kInf, -1.0);
  int y = p.add_var(0.0, kInf, -1.0);
  p.add_le({{x, 1.0}, {y, 1.0}}, 1.0);
  SolveResult r = solve_lp(p);
  REQUIRE(r.optimal());
  CHECK(r.objective == doctest::Approx(-1.0).epsilon(1e-8));
}

TEST_CASE("lp unbounded detection") {
  LpProblem p;
  p.add_var(0.0, kInf, -1.0);
  SolveResult r = solve_lp(p);
  CHECK(r.status == SolveStatus::kUnbounded);
}

TEST_CASE("lp infeasible detection") {
  LpProblem p;
  int x = p.add_var(0.0, kInf, 1.0);
  p.add_le({{x, 1.0}}, -1.0);
  SolveResult r = solve_lp(p);
  CHECK(r.status == SolveStatus::kInfeasible);
}

namespace {

// exhaustive vertex enumeration for a bounded LP with all-inequality rows
// plus box bounds: every vertex activates n constraints
double vertex_enumeration_optimum(const LpProblem& p) {
  struct Con {
    std::vector<double> a;
    double b;
  };
  std::vector<Con> cons;
  const int n = p.n;
  for (const LinearRow& r : p.rows) {
    Con c;
    c.a.assign(n, 0.0);
    for (auto& [j, v] : r.a) c.a[j] = v;
    c.b = r.rhs;
    cons.push_back(c);
  }
  for (int j = 0; j < n; ++j) {
    Con lo;
    lo.a.assign(n, 0.0);
    lo.a[j] = -1.0;
    lo.b = -p.lo[j];
    cons.push_back(lo);
    Con hi;
    hi.a.assign(n, 0.0);
    hi.a[j] = 1.0;
    hi.b = p.hi[j];
    cons.push_back(hi);
  }
  const int m = static_cast<int>(cons.size());
  double best = kInf;
  std::vector<int> pick(n);
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == n) {
      DenseMat a(n, n);
      std::vector<double> b(n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) a(i, j) = cons[pick[i]].a[j];
        b[i] = cons[pick[i]].b;
      }
      std::vector<double> x;
      try {
        x = lu_solve(a, b);
      } catch (const SolverError&) {
        return;
      }
      for (const Con& c : cons) {
        double ax = 0.0;
        for (int j = 0; j < n; ++j) ax += c.a[j] * x[j];
        if (ax > c.b + 1e-7) return;
      }
      double obj = 0.0;
      for (int j = 0; j < n; ++j) obj += p.c[j] * x[j];
      best = std::min(best, obj);
      return;
    }
    for (int i = start; i < m; ++i) {
      pick[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);
  return best;
}

}  // namespace

TEST_CASE("random lps match vertex enumeration") {
  Rng rng(99);
  for (int trial = 0; trial < 25; ++trial) {
    LpProblem p;
    const int n = 5, m = 8;
    for (int j = 0; j < n; ++j) p.add_var(0.0, 2.0, rng.uniform(-1.0, 1.0));
    // feasible by construction around an interior point
    std::vector<double> x0(n);
    for (double& v : x0) v = rng.uniform(0.5, 1.5);
    for (int i = 0; i < m; ++i) {
      std::vector<std::pair<int, double>> row;
      double ax = 0.0;
      for (int j = 0; j < n; ++j) {
        double a = rng.uniform(-1.0, 1.0);
        row.push_back({j, a});
        ax += a * x0[j];
      }
      p.add_le(std::move(row), ax + rng.uniform(0.05, 1.0));
    }
    SolveResult r = solve_lp(p);
    REQUIRE(r.optimal());
    double oracle = vertex_enumeration_optimum(p);
    CHECK(r.objective == doctest::Approx(oracle).epsilon(1e-6));
    KktCheck k = check_kkt(p, r);
    CHECK(k.primal < 1e-8);
  }
}

TEST_CASE("qp unconstrained quadratic") {
  QpProblem p;
  p.add_var(-kInf, kInf, -2.0, 2.0);  // (x-1)^2 = x^2 - 2x + 1
  SolveResult r = solve_qp(p);
  REQUIRE(r.optimal());
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("qp active bound") {
  QpProblem p;
  p.add_var(2.0, kInf, 0.0, 2.0);  // min x^2, x >= 2
  SolveResult r = solve_qp(p);
  REQUIRE(r.optimal());
  CHECK(r.x[0] == doctest::Approx(2.0).epsilon(1e-7));
}

TEST_CASE("random equality-constrained qps match the kkt solve") {
  Rng rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 6, m = 2;
    QpProblem p;
    std::vector<double> q(n), c(n);
    for (int j = 0; j < n; ++j) {
      q[j] = rng.uniform(0.5, 3.0);
      c[j] = rng.uniform(-1.0, 1.0);
      p.add_var(-kInf, kInf, c[j], q[j]);
    }
    DenseMat a(m, n);
    std::vector<double> b(m);
    for (int i = 0; i < m; ++i) {
      std::vector<std::pair<int, double>> row;
      for (int j = 0; j < n; ++j) {
        a(i, j) = rng.uniform(-1.0, 1.0);
        row.push_back({j, a(i, j)});
      }
      b[i] = rng.uniform(-0.5, 0.5);
      p.add_eq(std::move(row), b[i]);
    }
    SolveResult r = solve_qp(p);
    REQUIRE(r.optimal());
    // closed-form KKT: [[Q, A'], [A, 0]] [x; y] = [-c; b]
    DenseMat kkt(n + m, n + m);
    std::vector<double> rhs(n + m);
    for (int j = 0; j < n; ++j) {
      kkt(j, j) = q[j];
      rhs[j] = -c[j];
    }
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        kkt(n + i, j) = a(i, j);
        kkt(j, n + i) = a(i, j);
      }
      rhs[n + i] = b[i];
    }
    std::vector<double> xy = lu_solve(kkt, rhs);
    for (int j = 0; j < n; ++j)
      CHECK(r.x[j] == doctest::Approx(xy[j]).epsilon(1e-6));
  }
}

TEST_CASE("kkt audit on a qp with inequalities") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    QpProblem p;
    const int n = 5;
    for (int j = 0; j < n; ++j)
      p.add_var(0.0, 2.0, rng.uniform(-1.0, 1.0), rng.uniform(0.2, 2.0));
    for (int i = 0; i < 4; ++i) {
      std::vector<std::pair<int, double>> row;
      for (int j = 0; j < n; ++j) row.push_back({j, rng.uniform(-1.0, 1.0)});
      p.add_le(std::move(row), rng.uniform(0.5, 2.0));
    }
    SolveResult r = solve_qp(p);
    REQUIRE(r.optimal());
    KktCheck k = check_kkt(p, r);
    CHECK(k.primal < 1e-8);
    CHECK(k.stationarity < 1e-7);
    CHECK(k.complementarity < 1e-7);
  }
}

TEST_CASE("identical problems give identical solutions") {
  LpProblem p;
  int x = p.add_var(0.0, 5.0, -1.0);
  int y = p.add_var(0.0, 5.0, -2.0);
  p.add_le({{x, 1.0}, {y, 1.0}}, 4.0);
  SolveResult r1 = solve_lp(p);
  SolveResult r2 = solve_lp(p);
  CHECK(r1.x == r2.x);
}

TEST_CASE("dense q path agrees with diagonal path") {
  QpProblem pd;
  pd.add_var(-kInf, kInf, -2.0, 2.0);
  pd.add_var(0.0, 1.0, 0.5, 4.0);
  QpProblem pq = pd;
  pq.q_diag.clear();
  pq.q_dense = DenseMat(2, 2);
  pq.q_dense(0, 0) = 2.0;
  pq.q_dense(1, 1) = 4.0;
  SolveResult rd = solve_qp(pd);
  SolveResult rq = solve_qp(pq);
  REQUIRE(rd.optimal());
  REQUIRE(rq.optimal());
  CHECK(rd.x[0] == doctest::Approx(rq.x[0]).epsilon(1e-6));
  CHECK(rd.x[1] == doctest::Approx(rq.x[1]).epsilon(1e-6));
}
