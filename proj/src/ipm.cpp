#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "acuc/solvers.hpp"

namespace acuc {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kUnbounded: return "unbounded";
    case SolveStatus::kIterLimit: return "iteration_limit";
    default: return "numerical_error";
  }
}

namespace {

constexpr double kPrimalTol = 1e-9;
constexpr double kDualTol = 1e-9;
constexpr double kGapTol = 1e-10;
constexpr int kMaxIter = 120;

// Internal standard form: min 1/2 z'Qz + c'z, A z = b, lo <= z <= u, where
// inequality rows got a slack appended.
struct Standard {
  int n = 0, m = 0;
  std::vector<double> c, lo, hi, q;  // q empty -> LP
  bool dense_q = false;
  DenseMat qd;
  std::vector<std::vector<std::pair<int, double>>> rows;  // sparse A rows
  std::vector<double> b;
  std::vector<std::vector<std::pair<int, double>>> cols;  // transpose
  int n_orig = 0;
};

Standard to_standard(const QpProblem& p) {
  Standard s;
  s.n_orig = p.n;
  s.n = p.n;
  s.c = p.c;
  s.lo = p.lo;
  s.hi = p.hi;
  // pinned boxes get a hair of width so the barrier terms stay finite
  for (int j = 0; j < p.n; ++j)
    if (std::isfinite(s.lo[j]) && s.hi[j] - s.lo[j] < 1e-12) {
      s.lo[j] -= 1e-10;
      s.hi[j] += 1e-10;
    }
  s.dense_q = p.q_dense.rows > 0;
  if (s.dense_q)
    s.qd = p.q_dense;
  else
    s.q = p.q_diag;
  s.q.resize(p.n, 0.0);
  s.m = static_cast<int>(p.rows.size());
  s.rows.resize(s.m);
  s.b.resize(s.m);
  for (int i = 0; i < s.m; ++i) {
    s.rows[i] = p.rows[i].a;
    s.b[i] = p.rows[i].rhs;
    if (!p.rows[i].eq) {
      int slack = s.n++;
      s.c.push_back(0.0);
      s.lo.push_back(0.0);
      s.hi.push_back(kInf);
      s.q.push_back(0.0);
      s.rows[i].push_back({slack, 1.0});
    }
  }
  s.cols.resize(s.n);
  for (int i = 0; i < s.m; ++i)
    for (auto& [j, v] : s.rows[i]) s.cols[j].push_back({i, v});
  return s;
}

struct Iterate {
  std::vector<double> x, y, zl, zu;
};

double mu_of(const Standard& s, const Iterate& it) {
  double mu = 0.0;
  int cnt = 0;
  for (int j = 0; j < s.n; ++j) {
    if (std::isfinite(s.lo[j])) {
      mu += (it.x[j] - s.lo[j]) * it.zl[j];
      ++cnt;
    }
    if (std::isfinite(s.hi[j])) {
      mu += (s.hi[j] - it.x[j]) * it.zu[j];
      ++cnt;
    }
  }
  return cnt ? mu / cnt : 0.0;
}

void qx(const Standard& s, const std::vector<double>& x,
        std::vector<double>& out) {
  out.assign(s.n, 0.0);
  if (s.dense_q) {
    for (int i = 0; i < s.qd.rows; ++i) {
      double acc = 0.0;
      for (int j = 0; j < s.qd.cols; ++j) acc += s.qd(i, j) * x[j];
      out[i] = acc;
    }
  } else {
    for (int j = 0; j < s.n; ++j) out[j] = s.q[j] * x[j];
  }
}

// residuals: rd = c + Qx - A'y - zl + zu ; rp = b - Ax
void residuals(const Standard& s, const Iterate& it, std::vector<double>& rd,
               std::vector<double>& rp) {
  qx(s, it.x, rd);
  for (int j = 0; j < s.n; ++j) {
    rd[j] += s.c[j];
    if (std::isfinite(s.lo[j])) rd[j] -= it.zl[j];
    if (std::isfinite(s.hi[j])) rd[j] += it.zu[j];
  }
  for (int j = 0; j < s.n; ++j)
    for (auto& [i, v] : s.cols[j]) rd[j] -= v * it.y[i];
  rp.assign(s.m, 0.0);
  for (int i = 0; i < s.m; ++i) {
    double ax = 0.0;
    for (auto& [j, v] : s.rows[i]) ax += v * it.x[j];
    rp[i] = s.b[i] - ax;
  }
}

struct StepDirs {
  std::vector<double> dx, dy, dzl, dzu;
};

// Solves the Newton system given complementarity right-hand sides rcl/rcu
// (indexed per variable; only finite-bound entries meaningful).
bool newton_solve(const Standard& s, const Iterate& it,
                  const std::vector<double>& rd, const std::vector<double>& rp,
                  const std::vector<double>& rcl, const std::vector<double>& rcu,
                  StepDirs& out) {
  const int n = s.n, m = s.m;
  std::vector<double> d(n, 1e-10);  // primal regularization
  std::vector<double> rhat(n);
  for (int j = 0; j < n; ++j) {
    double r = -rd[j];
    if (std::isfinite(s.lo[j])) {
      double gl = std::max(it.x[j] - s.lo[j], 1e-300);
      d[j] += it.zl[j] / gl;
      r += rcl[j] / gl;
    }
    if (std::isfinite(s.hi[j])) {
      double gu = std::max(s.hi[j] - it.x[j], 1e-300);
      d[j] += it.zu[j] / gu;
      r -= rcu[j] / gu;
    }
    rhat[j] = r;
  }

  out.dx.assign(n, 0.0);
  out.dy.assign(m, 0.0);
  if (!s.dense_q) {
    // normal equations: (A Dinv A') dy = rp + A Dinv rhat, D = Q + d
    std::vector<double> dinv(n);
    for (int j = 0; j < n; ++j) dinv[j] = 1.0 / (s.q[j] + d[j]);
    DenseMat mmat(m, m);
    for (int j = 0; j < n; ++j) {
      const auto& col = s.cols[j];
      for (size_t a = 0; a < col.size(); ++a)
        for (size_t bcol = a; bcol < col.size(); ++bcol) {
          double v = col[a].second * col[bcol].second * dinv[j];
          mmat(col[a].first, col[bcol].first) += v;
          if (a != bcol) mmat(col[bcol].first, col[a].first) += v;
        }
    }
    std::vector<double> rhs(m);
    for (int i = 0; i < m; ++i) {
      double acc = rp[i];
      for (auto& [j, v] : s.rows[i]) acc -= v * dinv[j] * rhat[j];
      rhs[i] = acc;
    }
    // escalate the dual regularization if the factorization breaks down
    double reg = 1e-10;
    bool ok = false;
    std::vector<double> sol;
    for (int attempt = 0; attempt < 5 && !ok; ++attempt, reg *= 1e3) {
      DenseMat f = mmat;
      for (int i = 0; i < m; ++i) f(i, i) += reg;
      sol = rhs;
      try {
        cholesky_factor(f);
        cholesky_solve_factored(f, sol);
        ok = true;
      } catch (const SolverError&) {
      }
    }
    if (!ok) return false;
    out.dy = sol;
    for (int j = 0; j < n; ++j) {
      double aty = 0.0;
      for (auto& [i, v] : s.cols[j]) aty += v * out.dy[i];
      out.dx[j] = dinv[j] * (rhat[j] + aty);
    }
  } else {
    // augmented KKT [[Q+D, A'], [A, -delta I]]
    DenseMat k(n + m, n + m);
    for (int i = 0; i < s.qd.rows; ++i)
      for (int j = 0; j < s.qd.cols; ++j) k(i, j) = s.qd(i, j);
    for (int j = 0; j < n; ++j) k(j, j) += d[j] + (j < int(s.q.size()) ? s.q[j] : 0.0);
    for (int i = 0; i < m; ++i) {
      for (auto& [j, v] : s.rows[i]) {
        k(n + i, j) = v;
        k(j, n + i) = v;
      }
      k(n + i, n + i) = -1e-10;
    }
    std::vector<double> rhs(n + m);
    for (int j = 0; j < n; ++j) rhs[j] = rhat[j];
    for (int i = 0; i < m; ++i) rhs[n + i] = rp[i];
    LdltFactor f;
    f.factor(k);
    f.solve(rhs);
    for (int j = 0; j < n; ++j) out.dx[j] = rhs[j];
    // the assembled block carries +A' while the step equation carries -A'
    for (int i = 0; i < m; ++i) out.dy[i] = -rhs[n + i];
  }

  out.dzl.assign(n, 0.0);
  out.dzu.assign(n, 0.0);
  for (int j = 0; j < n; ++j) {
    if (std::isfinite(s.lo[j])) {
      double gl = std::max(it.x[j] - s.lo[j], 1e-300);
      out.dzl[j] = (rcl[j] - it.zl[j] * out.dx[j]) / gl;
    }
    if (std::isfinite(s.hi[j])) {
      double gu = std::max(s.hi[j] - it.x[j], 1e-300);
      out.dzu[j] = (rcu[j] + it.zu[j] * out.dx[j]) / gu;
    }
  }
  return true;
}

// max step keeping slacks/duals positive, damped
void step_lengths(const Standard& s, const Iterate& it, const StepDirs& dir,
                  double& ap, double& ad) {
  ap = ad = 1.0;
  for (int j = 0; j < s.n; ++j) {
    if (std::isfinite(s.lo[j])) {
      double gl = it.x[j] - s.lo[j];
      if (dir.dx[j] < 0.0) ap = std::min(ap, -gl / dir.dx[j]);
      if (dir.dzl[j] < 0.0) ad = std::min(ad, -it.zl[j] / dir.dzl[j]);
    }
    if (std::isfinite(s.hi[j])) {
      double gu = s.hi[j] - it.x[j];
      if (dir.dx[j] > 0.0) ap = std::min(ap, gu / dir.dx[j]);
      if (dir.dzu[j] < 0.0) ad = std::min(ad, -it.zu[j] / dir.dzu[j]);
    }
  }
  ap = std::min(1.0, 0.9995 * ap);
  ad = std::min(1.0, 0.9995 * ad);
}

double objective_of(const QpProblem& p, const std::vector<double>& x) {
  double obj = 0.0;
  for (int j = 0; j < p.n; ++j) obj += p.c[j] * x[j];
  if (p.q_dense.rows > 0) {
    for (int i = 0; i < p.q_dense.rows; ++i)
      for (int j = 0; j < p.q_dense.cols; ++j)
        obj += 0.5 * x[i] * p.q_dense(i, j) * x[j];
  } else {
    for (size_t j = 0; j < p.q_diag.size(); ++j)
      obj += 0.5 * p.q_diag[j] * x[j] * x[j];
  }
  return obj;
}

}  // namespace

SolveResult solve_qp(const QpProblem& p) {
  Standard s = to_standard(p);
  SolveResult res;
  res.x.assign(p.n, 0.0);

  // starting point: interior of the box, unit duals
  Iterate it;
  it.x.assign(s.n, 0.0);
  it.y.assign(s.m, 0.0);
  it.zl.assign(s.n, 0.0);
  it.zu.assign(s.n, 0.0);
  for (int j = 0; j < s.n; ++j) {
    bool fl = std::isfinite(s.lo[j]), fu = std::isfinite(s.hi[j]);
    if (fl && fu)
      it.x[j] = 0.5 * (s.lo[j] + s.hi[j]);
    else if (fl)
      it.x[j] = s.lo[j] + 1.0;
    else if (fu)
      it.x[j] = s.hi[j] - 1.0;
    // duals sized so the initial stationarity residual stays O(1) even for
    // large penalty costs
    if (fl) it.zl[j] = 1.0 + std::max(s.c[j], 0.0);
    if (fu) it.zu[j] = 1.0 + std::max(-s.c[j], 0.0);
    if (fl && fu && s.hi[j] - s.lo[j] < 1e-12) it.x[j] = s.lo[j];
  }

  std::vector<double> rd, rp, rcl(s.n, 0.0), rcu(s.n, 0.0);
  double bscale = 1.0 + norm_inf(s.b);
  double cscale = 1.0 + norm_inf(s.c);
  double x0norm = 1.0 + norm_inf(it.x);
  int stall = 0;
  double best_rp = kInf;

  for (int iter = 1; iter <= kMaxIter; ++iter) {
    residuals(s, it, rd, rp);
    double mu = mu_of(s, it);
    double nrp = norm_inf(rp) / bscale;
    double nrd = norm_inf(rd) / cscale;
    res.iterations = iter;
    if (nrp < kPrimalTol * p.tol_scale && nrd < kDualTol * p.tol_scale &&
        mu < kGapTol * p.tol_scale) {
      res.status = SolveStatus::kOptimal;
      break;
    }
    if (norm_inf(it.x) > 1e9 * x0norm) {
      res.status =
          nrp > 1e-6 ? SolveStatus::kInfeasible : SolveStatus::kUnbounded;
      res.message = "iterates diverged";
      break;
    }
    if (nrp < best_rp * 0.999)
      best_rp = nrp, stall = 0;
    else if (iter > 10 && (++stall > 20 || (mu < 1e-11 && nrp > 1e-6))) {
      res.status = nrp > 1e-6 ? SolveStatus::kInfeasible : SolveStatus::kNumerical;
      res.message = "no primal progress";
      break;
    }

    // affine predictor
    for (int j = 0; j < s.n; ++j) {
      rcl[j] = std::isfinite(s.lo[j]) ? -(it.x[j] - s.lo[j]) * it.zl[j] : 0.0;
      rcu[j] = std::isfinite(s.hi[j]) ? -(s.hi[j] - it.x[j]) * it.zu[j] : 0.0;
    }
    StepDirs aff;
    if (!newton_solve(s, it, rd, rp, rcl, rcu, aff)) {
      res.status = SolveStatus::kNumerical;
      res.message = "newton factorization failed";
      break;
    }
    double ap, ad;
    step_lengths(s, it, aff, ap, ad);
    // mu after the affine step
    double mu_aff = 0.0;
    int cnt = 0;
    for (int j = 0; j < s.n; ++j) {
      if (std::isfinite(s.lo[j])) {
        mu_aff += (it.x[j] + ap * aff.dx[j] - s.lo[j]) *
                  (it.zl[j] + ad * aff.dzl[j]);
        ++cnt;
      }
      if (std::isfinite(s.hi[j])) {
        mu_aff += (s.hi[j] - it.x[j] - ap * aff.dx[j]) *
                  (it.zu[j] + ad * aff.dzu[j]);
        ++cnt;
      }
    }
    if (cnt) mu_aff /= cnt;
    double sigma = mu > 0 ? std::pow(mu_aff / mu, 3.0) : 0.1;
    sigma = clip(sigma, 1e-8, 0.999);

    // corrector
    for (int j = 0; j < s.n; ++j) {
      if (std::isfinite(s.lo[j]))
        rcl[j] = sigma * mu - (it.x[j] - s.lo[j]) * it.zl[j] -
                 aff.dx[j] * aff.dzl[j];
      if (std::isfinite(s.hi[j]))
        rcu[j] = sigma * mu - (s.hi[j] - it.x[j]) * it.zu[j] +
                 aff.dx[j] * aff.dzu[j];
    }
    StepDirs dir;
    if (!newton_solve(s, it, rd, rp, rcl, rcu, dir)) {
      res.status = SolveStatus::kNumerical;
      res.message = "newton factorization failed";
      break;
    }
    step_lengths(s, it, dir, ap, ad);
    for (int j = 0; j < s.n; ++j) {
      it.x[j] += ap * dir.dx[j];
      it.zl[j] += ad * dir.dzl[j];
      it.zu[j] += ad * dir.dzu[j];
    }
    for (int i = 0; i < s.m; ++i) it.y[i] += ad * dir.dy[i];
    if (std::getenv("ACUC_IPM_TRACE"))
      std::fprintf(stderr,
                   "it %3d mu %.3e nrp %.3e nrd %.3e sigma %.2e ap %.3f ad "
                   "%.3f |x| %.3e\n",
                   iter, mu, nrp, nrd, sigma, ap, ad, norm_inf(it.x));
    if (iter == kMaxIter) res.status = SolveStatus::kIterLimit;
  }

  for (int j = 0; j < p.n; ++j) res.x[j] = it.x[j];
  res.row_duals = it.y;
  res.objective = objective_of(p, res.x);
  residuals(s, it, rd, rp);
  res.primal_residual = norm_inf(rp);
  res.dual_residual = norm_inf(rd);
  res.complementarity = mu_of(s, it);
  // accept near-converged endings that the strict in-loop test missed
  if (res.status != SolveStatus::kOptimal &&
      res.status != SolveStatus::kInfeasible &&
      res.status != SolveStatus::kUnbounded &&
      res.primal_residual / bscale < 1e-7 * p.tol_scale &&
      res.dual_residual / cscale < 1e-7 * p.tol_scale &&
      res.complementarity < 1e-8 * p.tol_scale) {
    res.status = SolveStatus::kOptimal;
  }
  if (res.status == SolveStatus::kOptimal) res.message.clear();
  return res;
}

SolveResult solve_lp(const LpProblem& p) { return solve_qp(p); }

KktCheck check_kkt(const QpProblem& p, const SolveResult& r) {
  KktCheck k;
  for (int j = 0; j < p.n; ++j) {
    k.primal = std::max(k.primal, p.lo[j] - r.x[j]);
    k.primal = std::max(k.primal, r.x[j] - p.hi[j]);
  }
  for (const LinearRow& row : p.rows) {
    double ax = 0.0;
    for (auto& [j, v] : row.a) ax += v * r.x[j];
    if (row.eq)
      k.primal = std::max(k.primal, std::abs(ax - row.rhs));
    else
      k.primal = std::max(k.primal, ax - row.rhs);
  }
  // stationarity: c + Qx - A'y must be supported by active bounds
  std::vector<double> g(p.n, 0.0);
  for (int j = 0; j < p.n; ++j) g[j] = p.c[j];
  if (p.q_dense.rows > 0) {
    for (int i = 0; i < p.q_dense.rows; ++i)
      for (int j = 0; j < p.q_dense.cols; ++j) g[i] += p.q_dense(i, j) * r.x[j];
  } else {
    for (size_t j = 0; j < p.q_diag.size(); ++j) g[j] += p.q_diag[j] * r.x[j];
  }
  for (size_t i = 0; i < p.rows.size(); ++i)
    for (auto& [j, v] : p.rows[i].a) g[j] -= v * r.row_duals[i];
  for (int j = 0; j < p.n; ++j) {
    double lo_gap = std::isfinite(p.lo[j]) ? r.x[j] - p.lo[j] : kInf;
    double hi_gap = std::isfinite(p.hi[j]) ? p.hi[j] - r.x[j] : kInf;
    double viol;
    if (lo_gap < 1e-7)
      viol = std::min(g[j], 0.0);  // at lower bound, g >= 0 allowed
    else if (hi_gap < 1e-7)
      viol = std::max(g[j], 0.0);
    else
      viol = g[j];
    k.stationarity = std::max(k.stationarity, std::abs(viol));
  }
  for (size_t i = 0; i < p.rows.size(); ++i) {
    if (p.rows[i].eq) continue;
    double ax = 0.0;
    for (auto& [j, v] : p.rows[i].a) ax += v * r.x[j];
    k.complementarity =
        std::max(k.complementarity, std::abs(r.row_duals[i] * (p.rows[i].rhs - ax)));
  }
  return k;
}

std::string dump_problem(const QpProblem& p) {
  std::ostringstream os;
  os << "minimize\n ";
  for (int j = 0; j < p.n; ++j)
    if (p.c[j] != 0.0) os << (p.c[j] > 0 ? " +" : " ") << p.c[j] << " x" << j;
  os << "\nsubject to\n";
  for (size_t i = 0; i < p.rows.size(); ++i) {
    os << " r" << i << ":";
    for (auto& [j, v] : p.rows[i].a)
      os << (v > 0 ? " +" : " ") << v << " x" << j;
    os << (p.rows[i].eq ? " = " : " <= ") << p.rows[i].rhs << "\n";
  }
  os << "bounds\n";
  for (int j = 0; j < p.n; ++j)
    os << " " << p.lo[j] << " <= x" << j << " <= " << p.hi[j] << "\n";
  return os.str();
}

}  // namespace acuc
