#include "liqjump/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "liqjump/error.hpp"
#include "liqjump/stats.hpp"

namespace liqjump {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxActiveSetIterations = 500;
constexpr int kMaxGradientIterations = 200000;

// Minimization form: f(w) = 1/2 w'Hw - c'w, lo <= w <= hi, sum w = 1.
struct Qp {
  Eigen::MatrixXd H;
  Eigen::VectorXd c;
  Eigen::VectorXd hi;
  double scale = 1.0;
  double jitter = 0.0;
};

Eigen::VectorXd upper_bounds(const MvProblem& p) {
  const Eigen::Index n = p.mu.size();
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(n, std::min(p.cap, 1.0));
  if (p.riskfree_index >= 0) hi[p.riskfree_index] = 1.0;
  return hi;
}

void validate(const MvProblem& p) {
  const Eigen::Index n = p.mu.size();
  if (n == 0) throw Error(ErrorKind::data, "empty portfolio problem");
  if (p.sigma.rows() != n || p.sigma.cols() != n) {
    throw Error(ErrorKind::data, "covariance dimension does not match the return vector");
  }
  if (!p.mu.allFinite() || !p.sigma.allFinite()) throw Error(ErrorKind::data, "non-finite problem data");
  if (!(p.lambda > 0.0) || !std::isfinite(p.lambda)) throw Error(ErrorKind::config, "risk aversion must be positive");
  if (!(p.cap > 0.0)) throw Error(ErrorKind::config, "weight cap must be positive");
  if (p.riskfree_index >= n) throw Error(ErrorKind::config, "risk-free index out of range");
  if (p.riskfree_index >= 0) {
    const auto k = p.riskfree_index;
    if (p.mu[k] != 0.0 || p.sigma.row(k).cwiseAbs().maxCoeff() != 0.0 ||
        p.sigma.col(k).cwiseAbs().maxCoeff() != 0.0) {
      throw Error(ErrorKind::data, "risk-free asset must have zero return and zero covariance");
    }
  }
  if (upper_bounds(p).sum() < 1.0 - 1e-12) {
    throw Error(ErrorKind::config, "weight caps leave the budget constraint infeasible");
  }
}

Qp build_qp(const MvProblem& p) {
  validate(p);
  Qp qp;
  Eigen::MatrixXd S = 0.5 * (p.sigma + p.sigma.transpose());
  const double asym = (p.sigma - p.sigma.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8 * std::max(1.0, p.sigma.cwiseAbs().maxCoeff())) {
    throw Error(ErrorKind::data, "covariance matrix is not symmetric");
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S, Eigen::EigenvaluesOnly);
  const double min_eig = eig.eigenvalues().minCoeff();
  if (min_eig < 0.0) {
    // Risk-free row stays zero; its zero eigenvalue never drives the repair.
    if (-min_eig > kJitterBudget) {
      throw Error(ErrorKind::numeric, "covariance repair exceeds the jitter budget");
    }
    qp.jitter = -min_eig;
    for (Eigen::Index i = 0; i < S.rows(); ++i) {
      if (i != p.riskfree_index) S(i, i) += qp.jitter;
    }
  }
  qp.H = p.lambda * S;
  qp.c = p.mu;
  qp.hi = upper_bounds(p);
  qp.scale = std::max({1.0, qp.c.cwiseAbs().maxCoeff(), qp.H.cwiseAbs().maxCoeff()});
  return qp;
}

enum class Bound : std::uint8_t { free, lower, upper };

// Residual of the KKT system with the budget multiplier chosen to minimize it.
double kkt_of(const Qp& qp, const Eigen::VectorXd& w) {
  const Eigen::Index n = w.size();
  const Eigen::VectorXd g = qp.H * w - qp.c;
  constexpr double eps = 1e-12;
  // Interval of budget multipliers nu consistent with sign conditions, and the
  // free-variable values of -g.
  double lo = -kInf;
  double hi = kInf;
  std::vector<double> free_vals;
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool at_lo = w[i] <= eps;
    const bool at_hi = qp.hi[i] < 1.0 && w[i] >= qp.hi[i] - eps;
    if (at_lo) {
      lo = std::max(lo, -g[i]);  // g_i + nu >= 0
    } else if (at_hi) {
      hi = std::min(hi, -g[i]);  // g_i + nu <= 0
    } else {
      free_vals.push_back(-g[i]);
    }
  }
  double nu = 0.0;
  if (!free_vals.empty()) {
    nu = stats::percentile_linear(free_vals, 0.5);
  } else if (lo <= hi) {
    nu = std::isfinite(lo) ? (std::isfinite(hi) ? 0.5 * (lo + hi) : lo) : (std::isfinite(hi) ? hi : 0.0);
  } else {
    nu = 0.5 * (lo + hi);
  }
  double r = std::fabs(w.sum() - 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    r = std::max(r, std::max(0.0, -w[i]));
    r = std::max(r, std::max(0.0, w[i] - qp.hi[i]));
    const double s = g[i] + nu;
    const bool at_lo = w[i] <= eps;
    const bool at_hi = qp.hi[i] < 1.0 && w[i] >= qp.hi[i] - eps;
    if (at_lo) {
      r = std::max(r, std::max(0.0, -s) / qp.scale);
    } else if (at_hi) {
      r = std::max(r, std::max(0.0, s) / qp.scale);
    } else {
      r = std::max(r, std::fabs(s) / qp.scale);
    }
  }
  return r;
}

// Feasible start: the risk-free asset when present, else fill greedily.
void initial_point(const Qp& qp, int riskfree, Eigen::VectorXd& w, std::vector<Bound>& state) {
  const Eigen::Index n = qp.c.size();
  w.setZero(n);
  state.assign(n, Bound::lower);
  if (riskfree >= 0) {
    w[riskfree] = 1.0;
    state[riskfree] = Bound::free;
    return;
  }
  double left = 1.0;
  for (Eigen::Index i = 0; i < n && left > 0.0; ++i) {
    const double take = std::min(qp.hi[i], left);
    w[i] = take;
    left -= take;
    state[i] = (left > 0.0 && take == qp.hi[i]) ? Bound::upper : Bound::free;
  }
}

bool active_set(const Qp& qp, int riskfree, Eigen::VectorXd& w, int& iterations) {
  const Eigen::Index n = qp.c.size();
  std::vector<Bound> state;
  initial_point(qp, riskfree, w, state);
  const double tol = 1e-13 * qp.scale;

  for (iterations = 0; iterations < kMaxActiveSetIterations; ++iterations) {
    std::vector<Eigen::Index> F;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (state[i] == Bound::free) F.push_back(i);
    }
    if (F.empty()) return false;
    const Eigen::VectorXd g = qp.H * w - qp.c;
    const Eigen::Index m = static_cast<Eigen::Index>(F.size()) - 1;

    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
    bool newton = true;
    if (m > 0) {
      // Null space of the budget row restricted to F: columns e_k - e_f0.
      const Eigen::Index f0 = F[0];
      Eigen::VectorXd gz(m);
      Eigen::MatrixXd hz(m, m);
      for (Eigen::Index a = 0; a < m; ++a) {
        const Eigen::Index ka = F[a + 1];
        gz[a] = g[ka] - g[f0];
        for (Eigen::Index b = 0; b < m; ++b) {
          const Eigen::Index kb = F[b + 1];
          hz(a, b) = qp.H(ka, kb) - qp.H(ka, f0) - qp.H(f0, kb) + qp.H(f0, f0);
        }
      }
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hz);
      const Eigen::VectorXd& ev = eig.eigenvalues();
      const Eigen::MatrixXd& V = eig.eigenvectors();
      const double curv_tol = 1e-12 * qp.scale;
      Eigen::VectorXd dz = Eigen::VectorXd::Zero(m);
      // Zero-curvature directions with a gradient component give unbounded
      // descent along them; follow them to the nearest bound.
      for (Eigen::Index j = 0; j < m; ++j) {
        const double proj = V.col(j).dot(gz);
        if (ev[j] <= curv_tol && std::fabs(proj) > tol) {
          dz -= proj * V.col(j);
          newton = false;
        }
      }
      if (newton) {
        for (Eigen::Index j = 0; j < m; ++j) {
          if (ev[j] > curv_tol) dz -= (V.col(j).dot(gz) / ev[j]) * V.col(j);
        }
      }
      for (Eigen::Index a = 0; a < m; ++a) {
        d[F[a + 1]] = dz[a];
        d[f0] -= dz[a];
      }
    }

    const double dmax = d.cwiseAbs().maxCoeff();
    if (dmax > 1e-15) {
      double alpha = newton ? 1.0 : kInf;
      Eigen::Index block = -1;
      Bound block_to = Bound::free;
      for (Eigen::Index i : F) {
        if (d[i] < -1e-18) {
          const double t = w[i] / -d[i];
          if (t < alpha) {
            alpha = t;
            block = i;
            block_to = Bound::lower;
          }
        } else if (d[i] > 1e-18 && qp.hi[i] < 1.0) {
          const double t = (qp.hi[i] - w[i]) / d[i];
          if (t < alpha) {
            alpha = t;
            block = i;
            block_to = Bound::upper;
          }
        }
      }
      if (!std::isfinite(alpha)) return false;
      w += alpha * d;
      if (block >= 0) {
        state[block] = block_to;
        w[block] = block_to == Bound::lower ? 0.0 : qp.hi[block];
        Eigen::Index largest = -1;
        for (Eigen::Index i : F) {
          if (state[i] == Bound::free && (largest < 0 || w[i] > w[largest])) largest = i;
        }
        if (largest >= 0) w[largest] += 1.0 - w.sum();
        continue;
      }
      if (!newton) continue;
    }

    // Subproblem optimal: check multipliers of the bound constraints.
    const Eigen::VectorXd g2 = qp.H * w - qp.c;
    double nu = 0.0;
    for (Eigen::Index i : F) nu -= g2[i];
    nu /= static_cast<double>(F.size());
    Eigen::Index release = -1;
    double worst = -tol;
    for (Eigen::Index i = 0; i < n; ++i) {
      double z = 0.0;
      if (state[i] == Bound::lower) {
        z = g2[i] + nu;
      } else if (state[i] == Bound::upper) {
        z = -(g2[i] + nu);
      } else {
        continue;
      }
      if (z < worst) {
        worst = z;
        release = i;
      }
    }
    if (release < 0) return true;
    state[release] = Bound::free;
  }
  return false;
}

// Euclidean projection onto {sum w = 1, 0 <= w <= hi} by bisection on the shift.
Eigen::VectorXd project_capped_simplex(const Eigen::VectorXd& y, const Eigen::VectorXd& hi) {
  double lo_t = y.minCoeff() - 1.0;
  double hi_t = y.maxCoeff();
  Eigen::VectorXd w(y.size());
  for (int it = 0; it < 200; ++it) {
    const double t = 0.5 * (lo_t + hi_t);
    w = (y.array() - t).max(0.0).min(hi.array());
    if (w.sum() > 1.0) {
      lo_t = t;
    } else {
      hi_t = t;
    }
  }
  w = (y.array() - 0.5 * (lo_t + hi_t)).max(0.0).min(hi.array());
  return w;
}

Eigen::VectorXd projected_gradient(const Qp& qp, int riskfree, int& iterations) {
  Eigen::VectorXd w;
  std::vector<Bound> state;
  initial_point(qp, riskfree, w, state);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(qp.H, Eigen::EigenvaluesOnly);
  const double L = std::max(eig.eigenvalues().maxCoeff(), 1e-12);
  Eigen::VectorXd y = w;
  double t = 1.0;
  for (iterations = 0; iterations < kMaxGradientIterations; ++iterations) {
    const Eigen::VectorXd next = project_capped_simplex(y - (qp.H * y - qp.c) / L, qp.hi);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / t_next) * (next - w);
    const double change = (next - w).cwiseAbs().maxCoeff();
    w = next;
    t = t_next;
    if (change < 1e-15) break;
  }
  return w;
}

}  // namespace

RiskAversion risk_aversion(std::span<const double> market_returns, double floor) {
  if (market_returns.size() < 2) throw Error(ErrorKind::data, "risk aversion needs at least 2 returns");
  const double var = stats::sample_variance(market_returns);
  const double m = stats::mean(market_returns);
  // A constant series leaves only rounding noise in the variance.
  if (!(var > std::numeric_limits<double>::epsilon() * m * m) || !(var > 0.0)) throw Error(ErrorKind::numeric, "market returns have zero variance");
  RiskAversion ra;
  ra.lambda = m / var;
  if (!(ra.lambda > 0.0)) {
    ra.lambda = floor;
    ra.clamped = true;
  }
  return ra;
}

double mv_objective(const MvProblem& problem, const WeightVector& w) {
  return problem.mu.dot(w) - 0.5 * problem.lambda * w.dot(problem.sigma * w);
}

double kkt_residual(const MvProblem& problem, const WeightVector& w) {
  return kkt_of(build_qp(problem), w);
}

double constraint_violation(const MvProblem& problem, const WeightVector& w) {
  const Eigen::VectorXd hi = upper_bounds(problem);
  double v = std::fabs(w.sum() - 1.0);
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    v = std::max({v, -w[i], w[i] - hi[i]});
  }
  return v;
}

MvSolution solve_mv(const MvProblem& problem) {
  const Qp qp = build_qp(problem);
  MvSolution sol;
  sol.jitter = qp.jitter;
  Eigen::VectorXd w;
  int iterations = 0;
  const bool ok = active_set(qp, problem.riskfree_index, w, iterations);
  sol.iterations = iterations;
  double r = ok ? kkt_of(qp, w) : kInf;
  if (!ok || r > kKktTolerance) {
    int pg_iterations = 0;
    Eigen::VectorXd w2 = projected_gradient(qp, problem.riskfree_index, pg_iterations);
    const double r2 = kkt_of(qp, w2);
    sol.iterations += pg_iterations;
    if (r2 < r) {
      w = std::move(w2);
      r = r2;
      sol.used_fallback = true;
    }
  }
  if (!(r <= kKktTolerance)) {
    throw Error(ErrorKind::numeric, "portfolio optimizer failed to certify optimality");
  }
  // Snap round-off onto the bounds.
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = std::clamp(w[i], 0.0, qp.hi[i]);
  sol.w = std::move(w);
  sol.kkt_residual = r;
  sol.objective = mv_objective(problem, sol.w);
  return sol;
}

BruteForceResult brute_force_mv(const MvProblem& problem, double grid_step) {
  validate(problem);
  const int n = static_cast<int>(problem.mu.size());
  if (n > kBruteForceMaxAssets) throw Error(ErrorKind::config, "brute force limited to 4 assets");
  if (!(grid_step > 0.0) || grid_step > 1.0) throw Error(ErrorKind::config, "grid step must lie in (0, 1]");
  const int K = static_cast<int>(std::lround(1.0 / grid_step));
  if (std::fabs(K * grid_step - 1.0) > 1e-9) throw Error(ErrorKind::config, "grid step must divide 1");
  const Eigen::VectorXd hi = upper_bounds(problem);

  BruteForceResult best;
  best.objective = -kInf;
  std::vector<int> k(n, 0);
  Eigen::VectorXd w(n);
  // Enumerate compositions of K into n parts in lexicographic order.
  const auto visit = [&](auto&& self, int i, int left) -> void {
    if (i == n - 1) {
      k[i] = left;
      ++best.scanned;
      for (int j = 0; j < n; ++j) w[j] = static_cast<double>(k[j]) / K;
      for (int j = 0; j < n; ++j) {
        if (w[j] > hi[j] + 1e-12) return;
      }
      const double obj = mv_objective(problem, w);
      if (obj > best.objective) {
        best.objective = obj;
        best.w = w;
      }
      return;
    }
    for (int v = 0; v <= left; ++v) {
      k[i] = v;
      self(self, i + 1, left - v);
    }
  };
  visit(visit, 0, K);
  if (best.w.size() == 0) throw Error(ErrorKind::config, "no grid point satisfies the caps");
  return best;
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& obs) {
  if (obs.rows() < 2) throw Error(ErrorKind::data, "covariance needs at least 2 observations");
  const Eigen::RowVectorXd mean = obs.colwise().mean();
  const Eigen::MatrixXd centered = obs.rowwise() - mean;
  return (centered.transpose() * centered) / static_cast<double>(obs.rows() - 1);
}

void write_weights(std::ostream& out, std::span<const WeightRecord> rows, bool header) {
  if (header) out << "date_index,portfolio_id,asset,weight\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.weight);
    out << r.date_index << ',' << r.portfolio_id << ',' << r.asset << ',' << buf << '\n';
  }
}

}  // namespace liqjump
