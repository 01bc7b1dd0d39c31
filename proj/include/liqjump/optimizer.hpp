#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace liqjump {

// max mu'w - lambda/2 w' Sigma w  s.t.  sum w = 1, 0 <= w_i <= cap (risky), 0 <= w_rf <= 1
struct MvProblem {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  double lambda = 1.0;
  double cap = 0.3;
  int riskfree_index = 0;  // -1 when no risk-free asset is present
};

using WeightVector = Eigen::VectorXd;

struct RiskAversion {
  double lambda = 0.0;
  bool clamped = false;
};

inline constexpr double kLambdaFloor = 0.1;

// Mean over variance of the market-portfolio returns in the window.
RiskAversion risk_aversion(std::span<const double> market_returns, double floor = kLambdaFloor);

inline constexpr double kKktTolerance = 1e-7;
inline constexpr double kJitterBudget = 1e-6;

struct MvSolution {
  WeightVector w;
  double objective = 0.0;
  double kkt_residual = 0.0;
  double jitter = 0.0;  // diagonal repair added to Sigma
  int iterations = 0;
  bool used_fallback = false;
};

double mv_objective(const MvProblem& problem, const WeightVector& w);

// Scaled first-order optimality residual of w for the problem.
double kkt_residual(const MvProblem& problem, const WeightVector& w);

// Primal active-set solver; projected gradient when it fails to certify.
MvSolution solve_mv(const MvProblem& problem);

struct BruteForceResult {
  WeightVector w;
  double objective = 0.0;
  std::size_t scanned = 0;
};

inline constexpr int kBruteForceMaxAssets = 4;

// Exhaustive scan of the simplex grid with spacing grid_step.
BruteForceResult brute_force_mv(const MvProblem& problem, double grid_step);

// Worst violation of the simplex, sign and cap constraints.
double constraint_violation(const MvProblem& problem, const WeightVector& w);

// Sample (n-1) covariance of the columns of `obs` (rows are days).
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& obs);

struct WeightRecord {
  int date_index = 0;
  int portfolio_id = 0;
  int asset = 0;
  double weight = 0.0;
};

void write_weights(std::ostream& out, std::span<const WeightRecord> rows, bool header = true);

}  // namespace liqjump
