#include "spcboot/markov.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "spcboot/error.hpp"

namespace spcboot {

namespace {

void validate(double threshold, const MarkovConfig& cfg) {
  if (!(threshold > 0.0) || !std::isfinite(threshold))
    fail(ErrorCode::invalid_argument, "threshold must be positive and finite");
  if (cfg.grid_points < 2) fail(ErrorCode::invalid_argument, "grid_points must be at least 2");
}

MarkovConfig refined(const MarkovConfig& cfg) {
  return MarkovConfig{2 * (cfg.grid_points - 1) + 1, false};
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Fills the row-major transition matrix. Every CDF argument r_j - r_i lies on the
// half-cell lattice m * w / 2 with |m| <= 2 * cells, so O(N) CDF calls suffice.
RowMatrix build_transition(const UpdateDistribution& update, double threshold, int grid_points) {
  const int cells = grid_points - 1;
  const int lo = -(2 * cells - 1);
  const int hi = 2 * cells;
  const double denom = 2.0 * cells;
  auto lattice = [&](int m) {
    if (m == 0) return 0.0;
    if (m == hi) return threshold;
    return static_cast<double>(m) * threshold / denom;
  };
  std::vector<double> cdf(static_cast<std::size_t>(hi - lo + 1));
  for (int m = lo; m <= hi; ++m) cdf[static_cast<std::size_t>(m - lo)] = update.cdf(lattice(m));
  // Left limits only matter at the absorbing boundary c - r_i.
  std::vector<double> cdf_left = cdf;
  if (update.is_discrete()) {
    for (int m = 0; m <= hi; ++m) cdf_left[static_cast<std::size_t>(m - lo)] = update.cdf_left(lattice(m));
  }
  const double* F = cdf.data() - lo;
  const double* FL = cdf_left.data() - lo;

  RowMatrix q(grid_points, grid_points);
  for (int i = 0; i < grid_points; ++i) {
    // Doubled representative: 0 for the atom, 2i - 1 for the midpoint of cell i.
    const int r2 = i == 0 ? 0 : 2 * i - 1;
    double* row = q.row(i).data();
    row[0] = F[-r2];
    for (int j = 1; j < cells; ++j) row[j] = std::max(0.0, F[2 * j - r2] - F[2 * j - 2 - r2]);
    row[cells] = std::max(0.0, FL[2 * cells - r2] - F[2 * cells - 2 - r2]);
  }
  return q;
}

// I - Q is a nonsingular M-matrix whenever absorption is certain, so Gaussian
// elimination needs no pivoting and its inverse is entrywise nonnegative. That
// makes ||(I - Q)^-1||_inf = max_i a_i, giving the exact condition number.
double solve_arl(const UpdateDistribution& update, double threshold, const MarkovConfig& cfg) {
  RowMatrix a = build_transition(update, threshold, cfg.grid_points);
  const Eigen::Index n = a.rows();
  a = RowMatrix::Identity(n, n) - a;
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  Eigen::VectorXd b = Eigen::VectorXd::Ones(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double pivot = a(k, k);
    if (!(pivot > 1e-14 * norm))
      fail(ErrorCode::non_absorbing, "absorption is not certain (vanishing pivot in I - Q)");
    const double* pk = a.row(k).data();
    for (Eigen::Index i = k + 1; i < n; ++i) {
      double* pi = a.row(i).data();
      const double l = pi[k] / pivot;
      if (l == 0.0) continue;
      for (Eigen::Index j = k + 1; j < n; ++j) pi[j] -= l * pk[j];
      b[i] -= l * b[k];
    }
  }
  for (Eigen::Index k = n - 1; k >= 0; --k) {
    const double* pk = a.row(k).data();
    double s = b[k];
    for (Eigen::Index j = k + 1; j < n; ++j) s -= pk[j] * b[j];
    b[k] = s / pk[k];
  }
  const double worst = b.maxCoeff();
  if (!std::isfinite(worst) || !(b.minCoeff() >= 1.0 - 1e-9))
    fail(ErrorCode::non_absorbing, "linear solve returned an invalid run length");
  if (norm * worst > 1e12)
    fail(ErrorCode::non_absorbing,
         "I - Q is near singular (condition " + std::to_string(norm * worst) + " > 1e12)");
  return b[0];
}

double solve_hit(const UpdateDistribution& update, double threshold, long horizon, const MarkovConfig& cfg) {
  const RowMatrix q = build_transition(update, threshold, cfg.grid_points);
  Eigen::VectorXd survive = Eigen::VectorXd::Ones(q.rows());
  Eigen::VectorXd next(q.rows());
  for (long t = 0; t < horizon; ++t) {
    next.noalias() = q * survive;
    survive.swap(next);
  }
  return std::clamp(1.0 - survive[0], 0.0, 1.0);
}

}  // namespace

Eigen::MatrixXd markov_transition(const UpdateDistribution& update, double threshold, const MarkovConfig& cfg) {
  validate(threshold, cfg);
  return build_transition(update, threshold, cfg.grid_points);
}

double arl_markov(const UpdateDistribution& update, double threshold, const MarkovConfig& cfg) {
  validate(threshold, cfg);
  const double coarse = solve_arl(update, threshold, cfg);
  if (!cfg.richardson) return coarse;
  const double fine = solve_arl(update, threshold, refined(cfg));
  return (4.0 * fine - coarse) / 3.0;
}

double hit_markov(const UpdateDistribution& update, double threshold, long horizon, const MarkovConfig& cfg) {
  validate(threshold, cfg);
  if (horizon < 1) fail(ErrorCode::invalid_argument, "horizon T must be at least 1");
  const double coarse = solve_hit(update, threshold, horizon, cfg);
  if (!cfg.richardson) return coarse;
  const double fine = solve_hit(update, threshold, horizon, refined(cfg));
  return std::clamp((4.0 * fine - coarse) / 3.0, 0.0, 1.0);
}

}  // namespace spcboot
