#include "spcboot/regression.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "spcboot/error.hpp"

namespace spcboot {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMatrix> design(const JointSample& s) {
  return {s.xs().data(), static_cast<Eigen::Index>(s.size()), static_cast<Eigen::Index>(s.dim())};
}

Eigen::Map<const Eigen::VectorXd> response(const JointSample& s) {
  return {s.ys().data(), static_cast<Eigen::Index>(s.size())};
}

void require_overdetermined(const JointSample& s) {
  if (s.size() <= s.dim())
    fail(ErrorCode::rank_deficient,
         "need more rows (" + std::to_string(s.size()) + ") than coefficients (" + std::to_string(s.dim()) + ")");
}

double expit(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

RegressionFit fit_linear(const JointSample& sample) {
  require_overdetermined(sample);
  const Eigen::MatrixXd x = design(sample);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < x.cols()) fail(ErrorCode::rank_deficient, "design matrix does not have full column rank");
  const Eigen::VectorXd beta = qr.solve(response(sample));
  if (!beta.allFinite()) fail(ErrorCode::rank_deficient, "least squares produced non-finite coefficients");
  RegressionFit fit;
  fit.beta.assign(beta.data(), beta.data() + beta.size());
  fit.kind = FitKind::least_squares;
  return fit;
}

RegressionFit fit_logistic(const JointSample& sample) {
  if (sample.size() < sample.dim())
    fail(ErrorCode::rank_deficient, "need at least as many rows as coefficients");
  for (double y : sample.ys())
    if (y != 0.0 && y != 1.0) fail(ErrorCode::invalid_argument, "logistic responses must be 0 or 1");
  const auto x = design(sample);
  const auto y = response(sample);
  const Eigen::Index d = x.cols();

  auto log_likelihood = [&](const Eigen::VectorXd& b) {
    const Eigen::VectorXd eta = x * b;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y[i] * eta[i] - log1p_exp(eta[i]);
    return ll;
  };

  // Newton converges quadratically, so a tolerance near rounding level is cheap.
  const double tol = 1e-12 * static_cast<double>(x.rows()) * (1.0 + x.cwiseAbs().maxCoeff());
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  double ll = log_likelihood(beta);
  double last_step = 0.0;
  constexpr int max_iterations = 100;
  for (int iter = 0; iter <= max_iterations; ++iter) {
    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd p(eta.size());
    Eigen::VectorXd w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      p[i] = expit(eta[i]);
      w[i] = p[i] * (1.0 - p[i]);
    }
    const Eigen::VectorXd score = x.transpose() * (y - p);
    const double gnorm = score.lpNorm<Eigen::Infinity>();
    if (gnorm <= tol) {
      // under separation the score vanishes while Newton keeps taking unit-size steps
      if (last_step > 1e-3 || eta.cwiseAbs().maxCoeff() > 30.0)
        fail(ErrorCode::separation, "fitted probabilities reach 0 or 1; data are (quasi-)separated");
      RegressionFit fit;
      fit.beta.assign(beta.data(), beta.data() + d);
      fit.kind = FitKind::logistic_mle;
      fit.iterations = iter;
      fit.gradient_norm = gnorm;
      return fit;
    }
    if (iter == max_iterations) break;
    const Eigen::MatrixXd info = x.transpose() * w.asDiagonal() * x;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      fail(ErrorCode::separation, "Fisher information is singular; responses look separated");
    const Eigen::VectorXd step = ldlt.solve(score);
    double scale = 1.0;
    Eigen::VectorXd candidate = beta + step;
    double cand_ll = log_likelihood(candidate);
    for (int halving = 0; halving < 30 && !(cand_ll >= ll - 1e-12 * std::abs(ll)); ++halving) {
      scale *= 0.5;
      candidate = beta + scale * step;
      cand_ll = log_likelihood(candidate);
    }
    last_step = (candidate - beta).lpNorm<Eigen::Infinity>();
    beta = candidate;
    ll = cand_ll;
    if (!beta.allFinite() || beta.norm() > 1e3)
      fail(ErrorCode::separation, "coefficients diverge; data are (quasi-)separated");
  }
  fail(ErrorCode::no_convergence, "logistic fit did not converge in 100 iterations");
}

double log1p_exp(double t) noexcept {
  if (t > 35.0) return t + std::exp(-t);
  if (t < -35.0) return std::exp(t);
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double linreg_increment(double y, std::span<const double> x, std::span<const double> beta, double delta) {
  return y - dot(x, beta) - 0.5 * delta;
}

double logistic_llr_increment(double y, std::span<const double> x, std::span<const double> beta,
                              double delta) {
  if (delta == 0.0) return 0.0;
  const double eta = dot(x, beta);
  return y * delta + log1p_exp(eta) - log1p_exp(delta + eta);
}

UpdateDistribution joint_update_distribution(const ChartSpec& chart, const JointSample& rows,
                                             std::span<const double> beta) {
  if (beta.size() != rows.dim())
    fail(ErrorCode::incompatible_model_chart, "coefficient count does not match covariate dimension");
  std::vector<double> atoms(rows.size());
  const bool linear = std::holds_alternative<CusumLinReg>(chart.family);
  if (!linear && !std::holds_alternative<CusumLogisticLlr>(chart.family))
    fail(ErrorCode::incompatible_model_chart, "joint update law needs a regression chart");
  const double delta = linear ? std::get<CusumLinReg>(chart.family).delta
                              : std::get<CusumLogisticLlr>(chart.family).delta;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    atoms[i] = linear ? linreg_increment(rows.y(i), rows.x(i), beta, delta)
                      : logistic_llr_increment(rows.y(i), rows.x(i), beta, delta);
  }
  const std::vector<double> weights(rows.size(), 1.0 / static_cast<double>(rows.size()));
  return UpdateDistribution::discrete(atoms, weights);
}

}  // namespace spcboot
