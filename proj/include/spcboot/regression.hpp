#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "spcboot/chart.hpp"
#include "spcboot/model.hpp"

namespace spcboot {

enum class FitKind { least_squares, logistic_mle };

struct RegressionFit {
  std::vector<double> beta;
  FitKind kind = FitKind::least_squares;
  int iterations = 0;
  double gradient_norm = 0.0;  // max-norm of the score at beta (logistic only)
  bool converged = true;
};

// Least squares via column-pivoted Householder QR of the design matrix.
RegressionFit fit_linear(const JointSample& sample);

/// Newton-Raphson with step halving. Converged when the score max-norm is at
/// most 1e-8; fails with Separation once |beta| exceeds 1e3.
RegressionFit fit_logistic(const JointSample& sample);

double linreg_increment(double y, std::span<const double> x, std::span<const double> beta, double delta);

// y*delta + log(1 + e^eta) - log(1 + e^(delta + eta)) with eta = x*beta.
double logistic_llr_increment(double y, std::span<const double> x, std::span<const double> beta,
                              double delta);

// log(1 + e^t) without overflow.
double log1p_exp(double t) noexcept;

UpdateDistribution joint_update_distribution(const ChartSpec& chart, const JointSample& rows,
                                             std::span<const double> beta);

}  // namespace spcboot
