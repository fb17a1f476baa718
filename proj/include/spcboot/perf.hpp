#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "spcboot/chart.hpp"
#include "spcboot/markov.hpp"
#include "spcboot/model.hpp"

namespace spcboot {

enum class BaseMeasure { arl, hit, c_arl, c_hit };
enum class Transform { identity, log, logit };

/// Which performance measure q is computed, and on which scale.
struct PerfMeasure {
  BaseMeasure base = BaseMeasure::arl;
  double threshold = 0.0;  // c, for arl and hit
  long horizon = 0;        // T, for hit and c_hit
  double gamma = 0.0;      // target ARL, for c_arl
  double beta = 0.0;       // target false-alarm probability, for c_hit
  Transform transform = Transform::identity;

  static PerfMeasure arl(double c, Transform t = Transform::identity);
  static PerfMeasure hit(double c, long horizon, Transform t = Transform::identity);
  static PerfMeasure c_arl(double gamma, Transform t = Transform::identity);
  static PerfMeasure c_hit(long horizon, double beta, Transform t = Transform::identity);

  PerfMeasure with_transform(Transform t) const;
  PerfMeasure untransformed() const { return with_transform(Transform::identity); }

  bool is_threshold() const { return base == BaseMeasure::c_arl || base == BaseMeasure::c_hit; }
  // e.g. "log(c_ARL(gamma=100))"
  std::string describe() const;
};

double apply_transform(Transform t, double value);
double inverse_transform(Transform t, double value);
const char* transform_name(Transform t);

// P(f(X) > c) for a Shewhart chart; exact for every scalar model kind.
double shewhart_exceedance(const ChartSpec& chart, const InControlModel& model, const ChartParams& params,
                           double c);

// ARL = 1/p and hit = 1 - (1 - p)^T. Threshold measures are not accepted here.
double shewhart_measure(double p, const PerfMeasure& measure);

// Inverts the exceedance function p(c) = target to |dc| <= 1e-9.
double shewhart_threshold(const ChartSpec& chart, const InControlModel& model, const ChartParams& params,
                          double target);

/// Smallest c with ARL(c) >= gamma (c_arl) or hit(c) <= beta (c_hit) under the
/// Markov approximation, to a bracket width of 1e-6 * max(1, c). The bracket is
/// searched by doubling or halving from c = 1 within [2^-16, 2^16], or by a
/// widening search around `hint` when one is given; the answer is the same.
double invert_threshold(const UpdateDistribution& update, const PerfMeasure& measure, const MarkovConfig& cfg,
                        std::optional<double> hint = std::nullopt);

// Untransformed value of the measure for a CUSUM increment law.
double cusum_measure(const UpdateDistribution& update, const PerfMeasure& measure, const MarkovConfig& cfg,
                     std::optional<double> hint = std::nullopt);

struct McConfig {
  long runs = 10000;
  long horizon_cap = 0;  // 0 picks 10^7 steps for ARL runs
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

struct McResult {
  double estimate = 0.0;
  double std_error = 0.0;
  long runs = 0;
  long truncated = 0;
};

// Throws TruncatedRuns when more than 0.1% of the runs reach the cap.
McResult arl_monte_carlo(const UpdateDistribution& update, double threshold, const McConfig& cfg);
McResult hit_monte_carlo(const UpdateDistribution& update, double threshold, long horizon, const McConfig& cfg);

struct EvalConfig {
  MarkovConfig markov;
  bool monte_carlo = false;
  McConfig mc;
};

/// q(model; params) on the measure's transformed scale. `hint` is a starting
/// guess for threshold measures on CUSUM charts.
double eval_measure(const ChartSpec& chart, const InControlModel& model, const ChartParams& params,
                    const PerfMeasure& measure, const EvalConfig& cfg, std::optional<double> hint = std::nullopt);

}  // namespace spcboot
