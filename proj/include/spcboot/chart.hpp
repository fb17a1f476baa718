#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "spcboot/laws.hpp"
#include "spcboot/model.hpp"

namespace spcboot {

// Signals when f(x) > c with f(x) = (x - mu) / sigma, or |x - mu| / sigma when two-sided.
struct ShewhartStandardized {
  bool two_sided = false;
};

// How the mean-shift CUSUM increment uses the scale parameter:
//   unscaled      x - mu - delta/2
//   scaled        (x - mu - delta/2) / sigma
//   standardized  (x - mu) / sigma - delta/2
enum class Scaling { unscaled, scaled, standardized };

struct CusumMeanShift {
  double delta;
  Scaling scaling = Scaling::scaled;
};

// Log-likelihood ratio of Exp(mean delta*lambda) against Exp(mean lambda).
struct CusumExponentialLlr {
  double delta;
};

// Residual chart y - x*beta - delta/2.
struct CusumLinReg {
  double delta;
};

// Log-likelihood ratio for a shift of delta in the log odds.
struct CusumLogisticLlr {
  double delta;
};

struct ChartSpec {
  using Family =
      std::variant<ShewhartStandardized, CusumMeanShift, CusumExponentialLlr, CusumLinReg, CusumLogisticLlr>;

  Family family;

  static ChartSpec shewhart(bool two_sided = false);
  static ChartSpec cusum_mean_shift(double delta, Scaling scaling = Scaling::scaled);
  static ChartSpec cusum_exponential_llr(double delta);
  static ChartSpec cusum_linreg(double delta);
  static ChartSpec cusum_logistic_llr(double delta);

  bool is_shewhart() const { return std::holds_alternative<ShewhartStandardized>(family); }
  bool is_regression() const {
    return std::holds_alternative<CusumLinReg>(family) || std::holds_alternative<CusumLogisticLlr>(family);
  }
  // True when the chart divides by the fitted standard deviation.
  bool needs_scale() const;
  std::string describe() const;
};

/// Sorted distinct atoms with positive weights; cumulative[i] = sum of weights[0..i].
struct DiscreteAtoms {
  std::vector<double> atoms;
  std::vector<double> weights;
  std::vector<double> cumulative;
};

/// Law of one chart increment.
class UpdateDistribution {
 public:
  static UpdateDistribution closed_form(LawPtr law);
  // Sorts, merges exactly equal atoms and drops zero weights; weights are normalised.
  static UpdateDistribution discrete(std::span<const double> atoms, std::span<const double> weights);
  static UpdateDistribution point_mass(double at);

  double cdf(double x) const;
  double cdf_left(double x) const;
  double sample(RngStream& rng) const;
  double mean() const;

  bool is_discrete() const { return std::holds_alternative<DiscreteAtoms>(repr_); }
  const DiscreteAtoms& atoms() const { return std::get<DiscreteAtoms>(repr_); }
  const LawPtr& law() const { return std::get<LawPtr>(repr_); }

 private:
  explicit UpdateDistribution(std::variant<LawPtr, DiscreteAtoms> repr) : repr_(std::move(repr)) {}

  std::variant<LawPtr, DiscreteAtoms> repr_;
};

struct ChartPath {
  std::vector<double> values;  // values[0] = S_0 = 0, then one entry per observation
  std::optional<std::size_t> alarm_time;
  double threshold = 0.0;
};

UpdateDistribution update_distribution(const ChartSpec& chart, const InControlModel& model,
                                       const ChartParams& params);

// Per-observation increment (CUSUM) or statistic f(x) (Shewhart) for scalar charts.
double scalar_increment(const ChartSpec& chart, const ChartParams& params, double x);

ChartPath run_chart(const ChartSpec& chart, const ChartParams& params, double threshold,
                    std::span<const double> stream);
ChartPath run_chart(const ChartSpec& chart, const ChartParams& params, double threshold,
                    const JointSample& stream);

// Streaming form of the recursion, used by the monitor command.
class ChartState {
 public:
  ChartState(ChartSpec chart, ChartParams params, double threshold);

  // Feeds one observation; returns true when the chart alarms at this step.
  bool push(double x);
  bool push(double y, std::span<const double> x);

  double statistic() const { return statistic_; }
  std::size_t time() const { return time_; }
  bool alarmed() const { return alarmed_; }

 private:
  bool advance(double increment);

  ChartSpec chart_;
  ChartParams params_;
  double threshold_;
  double statistic_ = 0.0;
  std::size_t time_ = 0;
  bool alarmed_ = false;
};

}  // namespace spcboot
