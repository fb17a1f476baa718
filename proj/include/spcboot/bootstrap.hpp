#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spcboot/chart.hpp"
#include "spcboot/error.hpp"
#include "spcboot/model.hpp"
#include "spcboot/perf.hpp"
#include "spcboot/random.hpp"

namespace spcboot {

enum class Scheme { parametric, nonparametric };
enum class Direction { upper_bound_on_q, lower_bound_on_q };

const char* scheme_name(Scheme s);
const char* direction_name(Direction d);

// ARL asks for a lower bound; hit and the thresholds for an upper bound.
Direction natural_direction(const PerfMeasure& measure);

struct BootstrapConfig {
  int B = 1000;
  double alpha = 0.1;
  Scheme scheme = Scheme::parametric;
  std::uint64_t master_seed = 1;
  std::optional<Direction> direction;  // defaults to natural_direction per measure
  unsigned workers = 1;
  EvalConfig eval;

  void validate() const;
};

struct ReplicateFailure {
  std::size_t replicate;
  ErrorCode code;
  std::string message;
};

struct PivotSample {
  std::vector<double> values;  // successful replicates, in replicate order
  std::vector<ReplicateFailure> failures;
  std::size_t requested = 0;
};

struct PivotSummary {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

struct AdjustmentResult {
  PerfMeasure measure;
  Direction direction = Direction::upper_bound_on_q;
  double alpha = 0.0;
  int B = 0;
  double q_hat = 0.0;              // on the transformed scale
  double p_star = 0.0;             // on the transformed scale
  double bound_transformed = 0.0;  // q_hat - p_star
  double bound = 0.0;              // bound_transformed back on the natural scale
  double q_hat_natural = 0.0;
  PivotSummary pivot_summary;
  std::size_t failures = 0;
};

/// Draws n observations from P-hat under the scheme and refits. Joint models
/// resample rows. When `chart` is given the refit must also yield usable chart
/// parameters (nonzero spread for charts that divide by sigma, a regression fit
/// for regression charts). A failed draw is retried once from the same stream,
/// then DegenerateResample is thrown.
InControlModel resample_model(const InControlModel& model, Scheme scheme, std::size_t n, RngStream& rng,
                              const ChartSpec* chart = nullptr);

PivotSample pivot_sample(const ChartSpec& chart, const InControlModel& model, const PerfMeasure& measure,
                         const BootstrapConfig& cfg);

// One resample per replicate shared by all measures. Measures that differ only
// in their transform share the underlying evaluations.
std::vector<PivotSample> pivot_samples(const ChartSpec& chart, const InControlModel& model,
                                       const std::vector<PerfMeasure>& measures, const BootstrapConfig& cfg);

// Order statistic ceil(level * B) with level = alpha for upper bounds on q and
// 1 - alpha for lower bounds.
double quantile_pivot(const PivotSample& pivot, double alpha, Direction direction);

// Order-statistic quantile of arbitrary values at `level`, same convention.
double empirical_quantile(std::vector<double> values, double level);

AdjustmentResult adjust(const ChartSpec& chart, const InControlModel& model, const PerfMeasure& measure,
                        const BootstrapConfig& cfg);
std::vector<AdjustmentResult> adjust_all(const ChartSpec& chart, const InControlModel& model,
                                         const std::vector<PerfMeasure>& measures, const BootstrapConfig& cfg);

// Whether the true value lies in the one-sided interval given by the bound.
bool covers(const AdjustmentResult& result, double true_value);

/// The data-generating law P of a coverage study.
class TrueProcess {
 public:
  virtual ~TrueProcess() = default;

  // Phase-1 sample of size n from P, fitted with the family implied by the scheme.
  virtual InControlModel fit_phase1(std::size_t n, Scheme scheme, RngStream& rng) const = 0;

  // q(P; params) untransformed, with P shifted by `shift` (out of control from time 0).
  virtual double true_measure(const ChartSpec& chart, const ChartParams& params, const PerfMeasure& measure,
                              const EvalConfig& cfg, double shift, std::optional<double> hint) const = 0;

  virtual std::string describe() const = 0;
};

// A scalar law; the parametric scheme fits `parametric_family`.
class ScalarProcess final : public TrueProcess {
 public:
  ScalarProcess(InControlModel truth, ModelFamily parametric_family);

  InControlModel fit_phase1(std::size_t n, Scheme scheme, RngStream& rng) const override;
  double true_measure(const ChartSpec& chart, const ChartParams& params, const PerfMeasure& measure,
                      const EvalConfig& cfg, double shift, std::optional<double> hint) const override;
  std::string describe() const override;

  const InControlModel& truth() const { return truth_; }

 private:
  InControlModel truth_;
  ModelFamily parametric_family_;
};

struct CoverageRow {
  PerfMeasure measure;
  Direction direction = Direction::upper_bound_on_q;
  long covered = 0;
  long trials = 0;  // replications that produced a bound
  long failed = 0;  // replications abandoned on a numerical error
  std::vector<int> outcomes;  // per replication: 1 covered, 0 missed, -1 failed

  double coverage() const { return trials > 0 ? static_cast<double>(covered) / static_cast<double>(trials) : 0.0; }
};

/// For r = 1..R: draw phase-1 data from P, fit, adjust, and check whether
/// q(P; xi-hat_r) lies in the interval. Replication r uses phase-1 stream
/// (seed, r) and bootstrap master seed derived from (seed, r).
std::vector<CoverageRow> coverage_table(const TrueProcess& truth, const ChartSpec& chart,
                                        const std::vector<PerfMeasure>& measures, std::size_t n, long replications,
                                        std::uint64_t seed, const BootstrapConfig& cfg);

double coverage_check(const TrueProcess& truth, const ChartSpec& chart, const PerfMeasure& measure, std::size_t n,
                      long replications, std::uint64_t seed, const BootstrapConfig& cfg);

// Bootstrap master seed used for replication r of a study seeded with `seed`.
std::uint64_t replication_seed(std::uint64_t seed, std::uint64_t replication);

}  // namespace spcboot
