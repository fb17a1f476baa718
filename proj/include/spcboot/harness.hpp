#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "spcboot/bootstrap.hpp"
#include "spcboot/chart.hpp"
#include "spcboot/perf.hpp"

namespace spcboot {

enum class Generator { normal, exponential, chi_square, linear_model, logistic_model };

const char* generator_name(Generator g);
Generator parse_generator(const std::string& name);

/// Y = X1 + X2 + X3 + eps with X1 ~ Bernoulli(0.4), X2 ~ U(0,1), X3 ~ N(0,1) and
/// eps ~ N(0,1). Rows carry an intercept, so fitted coefficients have length 4.
class LinearModelProcess final : public TrueProcess {
 public:
  InControlModel fit_phase1(std::size_t n, Scheme scheme, RngStream& rng) const override;
  double true_measure(const ChartSpec& chart, const ChartParams& params, const PerfMeasure& measure,
                      const EvalConfig& cfg, double shift, std::optional<double> hint) const override;
  std::string describe() const override { return "linear-model"; }

  // Exact law of y - x*beta - delta/2 under the model with y shifted by `shift`.
  static LawPtr increment_law(std::span<const double> beta, double delta, double shift);
};

/// logit P(Y = 1 | x) = x1 + x2 + x3 with the covariates of LinearModelProcess.
/// True measures use a fixed sample of `truth_points` covariate vectors, each
/// carrying both outcomes weighted by their probabilities.
class LogisticModelProcess final : public TrueProcess {
 public:
  explicit LogisticModelProcess(std::size_t truth_points = 20000, std::uint64_t truth_seed = 20240101);

  InControlModel fit_phase1(std::size_t n, Scheme scheme, RngStream& rng) const override;
  double true_measure(const ChartSpec& chart, const ChartParams& params, const PerfMeasure& measure,
                      const EvalConfig& cfg, double shift, std::optional<double> hint) const override;
  std::string describe() const override { return "logistic-model"; }

  UpdateDistribution increment_law(std::span<const double> beta, double delta, double shift) const;

 private:
  std::vector<double> covariates_;  // row-major, 4 columns with intercept
};

std::unique_ptr<TrueProcess> make_process(Generator g);

struct ExperimentSpec {
  Generator generator = Generator::normal;
  std::size_t n = 500;
  long replications = 500;
  BootstrapConfig boot;  // scheme, B, alpha, workers, grid
  std::uint64_t seed = 1;
  double delta = 1.0;
  Scaling scaling = Scaling::scaled;
  double threshold = 3.0;  // c for the ARL and hit rows
  double gamma = 100.0;
  double beta = 0.05;
  long horizon = 100;

  ExperimentSpec();
  void validate() const;
};

ChartSpec experiment_chart(const ExperimentSpec& spec);

// ARL, log ARL, hit, logit hit, c_ARL, log c_ARL, c_hit, log c_hit.
std::vector<PerfMeasure> coverage_measures(const ExperimentSpec& spec);

struct QuantileSummary {
  static constexpr double probes[7] = {0.025, 0.10, 0.25, 0.50, 0.75, 0.90, 0.975};
  double quantiles[7] = {};
  double mean = 0.0;
  std::size_t count = 0;
};

QuantileSummary summarize_quantiles(const std::vector<double>& values);

struct CoverageReport {
  ExperimentSpec spec;
  std::vector<CoverageRow> rows;
};

CoverageReport run_coverage_experiment(const ExperimentSpec& spec);

struct ConditionalArlRecord {
  std::size_t replication = 0;
  bool ok = false;
  std::string error;
  double c_unadjusted = 0.0;
  double c_adjusted = 0.0;
  double p_star = 0.0;
  double arl_in_unadjusted = 0.0;
  double arl_out_unadjusted = 0.0;
  double arl_in_adjusted = 0.0;
  double arl_out_adjusted = 0.0;
};

struct ConditionalArlReport {
  ExperimentSpec spec;
  std::vector<ConditionalArlRecord> records;
  QuantileSummary in_unadjusted;
  QuantileSummary out_unadjusted;
  QuantileSummary in_adjusted;
  QuantileSummary out_adjusted;
  std::size_t failed = 0;

  // Fraction of successful replications whose in-control ARL at the adjusted
  // threshold reaches gamma.
  double guarantee_fraction() const;
  // Fraction whose in-control ARL at the unadjusted threshold falls below `level`.
  double unadjusted_fraction_below(double level) const;
};

/// Per replication: fit, unadjusted c_ARL(gamma), adjusted threshold from the
/// log c_ARL pivot, and the true ARL at both thresholds in control and with the
/// process shifted by delta from time 0.
ConditionalArlReport run_conditional_arl_experiment(const ExperimentSpec& spec);

struct MisspecificationBlock {
  Generator generator;
  Scheme scheme;
  ConditionalArlReport report;
};

// Normal, exponential and scaled chi-square data, each under both schemes.
std::vector<MisspecificationBlock> run_misspecification_experiment(const ExperimentSpec& base);

}  // namespace spcboot
