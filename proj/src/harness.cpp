#include "spcboot/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "spcboot/parallel.hpp"
#include "spcboot/regression.hpp"

namespace spcboot {

namespace {

struct Covariates {
  double x1;
  double x2;
  double x3;
};

Covariates draw_covariates(RngStream& rng) {
  Covariates c;
  c.x1 = std::bernoulli_distribution(0.4)(rng) ? 1.0 : 0.0;
  c.x2 = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  c.x3 = std::normal_distribution<double>(0.0, 1.0)(rng);
  return c;
}

double expit(double t) { return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t)); }

const std::vector<double>& coefficients(const ChartParams& params, std::size_t dim) {
  const auto* coeffs = std::get_if<RegressionCoeffs>(&params);
  if (coeffs == nullptr || coeffs->beta.size() != dim)
    fail(ErrorCode::incompatible_model_chart, "expected " + std::to_string(dim) + " regression coefficients");
  return coeffs->beta;
}

JointSample build_rows(std::size_t n, RngStream& rng, bool logistic) {
  std::vector<double> y(n);
  std::vector<double> x;
  x.reserve(4 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const Covariates c = draw_covariates(rng);
    const double eta = c.x1 + c.x2 + c.x3;
    if (logistic) {
      y[i] = std::bernoulli_distribution(expit(eta))(rng) ? 1.0 : 0.0;
    } else {
      y[i] = eta + std::normal_distribution<double>(0.0, 1.0)(rng);
    }
    x.insert(x.end(), {1.0, c.x1, c.x2, c.x3});
  }
  return JointSample(std::move(y), std::move(x), 4);
}

double summarize_mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

const char* generator_name(Generator g) {
  switch (g) {
    case Generator::normal:
      return "normal";
    case Generator::exponential:
      return "exponential";
    case Generator::chi_square:
      return "chi-square";
    case Generator::linear_model:
      return "linear-model";
    case Generator::logistic_model:
      return "logistic-model";
  }
  return "?";
}

Generator parse_generator(const std::string& name) {
  for (Generator g : {Generator::normal, Generator::exponential, Generator::chi_square, Generator::linear_model,
                      Generator::logistic_model}) {
    if (name == generator_name(g)) return g;
  }
  fail(ErrorCode::invalid_argument,
       "unknown generator '" + name + "' (normal, exponential, chi-square, linear-model, logistic-model)");
}

InControlModel LinearModelProcess::fit_phase1(std::size_t n, Scheme, RngStream& rng) const {
  return fit_joint_model(build_rows(n, rng, false));
}

LawPtr LinearModelProcess::increment_law(std::span<const double> beta, double delta, double shift) {
  if (beta.size() != 4) fail(ErrorCode::incompatible_model_chart, "linear model has 4 coefficients");
  // y - x*beta - delta/2 = m + (1 - b1) X1 + (1 - b2) X2 + [(1 - b3) X3 + eps]
  const double m = -beta[0] + shift - 0.5 * delta;
  const double sd = std::sqrt((1.0 - beta[3]) * (1.0 - beta[3]) + 1.0);
  const double width = 1.0 - beta[2];
  return std::make_shared<NormalUniformMixtureLaw>(std::vector<NormalUniformMixtureLaw::Component>{
      {0.6, m, sd, width}, {0.4, m + 1.0 - beta[1], sd, width}});
}

double LinearModelProcess::true_measure(const ChartSpec& chart, const ChartParams& params,
                                        const PerfMeasure& measure, const EvalConfig& cfg, double shift,
                                        std::optional<double> hint) const {
  const auto* family = std::get_if<CusumLinReg>(&chart.family);
  if (family == nullptr) fail(ErrorCode::incompatible_model_chart, "linear model process drives a linreg chart");
  const auto update = UpdateDistribution::closed_form(increment_law(coefficients(params, 4), family->delta, shift));
  return cusum_measure(update, measure.untransformed(), cfg.markov, hint);
}

LogisticModelProcess::LogisticModelProcess(std::size_t truth_points, std::uint64_t truth_seed) {
  if (truth_points < 1) fail(ErrorCode::invalid_argument, "need at least one truth point");
  RngStream rng = derive_stream(truth_seed, {stream_tag::truth});
  covariates_.reserve(4 * truth_points);
  for (std::size_t i = 0; i < truth_points; ++i) {
    const Covariates c = draw_covariates(rng);
    covariates_.insert(covariates_.end(), {1.0, c.x1, c.x2, c.x3});
  }
}

InControlModel LogisticModelProcess::fit_phase1(std::size_t n, Scheme, RngStream& rng) const {
  return fit_joint_model(build_rows(n, rng, true));
}

UpdateDistribution LogisticModelProcess::increment_law(std::span<const double> beta, double delta,
                                                       double shift) const {
  if (beta.size() != 4) fail(ErrorCode::incompatible_model_chart, "logistic model has 4 coefficients");
  const std::size_t points = covariates_.size() / 4;
  std::vector<double> atoms;
  std::vector<double> weights;
  atoms.reserve(2 * points);
  weights.reserve(2 * points);
  const double w = 1.0 / static_cast<double>(points);
  for (std::size_t i = 0; i < points; ++i) {
    const std::span<const double> x(covariates_.data() + 4 * i, 4);
    const double p = expit(x[1] + x[2] + x[3] + shift);
    atoms.push_back(logistic_llr_increment(1.0, x, beta, delta));
    weights.push_back(w * p);
    atoms.push_back(logistic_llr_increment(0.0, x, beta, delta));
    weights.push_back(w * (1.0 - p));
  }
  return UpdateDistribution::discrete(atoms, weights);
}

double LogisticModelProcess::true_measure(const ChartSpec& chart, const ChartParams& params,
                                          const PerfMeasure& measure, const EvalConfig& cfg, double shift,
                                          std::optional<double> hint) const {
  const auto* family = std::get_if<CusumLogisticLlr>(&chart.family);
  if (family == nullptr)
    fail(ErrorCode::incompatible_model_chart, "logistic model process drives a logistic LLR chart");
  const auto update = increment_law(coefficients(params, 4), family->delta, shift);
  return cusum_measure(update, measure.untransformed(), cfg.markov, hint);
}

std::unique_ptr<TrueProcess> make_process(Generator g) {
  switch (g) {
    case Generator::normal:
      return std::make_unique<ScalarProcess>(InControlModel::normal(0.0, 1.0), ModelFamily::normal);
    case Generator::exponential:
      return std::make_unique<ScalarProcess>(InControlModel::exponential(1.0), ModelFamily::normal);
    case Generator::chi_square:
      return std::make_unique<ScalarProcess>(InControlModel::scaled_chi_square(10.0, 1.0 / std::sqrt(20.0)),
                                             ModelFamily::normal);
    case Generator::linear_model:
      return std::make_unique<LinearModelProcess>();
    case Generator::logistic_model:
      return std::make_unique<LogisticModelProcess>();
  }
  fail(ErrorCode::invalid_argument, "unknown generator");
}

ExperimentSpec::ExperimentSpec() { boot.B = 500; }

void ExperimentSpec::validate() const {
  boot.validate();
  if (n < 10) fail(ErrorCode::invalid_argument, "phase-1 size n must be at least 10");
  if (replications < 100) fail(ErrorCode::invalid_argument, "experiments need at least 100 replications");
  if ((generator == Generator::linear_model || generator == Generator::logistic_model) &&
      boot.scheme != Scheme::nonparametric)
    fail(ErrorCode::invalid_argument, "regression generators are bootstrapped by row resampling (nonparametric)");
}

ChartSpec experiment_chart(const ExperimentSpec& spec) {
  switch (spec.generator) {
    case Generator::linear_model:
      return ChartSpec::cusum_linreg(spec.delta);
    case Generator::logistic_model:
      return ChartSpec::cusum_logistic_llr(spec.delta);
    default:
      return ChartSpec::cusum_mean_shift(spec.delta, spec.scaling);
  }
}

std::vector<PerfMeasure> coverage_measures(const ExperimentSpec& spec) {
  return {PerfMeasure::arl(spec.threshold),
          PerfMeasure::arl(spec.threshold, Transform::log),
          PerfMeasure::hit(spec.threshold, spec.horizon),
          PerfMeasure::hit(spec.threshold, spec.horizon, Transform::logit),
          PerfMeasure::c_arl(spec.gamma),
          PerfMeasure::c_arl(spec.gamma, Transform::log),
          PerfMeasure::c_hit(spec.horizon, spec.beta),
          PerfMeasure::c_hit(spec.horizon, spec.beta, Transform::log)};
}

QuantileSummary summarize_quantiles(const std::vector<double>& values) {
  QuantileSummary s;
  s.count = values.size();
  if (values.empty()) return s;
  for (std::size_t i = 0; i < 7; ++i) s.quantiles[i] = empirical_quantile(values, QuantileSummary::probes[i]);
  s.mean = summarize_mean(values);
  return s;
}

CoverageReport run_coverage_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const auto process = make_process(spec.generator);
  CoverageReport report;
  report.spec = spec;
  report.rows = coverage_table(*process, experiment_chart(spec), coverage_measures(spec), spec.n,
                               spec.replications, spec.seed, spec.boot);
  return report;
}

double ConditionalArlReport::guarantee_fraction() const {
  std::size_t ok = 0;
  std::size_t hits = 0;
  for (const auto& r : records) {
    if (!r.ok) continue;
    ++ok;
    if (r.arl_in_adjusted >= spec.gamma) ++hits;
  }
  return ok > 0 ? static_cast<double>(hits) / static_cast<double>(ok) : 0.0;
}

double ConditionalArlReport::unadjusted_fraction_below(double level) const {
  std::size_t ok = 0;
  std::size_t below = 0;
  for (const auto& r : records) {
    if (!r.ok) continue;
    ++ok;
    if (r.arl_in_unadjusted < level) ++below;
  }
  return ok > 0 ? static_cast<double>(below) / static_cast<double>(ok) : 0.0;
}

ConditionalArlReport run_conditional_arl_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const auto process = make_process(spec.generator);
  const ChartSpec chart = experiment_chart(spec);
  const PerfMeasure measure = PerfMeasure::c_arl(spec.gamma, Transform::log);
  const std::size_t R = static_cast<std::size_t>(spec.replications);

  ConditionalArlReport report;
  report.spec = spec;
  report.records.resize(R);
  parallel_for(R, spec.boot.workers, [&](std::size_t r) {
    ConditionalArlRecord& rec = report.records[r];
    rec.replication = r;
    RngStream rng = derive_stream(spec.seed, {stream_tag::phase1, r});
    BootstrapConfig inner = spec.boot;
    inner.workers = 1;
    inner.master_seed = replication_seed(spec.seed, r);
    try {
      const InControlModel fitted = process->fit_phase1(spec.n, spec.boot.scheme, rng);
      const ChartParams params = extract_params(fitted, chart);
      const AdjustmentResult adj = adjust(chart, fitted, measure, inner);
      rec.c_unadjusted = adj.q_hat_natural;
      rec.c_adjusted = adj.bound;
      rec.p_star = adj.p_star;
      auto true_arl = [&](double c, double shift) {
        return process->true_measure(chart, params, PerfMeasure::arl(c), spec.boot.eval, shift, std::nullopt);
      };
      rec.arl_in_unadjusted = true_arl(rec.c_unadjusted, 0.0);
      rec.arl_out_unadjusted = true_arl(rec.c_unadjusted, spec.delta);
      rec.arl_in_adjusted = true_arl(rec.c_adjusted, 0.0);
      rec.arl_out_adjusted = true_arl(rec.c_adjusted, spec.delta);
      rec.ok = true;
    } catch (const Error& e) {
      rec.error = e.what();
    }
  });

  std::vector<double> in_un, out_un, in_adj, out_adj;
  for (const auto& rec : report.records) {
    if (!rec.ok) {
      ++report.failed;
      continue;
    }
    in_un.push_back(rec.arl_in_unadjusted);
    out_un.push_back(rec.arl_out_unadjusted);
    in_adj.push_back(rec.arl_in_adjusted);
    out_adj.push_back(rec.arl_out_adjusted);
  }
  report.in_unadjusted = summarize_quantiles(in_un);
  report.out_unadjusted = summarize_quantiles(out_un);
  report.in_adjusted = summarize_quantiles(in_adj);
  report.out_adjusted = summarize_quantiles(out_adj);
  return report;
}

std::vector<MisspecificationBlock> run_misspecification_experiment(const ExperimentSpec& base) {
  std::vector<MisspecificationBlock> blocks;
  for (Generator g : {Generator::normal, Generator::exponential, Generator::chi_square}) {
    for (Scheme s : {Scheme::parametric, Scheme::nonparametric}) {
      ExperimentSpec spec = base;
      spec.generator = g;
      spec.boot.scheme = s;
      blocks.push_back({g, s, run_conditional_arl_experiment(spec)});
    }
  }
  return blocks;
}

}  // namespace spcboot
