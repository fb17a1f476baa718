#include "spcboot/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>
#include <utility>

#include "spcboot/parallel.hpp"

namespace spcboot {

namespace {

using BaseKey = std::tuple<int, double, long, double, double>;

BaseKey base_key(const PerfMeasure& m) {
  return {static_cast<int>(m.base), m.threshold, m.horizon, m.gamma, m.beta};
}

// Distinct untransformed measures and, for each input measure, its group.
struct MeasureGroups {
  std::vector<PerfMeasure> bases;
  std::vector<std::size_t> group_of;
};

MeasureGroups group_measures(const std::vector<PerfMeasure>& measures) {
  MeasureGroups g;
  std::map<BaseKey, std::size_t> index;
  for (const auto& m : measures) {
    const auto [it, inserted] = index.emplace(base_key(m), g.bases.size());
    if (inserted) g.bases.push_back(m.untransformed());
    g.group_of.push_back(it->second);
  }
  return g;
}

// Evaluates untransformed measures for one (model, params) pair, building the
// CUSUM update law only once.
class Evaluator {
 public:
  Evaluator(const ChartSpec& chart, const InControlModel& model, const ChartParams& params, const EvalConfig& cfg)
      : chart_(chart), model_(model), params_(params), cfg_(cfg) {
    if (!chart.is_shewhart() && !cfg.monte_carlo) update_.emplace(update_distribution(chart, model, params));
  }

  double operator()(const PerfMeasure& base, std::optional<double> hint) const {
    if (update_) return cusum_measure(*update_, base, cfg_.markov, hint);
    return eval_measure(chart_, model_, params_, base, cfg_, hint);
  }

 private:
  const ChartSpec& chart_;
  const InControlModel& model_;
  const ChartParams& params_;
  const EvalConfig& cfg_;
  std::optional<UpdateDistribution> update_;
};

std::size_t sample_size_of(const InControlModel& model) {
  if (!model.sample_size())
    fail(ErrorCode::invalid_argument, "bootstrap needs a model fitted from a sample (unknown n)");
  return *model.sample_size();
}

InControlModel draw_once(const InControlModel& model, Scheme scheme, std::size_t n, RngStream& rng) {
  if (const auto* joint = std::get_if<EmpiricalJoint>(&model.kind())) {
    if (scheme != Scheme::nonparametric)
      fail(ErrorCode::invalid_argument, "joint models are bootstrapped by resampling rows (nonparametric)");
    return fit_joint_model(sample_rows(*joint, n, rng));
  }
  const Sample s = sample_from(model, n, rng);
  if (scheme == Scheme::nonparametric) {
    if (!std::holds_alternative<EmpiricalScalar>(model.kind()))
      fail(ErrorCode::invalid_argument, "the nonparametric scheme needs an empirical model");
    return fit_model(ModelFamily::empirical, s);
  }
  if (std::holds_alternative<NormalModel>(model.kind())) return fit_model(ModelFamily::normal, s);
  if (std::holds_alternative<ExponentialModel>(model.kind())) return fit_model(ModelFamily::exponential, s);
  fail(ErrorCode::invalid_argument, "the parametric scheme needs a normal or exponential model");
}

bool is_refit_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::degenerate_sample:
    case ErrorCode::non_positive_data:
    case ErrorCode::rank_deficient:
    case ErrorCode::separation:
    case ErrorCode::no_convergence:
    case ErrorCode::degenerate_resample:
      return true;
    default:
      return false;
  }
}

std::pair<InControlModel, ChartParams> resample_with_params(const InControlModel& model, const ChartSpec& chart,
                                                            Scheme scheme, std::size_t n, RngStream& rng) {
  InControlModel star = resample_model(model, scheme, n, rng, &chart);
  ChartParams params = extract_params(star, chart);
  return {std::move(star), std::move(params)};
}

struct PivotRun {
  std::vector<PivotSample> samples;
  std::vector<double> q_hat;  // untransformed, per group
};

PivotRun run_pivots(const ChartSpec& chart, const InControlModel& model, const std::vector<PerfMeasure>& measures,
                    const BootstrapConfig& cfg) {
  cfg.validate();
  if (measures.empty()) fail(ErrorCode::invalid_argument, "no performance measure requested");
  const std::size_t n = sample_size_of(model);
  const MeasureGroups groups = group_measures(measures);
  const std::size_t G = groups.bases.size();
  const std::size_t M = measures.size();
  const std::size_t B = static_cast<std::size_t>(cfg.B);

  PivotRun run;
  {
    const ChartParams params = extract_params(model, chart);
    const Evaluator eval(chart, model, params, cfg.eval);
    for (const auto& base : groups.bases) run.q_hat.push_back(eval(base, std::nullopt));
  }

  // values[b * M + m]; failures keep the replicate's error per measure.
  std::vector<double> values(B * M, 0.0);
  std::vector<std::optional<ReplicateFailure>> failed(B * M);

  parallel_for(B, cfg.workers, [&](std::size_t b) {
    RngStream rng = derive_stream(cfg.master_seed, {stream_tag::bootstrap, b});
    auto fail_all = [&](const Error& e) {
      for (std::size_t m = 0; m < M; ++m) failed[b * M + m] = ReplicateFailure{b, e.code(), e.what()};
    };
    std::optional<std::pair<InControlModel, ChartParams>> star;
    try {
      star.emplace(resample_with_params(model, chart, cfg.scheme, n, rng));
    } catch (const Error& e) {
      fail_all(e);
      return;
    }
    const auto& [model_star, params_star] = *star;
    std::vector<std::optional<double>> resampled(G);
    std::vector<std::optional<double>> original(G);
    std::vector<std::optional<Error>> group_error(G);
    try {
      const Evaluator on_star(chart, model_star, params_star, cfg.eval);
      const Evaluator on_hat(chart, model, params_star, cfg.eval);
      for (std::size_t g = 0; g < G; ++g) {
        const bool threshold = groups.bases[g].is_threshold();
        try {
          resampled[g] = on_star(groups.bases[g], threshold ? std::optional(run.q_hat[g]) : std::nullopt);
          original[g] = on_hat(groups.bases[g], threshold ? resampled[g] : std::nullopt);
        } catch (const Error& e) {
          group_error[g] = e;
        }
      }
    } catch (const Error& e) {
      fail_all(e);
      return;
    }
    for (std::size_t m = 0; m < M; ++m) {
      const std::size_t g = groups.group_of[m];
      if (group_error[g]) {
        failed[b * M + m] = ReplicateFailure{b, group_error[g]->code(), group_error[g]->what()};
        continue;
      }
      try {
        const Transform t = measures[m].transform;
        values[b * M + m] = apply_transform(t, *resampled[g]) - apply_transform(t, *original[g]);
      } catch (const Error& e) {
        failed[b * M + m] = ReplicateFailure{b, e.code(), e.what()};
      }
    }
  });

  run.samples.resize(M);
  for (std::size_t m = 0; m < M; ++m) {
    PivotSample& s = run.samples[m];
    s.requested = B;
    for (std::size_t b = 0; b < B; ++b) {
      if (failed[b * M + m])
        s.failures.push_back(*failed[b * M + m]);
      else
        s.values.push_back(values[b * M + m]);
    }
    if (s.failures.size() * 100 > B) {
      const auto& first = s.failures.front();
      fail(ErrorCode::too_many_failures,
           std::to_string(s.failures.size()) + " of " + std::to_string(B) + " bootstrap replicates failed for " +
               measures[m].describe() + " (first, replicate " + std::to_string(first.replicate) +
               "): " + first.message);
    }
  }
  return run;
}

PivotSummary summarize(const std::vector<double>& values) {
  PivotSummary s;
  if (values.empty()) return s;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  s.q1 = empirical_quantile(values, 0.25);
  s.median = empirical_quantile(values, 0.5);
  s.q3 = empirical_quantile(values, 0.75);
  return s;
}

Direction resolve_direction(const PerfMeasure& measure, const BootstrapConfig& cfg) {
  const Direction natural = natural_direction(measure);
  if (cfg.direction && *cfg.direction != natural)
    fail(ErrorCode::invalid_argument, measure.describe() + " calls for a " + direction_name(natural) + " bound");
  return natural;
}

}  // namespace

const char* scheme_name(Scheme s) { return s == Scheme::parametric ? "parametric" : "nonparametric"; }

const char* direction_name(Direction d) {
  return d == Direction::upper_bound_on_q ? "upper-bound-on-q" : "lower-bound-on-q";
}

Direction natural_direction(const PerfMeasure& measure) {
  return measure.base == BaseMeasure::arl ? Direction::lower_bound_on_q : Direction::upper_bound_on_q;
}

void BootstrapConfig::validate() const {
  if (B < 100) fail(ErrorCode::invalid_argument, "B must be at least 100, got " + std::to_string(B));
  if (!(alpha > 0.0 && alpha <= 0.5)) fail(ErrorCode::invalid_argument, "alpha must lie in (0, 0.5]");
  if (eval.markov.grid_points < 2) fail(ErrorCode::invalid_argument, "grid must be at least 2");
}

InControlModel resample_model(const InControlModel& model, Scheme scheme, std::size_t n, RngStream& rng,
                              const ChartSpec* chart) {
  if (n < 2) fail(ErrorCode::invalid_argument, "resample size must be at least 2");
  std::string reason;
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      InControlModel star = draw_once(model, scheme, n, rng);
      if (chart != nullptr) {
        if (chart->needs_scale() && star.is_scalar() && !(star.sd() > 0.0))
          fail(ErrorCode::degenerate_resample, "resample has zero spread");
        (void)extract_params(star, *chart);
      } else if (star.is_scalar() && !(star.sd() > 0.0)) {
        fail(ErrorCode::degenerate_resample, "resample has zero spread");
      }
      return star;
    } catch (const Error& e) {
      if (!is_refit_error(e.code())) throw;
      reason = e.what();
    }
  }
  fail(ErrorCode::degenerate_resample, "refit failed twice: " + reason);
}

PivotSample pivot_sample(const ChartSpec& chart, const InControlModel& model, const PerfMeasure& measure,
                         const BootstrapConfig& cfg) {
  return std::move(run_pivots(chart, model, {measure}, cfg).samples.front());
}

std::vector<PivotSample> pivot_samples(const ChartSpec& chart, const InControlModel& model,
                                       const std::vector<PerfMeasure>& measures, const BootstrapConfig& cfg) {
  return run_pivots(chart, model, measures, cfg).samples;
}

double empirical_quantile(std::vector<double> values, double level) {
  if (values.empty()) fail(ErrorCode::invalid_argument, "quantile of an empty sample");
  const double count = static_cast<double>(values.size());
  const auto k = static_cast<std::size_t>(std::clamp(std::ceil(level * count - 1e-9), 1.0, count));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k - 1), values.end());
  return values[k - 1];
}

double quantile_pivot(const PivotSample& pivot, double alpha, Direction direction) {
  return empirical_quantile(pivot.values, direction == Direction::upper_bound_on_q ? alpha : 1.0 - alpha);
}

std::vector<AdjustmentResult> adjust_all(const ChartSpec& chart, const InControlModel& model,
                                         const std::vector<PerfMeasure>& measures, const BootstrapConfig& cfg) {
  std::vector<Direction> directions;
  for (const auto& m : measures) directions.push_back(resolve_direction(m, cfg));
  const MeasureGroups groups = group_measures(measures);
  const PivotRun run = run_pivots(chart, model, measures, cfg);
  std::vector<AdjustmentResult> out;
  for (std::size_t m = 0; m < measures.size(); ++m) {
    AdjustmentResult r;
    r.measure = measures[m];
    r.direction = directions[m];
    r.alpha = cfg.alpha;
    r.B = cfg.B;
    r.q_hat_natural = run.q_hat[groups.group_of[m]];
    r.q_hat = apply_transform(r.measure.transform, r.q_hat_natural);
    r.p_star = quantile_pivot(run.samples[m], cfg.alpha, r.direction);
    r.bound_transformed = r.q_hat - r.p_star;
    r.bound = inverse_transform(r.measure.transform, r.bound_transformed);
    if (!std::isfinite(r.bound)) fail(ErrorCode::transform_domain, "adjusted bound is not finite");
    r.pivot_summary = summarize(run.samples[m].values);
    r.failures = run.samples[m].failures.size();
    out.push_back(r);
  }
  return out;
}

AdjustmentResult adjust(const ChartSpec& chart, const InControlModel& model, const PerfMeasure& measure,
                        const BootstrapConfig& cfg) {
  return adjust_all(chart, model, {measure}, cfg).front();
}

bool covers(const AdjustmentResult& result, double true_value) {
  double lhs = true_value;
  double bound = result.bound;
  try {
    lhs = apply_transform(result.measure.transform, true_value);
    bound = result.bound_transformed;
  } catch (const Error&) {
  }
  return result.direction == Direction::upper_bound_on_q ? lhs <= bound : lhs >= bound;
}

ScalarProcess::ScalarProcess(InControlModel truth, ModelFamily parametric_family)
    : truth_(std::move(truth)), parametric_family_(parametric_family) {
  if (!truth_.is_scalar()) fail(ErrorCode::invalid_argument, "scalar process needs a scalar law");
}

InControlModel ScalarProcess::fit_phase1(std::size_t n, Scheme scheme, RngStream& rng) const {
  const Sample s = sample_from(truth_, n, rng);
  return fit_model(scheme == Scheme::parametric ? parametric_family_ : ModelFamily::empirical, s);
}

double ScalarProcess::true_measure(const ChartSpec& chart, const ChartParams& params, const PerfMeasure& measure,
                                   const EvalConfig& cfg, double shift, std::optional<double> hint) const {
  const InControlModel model = shift == 0.0 ? truth_ : truth_.shifted(shift);
  return eval_measure(chart, model, params, measure.untransformed(), cfg, hint);
}

std::string ScalarProcess::describe() const {
  return std::visit(
      [](const auto& m) -> std::string {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, NormalModel>)
          return "normal(" + std::to_string(m.mu) + "," + std::to_string(m.sigma) + ")";
        else if constexpr (std::is_same_v<T, ExponentialModel>)
          return "exponential(rate=" + std::to_string(m.rate) + ",shift=" + std::to_string(m.shift) + ")";
        else if constexpr (std::is_same_v<T, ScaledChiSquareModel>)
          return "scaled-chi-square(dof=" + std::to_string(m.dof) + ",scale=" + std::to_string(m.scale) + ")";
        else
          return "empirical";
      },
      truth_.kind());
}

std::uint64_t replication_seed(std::uint64_t seed, std::uint64_t replication) {
  RngStream rng = derive_stream(seed, {stream_tag::bootstrap, replication});
  return rng();
}

std::vector<CoverageRow> coverage_table(const TrueProcess& truth, const ChartSpec& chart,
                                        const std::vector<PerfMeasure>& measures, std::size_t n, long replications,
                                        std::uint64_t seed, const BootstrapConfig& cfg) {
  if (replications < 100) fail(ErrorCode::invalid_argument, "coverage needs at least 100 replications");
  cfg.validate();
  const MeasureGroups groups = group_measures(measures);
  const std::size_t R = static_cast<std::size_t>(replications);
  const std::size_t M = measures.size();
  // 1 = covered, 0 = missed, -1 = replication failed
  std::vector<int> outcome(R * M, -1);
  std::vector<Direction> directions;
  for (const auto& m : measures) directions.push_back(resolve_direction(m, cfg));

  parallel_for(R, cfg.workers, [&](std::size_t r) {
    RngStream rng = derive_stream(seed, {stream_tag::phase1, r});
    BootstrapConfig inner = cfg;
    inner.workers = 1;
    inner.master_seed = replication_seed(seed, r);
    try {
      const InControlModel fitted = truth.fit_phase1(n, cfg.scheme, rng);
      const std::vector<AdjustmentResult> results = adjust_all(chart, fitted, measures, inner);
      const ChartParams params = extract_params(fitted, chart);
      std::vector<std::optional<double>> true_values(groups.bases.size());
      for (std::size_t m = 0; m < M; ++m) {
        const std::size_t g = groups.group_of[m];
        if (!true_values[g]) {
          const bool threshold = groups.bases[g].is_threshold();
          true_values[g] = truth.true_measure(chart, params, groups.bases[g], cfg.eval, 0.0,
                                              threshold ? std::optional(results[m].q_hat_natural) : std::nullopt);
        }
        outcome[r * M + m] = covers(results[m], *true_values[g]) ? 1 : 0;
      }
    } catch (const Error&) {
      // counted as a failed replication for every measure
    }
  });

  std::vector<CoverageRow> rows;
  for (std::size_t m = 0; m < M; ++m) {
    CoverageRow row;
    row.measure = measures[m];
    row.direction = directions[m];
    for (std::size_t r = 0; r < R; ++r) {
      const int o = outcome[r * M + m];
      row.outcomes.push_back(o);
      if (o < 0) {
        ++row.failed;
      } else {
        ++row.trials;
        row.covered += o;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

double coverage_check(const TrueProcess& truth, const ChartSpec& chart, const PerfMeasure& measure, std::size_t n,
                      long replications, std::uint64_t seed, const BootstrapConfig& cfg) {
  return coverage_table(truth, chart, {measure}, n, replications, seed, cfg).front().coverage();
}

}  // namespace spcboot
