#include "spcboot/perf.hpp"

#include <algorithm>
#include <boost/math/tools/toms748_solve.hpp>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "spcboot/error.hpp"
#include "spcboot/parallel.hpp"
#include "spcboot/random.hpp"

namespace spcboot {

namespace {

void require_transform(BaseMeasure base, Transform t) {
  if (t == Transform::logit && base != BaseMeasure::hit)
    fail(ErrorCode::invalid_argument, "the logit transform applies to hit only");
  if (t == Transform::log && base == BaseMeasure::hit)
    fail(ErrorCode::invalid_argument, "hit takes the logit transform, not log");
}

void require_threshold(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) fail(ErrorCode::invalid_argument, "threshold c must be positive");
}

void require_horizon(long horizon) {
  if (horizon < 1) fail(ErrorCode::invalid_argument, "horizon T must be at least 1");
}

const MeanSd& mean_sd(const ChartParams& params) {
  const auto* p = std::get_if<MeanSd>(&params);
  if (p == nullptr) fail(ErrorCode::incompatible_model_chart, "Shewhart chart needs mean/sd parameters");
  if (!(p->sigma > 0.0)) fail(ErrorCode::degenerate_sample, "Shewhart chart needs sigma > 0");
  return *p;
}

// The smallest c with score(c) >= 0, for score nondecreasing in c. Without a
// hint the bracket comes from doubling or halving c starting at 1; a hint starts
// a geometrically widening search there instead.
double solve_monotone(const std::function<double(double)>& score, double rel_tol, std::optional<double> hint) {
  constexpr double cap = 65536.0;
  constexpr double floor = 1.0 / 65536.0;
  double lo = 1.0;
  double hi = 1.0;
  double factor = 2.0;
  if (hint && *hint > floor && *hint < cap) {
    lo = *hint;
    hi = *hint;
    factor = 1.02;
  }
  double f_lo = score(lo);
  double f_hi = f_lo;
  if (f_lo >= 0.0) {
    do {
      hi = lo;
      f_hi = f_lo;
      lo = std::max(hi / factor, floor);
      if (lo == hi) fail(ErrorCode::bracket_failure, "target already met for every threshold down to 2^-16");
      f_lo = score(lo);
      factor *= factor;
    } while (f_lo >= 0.0);
  } else {
    do {
      lo = hi;
      f_lo = f_hi;
      hi = std::min(lo * factor, cap);
      if (lo == hi) fail(ErrorCode::bracket_failure, "target not met for any threshold up to 2^16");
      f_hi = score(hi);
      factor *= factor;
    } while (f_hi < 0.0);
  }

  // Invariant: score(lo) < 0 <= score(hi). TOMS 748 keeps a sign-changing bracket.
  std::uintmax_t max_iter = 200;
  double best_hi = hi;
  auto tracked = [&](double c) {
    const double s = score(c);
    if (s >= 0.0 && c < best_hi) best_hi = c;
    return s >= 0.0 ? std::max(s, 0.0) + std::numeric_limits<double>::min() : s;
  };
  auto done = [rel_tol](double a, double b) { return std::abs(b - a) <= rel_tol * std::max(1.0, b); };
  const auto bracket =
      boost::math::tools::toms748_solve(tracked, lo, hi, f_lo, std::max(f_hi, std::numeric_limits<double>::min()),
                                        done, max_iter);
  return std::min(best_hi, bracket.second);
}

constexpr double score_cap = 50.0;

// With a closed-form update law the Markov score is smooth to rounding level, so
// the bracket can be closed far below 1e-6 and scaled and unscaled calibrations
// agree to ~1e-12. Atoms crossing grid points make the score jump, and a tight
// tolerance there only buys extra solves.
double markov_tol(const UpdateDistribution& update) { return update.is_discrete() ? 1e-6 : 1e-12; }

double capped(double x) { return std::clamp(x, -score_cap, score_cap); }

// The log-scale distance can round to the wrong side of zero; the sign comes
// from comparing the measure with its target directly.
double signed_score(bool met, double log_distance) {
  const double s = capped(log_distance);
  return met ? std::max(s, 0.0) : std::min(s, -std::numeric_limits<double>::min());
}

std::string format_number(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

}  // namespace

PerfMeasure PerfMeasure::arl(double c, Transform t) {
  require_threshold(c);
  PerfMeasure m;
  m.base = BaseMeasure::arl;
  m.threshold = c;
  return m.with_transform(t);
}

PerfMeasure PerfMeasure::hit(double c, long horizon, Transform t) {
  require_threshold(c);
  require_horizon(horizon);
  PerfMeasure m;
  m.base = BaseMeasure::hit;
  m.threshold = c;
  m.horizon = horizon;
  return m.with_transform(t);
}

PerfMeasure PerfMeasure::c_arl(double gamma, Transform t) {
  if (!(gamma > 1.0) || !std::isfinite(gamma)) fail(ErrorCode::invalid_argument, "target ARL gamma must exceed 1");
  PerfMeasure m;
  m.base = BaseMeasure::c_arl;
  m.gamma = gamma;
  return m.with_transform(t);
}

PerfMeasure PerfMeasure::c_hit(long horizon, double beta, Transform t) {
  require_horizon(horizon);
  if (!(beta > 0.0 && beta < 1.0)) fail(ErrorCode::invalid_argument, "target hit probability beta must be in (0,1)");
  PerfMeasure m;
  m.base = BaseMeasure::c_hit;
  m.horizon = horizon;
  m.beta = beta;
  return m.with_transform(t);
}

PerfMeasure PerfMeasure::with_transform(Transform t) const {
  require_transform(base, t);
  PerfMeasure m = *this;
  m.transform = t;
  return m;
}

std::string PerfMeasure::describe() const {
  std::string inner;
  switch (base) {
    case BaseMeasure::arl:
      inner = "ARL(c=" + format_number(threshold) + ")";
      break;
    case BaseMeasure::hit:
      inner = "hit(c=" + format_number(threshold) + ",T=" + std::to_string(horizon) + ")";
      break;
    case BaseMeasure::c_arl:
      inner = "c_ARL(gamma=" + format_number(gamma) + ")";
      break;
    case BaseMeasure::c_hit:
      inner = "c_hit(T=" + std::to_string(horizon) + ",beta=" + format_number(beta) + ")";
      break;
  }
  if (transform == Transform::identity) return inner;
  return std::string(transform_name(transform)) + "(" + inner + ")";
}

const char* transform_name(Transform t) {
  switch (t) {
    case Transform::identity:
      return "identity";
    case Transform::log:
      return "log";
    case Transform::logit:
      return "logit";
  }
  return "?";
}

double apply_transform(Transform t, double value) {
  switch (t) {
    case Transform::identity:
      return value;
    case Transform::log:
      if (!(value > 0.0)) fail(ErrorCode::transform_domain, "log of non-positive value " + format_number(value));
      return std::log(value);
    case Transform::logit:
      if (!(value > 0.0 && value < 1.0))
        fail(ErrorCode::transform_domain, "logit needs a value strictly inside (0,1), got " + format_number(value));
      return std::log(value) - std::log1p(-value);
  }
  return value;
}

double inverse_transform(Transform t, double value) {
  switch (t) {
    case Transform::identity:
      return value;
    case Transform::log:
      return std::exp(value);
    case Transform::logit:
      return value >= 0.0 ? 1.0 / (1.0 + std::exp(-value)) : std::exp(value) / (1.0 + std::exp(value));
  }
  return value;
}

double shewhart_exceedance(const ChartSpec& chart, const InControlModel& model, const ChartParams& params,
                           double c) {
  const auto* family = std::get_if<ShewhartStandardized>(&chart.family);
  if (family == nullptr) fail(ErrorCode::incompatible_model_chart, "exceedance is defined for Shewhart charts");
  const MeanSd& p = mean_sd(params);
  if (const auto* e = std::get_if<EmpiricalScalar>(&model.kind())) {
    double total = 0.0;
    for (std::size_t i = 0; i < e->atoms.size(); ++i) {
      const double f = family->two_sided ? std::abs(e->atoms[i] - p.mu) / p.sigma : (e->atoms[i] - p.mu) / p.sigma;
      if (f > c) total += e->weights[i];
    }
    return std::min(total, 1.0);
  }
  const LawPtr law = model.law();
  if (!family->two_sided) return law->sf(p.mu + c * p.sigma);
  if (c < 0.0) return 1.0;
  return std::min(1.0, law->sf(p.mu + c * p.sigma) + law->cdf_left(p.mu - c * p.sigma));
}

double shewhart_measure(double p, const PerfMeasure& measure) {
  if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::invalid_argument, "exceedance probability outside [0,1]");
  switch (measure.base) {
    case BaseMeasure::arl:
      if (p == 0.0) fail(ErrorCode::zero_exceedance, "exceedance probability is 0, so the ARL is infinite");
      return 1.0 / p;
    case BaseMeasure::hit:
      if (p == 1.0) return 1.0;
      return -std::expm1(static_cast<double>(measure.horizon) * std::log1p(-p));
    default:
      fail(ErrorCode::invalid_argument, "threshold measures need shewhart_threshold");
  }
}

double shewhart_threshold(const ChartSpec& chart, const InControlModel& model, const ChartParams& params,
                          double target) {
  if (!(target > 0.0 && target < 1.0)) fail(ErrorCode::invalid_argument, "target exceedance must be in (0,1)");
  const auto* family = std::get_if<ShewhartStandardized>(&chart.family);
  if (family == nullptr) fail(ErrorCode::incompatible_model_chart, "exceedance is defined for Shewhart charts");
  const MeanSd& p = mean_sd(params);

  if (const auto* e = std::get_if<EmpiricalScalar>(&model.kind())) {
    // p(c) is a right-continuous step function; the infimum of {c : p(c) <= target}
    // is one of the atom statistics.
    std::vector<std::pair<double, double>> stats;
    for (std::size_t i = 0; i < e->atoms.size(); ++i) {
      const double f = family->two_sided ? std::abs(e->atoms[i] - p.mu) / p.sigma : (e->atoms[i] - p.mu) / p.sigma;
      stats.emplace_back(f, e->weights[i]);
    }
    std::sort(stats.begin(), stats.end());
    double above = 0.0;
    for (std::size_t k = stats.size(); k-- > 0;) {
      if (above + stats[k].second > target) {
        if (above == 0.0)
          fail(ErrorCode::target_unattainable,
               "exceedance jumps from " + format_number(stats[k].second) + " straight to 0, never reaching " +
                   format_number(target));
        return stats[k].first;
      }
      above += stats[k].second;
    }
    fail(ErrorCode::target_unattainable, "exceedance never exceeds the target");
  }

  auto gap = [&](double c) { return shewhart_exceedance(chart, model, params, c) - target; };
  double lo = -1.0;
  double hi = 1.0;
  for (int k = 0; gap(lo) < 0.0; ++k) {
    if (k > 16) fail(ErrorCode::target_unattainable, "exceedance stays below the target");
    lo *= 2.0;
  }
  for (int k = 0; gap(hi) > 0.0; ++k) {
    if (k > 16) fail(ErrorCode::target_unattainable, "exceedance stays above the target");
    hi *= 2.0;
  }
  // Log-scale residual keeps far-tail targets well conditioned.
  auto residual = [&](double c) {
    const double q = shewhart_exceedance(chart, model, params, c);
    return capped(std::log(std::max(q, 1e-300)) - std::log(target));
  };
  std::uintmax_t max_iter = 200;
  auto done = [](double a, double b) { return std::abs(b - a) <= 1e-9; };
  const double f_lo = residual(lo);
  const double f_hi = residual(hi);
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;
  const auto bracket = boost::math::tools::toms748_solve(residual, lo, hi, f_lo, f_hi, done, max_iter);
  return 0.5 * (bracket.first + bracket.second);
}

double invert_threshold(const UpdateDistribution& update, const PerfMeasure& measure, const MarkovConfig& cfg,
                        std::optional<double> hint) {
  if (measure.base == BaseMeasure::c_arl) {
    const double log_gamma = std::log(measure.gamma);
    return solve_monotone(
        [&](double c) {
          try {
            const double arl = arl_markov(update, c, cfg);
            return signed_score(arl >= measure.gamma, std::log(arl) - log_gamma);
          } catch (const Error& e) {
            if (e.code() == ErrorCode::non_absorbing) return score_cap;
            throw;
          }
        },
        markov_tol(update), hint);
  }
  if (measure.base == BaseMeasure::c_hit) {
    const double log_beta = std::log(measure.beta);
    return solve_monotone(
        [&](double c) {
          const double h = hit_markov(update, c, measure.horizon, cfg);
          return signed_score(h <= measure.beta, log_beta - std::log(std::max(h, 1e-300)));
        },
        markov_tol(update), hint);
  }
  fail(ErrorCode::invalid_argument, "invert_threshold needs a c_ARL or c_hit measure");
}

double cusum_measure(const UpdateDistribution& update, const PerfMeasure& measure, const MarkovConfig& cfg,
                     std::optional<double> hint) {
  switch (measure.base) {
    case BaseMeasure::arl:
      return arl_markov(update, measure.threshold, cfg);
    case BaseMeasure::hit:
      return hit_markov(update, measure.threshold, measure.horizon, cfg);
    default:
      return invert_threshold(update, measure, cfg, hint);
  }
}

namespace {

constexpr long mc_block = 1000;

struct BlockTotals {
  double sum = 0.0;
  double sum_sq = 0.0;
  long truncated = 0;
};

template <typename RunFn>
McResult run_blocks(const McConfig& cfg, RunFn run_one) {
  if (cfg.runs < 100) fail(ErrorCode::invalid_argument, "Monte Carlo needs at least 100 runs");
  const long blocks = (cfg.runs + mc_block - 1) / mc_block;
  std::vector<BlockTotals> totals(static_cast<std::size_t>(blocks));
  parallel_for(static_cast<std::size_t>(blocks), cfg.workers, [&](std::size_t b) {
    RngStream rng = derive_stream(cfg.seed, {stream_tag::monte_carlo, b});
    const long count = std::min(mc_block, cfg.runs - static_cast<long>(b) * mc_block);
    BlockTotals& t = totals[b];
    for (long r = 0; r < count; ++r) {
      bool truncated = false;
      const double v = run_one(rng, truncated);
      t.sum += v;
      t.sum_sq += v * v;
      if (truncated) ++t.truncated;
    }
  });
  McResult out;
  out.runs = cfg.runs;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const auto& t : totals) {
    sum += t.sum;
    sum_sq += t.sum_sq;
    out.truncated += t.truncated;
  }
  const double n = static_cast<double>(cfg.runs);
  out.estimate = sum / n;
  const double var = std::max(0.0, (sum_sq - n * out.estimate * out.estimate) / (n - 1.0));
  out.std_error = std::sqrt(var / n);
  return out;
}

}  // namespace

McResult arl_monte_carlo(const UpdateDistribution& update, double threshold, const McConfig& cfg) {
  require_threshold(threshold);
  const long cap = cfg.horizon_cap > 0 ? cfg.horizon_cap : 10'000'000L;
  McResult out = run_blocks(cfg, [&](RngStream& rng, bool& truncated) {
    double s = 0.0;
    for (long t = 1; t <= cap; ++t) {
      s = std::max(0.0, s + update.sample(rng));
      if (s >= threshold) return static_cast<double>(t);
    }
    truncated = true;
    return static_cast<double>(cap);
  });
  if (out.truncated * 1000 > out.runs)
    fail(ErrorCode::truncated_runs, std::to_string(out.truncated) + " of " + std::to_string(out.runs) +
                                        " runs reached the horizon cap " + std::to_string(cap));
  return out;
}

McResult hit_monte_carlo(const UpdateDistribution& update, double threshold, long horizon, const McConfig& cfg) {
  require_threshold(threshold);
  require_horizon(horizon);
  return run_blocks(cfg, [&](RngStream& rng, bool&) {
    double s = 0.0;
    for (long t = 1; t <= horizon; ++t) {
      s = std::max(0.0, s + update.sample(rng));
      if (s >= threshold) return 1.0;
    }
    return 0.0;
  });
}

namespace {

// Monte Carlo measure with common random numbers: the same streams are used for
// every trial threshold, so the estimate is monotone in c and can be inverted.
double monte_carlo_measure(const UpdateDistribution& update, const PerfMeasure& measure, const McConfig& mc) {
  switch (measure.base) {
    case BaseMeasure::arl:
      return arl_monte_carlo(update, measure.threshold, mc).estimate;
    case BaseMeasure::hit:
      return hit_monte_carlo(update, measure.threshold, measure.horizon, mc).estimate;
    case BaseMeasure::c_arl: {
      McConfig capped_cfg = mc;
      if (capped_cfg.horizon_cap <= 0) capped_cfg.horizon_cap = static_cast<long>(std::ceil(100.0 * measure.gamma));
      const double log_gamma = std::log(measure.gamma);
      return solve_monotone(
          [&](double c) {
            const double arl = arl_monte_carlo(update, c, capped_cfg).estimate;
            return signed_score(arl >= measure.gamma, std::log(arl) - log_gamma);
          },
          1e-6, std::nullopt);
    }
    case BaseMeasure::c_hit: {
      const double log_beta = std::log(measure.beta);
      return solve_monotone(
          [&](double c) {
            const double h = hit_monte_carlo(update, c, measure.horizon, mc).estimate;
            return signed_score(h <= measure.beta, log_beta - std::log(std::max(h, 1e-300)));
          },
          1e-6, std::nullopt);
    }
  }
  return 0.0;
}

}  // namespace

double eval_measure(const ChartSpec& chart, const InControlModel& model, const ChartParams& params,
                    const PerfMeasure& measure, const EvalConfig& cfg, std::optional<double> hint) {
  double value = 0.0;
  if (chart.is_shewhart()) {
    switch (measure.base) {
      case BaseMeasure::arl:
      case BaseMeasure::hit:
        value = shewhart_measure(shewhart_exceedance(chart, model, params, measure.threshold), measure);
        break;
      case BaseMeasure::c_arl:
        value = shewhart_threshold(chart, model, params, 1.0 / measure.gamma);
        break;
      case BaseMeasure::c_hit:
        value = shewhart_threshold(chart, model, params,
                                   -std::expm1(std::log1p(-measure.beta) / static_cast<double>(measure.horizon)));
        break;
    }
  } else {
    const UpdateDistribution update = update_distribution(chart, model, params);
    value = cfg.monte_carlo ? monte_carlo_measure(update, measure, cfg.mc) : cusum_measure(update, measure, cfg.markov, hint);
  }
  return apply_transform(measure.transform, value);
}

}  // namespace spcboot
