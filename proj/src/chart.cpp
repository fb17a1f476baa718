#include "spcboot/chart.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "spcboot/error.hpp"
#include "spcboot/regression.hpp"

namespace spcboot {

namespace {

void require_delta(double delta, const char* what) {
  if (!(delta > 0.0) || !std::isfinite(delta))
    fail(ErrorCode::invalid_argument, std::string(what) + " needs delta > 0");
}

const MeanSd& mean_sd(const ChartParams& params) {
  const auto* p = std::get_if<MeanSd>(&params);
  if (!p) fail(ErrorCode::incompatible_model_chart, "chart needs mean/sd parameters");
  return *p;
}

// Affine map x -> offset + slope * x applied to observations by mean-shift and Shewhart charts.
struct Affine {
  double offset;
  double slope;
};

Affine mean_shift_map(const CusumMeanShift& c, const MeanSd& p) {
  switch (c.scaling) {
    case Scaling::unscaled:
      return {-p.mu - 0.5 * c.delta, 1.0};
    case Scaling::scaled:
      return {(-p.mu - 0.5 * c.delta) / p.sigma, 1.0 / p.sigma};
    case Scaling::standardized:
      return {-p.mu / p.sigma - 0.5 * c.delta, 1.0 / p.sigma};
  }
  return {0.0, 1.0};
}

Affine exponential_llr_map(const CusumExponentialLlr& c, const Rate& r) {
  return {-std::log(c.delta), r.lambda * (1.0 - 1.0 / c.delta)};
}

void check_scale(const ChartSpec& chart, const ChartParams& params) {
  if (chart.needs_scale() && !(mean_sd(params).sigma > 0.0))
    fail(ErrorCode::degenerate_sample, "chart divides by a zero standard deviation");
}

UpdateDistribution affine_image(const InControlModel& model, Affine map) {
  if (const auto* e = std::get_if<EmpiricalScalar>(&model.kind())) {
    std::vector<double> atoms(e->atoms.size());
    std::transform(e->atoms.begin(), e->atoms.end(), atoms.begin(),
                   [&](double a) { return map.offset + map.slope * a; });
    return UpdateDistribution::discrete(atoms, e->weights);
  }
  if (const auto* m = std::get_if<NormalModel>(&model.kind())) {
    return UpdateDistribution::closed_form(
        std::make_shared<NormalLaw>(map.offset + map.slope * m->mu, std::abs(map.slope) * m->sigma));
  }
  return UpdateDistribution::closed_form(std::make_shared<AffineLaw>(model.law(), map.offset, map.slope));
}

}  // namespace

ChartSpec ChartSpec::shewhart(bool two_sided) { return {ShewhartStandardized{two_sided}}; }

ChartSpec ChartSpec::cusum_mean_shift(double delta, Scaling scaling) {
  require_delta(delta, "mean-shift CUSUM");
  return {CusumMeanShift{delta, scaling}};
}

ChartSpec ChartSpec::cusum_exponential_llr(double delta) {
  require_delta(delta, "exponential LLR CUSUM");
  if (delta == 1.0) fail(ErrorCode::invalid_argument, "exponential LLR CUSUM needs delta != 1");
  return {CusumExponentialLlr{delta}};
}

ChartSpec ChartSpec::cusum_linreg(double delta) {
  require_delta(delta, "linear-model CUSUM");
  return {CusumLinReg{delta}};
}

ChartSpec ChartSpec::cusum_logistic_llr(double delta) {
  if (!std::isfinite(delta)) fail(ErrorCode::invalid_argument, "logistic CUSUM needs finite delta");
  return {CusumLogisticLlr{delta}};
}

bool ChartSpec::needs_scale() const {
  if (is_shewhart()) return true;
  if (const auto* c = std::get_if<CusumMeanShift>(&family)) return c->scaling != Scaling::unscaled;
  return false;
}

std::string ChartSpec::describe() const {
  std::ostringstream os;
  std::visit(
      [&os](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ShewhartStandardized>) {
          os << (f.two_sided ? "shewhart-two-sided" : "shewhart");
        } else if constexpr (std::is_same_v<T, CusumMeanShift>) {
          const char* s = f.scaling == Scaling::scaled     ? "scaled"
                          : f.scaling == Scaling::unscaled ? "unscaled"
                                                           : "standardized";
          os << "cusum-mean-shift(delta=" << f.delta << "," << s << ")";
        } else if constexpr (std::is_same_v<T, CusumExponentialLlr>) {
          os << "cusum-exponential-llr(delta=" << f.delta << ")";
        } else if constexpr (std::is_same_v<T, CusumLinReg>) {
          os << "cusum-linreg(delta=" << f.delta << ")";
        } else {
          os << "cusum-logistic-llr(delta=" << f.delta << ")";
        }
      },
      family);
  return os.str();
}

UpdateDistribution UpdateDistribution::closed_form(LawPtr law) {
  if (!law) fail(ErrorCode::invalid_argument, "closed-form update needs a law");
  return UpdateDistribution(std::move(law));
}

UpdateDistribution UpdateDistribution::discrete(std::span<const double> atoms, std::span<const double> weights) {
  if (atoms.empty() || atoms.size() != weights.size())
    fail(ErrorCode::invalid_argument, "discrete update needs matching nonempty atoms and weights");
  std::vector<std::size_t> order(atoms.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return atoms[a] < atoms[b]; });
  DiscreteAtoms d;
  double total = 0.0;
  for (std::size_t i : order) {
    if (!std::isfinite(atoms[i])) fail(ErrorCode::non_finite_observation, "update atom is not finite");
    if (!(weights[i] > 0.0)) continue;
    if (!d.atoms.empty() && d.atoms.back() == atoms[i]) {
      d.weights.back() += weights[i];
    } else {
      d.atoms.push_back(atoms[i]);
      d.weights.push_back(weights[i]);
    }
    total += weights[i];
  }
  if (d.atoms.empty()) fail(ErrorCode::invalid_argument, "discrete update has no positive weight");
  d.cumulative.resize(d.weights.size());
  double run = 0.0;
  for (std::size_t i = 0; i < d.weights.size(); ++i) {
    d.weights[i] /= total;
    run += d.weights[i];
    d.cumulative[i] = run;
  }
  d.cumulative.back() = 1.0;
  return UpdateDistribution(std::move(d));
}

UpdateDistribution UpdateDistribution::point_mass(double at) {
  const double one = 1.0;
  return discrete(std::span<const double>(&at, 1), std::span<const double>(&one, 1));
}

double UpdateDistribution::cdf(double x) const {
  if (const auto* d = std::get_if<DiscreteAtoms>(&repr_)) {
    const auto it = std::upper_bound(d->atoms.begin(), d->atoms.end(), x);
    return it == d->atoms.begin() ? 0.0 : d->cumulative[static_cast<std::size_t>(it - d->atoms.begin()) - 1];
  }
  return std::get<LawPtr>(repr_)->cdf(x);
}

double UpdateDistribution::cdf_left(double x) const {
  if (const auto* d = std::get_if<DiscreteAtoms>(&repr_)) {
    const auto it = std::lower_bound(d->atoms.begin(), d->atoms.end(), x);
    return it == d->atoms.begin() ? 0.0 : d->cumulative[static_cast<std::size_t>(it - d->atoms.begin()) - 1];
  }
  return std::get<LawPtr>(repr_)->cdf_left(x);
}

double UpdateDistribution::sample(RngStream& rng) const {
  if (const auto* d = std::get_if<DiscreteAtoms>(&repr_)) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto it = std::upper_bound(d->cumulative.begin(), d->cumulative.end(), u);
    const auto idx = std::min(static_cast<std::size_t>(it - d->cumulative.begin()), d->atoms.size() - 1);
    return d->atoms[idx];
  }
  return std::get<LawPtr>(repr_)->sample(rng);
}

double UpdateDistribution::mean() const {
  if (const auto* d = std::get_if<DiscreteAtoms>(&repr_)) {
    double m = 0.0;
    for (std::size_t i = 0; i < d->atoms.size(); ++i) m += d->weights[i] * d->atoms[i];
    return m;
  }
  return std::get<LawPtr>(repr_)->mean();
}

ChartParams extract_params(const InControlModel& model, const ChartSpec& chart) {
  if (chart.is_regression()) {
    const auto* joint = std::get_if<EmpiricalJoint>(&model.kind());
    if (!joint) fail(ErrorCode::incompatible_model_chart, "regression chart needs an empirical joint model");
    const RegressionFit fit = std::holds_alternative<CusumLinReg>(chart.family) ? fit_linear(joint->rows)
                                                                                : fit_logistic(joint->rows);
    return RegressionCoeffs{fit.beta};
  }
  if (!model.is_scalar()) fail(ErrorCode::incompatible_model_chart, "scalar chart needs a scalar model");
  if (std::holds_alternative<CusumExponentialLlr>(chart.family)) {
    if (const auto* e = std::get_if<ExponentialModel>(&model.kind())) {
      if (e->shift != 0.0) fail(ErrorCode::incompatible_model_chart, "shifted exponential model");
      return Rate{e->rate};
    }
    if (std::holds_alternative<EmpiricalScalar>(model.kind())) {
      const double m = model.mean();
      if (!(m > 0.0)) fail(ErrorCode::non_positive_data, "exponential LLR chart needs a positive mean");
      return Rate{1.0 / m};
    }
    fail(ErrorCode::incompatible_model_chart, "exponential LLR chart needs an exponential or empirical model");
  }
  const MeanSd p{model.mean(), model.sd()};
  check_scale(chart, p);
  return p;
}

UpdateDistribution update_distribution(const ChartSpec& chart, const InControlModel& model,
                                       const ChartParams& params) {
  if (chart.is_shewhart())
    fail(ErrorCode::incompatible_model_chart, "Shewhart charts have no CUSUM update law");
  if (chart.is_regression()) {
    const auto* joint = std::get_if<EmpiricalJoint>(&model.kind());
    const auto* coeffs = std::get_if<RegressionCoeffs>(&params);
    if (!joint || !coeffs)
      fail(ErrorCode::incompatible_model_chart, "regression chart needs a joint model and coefficients");
    return joint_update_distribution(chart, joint->rows, coeffs->beta);
  }
  if (!model.is_scalar()) fail(ErrorCode::incompatible_model_chart, "scalar chart needs a scalar model");
  if (const auto* c = std::get_if<CusumMeanShift>(&chart.family)) {
    check_scale(chart, params);
    return affine_image(model, mean_shift_map(*c, mean_sd(params)));
  }
  const auto& c = std::get<CusumExponentialLlr>(chart.family);
  const auto* r = std::get_if<Rate>(&params);
  if (!r) fail(ErrorCode::incompatible_model_chart, "exponential LLR chart needs a rate parameter");
  return affine_image(model, exponential_llr_map(c, *r));
}

double scalar_increment(const ChartSpec& chart, const ChartParams& params, double x) {
  if (const auto* s = std::get_if<ShewhartStandardized>(&chart.family)) {
    const MeanSd& p = mean_sd(params);
    const double z = (x - p.mu) / p.sigma;
    return s->two_sided ? std::abs(z) : z;
  }
  if (const auto* c = std::get_if<CusumMeanShift>(&chart.family)) {
    const Affine m = mean_shift_map(*c, mean_sd(params));
    return m.offset + m.slope * x;
  }
  if (const auto* c = std::get_if<CusumExponentialLlr>(&chart.family)) {
    const auto* r = std::get_if<Rate>(&params);
    if (!r) fail(ErrorCode::incompatible_model_chart, "exponential LLR chart needs a rate parameter");
    const Affine m = exponential_llr_map(*c, *r);
    return m.offset + m.slope * x;
  }
  fail(ErrorCode::incompatible_model_chart, "regression charts consume (y, x) rows");
}

ChartState::ChartState(ChartSpec chart, ChartParams params, double threshold)
    : chart_(std::move(chart)), params_(std::move(params)), threshold_(threshold) {
  if (!(threshold > 0.0) || !std::isfinite(threshold))
    fail(ErrorCode::invalid_argument, "threshold must be positive");
  if (chart_.is_regression()) {
    if (!std::holds_alternative<RegressionCoeffs>(params_))
      fail(ErrorCode::incompatible_model_chart, "regression chart needs coefficients");
  } else {
    check_scale(chart_, params_);
    (void)scalar_increment(chart_, params_, 0.0);
  }
}

bool ChartState::advance(double increment) {
  ++time_;
  if (chart_.is_shewhart()) {
    statistic_ = increment;
    alarmed_ = statistic_ > threshold_;
  } else {
    statistic_ = std::max(0.0, statistic_ + increment);
    alarmed_ = statistic_ >= threshold_;
  }
  return alarmed_;
}

bool ChartState::push(double x) {
  if (!std::isfinite(x))
    fail(ErrorCode::non_finite_observation, "observation " + std::to_string(time_ + 1) + " is not finite");
  return advance(scalar_increment(chart_, params_, x));
}

bool ChartState::push(double y, std::span<const double> x) {
  const auto& beta = std::get<RegressionCoeffs>(params_).beta;
  if (x.size() != beta.size())
    fail(ErrorCode::invalid_argument, "row " + std::to_string(time_ + 1) + " has " + std::to_string(x.size()) +
                                          " covariates (with intercept), expected " + std::to_string(beta.size()));
  if (!std::isfinite(y) || std::any_of(x.begin(), x.end(), [](double v) { return !std::isfinite(v); }))
    fail(ErrorCode::non_finite_observation, "row " + std::to_string(time_ + 1) + " is not finite");
  if (const auto* c = std::get_if<CusumLinReg>(&chart_.family)) return advance(linreg_increment(y, x, beta, c->delta));
  if (const auto* c = std::get_if<CusumLogisticLlr>(&chart_.family))
    return advance(logistic_llr_increment(y, x, beta, c->delta));
  fail(ErrorCode::incompatible_model_chart, "scalar chart fed a regression row");
}

ChartPath run_chart(const ChartSpec& chart, const ChartParams& params, double threshold,
                    std::span<const double> stream) {
  ChartState state(chart, params, threshold);
  ChartPath path;
  path.threshold = threshold;
  path.values.reserve(stream.size() + 1);
  path.values.push_back(0.0);
  for (double x : stream) {
    const bool alarm = state.push(x);
    path.values.push_back(state.statistic());
    if (alarm) {
      path.alarm_time = state.time();
      break;
    }
  }
  return path;
}

ChartPath run_chart(const ChartSpec& chart, const ChartParams& params, double threshold,
                    const JointSample& stream) {
  ChartState state(chart, params, threshold);
  ChartPath path;
  path.threshold = threshold;
  path.values.push_back(0.0);
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const bool alarm = state.push(stream.y(i), stream.x(i));
    path.values.push_back(state.statistic());
    if (alarm) {
      path.alarm_time = state.time();
      break;
    }
  }
  return path;
}

}  // namespace spcboot
