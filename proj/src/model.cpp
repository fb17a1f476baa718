#include "spcboot/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "spcboot/error.hpp"

namespace spcboot {

Sample::Sample(std::vector<double> values) : values_(std::move(values)) {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i]))
      fail(ErrorCode::non_finite_observation, "observation " + std::to_string(i + 1) + " is not finite");
  }
}

JointSample::JointSample(std::vector<double> y, std::vector<double> x, std::size_t dim)
    : y_(std::move(y)), x_(std::move(x)), dim_(dim) {
  if (dim_ == 0 || x_.size() != y_.size() * dim_)
    fail(ErrorCode::invalid_argument, "joint sample rows must share one covariate dimension");
  for (double v : y_)
    if (!std::isfinite(v)) fail(ErrorCode::non_finite_observation, "response is not finite");
  for (double v : x_)
    if (!std::isfinite(v)) fail(ErrorCode::non_finite_observation, "covariate is not finite");
}

JointSample JointSample::with_intercept(std::span<const double> y,
                                        std::span<const std::vector<double>> covariates) {
  if (y.size() != covariates.size())
    fail(ErrorCode::invalid_argument, "response and covariate counts differ");
  const std::size_t d = covariates.empty() ? 1 : covariates.front().size() + 1;
  std::vector<double> x;
  x.reserve(y.size() * d);
  for (std::size_t i = 0; i < covariates.size(); ++i) {
    if (covariates[i].size() + 1 != d)
      fail(ErrorCode::invalid_argument, "row " + std::to_string(i + 1) + " has the wrong covariate count");
    x.push_back(1.0);
    x.insert(x.end(), covariates[i].begin(), covariates[i].end());
  }
  return JointSample(std::vector<double>(y.begin(), y.end()), std::move(x), d);
}

JointSample JointSample::shifted(double delta) const {
  JointSample out = *this;
  for (double& v : out.y_) v += delta;
  return out;
}

InControlModel InControlModel::normal(double mu, double sigma) {
  if (!std::isfinite(mu) || !(sigma > 0.0) || !std::isfinite(sigma))
    fail(ErrorCode::invalid_argument, "normal model needs finite mu and sigma > 0");
  return InControlModel(NormalModel{mu, sigma});
}

InControlModel InControlModel::exponential(double rate, double shift) {
  if (!(rate > 0.0) || !std::isfinite(rate))
    fail(ErrorCode::invalid_argument, "exponential model needs rate > 0");
  return InControlModel(ExponentialModel{rate, shift});
}

InControlModel InControlModel::scaled_chi_square(double dof, double scale, double shift) {
  if (!(dof > 0.0) || !(scale > 0.0))
    fail(ErrorCode::invalid_argument, "chi-square model needs dof > 0 and scale > 0");
  return InControlModel(ScaledChiSquareModel{dof, scale, shift});
}

InControlModel InControlModel::empirical(std::span<const double> values, std::span<const double> weights) {
  if (values.empty() || values.size() != weights.size())
    fail(ErrorCode::invalid_argument, "empirical model needs matching nonempty values and weights");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  EmpiricalScalar e;
  double total = 0.0;
  for (std::size_t i : order) {
    if (!std::isfinite(values[i])) fail(ErrorCode::non_finite_observation, "empirical atom is not finite");
    if (!(weights[i] >= 0.0)) fail(ErrorCode::invalid_argument, "empirical weights must be nonnegative");
    if (weights[i] == 0.0) continue;
    if (!e.atoms.empty() && e.atoms.back() == values[i]) {
      e.weights.back() += weights[i];
    } else {
      e.atoms.push_back(values[i]);
      e.weights.push_back(weights[i]);
    }
    total += weights[i];
  }
  if (!(total > 0.0)) fail(ErrorCode::invalid_argument, "empirical weights sum to zero");
  for (double& w : e.weights) w /= total;
  return InControlModel(std::move(e));
}

InControlModel InControlModel::empirical_joint(JointSample rows) {
  if (rows.size() == 0) fail(ErrorCode::invalid_argument, "empirical joint model needs rows");
  return InControlModel(EmpiricalJoint{std::move(rows)});
}

bool InControlModel::is_parametric() const {
  return std::holds_alternative<NormalModel>(kind_) || std::holds_alternative<ExponentialModel>(kind_) ||
         std::holds_alternative<ScaledChiSquareModel>(kind_);
}

InControlModel InControlModel::with_fit_info(std::size_t n) const {
  InControlModel out = *this;
  out.provenance_ = Provenance::fitted;
  out.sample_size_ = n;
  return out;
}

LawPtr InControlModel::law() const {
  if (const auto* m = std::get_if<NormalModel>(&kind_)) return std::make_shared<NormalLaw>(m->mu, m->sigma);
  if (const auto* m = std::get_if<ExponentialModel>(&kind_))
    return std::make_shared<ExponentialLaw>(m->rate, m->shift);
  if (const auto* m = std::get_if<ScaledChiSquareModel>(&kind_))
    return std::make_shared<ScaledChiSquareLaw>(m->dof, m->scale, m->shift);
  fail(ErrorCode::incompatible_model_chart, "model has no closed-form scalar law");
}

InControlModel InControlModel::shifted(double delta) const {
  InControlModel out = *this;
  std::visit(
      [delta](auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, NormalModel>) {
          m.mu += delta;
        } else if constexpr (std::is_same_v<T, EmpiricalScalar>) {
          for (double& a : m.atoms) a += delta;
        } else if constexpr (std::is_same_v<T, EmpiricalJoint>) {
          m.rows = m.rows.shifted(delta);
        } else {
          m.shift += delta;
        }
      },
      out.kind_);
  return out;
}

double InControlModel::mean() const {
  return std::visit(
      [](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, NormalModel>) {
          return m.mu;
        } else if constexpr (std::is_same_v<T, ExponentialModel>) {
          return m.shift + 1.0 / m.rate;
        } else if constexpr (std::is_same_v<T, ScaledChiSquareModel>) {
          return m.shift + m.scale * m.dof;
        } else if constexpr (std::is_same_v<T, EmpiricalScalar>) {
          double s = 0.0;
          for (std::size_t i = 0; i < m.atoms.size(); ++i) s += m.weights[i] * m.atoms[i];
          return s;
        } else {
          fail(ErrorCode::incompatible_model_chart, "joint model has no scalar mean");
        }
      },
      kind_);
}

double InControlModel::sd() const {
  return std::visit(
      [this](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, NormalModel>) {
          return m.sigma;
        } else if constexpr (std::is_same_v<T, ExponentialModel>) {
          return 1.0 / m.rate;
        } else if constexpr (std::is_same_v<T, ScaledChiSquareModel>) {
          return m.scale * std::sqrt(2.0 * m.dof);
        } else if constexpr (std::is_same_v<T, EmpiricalScalar>) {
          const double mu = mean();
          double s = 0.0;
          for (std::size_t i = 0; i < m.atoms.size(); ++i) {
            const double d = m.atoms[i] - mu;
            s += m.weights[i] * d * d;
          }
          return std::sqrt(s);
        } else {
          fail(ErrorCode::incompatible_model_chart, "joint model has no scalar sd");
        }
      },
      kind_);
}

InControlModel fit_model(ModelFamily family, const Sample& sample) {
  const auto xs = sample.values();
  const std::size_t n = xs.size();
  if (n < 2) fail(ErrorCode::degenerate_sample, "need at least 2 observations, got " + std::to_string(n));
  switch (family) {
    case ModelFamily::normal: {
      const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
      double ss = 0.0;
      for (double x : xs) ss += (x - mean) * (x - mean);
      const double sd = std::sqrt(ss / static_cast<double>(n - 1));
      if (!(sd > 0.0)) fail(ErrorCode::degenerate_sample, "sample standard deviation is 0");
      return InControlModel::normal(mean, sd).with_fit_info(n);
    }
    case ModelFamily::exponential: {
      for (double x : xs)
        if (!(x > 0.0)) fail(ErrorCode::non_positive_data, "exponential fit needs positive data");
      const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
      return InControlModel::exponential(1.0 / mean).with_fit_info(n);
    }
    case ModelFamily::empirical: {
      const std::vector<double> w(n, 1.0 / static_cast<double>(n));
      return InControlModel::empirical(xs, w).with_fit_info(n);
    }
  }
  fail(ErrorCode::invalid_argument, "unknown model family");
}

InControlModel fit_joint_model(JointSample rows) {
  const std::size_t n = rows.size();
  if (n < 2) fail(ErrorCode::degenerate_sample, "need at least 2 rows");
  return InControlModel::empirical_joint(std::move(rows)).with_fit_info(n);
}

double model_cdf(const InControlModel& model, double x) {
  if (const auto* e = std::get_if<EmpiricalScalar>(&model.kind())) {
    const auto end = std::upper_bound(e->atoms.begin(), e->atoms.end(), x);
    double s = 0.0;
    for (auto it = e->atoms.begin(); it != end; ++it)
      s += e->weights[static_cast<std::size_t>(it - e->atoms.begin())];
    return std::min(s, 1.0);
  }
  return model.law()->cdf(x);
}

namespace {

// Index of the atom whose cumulative-weight slot contains u.
std::size_t pick_atom(const std::vector<double>& cumulative, double u) {
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

std::vector<double> cumulative_weights(const std::vector<double>& weights) {
  std::vector<double> cum(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cum.begin());
  return cum;
}

}  // namespace

Sample sample_from(const InControlModel& model, std::size_t count, RngStream& rng) {
  if (count < 1) fail(ErrorCode::invalid_argument, "sample count must be at least 1");
  std::vector<double> out(count);
  if (const auto* e = std::get_if<EmpiricalScalar>(&model.kind())) {
    const auto cum = cumulative_weights(e->weights);
    std::uniform_real_distribution<double> unit(0.0, cum.back());
    for (double& v : out) v = e->atoms[pick_atom(cum, unit(rng))];
    return Sample(std::move(out));
  }
  const LawPtr law = model.law();
  for (double& v : out) v = law->sample(rng);
  return Sample(std::move(out));
}

JointSample sample_rows(const EmpiricalJoint& model, std::size_t count, RngStream& rng) {
  const JointSample& src = model.rows;
  const std::size_t d = src.dim();
  std::uniform_int_distribution<std::size_t> pick(0, src.size() - 1);
  std::vector<double> y(count);
  std::vector<double> x(count * d);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t r = pick(rng);
    y[i] = src.y(r);
    const auto row = src.x(r);
    std::copy(row.begin(), row.end(), x.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return JointSample(std::move(y), std::move(x), d);
}

}  // namespace spcboot
