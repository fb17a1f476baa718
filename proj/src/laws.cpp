#include "spcboot/laws.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "spcboot/error.hpp"

namespace spcboot {

double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_sf(double z) noexcept { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

double normal_pdf(double z) noexcept {
  return std::exp(-0.5 * z * z) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

NormalLaw::NormalLaw(double mu, double sigma) : mu_(mu), sigma_(sigma) {
  if (!(sigma > 0.0) || !std::isfinite(mu) || !std::isfinite(sigma))
    fail(ErrorCode::invalid_argument, "normal law needs finite mu and sigma > 0");
}

double NormalLaw::cdf(double x) const { return normal_cdf((x - mu_) / sigma_); }

double NormalLaw::sf(double x) const { return normal_sf((x - mu_) / sigma_); }

double NormalLaw::sample(RngStream& rng) const {
  return std::normal_distribution<double>(mu_, sigma_)(rng);
}

ExponentialLaw::ExponentialLaw(double rate, double shift) : rate_(rate), shift_(shift) {
  if (!(rate > 0.0) || !std::isfinite(rate))
    fail(ErrorCode::invalid_argument, "exponential law needs rate > 0");
}

double ExponentialLaw::cdf(double x) const {
  const double t = x - shift_;
  return t <= 0.0 ? 0.0 : -std::expm1(-rate_ * t);
}

double ExponentialLaw::sf(double x) const {
  const double t = x - shift_;
  return t <= 0.0 ? 1.0 : std::exp(-rate_ * t);
}

double ExponentialLaw::sample(RngStream& rng) const {
  return shift_ + std::exponential_distribution<double>(rate_)(rng);
}

ScaledChiSquareLaw::ScaledChiSquareLaw(double dof, double scale, double shift)
    : dof_(dof), scale_(scale), shift_(shift) {
  if (!(dof > 0.0) || !(scale > 0.0))
    fail(ErrorCode::invalid_argument, "chi-square law needs dof > 0 and scale > 0");
}

double ScaledChiSquareLaw::cdf(double x) const {
  const double t = (x - shift_) / scale_;
  return t <= 0.0 ? 0.0 : boost::math::gamma_p(0.5 * dof_, 0.5 * t);
}

double ScaledChiSquareLaw::sf(double x) const {
  const double t = (x - shift_) / scale_;
  return t <= 0.0 ? 1.0 : boost::math::gamma_q(0.5 * dof_, 0.5 * t);
}

double ScaledChiSquareLaw::sample(RngStream& rng) const {
  return shift_ + scale_ * std::chi_squared_distribution<double>(dof_)(rng);
}

AffineLaw::AffineLaw(LawPtr base, double offset, double slope)
    : base_(std::move(base)), offset_(offset), slope_(slope) {
  if (!base_ || slope == 0.0 || !std::isfinite(slope) || !std::isfinite(offset))
    fail(ErrorCode::invalid_argument, "affine law needs a base law and finite nonzero slope");
}

double AffineLaw::cdf(double x) const {
  const double u = (x - offset_) / slope_;
  return slope_ > 0.0 ? base_->cdf(u) : 1.0 - base_->cdf_left(u);
}

double AffineLaw::cdf_left(double x) const {
  const double u = (x - offset_) / slope_;
  return slope_ > 0.0 ? base_->cdf_left(u) : base_->sf(u);
}

double AffineLaw::sf(double x) const {
  const double u = (x - offset_) / slope_;
  return slope_ > 0.0 ? base_->sf(u) : base_->cdf_left(u);
}

double AffineLaw::sample(RngStream& rng) const { return offset_ + slope_ * base_->sample(rng); }

NormalUniformMixtureLaw::NormalUniformMixtureLaw(std::vector<Component> components)
    : components_(std::move(components)) {
  double total = 0.0;
  for (const auto& c : components_) {
    if (!(c.weight >= 0.0) || !(c.sd > 0.0))
      fail(ErrorCode::invalid_argument, "mixture component needs weight >= 0 and sd > 0");
    total += c.weight;
  }
  if (components_.empty() || std::abs(total - 1.0) > 1e-12)
    fail(ErrorCode::invalid_argument, "mixture weights must sum to 1");
}

namespace {

// Antiderivative of Phi.
double phi_integral(double z) { return z * normal_cdf(z) + normal_pdf(z); }

}  // namespace

double NormalUniformMixtureLaw::cdf(double x) const {
  double total = 0.0;
  for (const auto& c : components_) {
    if (c.weight == 0.0) continue;
    const double z = (x - c.mean) / c.sd;
    const double a = c.width / c.sd;
    double part;
    if (std::abs(a) < 1e-6) {
      part = normal_cdf(z - 0.5 * a);
    } else {
      part = (phi_integral(z) - phi_integral(z - a)) / a;
    }
    total += c.weight * std::clamp(part, 0.0, 1.0);
  }
  return std::clamp(total, 0.0, 1.0);
}

double NormalUniformMixtureLaw::sample(RngStream& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double pick = unit(rng);
  const Component* chosen = &components_.back();
  for (const auto& c : components_) {
    if (pick < c.weight) {
      chosen = &c;
      break;
    }
    pick -= c.weight;
  }
  const double u = unit(rng);
  return std::normal_distribution<double>(chosen->mean, chosen->sd)(rng) + chosen->width * u;
}

double NormalUniformMixtureLaw::mean() const {
  double m = 0.0;
  for (const auto& c : components_) m += c.weight * (c.mean + 0.5 * c.width);
  return m;
}

}  // namespace spcboot
