#pragma once

#include <memory>
#include <vector>

#include "spcboot/random.hpp"

namespace spcboot {

double normal_cdf(double z) noexcept;
// Upper tail 1 - Phi(z), accurate far into the right tail.
double normal_sf(double z) noexcept;
double normal_pdf(double z) noexcept;

/// A continuous (or mixed) real-valued law with closed-form CDF.
class ScalarLaw {
 public:
  virtual ~ScalarLaw() = default;

  virtual double cdf(double x) const = 0;
  // P(X < x). Equal to cdf for continuous laws.
  virtual double cdf_left(double x) const { return cdf(x); }
  virtual double sf(double x) const { return 1.0 - cdf(x); }
  virtual double sample(RngStream& rng) const = 0;
  virtual double mean() const = 0;
};

using LawPtr = std::shared_ptr<const ScalarLaw>;

class NormalLaw final : public ScalarLaw {
 public:
  NormalLaw(double mu, double sigma);
  double cdf(double x) const override;
  double sf(double x) const override;
  double sample(RngStream& rng) const override;
  double mean() const override { return mu_; }
  double mu() const { return mu_; }
  double sigma() const { return sigma_; }

 private:
  double mu_;
  double sigma_;
};

// shift + Exp(rate)
class ExponentialLaw final : public ScalarLaw {
 public:
  ExponentialLaw(double rate, double shift = 0.0);
  double cdf(double x) const override;
  double sf(double x) const override;
  double sample(RngStream& rng) const override;
  double mean() const override { return shift_ + 1.0 / rate_; }

 private:
  double rate_;
  double shift_;
};

// shift + scale * ChiSquare(dof)
class ScaledChiSquareLaw final : public ScalarLaw {
 public:
  ScaledChiSquareLaw(double dof, double scale, double shift = 0.0);
  double cdf(double x) const override;
  double sf(double x) const override;
  double sample(RngStream& rng) const override;
  double mean() const override { return shift_ + scale_ * dof_; }

 private:
  double dof_;
  double scale_;
  double shift_;
};

// offset + slope * X for a base law X; slope may be negative.
class AffineLaw final : public ScalarLaw {
 public:
  AffineLaw(LawPtr base, double offset, double slope);
  double cdf(double x) const override;
  double cdf_left(double x) const override;
  double sf(double x) const override;
  double sample(RngStream& rng) const override;
  double mean() const override { return offset_ + slope_ * base_->mean(); }

 private:
  LawPtr base_;
  double offset_;
  double slope_;
};

/// Finite mixture of N(mean, sd^2) + width * U(0,1) components.
class NormalUniformMixtureLaw final : public ScalarLaw {
 public:
  struct Component {
    double weight;
    double mean;
    double sd;
    double width;
  };

  explicit NormalUniformMixtureLaw(std::vector<Component> components);
  double cdf(double x) const override;
  double sample(RngStream& rng) const override;
  double mean() const override;

 private:
  std::vector<Component> components_;
};

}  // namespace spcboot
