#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "spcboot/laws.hpp"
#include "spcboot/random.hpp"

namespace spcboot {

/// Phase-1 scalar observations. Values are checked finite on construction;
/// the n >= 2 requirement is enforced by the estimators.
class Sample {
 public:
  Sample() = default;
  explicit Sample(std::vector<double> values);

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

 private:
  std::vector<double> values_;
};

/// Rows of (y, x) with x stored row-major; x includes the leading intercept 1.
class JointSample {
 public:
  JointSample() = default;
  JointSample(std::vector<double> y, std::vector<double> x, std::size_t dim);

  // Builds rows from covariates without intercept, prepending the 1.
  static JointSample with_intercept(std::span<const double> y,
                                    std::span<const std::vector<double>> covariates);

  std::size_t size() const { return y_.size(); }
  std::size_t dim() const { return dim_; }
  double y(std::size_t row) const { return y_[row]; }
  std::span<const double> x(std::size_t row) const { return {x_.data() + row * dim_, dim_}; }
  std::span<const double> ys() const { return y_; }
  std::span<const double> xs() const { return x_; }

  JointSample shifted(double delta) const;

 private:
  std::vector<double> y_;
  std::vector<double> x_;
  std::size_t dim_ = 0;
};

enum class ModelFamily { normal, exponential, empirical };

struct NormalModel {
  double mu;
  double sigma;
};

// shift + Exp(rate); fitted models always have shift 0.
struct ExponentialModel {
  double rate;
  double shift = 0.0;
};

// shift + scale * ChiSquare(dof); only used as a known generator.
struct ScaledChiSquareModel {
  double dof;
  double scale;
  double shift = 0.0;
};

/// Sorted distinct atoms with positive weights summing to 1.
struct EmpiricalScalar {
  std::vector<double> atoms;
  std::vector<double> weights;
};

struct EmpiricalJoint {
  JointSample rows;
};

enum class Provenance { fitted, explicit_model };

class InControlModel {
 public:
  using Kind =
      std::variant<NormalModel, ExponentialModel, ScaledChiSquareModel, EmpiricalScalar, EmpiricalJoint>;

  static InControlModel normal(double mu, double sigma);
  static InControlModel exponential(double rate, double shift = 0.0);
  static InControlModel scaled_chi_square(double dof, double scale, double shift = 0.0);
  // Merges equal atoms and normalises weights.
  static InControlModel empirical(std::span<const double> values, std::span<const double> weights);
  static InControlModel empirical_joint(JointSample rows);

  const Kind& kind() const { return kind_; }
  Provenance provenance() const { return provenance_; }
  std::optional<std::size_t> sample_size() const { return sample_size_; }

  bool is_scalar() const { return !std::holds_alternative<EmpiricalJoint>(kind_); }
  bool is_parametric() const;

  // Law of the scalar observations; throws for joint models.
  LawPtr law() const;
  // Location shift by delta (the response for joint models).
  InControlModel shifted(double delta) const;

  InControlModel with_fit_info(std::size_t n) const;

  // Moments of the law (population moments for empirical measures).
  double mean() const;
  double sd() const;

 private:
  explicit InControlModel(Kind kind) : kind_(std::move(kind)) {}

  Kind kind_;
  Provenance provenance_ = Provenance::explicit_model;
  std::optional<std::size_t> sample_size_;
};

struct MeanSd {
  double mu;
  double sigma;
};

struct Rate {
  double lambda;
};

struct RegressionCoeffs {
  std::vector<double> beta;
};

using ChartParams = std::variant<MeanSd, Rate, RegressionCoeffs>;

InControlModel fit_model(ModelFamily family, const Sample& sample);
InControlModel fit_joint_model(JointSample rows);

double model_cdf(const InControlModel& model, double x);

Sample sample_from(const InControlModel& model, std::size_t count, RngStream& rng);
JointSample sample_rows(const EmpiricalJoint& model, std::size_t count, RngStream& rng);

struct ChartSpec;

ChartParams extract_params(const InControlModel& model, const ChartSpec& chart);

}  // namespace spcboot
