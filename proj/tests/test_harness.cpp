#include <doctest.h>

#include <cmath>
#include <random>

#include "spcboot/error.hpp"
#include "spcboot/harness.hpp"
#include "spcboot/regression.hpp"

using namespace spcboot;

namespace {

struct Row {
  double x1, x2, x3, eps;
};

Row draw(std::mt19937_64& rng) {
  std::bernoulli_distribution b(0.4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z;
  const double x1 = b(rng) ? 1.0 : 0.0;
  const double x2 = u(rng);
  const double x3 = z(rng);
  return {x1, x2, x3, z(rng)};
}

}  // namespace

TEST_CASE("generator names") {
  for (Generator g : {Generator::normal, Generator::exponential, Generator::chi_square, Generator::linear_model,
                      Generator::logistic_model})
    CHECK(parse_generator(generator_name(g)) == g);
  CHECK_THROWS_AS(parse_generator("cauchy"), Error);
}

TEST_CASE("scalar generators have unit variance") {
  for (Generator g : {Generator::normal, Generator::exponential, Generator::chi_square}) {
    const auto p = make_process(g);
    const auto* s = dynamic_cast<const ScalarProcess*>(p.get());
    REQUIRE(s != nullptr);
    CHECK(s->truth().sd() == doctest::Approx(1.0));
  }
}

TEST_CASE("linear-model increment law matches simulation") {
  const double beta[] = {0.1, 0.8, 1.2, 0.9};
  const double delta = 1.0;
  const double shift = 0.3;
  const LawPtr law = LinearModelProcess::increment_law(beta, delta, shift);
  std::mt19937_64 rng(14);
  const int draws = 200000;
  std::vector<double> inc(draws);
  for (double& v : inc) {
    const Row r = draw(rng);
    const double y = r.x1 + r.x2 + r.x3 + r.eps + shift;
    const double x[] = {1.0, r.x1, r.x2, r.x3};
    v = linreg_increment(y, x, beta, delta);
  }
  std::sort(inc.begin(), inc.end());
  for (double t = -4.0; t <= 3.0; t += 0.5) {
    const double frac =
        static_cast<double>(std::upper_bound(inc.begin(), inc.end(), t) - inc.begin()) / static_cast<double>(draws);
    CHECK(std::abs(frac - law->cdf(t)) <= 0.006);
  }
  double mean = 0.0;
  for (double v : inc) mean += v;
  CHECK(law->mean() == doctest::Approx(mean / draws).epsilon(0.02));
}

TEST_CASE("logistic-model increment law matches simulation") {
  const LogisticModelProcess process(4000, 9);
  const double beta[] = {0.1, 0.9, 1.1, 0.95};
  const double delta = 1.0;
  const UpdateDistribution law = process.increment_law(beta, delta, 0.0);
  REQUIRE(law.is_discrete());
  CHECK(law.atoms().cumulative.back() == doctest::Approx(1.0));

  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int draws = 100000;
  double sum = 0.0;
  double sum2 = 0.0;
  for (int i = 0; i < draws; ++i) {
    const Row r = draw(rng);
    const double eta = r.x1 + r.x2 + r.x3;
    const double y = u(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
    const double x[] = {1.0, r.x1, r.x2, r.x3};
    const double v = logistic_llr_increment(y, x, beta, delta);
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / draws;
  const double se = std::sqrt((sum2 / draws - mean * mean) / draws);
  // the law averages over a finite covariate sample, so allow for that as well
  CHECK(std::abs(law.mean() - mean) <= 4.0 * se + 0.01);
}

TEST_CASE("experiment setup") {
  ExperimentSpec spec;
  CHECK(spec.boot.B == 500);
  CHECK(spec.replications == 500);
  CHECK_NOTHROW(spec.validate());
  const auto rows = coverage_measures(spec);
  REQUIRE(rows.size() == 8);
  CHECK(rows[1].describe() == "log(ARL(c=3))");
  CHECK(rows[3].transform == Transform::logit);
  CHECK(rows[7].base == BaseMeasure::c_hit);

  spec.replications = 99;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.replications = 100;
  spec.n = 9;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.n = 50;
  spec.generator = Generator::linear_model;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.boot.scheme = Scheme::nonparametric;
  CHECK_NOTHROW(spec.validate());
  CHECK(experiment_chart(spec).is_regression());
}

TEST_CASE("quantile summaries") {
  std::vector<double> v;
  for (int i = 1; i <= 1000; ++i) v.push_back(1001 - i);
  const QuantileSummary q = summarize_quantiles(v);
  CHECK(q.quantiles[0] == 25.0);
  CHECK(q.quantiles[3] == 500.0);
  CHECK(q.quantiles[6] == 975.0);
  CHECK(q.mean == doctest::Approx(500.5));
  CHECK(q.count == 1000);
  for (int i = 1; i < 7; ++i) CHECK(q.quantiles[i] >= q.quantiles[i - 1]);
}

TEST_CASE("conditional ARL experiment is reproducible") {
  ExperimentSpec spec;
  spec.n = 100;
  spec.replications = 100;
  spec.boot.B = 100;
  spec.seed = 3;
  const ConditionalArlReport a = run_conditional_arl_experiment(spec);
  REQUIRE(a.records.size() == 100);
  CHECK(a.failed == 0);
  for (const auto& r : a.records) {
    CHECK(r.ok);
    // adjustment raises the threshold when the pivot quantile is negative
    CHECK((r.c_adjusted > r.c_unadjusted) == (r.p_star < 0.0));
    CHECK(r.arl_out_adjusted < r.arl_in_adjusted);
  }
  CHECK(a.guarantee_fraction() > 0.75);
  CHECK(a.unadjusted_fraction_below(100.0) > 0.3);

  spec.boot.workers = 2;
  const ConditionalArlReport b = run_conditional_arl_experiment(spec);
  for (std::size_t i = 0; i < a.records.size(); ++i) CHECK(a.records[i].c_adjusted == b.records[i].c_adjusted);
}
