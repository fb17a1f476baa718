#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "oracles.hpp"
#include "spcboot/chart.hpp"
#include "spcboot/error.hpp"
#include "spcboot/laws.hpp"
#include "spcboot/markov.hpp"
#include "spcboot/perf.hpp"

using namespace spcboot;

namespace {

UpdateDistribution normal_update(double mu, double sigma = 1.0) {
  return UpdateDistribution::closed_form(std::make_shared<NormalLaw>(mu, sigma));
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::invalid_argument;
}

const MarkovConfig markov75{};

}  // namespace

TEST_CASE("Shewhart exceedance probabilities") {
  const ChartSpec shewhart = ChartSpec::shewhart();
  const MeanSd standard{0.0, 1.0};
  CHECK(std::abs(shewhart_exceedance(shewhart, InControlModel::normal(0.0, 1.0), standard, 3.0) -
                 oracle::phi_upper(3.0)) <= 1e-14);
  CHECK(shewhart_exceedance(shewhart, InControlModel::normal(1.0, 2.0), standard, 3.0) ==
        doctest::Approx(oracle::phi_upper(1.0)).epsilon(1e-13));
  const double atoms[] = {0.0, 4.0};
  const double weights[] = {1.0, 1.0};
  CHECK(shewhart_exceedance(shewhart, InControlModel::empirical(atoms, weights), standard, 3.0) == 0.5);
  CHECK(shewhart_exceedance(shewhart, InControlModel::empirical(atoms, weights), standard, 4.0) == 0.0);
  CHECK(shewhart_exceedance(ChartSpec::shewhart(true), InControlModel::normal(0.0, 1.0), standard, 3.0) ==
        doctest::Approx(2.0 * oracle::phi_upper(3.0)).epsilon(1e-13));
  // far tail stays accurate
  CHECK(shewhart_exceedance(shewhart, InControlModel::normal(0.0, 1.0), standard, 9.0) ==
        doctest::Approx(oracle::phi_upper(9.0)).epsilon(1e-12));
}

TEST_CASE("Shewhart measures from p") {
  CHECK(shewhart_measure(0.01, PerfMeasure::arl(3.0)) == doctest::Approx(100.0));
  const double p = oracle::phi_upper(3.0);
  CHECK(shewhart_measure(p, PerfMeasure::hit(3.0, 100)) ==
        doctest::Approx(1.0 - std::pow(1.0 - p, 100)).epsilon(1e-12));
  CHECK(shewhart_measure(p, PerfMeasure::hit(3.0, 100)) == doctest::Approx(0.1264).epsilon(1e-3));
  CHECK(code_of([] { shewhart_measure(0.0, PerfMeasure::arl(3.0)); }) == ErrorCode::zero_exceedance);
}

TEST_CASE("Shewhart measures through eval_measure") {
  const ChartSpec shewhart = ChartSpec::shewhart();
  const InControlModel model = InControlModel::normal(0.0, 1.0);
  const MeanSd params{0.0, 1.0};
  const EvalConfig cfg;
  CHECK(eval_measure(shewhart, model, params, PerfMeasure::arl(3.0), cfg) ==
        doctest::Approx(1.0 / oracle::phi_upper(3.0)).epsilon(1e-12));
  CHECK(eval_measure(shewhart, model, params, PerfMeasure::arl(3.0), cfg) == doctest::Approx(740.8).epsilon(1e-4));

  // p = 1 - 0.95^(1/100), inverted through the upper tail
  const double target = 1.0 - std::pow(0.95, 0.01);
  const double c = oracle::solve_decreasing(oracle::phi_upper, target, 0.0, 10.0);
  const double c_hit = eval_measure(shewhart, model, params, PerfMeasure::c_hit(100, 0.05), cfg);
  CHECK(c_hit == doctest::Approx(c).epsilon(1e-9));
  CHECK(c_hit == doctest::Approx(3.28341).epsilon(1e-5));

  const double c_arl = eval_measure(shewhart, model, params, PerfMeasure::c_arl(740.0), cfg);
  CHECK(c_arl == doctest::Approx(oracle::solve_decreasing(oracle::phi_upper, 1.0 / 740.0, 0.0, 10.0)).epsilon(1e-9));
}

TEST_CASE("Shewhart thresholds for empirical models") {
  const double atoms[] = {-1.0, 0.0, 1.0, 2.0};
  const double weights[] = {0.25, 0.25, 0.25, 0.25};
  const InControlModel m = InControlModel::empirical(atoms, weights);
  const MeanSd params{0.0, 1.0};
  const ChartSpec chart = ChartSpec::shewhart();
  // p(c) = 0.25 for c in [1, 2), so the smallest c with p <= 0.3 is 1
  CHECK(shewhart_threshold(chart, m, params, 0.3) == doctest::Approx(1.0));
  CHECK(code_of([&] { shewhart_threshold(chart, m, params, 0.1); }) == ErrorCode::target_unattainable);
}

TEST_CASE("CUSUM thresholds for the standard chart") {
  const UpdateDistribution upd = normal_update(-0.5);
  const double c = invert_threshold(upd, PerfMeasure::c_arl(100.0), markov75);
  CHECK(c == doctest::Approx(2.84).epsilon(0.02 / 2.84));
  CHECK(arl_markov(upd, c, markov75) >= 100.0);

  const double log_c = eval_measure(ChartSpec::cusum_mean_shift(1.0), InControlModel::normal(0.0, 1.0),
                                    MeanSd{0.0, 1.0}, PerfMeasure::c_arl(100.0, Transform::log), EvalConfig{});
  CHECK(std::abs(std::exp(log_c) - 2.84) <= 0.02);

  const double ch = invert_threshold(upd, PerfMeasure::c_hit(100, 0.05), markov75);
  const double hit = hit_markov(upd, ch, 100, markov75);
  CHECK(hit >= 0.0495);
  CHECK(hit <= 0.0505);
  const auto mc = oracle::cusum_hit(
      [](std::mt19937_64& rng) { return std::normal_distribution<double>(-0.5, 1.0)(rng); }, ch, 100, 100000, 3);
  CHECK(std::abs(mc.mean - 0.05) <= 3.0 * mc.se + 0.001);
}

TEST_CASE("deterministic drift") {
  const UpdateDistribution upd = UpdateDistribution::point_mass(1.0);
  const double c = invert_threshold(upd, PerfMeasure::c_arl(3.0), markov75);
  CHECK(arl_markov(upd, c, markov75) >= 3.0);
  CHECK(arl_markov(upd, c - 1e-6, markov75) < 3.0);
  CHECK(c >= 2.0 - 1e-6);
  CHECK(c <= 3.0);
}

TEST_CASE("inversion is consistent for random laws") {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    const UpdateDistribution upd = normal_update(-0.1 - 0.9 * u(rng), 0.5 + u(rng));
    const double gamma = 20.0 + 480.0 * u(rng);
    const double c = invert_threshold(upd, PerfMeasure::c_arl(gamma), markov75);
    CHECK(arl_markov(upd, c, markov75) >= gamma);
    CHECK(arl_markov(upd, c - 1e-4, markov75) < gamma * (1.0 + 5e-3));
    // a hint near the root gives the same threshold
    const double hinted = invert_threshold(upd, PerfMeasure::c_arl(gamma), markov75, c * 1.3);
    CHECK(hinted == doctest::Approx(c).epsilon(2e-6));
  }
}

TEST_CASE("transforms") {
  CHECK(apply_transform(Transform::logit, 0.5) == 0.0);
  CHECK(apply_transform(Transform::log, std::exp(1.5)) == doctest::Approx(1.5));
  for (double v : {0.01, 0.3, 0.9}) {
    CHECK(inverse_transform(Transform::logit, apply_transform(Transform::logit, v)) == doctest::Approx(v));
    CHECK(inverse_transform(Transform::log, apply_transform(Transform::log, v)) == doctest::Approx(v));
  }
  CHECK(code_of([] { apply_transform(Transform::log, -1.0); }) == ErrorCode::transform_domain);
  CHECK(code_of([] { apply_transform(Transform::logit, 1.0); }) == ErrorCode::transform_domain);
  CHECK_THROWS_AS(PerfMeasure::arl(3.0, Transform::logit), Error);
  CHECK_THROWS_AS(PerfMeasure::hit(3.0, 10, Transform::log), Error);
  CHECK_THROWS_AS(PerfMeasure::c_arl(1.0), Error);
  CHECK_THROWS_AS(PerfMeasure::c_hit(0, 0.05), Error);
  CHECK(PerfMeasure::c_arl(100.0, Transform::log).describe() == "log(c_ARL(gamma=100))");
}

TEST_CASE("Monte Carlo estimators") {
  const UpdateDistribution upd = normal_update(-0.5);
  McConfig mc;
  mc.runs = 20000;
  mc.seed = 9;
  const McResult arl = arl_monte_carlo(upd, 2.84, mc);
  CHECK(std::abs(arl.estimate - arl_markov(upd, 2.84, markov75)) <= 3.0 * arl.std_error + 0.5);
  CHECK(arl.truncated == 0);
  const McResult hit = hit_monte_carlo(upd, 3.0, 100, mc);
  CHECK(std::abs(hit.estimate - hit_markov(upd, 3.0, 100, markov75)) <= 3.0 * hit.std_error + 0.002);

  mc.workers = 3;
  const McResult again = arl_monte_carlo(upd, 2.84, mc);
  CHECK(again.estimate == arl.estimate);

  McConfig capped;
  capped.runs = 1000;
  capped.horizon_cap = 50;
  CHECK(code_of([&] { arl_monte_carlo(UpdateDistribution::point_mass(-1.0), 1.0, capped); }) ==
        ErrorCode::truncated_runs);
}
