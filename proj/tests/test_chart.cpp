#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "spcboot/chart.hpp"
#include "spcboot/error.hpp"

using namespace spcboot;

TEST_CASE("scaled CUSUM on standard normal data has N(-0.5, 1) increments") {
  const UpdateDistribution u = update_distribution(ChartSpec::cusum_mean_shift(1.0), InControlModel::normal(0.0, 1.0),
                                                   MeanSd{0.0, 1.0});
  REQUIRE_FALSE(u.is_discrete());
  for (double x = -6.0; x <= 6.0; x += 0.25) CHECK(u.cdf(x) == doctest::Approx(oracle::phi(x + 0.5)).epsilon(1e-13));
  CHECK(u.mean() == doctest::Approx(-0.5));
}

TEST_CASE("empirical model gives discrete increments") {
  const double atoms[] = {0.0, 1.0};
  const double weights[] = {1.0, 1.0};
  const UpdateDistribution u = update_distribution(
      ChartSpec::cusum_mean_shift(1.0), InControlModel::empirical(atoms, weights), MeanSd{0.5, 0.5});
  REQUIRE(u.is_discrete());
  CHECK(u.atoms().atoms == std::vector<double>{-2.0, 0.0});
  CHECK(u.atoms().weights[0] == doctest::Approx(0.5));
  CHECK(u.atoms().weights[1] == doctest::Approx(0.5));
  CHECK(u.cdf(-2.0) == doctest::Approx(0.5));
  CHECK(u.cdf_left(-2.0) == 0.0);
}

TEST_CASE("empirical increments have at most n atoms") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z;
  std::vector<double> xs(40);
  for (double& x : xs) x = std::round(4.0 * z(rng)) / 4.0;
  const InControlModel m = fit_model(ModelFamily::empirical, Sample(xs));
  const ChartSpec chart = ChartSpec::cusum_mean_shift(1.0);
  const UpdateDistribution u = update_distribution(chart, m, extract_params(m, chart));
  CHECK(u.atoms().atoms.size() <= xs.size());
  CHECK(u.atoms().atoms.size() == std::get<EmpiricalScalar>(m.kind()).atoms.size());
  CHECK(std::is_sorted(u.atoms().atoms.begin(), u.atoms().atoms.end()));
  CHECK(u.atoms().cumulative.back() == doctest::Approx(1.0));
}

TEST_CASE("exponential LLR increment law") {
  const ChartSpec chart = ChartSpec::cusum_exponential_llr(2.0);
  const UpdateDistribution u = update_distribution(chart, InControlModel::exponential(1.0), Rate{1.0});
  CHECK(u.mean() == doctest::Approx(0.5 - std::log(2.0)));
  // -log 2 + X / 2 with X ~ Exp(1)
  for (double x : {-0.6, -0.2, 0.0, 0.5, 2.0})
    CHECK(u.cdf(x) == doctest::Approx(1.0 - std::exp(-2.0 * (x + std::log(2.0)))).epsilon(1e-12));
  RngStream rng(4);
  double sum = 0.0;
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) sum += u.sample(rng);
  CHECK(std::abs(sum / draws - (0.5 - std::log(2.0))) < 6.0 * 0.5 / std::sqrt(double(draws)));
  CHECK(scalar_increment(chart, Rate{1.0}, 1.0) == doctest::Approx(0.5 - std::log(2.0)));
  CHECK_THROWS_AS(ChartSpec::cusum_exponential_llr(1.0), Error);
}

TEST_CASE("hand-computed alarms") {
  const double one[] = {2.0};
  const ChartPath p = run_chart(ChartSpec::cusum_mean_shift(1.0, Scaling::unscaled), MeanSd{0.0, 5.0}, 1.0, one);
  CHECK(p.alarm_time == 1u);
  CHECK(p.values == std::vector<double>{0.0, 1.5});

  const double three[] = {1.0, 2.0, 3.5};
  CHECK(run_chart(ChartSpec::shewhart(), MeanSd{0.0, 1.0}, 3.0, three).alarm_time == 3u);
  // Shewhart needs a strict exceedance, CUSUM alarms on equality
  const double tie[] = {3.0};
  CHECK_FALSE(run_chart(ChartSpec::shewhart(), MeanSd{0.0, 1.0}, 3.0, tie).alarm_time);
  const double tie2[] = {1.5};
  CHECK(run_chart(ChartSpec::cusum_mean_shift(1.0, Scaling::unscaled), MeanSd{0.0, 1.0}, 1.0, tie2).alarm_time == 1u);
  const double neg[] = {-3.5};
  CHECK(run_chart(ChartSpec::shewhart(true), MeanSd{0.0, 1.0}, 3.0, neg).alarm_time == 1u);
}

TEST_CASE("scaled chart alarms with the unscaled one at threshold c * sigma") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int s = 0; s < 100; ++s) {
    const double mu = 2.0 * u(rng) - 1.0;
    const double sigma = 0.25 + 2.0 * u(rng);
    std::vector<double> stream(3000);
    for (double& x : stream) x = mu + sigma * (z(rng) + 0.3);
    const double c = 1.0 + 4.0 * u(rng);
    const MeanSd params{mu, sigma};
    const auto scaled = run_chart(ChartSpec::cusum_mean_shift(1.0, Scaling::scaled), params, c, stream);
    const auto unscaled =
        run_chart(ChartSpec::cusum_mean_shift(1.0, Scaling::unscaled), params, c * sigma, stream);
    CHECK(scaled.alarm_time == unscaled.alarm_time);
  }
}

TEST_CASE("CUSUM paths stay nonnegative and raising c never advances the alarm") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> z;
  for (int s = 0; s < 50; ++s) {
    std::vector<double> stream(500);
    for (double& x : stream) x = z(rng) + 0.2;
    std::size_t previous = 0;
    for (double c = 0.5; c < 8.0; c += 0.5) {
      const auto p = run_chart(ChartSpec::cusum_mean_shift(1.0), MeanSd{0.0, 1.0}, c, stream);
      CHECK(p.values.front() == 0.0);
      for (double v : p.values) CHECK(v >= 0.0);
      const std::size_t t = p.alarm_time.value_or(stream.size() + 1);
      CHECK(t >= previous);
      previous = t;
      if (p.alarm_time) {
        CHECK(p.values.size() == *p.alarm_time + 1);
        CHECK(p.values.back() >= c);
      }
    }
  }
}

TEST_CASE("streaming state follows run_chart") {
  const double stream[] = {0.3, 1.9, -0.4, 2.2, 2.5, 0.1};
  const ChartSpec chart = ChartSpec::cusum_mean_shift(1.0);
  const auto path = run_chart(chart, MeanSd{0.1, 1.2}, 3.0, stream);
  ChartState state(chart, MeanSd{0.1, 1.2}, 3.0);
  for (std::size_t t = 0; t < path.values.size() - 1; ++t) {
    const bool alarm = state.push(stream[t]);
    CHECK(state.statistic() == path.values[t + 1]);
    CHECK(alarm == (path.alarm_time == t + 1));
  }
}

TEST_CASE("regression state rejects a row of the wrong dimension") {
  ChartState state(ChartSpec::cusum_linreg(1.0), RegressionCoeffs{{0.0, 1.0}}, 5.0);
  const double x[] = {1.0, 2.0};
  CHECK_FALSE(state.push(2.0, x));
  const double bad[] = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS(state.push(2.0, bad), Error);
}

TEST_CASE("discrete update construction") {
  const double atoms[] = {1.0, -1.0, 1.0, 3.0};
  const double weights[] = {1.0, 1.0, 1.0, 0.0};
  const UpdateDistribution u = UpdateDistribution::discrete(atoms, weights);
  CHECK(u.atoms().atoms == std::vector<double>{-1.0, 1.0});
  CHECK(u.atoms().weights[1] == doctest::Approx(2.0 / 3.0));
  CHECK(UpdateDistribution::point_mass(2.0).cdf(2.0) == 1.0);
  CHECK(UpdateDistribution::point_mass(2.0).cdf_left(2.0) == 0.0);
}
