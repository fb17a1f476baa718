#include <doctest.h>

#include <cmath>
#include <random>

#include "spcboot/bootstrap.hpp"
#include "spcboot/chart.hpp"
#include "spcboot/error.hpp"
#include "spcboot/laws.hpp"
#include "spcboot/markov.hpp"
#include "spcboot/parallel.hpp"
#include "spcboot/perf.hpp"

using namespace spcboot;

namespace {

constexpr int cases = 1000;

// Discrete laws are left out: with atoms, the midpoint grid moves with c and the
// approximation is only monotone up to grid noise.
UpdateDistribution random_update(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return UpdateDistribution::closed_form(std::make_shared<NormalLaw>(-0.1 - 0.9 * u(rng), 0.4 + 1.2 * u(rng)));
}

}  // namespace

TEST_CASE("geometric identities for Shewhart measures") {
  std::mt19937_64 rng(1001);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < cases; ++k) {
    const double p = std::pow(10.0, -6.0 * u(rng)) * (1.0 - 1e-9);
    const long horizon = 1 + static_cast<long>(1000 * u(rng));
    const double arl = shewhart_measure(p, PerfMeasure::arl(3.0));
    const double hit = shewhart_measure(p, PerfMeasure::hit(3.0, horizon));
    CHECK(std::abs(arl * p - 1.0) <= 1e-12);
    CHECK(std::abs(hit - (1.0 - std::pow(1.0 - p, static_cast<double>(horizon)))) <= 1e-12);
  }
}

TEST_CASE("Markov ARL grows and hit shrinks in c") {
  std::mt19937_64 rng(1002);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MarkovConfig cfg;
  cfg.grid_points = 40;
  int evaluated = 0;
  int refused = 0;
  while (evaluated < cases) {
    const UpdateDistribution upd = random_update(rng);
    const double c1 = 0.2 + 4.0 * u(rng);
    const double c2 = c1 * (1.0 + u(rng));
    const long horizon = 1 + static_cast<long>(100 * u(rng));
    double arl1 = 0.0;
    double arl2 = 0.0;
    try {
      arl1 = arl_markov(upd, c1, cfg);
      arl2 = arl_markov(upd, c2, cfg);
    } catch (const Error& e) {
      // run lengths beyond ~1e12 are refused as numerically singular
      REQUIRE(e.code() == ErrorCode::non_absorbing);
      ++refused;
      continue;
    }
    CHECK(arl1 <= arl2 * (1.0 + 1e-12));
    CHECK(hit_markov(upd, c1, horizon, cfg) >= hit_markov(upd, c2, horizon, cfg) * (1.0 - 1e-12));
    ++evaluated;
  }
  CHECK(refused < cases / 10);
}

TEST_CASE("CUSUM statistics are nonnegative and alarms are monotone in c") {
  std::mt19937_64 rng(1003);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z;
  for (int k = 0; k < cases; ++k) {
    std::vector<double> stream(200);
    const double drift = u(rng) - 0.3;
    for (double& x : stream) x = z(rng) + drift;
    const Scaling scaling = static_cast<Scaling>(k % 3);
    const ChartSpec chart = ChartSpec::cusum_mean_shift(0.2 + 2.0 * u(rng), scaling);
    const MeanSd params{z(rng) * 0.2, 0.5 + u(rng)};
    const double c = 0.5 + 5.0 * u(rng);
    const ChartPath low = run_chart(chart, params, c, stream);
    const ChartPath high = run_chart(chart, params, c * (1.0 + u(rng)), stream);
    bool nonnegative = true;
    for (double v : low.values) nonnegative = nonnegative && v >= 0.0;
    for (double v : high.values) nonnegative = nonnegative && v >= 0.0;
    CHECK(nonnegative);
    CHECK(low.alarm_time.value_or(1000) <= high.alarm_time.value_or(1000));
  }
}

TEST_CASE("results do not depend on the worker count") {
  std::mt19937_64 rng(1004);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z;
  for (int k = 0; k < cases; ++k) {
    std::vector<double> xs(20 + static_cast<int>(80 * u(rng)));
    for (double& x : xs) x = z(rng);
    const InControlModel model = fit_model(ModelFamily::normal, Sample(xs));
    BootstrapConfig cfg;
    cfg.B = 100;
    cfg.master_seed = rng();
    cfg.scheme = k % 2 == 0 ? Scheme::parametric : Scheme::nonparametric;
    const InControlModel source = cfg.scheme == Scheme::parametric
                                      ? model
                                      : fit_model(ModelFamily::empirical, Sample(xs));
    ChartSpec chart = ChartSpec::shewhart();
    PerfMeasure measure = PerfMeasure::hit(1.0 + u(rng), 20);
    if (k % 4 == 1) {
      chart = ChartSpec::cusum_mean_shift(1.0);
      measure = PerfMeasure::arl(1.0 + u(rng));
    }
    const PivotSample serial = pivot_sample(chart, source, measure, cfg);
    cfg.workers = 2 + k % 3;
    const PivotSample threaded = pivot_sample(chart, source, measure, cfg);
    CHECK(serial.values == threaded.values);
  }
}

TEST_CASE("parallel_for stores every index once") {
  for (int k = 0; k < cases; ++k) {
    const std::size_t count = static_cast<std::size_t>(k % 50);
    std::vector<int> hits(count, 0);
    parallel_for(count, 1 + k % 4, [&](std::size_t i) { ++hits[i]; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  }
}
