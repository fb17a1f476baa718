#include "spcboot/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "spcboot/bootstrap.hpp"
#include "spcboot/chart.hpp"
#include "spcboot/error.hpp"
#include "spcboot/harness.hpp"
#include "spcboot/io.hpp"
#include "spcboot/perf.hpp"

namespace spcboot {

namespace {

struct Options {
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::string out_dir = ".";
  std::string scheme = "parametric";
  double alpha = 0.1;
  int B = 0;  // 0 picks 1000 for calibrate/evaluate and 500 for experiments
  int grid = 75;
  bool richardson = false;

  std::string chart = "cusum";
  double delta = 1.0;
  std::string scaling = "scaled";
  bool two_sided = false;
  std::string family = "auto";

  std::string measure = "c-arl";
  std::string transform = "auto";
  double threshold = 0.0;
  double gamma = 100.0;
  double beta = 0.05;
  long horizon = 100;
  long mc_runs = 0;

  std::string data;
  std::string calibration;
  double mu = 0.0;
  double sigma = 1.0;
  double rate = 1.0;
  std::vector<double> coefficients;
  bool keep_going = false;

  std::string experiment;
  std::string generator = "normal";
  std::size_t n = 500;
  long replications = 500;
};

// Tracks which step is running so failures can say where they happened.
struct Stage {
  std::string name = "configuration";
};

Scheme parse_scheme(const std::string& s) {
  if (s == "parametric") return Scheme::parametric;
  if (s == "nonparametric") return Scheme::nonparametric;
  fail(ErrorCode::invalid_argument, "unknown scheme '" + s + "'");
}

Scaling parse_scaling(const std::string& s) {
  if (s == "scaled") return Scaling::scaled;
  if (s == "unscaled") return Scaling::unscaled;
  if (s == "standardized") return Scaling::standardized;
  fail(ErrorCode::invalid_argument, "unknown scaling '" + s + "'");
}

const char* scaling_name(Scaling s) {
  switch (s) {
    case Scaling::scaled:
      return "scaled";
    case Scaling::unscaled:
      return "unscaled";
    case Scaling::standardized:
      return "standardized";
  }
  return "?";
}

ChartSpec build_chart(const std::string& name, double delta, const std::string& scaling, bool two_sided) {
  if (name == "cusum") return ChartSpec::cusum_mean_shift(delta, parse_scaling(scaling));
  if (name == "shewhart") return ChartSpec::shewhart(two_sided);
  if (name == "cusum-exp") return ChartSpec::cusum_exponential_llr(delta);
  if (name == "linreg") return ChartSpec::cusum_linreg(delta);
  if (name == "logistic") return ChartSpec::cusum_logistic_llr(delta);
  fail(ErrorCode::invalid_argument, "unknown chart '" + name + "'");
}

Transform parse_transform(const std::string& s, BaseMeasure base, bool calibrating) {
  if (s == "identity") return Transform::identity;
  if (s == "log") return Transform::log;
  if (s == "logit") return Transform::logit;
  if (s == "auto") {
    if (!calibrating) return Transform::identity;
    return base == BaseMeasure::hit ? Transform::logit : Transform::log;
  }
  fail(ErrorCode::invalid_argument, "unknown transform '" + s + "'");
}

PerfMeasure build_measure(const Options& o, bool calibrating) {
  BaseMeasure base;
  if (o.measure == "arl")
    base = BaseMeasure::arl;
  else if (o.measure == "hit")
    base = BaseMeasure::hit;
  else if (o.measure == "c-arl")
    base = BaseMeasure::c_arl;
  else if (o.measure == "c-hit")
    base = BaseMeasure::c_hit;
  else
    fail(ErrorCode::invalid_argument, "unknown measure '" + o.measure + "'");
  const Transform t = parse_transform(o.transform, base, calibrating);
  switch (base) {
    case BaseMeasure::arl:
      return PerfMeasure::arl(o.threshold, t);
    case BaseMeasure::hit:
      return PerfMeasure::hit(o.threshold, o.horizon, t);
    case BaseMeasure::c_arl:
      return PerfMeasure::c_arl(o.gamma, t);
    case BaseMeasure::c_hit:
      return PerfMeasure::c_hit(o.horizon, o.beta, t);
  }
  fail(ErrorCode::invalid_argument, "unknown measure");
}

ModelFamily fit_family(const Options& o, const ChartSpec& chart, Scheme scheme) {
  if (o.family == "normal") return ModelFamily::normal;
  if (o.family == "exponential") return ModelFamily::exponential;
  if (o.family == "empirical") return ModelFamily::empirical;
  if (o.family != "auto") fail(ErrorCode::invalid_argument, "unknown family '" + o.family + "'");
  if (scheme == Scheme::nonparametric) return ModelFamily::empirical;
  return std::holds_alternative<CusumExponentialLlr>(chart.family) ? ModelFamily::exponential : ModelFamily::normal;
}

const char* family_name(ModelFamily f) {
  switch (f) {
    case ModelFamily::normal:
      return "normal";
    case ModelFamily::exponential:
      return "exponential";
    case ModelFamily::empirical:
      return "empirical";
  }
  return "?";
}

const char* chart_name(const ChartSpec& chart) {
  return std::visit(
      [](const auto& f) -> const char* {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ShewhartStandardized>) return "shewhart";
        if constexpr (std::is_same_v<T, CusumMeanShift>) return "cusum";
        if constexpr (std::is_same_v<T, CusumExponentialLlr>) return "cusum-exp";
        if constexpr (std::is_same_v<T, CusumLinReg>) return "linreg";
        return "logistic";
      },
      chart.family);
}

const char* measure_name(BaseMeasure b) {
  switch (b) {
    case BaseMeasure::arl:
      return "arl";
    case BaseMeasure::hit:
      return "hit";
    case BaseMeasure::c_arl:
      return "c-arl";
    case BaseMeasure::c_hit:
      return "c-hit";
  }
  return "?";
}

BootstrapConfig build_boot(const Options& o, int default_B) {
  BootstrapConfig cfg;
  cfg.B = o.B > 0 ? o.B : default_B;
  cfg.alpha = o.alpha;
  cfg.scheme = parse_scheme(o.scheme);
  cfg.master_seed = o.seed;
  cfg.workers = o.workers;
  cfg.eval.markov.grid_points = o.grid;
  cfg.eval.markov.richardson = o.richardson;
  if (o.mc_runs > 0) {
    cfg.eval.monte_carlo = true;
    cfg.eval.mc.runs = o.mc_runs;
    cfg.eval.mc.seed = o.seed;
  }
  cfg.validate();
  return cfg;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

// Output location and thread count are left out so reports compare byte for byte.
std::vector<std::pair<std::string, std::string>> resolved_config(const Options& o) {
  const auto d = [](double v) { return format_double(v); };
  const auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  return {{"seed", std::to_string(o.seed)},
          {"scheme", o.scheme},
          {"alpha", d(o.alpha)},
          {"B", std::to_string(o.B)},
          {"grid", std::to_string(o.grid)},
          {"richardson", b(o.richardson)},
          {"chart", o.chart},
          {"delta", d(o.delta)},
          {"scaling", o.scaling},
          {"two-sided", b(o.two_sided)},
          {"family", o.family},
          {"measure", o.measure},
          {"transform", o.transform},
          {"threshold", d(o.threshold)},
          {"gamma", d(o.gamma)},
          {"beta", d(o.beta)},
          {"T", std::to_string(o.horizon)},
          {"mc-runs", std::to_string(o.mc_runs)},
          {"data", o.data},
          {"calibration", o.calibration},
          {"mu", d(o.mu)},
          {"sigma", d(o.sigma)},
          {"rate", d(o.rate)},
          {"coef", join(o.coefficients)},
          {"continue", b(o.keep_going)},
          {"generator", o.generator},
          {"n", std::to_string(o.n)},
          {"R", std::to_string(o.replications)}};
}

void write_header(std::ostream& os, const std::string& command, const Options& o) {
  os << "# " << tool_version << "\n";
  os << "# command: " << command << "\n";
  for (const auto& [key, value] : resolved_config(o)) os << "# config: " << key << "=" << value << "\n";
  os << "# seed: " << o.seed << "\n";
}

std::ofstream open_output(const std::string& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  const std::string path = (std::filesystem::path(dir) / name).string();
  std::ofstream os(path);
  if (!os) fail(ErrorCode::invalid_argument, "cannot write '" + path + "'");
  return os;
}

void write_params(std::ostream& os, const ChartParams& params) {
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, MeanSd>) {
          os << "param.mu=" << format_double(p.mu) << "\n";
          os << "param.sigma=" << format_double(p.sigma) << "\n";
        } else if constexpr (std::is_same_v<T, Rate>) {
          os << "param.rate=" << format_double(p.lambda) << "\n";
        } else {
          os << "param.dim=" << p.beta.size() << "\n";
          for (std::size_t i = 0; i < p.beta.size(); ++i)
            os << "param.beta." << i << "=" << format_double(p.beta[i]) << "\n";
        }
      },
      params);
}

ChartParams read_params(const KeyValues& kv, const ChartSpec& chart, const std::string& source) {
  if (chart.is_regression()) {
    const double dim = require_double(kv, "param.dim", source);
    if (!(dim >= 1.0) || dim != std::floor(dim)) fail(ErrorCode::parse_error, source + ": bad param.dim");
    RegressionCoeffs c;
    for (std::size_t i = 0; i < static_cast<std::size_t>(dim); ++i)
      c.beta.push_back(require_double(kv, "param.beta." + std::to_string(i), source));
    return c;
  }
  if (std::holds_alternative<CusumExponentialLlr>(chart.family)) return Rate{require_double(kv, "param.rate", source)};
  return MeanSd{require_double(kv, "param.mu", source), require_double(kv, "param.sigma", source)};
}

struct Phase1 {
  InControlModel model = InControlModel::normal(0.0, 1.0);
  ChartParams params;
  std::size_t n = 0;
  ModelFamily family = ModelFamily::normal;
};

Phase1 load_phase1(const Options& o, const ChartSpec& chart, Scheme scheme, Stage& stage) {
  if (o.data.empty()) fail(ErrorCode::invalid_argument, "--data is required");
  Phase1 p;
  stage.name = "reading phase-1 data";
  if (chart.is_regression()) {
    JointSample rows = read_joint_csv_file(o.data);
    p.n = rows.size();
    stage.name = "fitting the in-control model";
    p.model = fit_joint_model(std::move(rows));
    p.family = ModelFamily::empirical;
  } else {
    const Sample s = read_scalar_csv_file(o.data);
    p.n = s.size();
    stage.name = "fitting the in-control model";
    p.family = fit_family(o, chart, scheme);
    p.model = fit_model(p.family, s);
  }
  stage.name = "estimating chart parameters";
  p.params = extract_params(p.model, chart);
  stage.name = "checking the phase-1 sample size";
  if (p.n < 10)
    fail(ErrorCode::invalid_argument, "phase-1 data needs at least 10 observations, got " + std::to_string(p.n));
  return p;
}

void write_chart_keys(std::ostream& os, const ChartSpec& chart) {
  os << "chart=" << chart_name(chart) << "\n";
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ShewhartStandardized>) {
          os << "two_sided=" << (f.two_sided ? "true" : "false") << "\n";
        } else {
          os << "delta=" << format_double(f.delta) << "\n";
          if constexpr (std::is_same_v<T, CusumMeanShift>) os << "scaling=" << scaling_name(f.scaling) << "\n";
        }
      },
      chart.family);
}

int cmd_calibrate(const Options& o, std::ostream& out, Stage& stage) {
  const ChartSpec chart = build_chart(o.chart, o.delta, o.scaling, o.two_sided);
  const PerfMeasure measure = build_measure(o, true);
  const BootstrapConfig boot = build_boot(o, 1000);
  const Phase1 p = load_phase1(o, chart, boot.scheme, stage);

  stage.name = "bootstrap adjustment";
  const AdjustmentResult r = adjust(chart, p.model, measure, boot);

  stage.name = "writing the calibration report";
  const bool threshold_measure = measure.is_threshold();
  const double threshold = threshold_measure ? r.bound : measure.threshold;

  std::ostringstream kv;
  write_header(kv, "calibrate", o);
  kv << "tool=" << tool_version << "\n";
  write_chart_keys(kv, chart);
  kv << "measure=" << measure_name(measure.base) << "\n";
  kv << "transform=" << transform_name(measure.transform) << "\n";
  kv << "measure_label=" << measure.describe() << "\n";
  kv << "direction=" << direction_name(r.direction) << "\n";
  kv << "alpha=" << format_double(r.alpha) << "\n";
  kv << "B=" << r.B << "\n";
  kv << "scheme=" << scheme_name(boot.scheme) << "\n";
  kv << "seed=" << o.seed << "\n";
  kv << "grid=" << boot.eval.markov.grid_points << "\n";
  kv << "n=" << p.n << "\n";
  kv << "family=" << family_name(p.family) << "\n";
  write_params(kv, p.params);
  kv << "q_hat=" << format_double(r.q_hat) << "\n";
  kv << "p_star=" << format_double(r.p_star) << "\n";
  kv << "bound=" << format_double(r.bound) << "\n";
  if (threshold_measure) {
    kv << "threshold_unadjusted=" << format_double(r.q_hat_natural) << "\n";
    kv << "threshold_adjusted=" << format_double(r.bound) << "\n";
  }
  kv << "threshold=" << format_double(threshold) << "\n";
  kv << "pivot.min=" << format_double(r.pivot_summary.min) << "\n";
  kv << "pivot.q1=" << format_double(r.pivot_summary.q1) << "\n";
  kv << "pivot.median=" << format_double(r.pivot_summary.median) << "\n";
  kv << "pivot.q3=" << format_double(r.pivot_summary.q3) << "\n";
  kv << "pivot.max=" << format_double(r.pivot_summary.max) << "\n";
  kv << "failures=" << r.failures << "\n";

  std::ostringstream text;
  write_header(text, "calibrate", o);
  text << "Calibration of " << chart.describe() << "\n";
  text << "  phase-1 data        " << o.data << " (n = " << p.n << ", " << family_name(p.family) << " fit)\n";
  text << "  measure             " << measure.describe() << " (" << direction_name(r.direction) << ")\n";
  text << "  bootstrap           " << scheme_name(boot.scheme) << ", B = " << r.B << ", alpha = " << r.alpha
       << ", seed = " << o.seed << ", failures = " << r.failures << "\n";
  if (threshold_measure) {
    text << "  unadjusted threshold " << format_double(r.q_hat_natural) << "\n";
    text << "  adjusted threshold   " << format_double(r.bound) << "\n";
  } else {
    text << "  estimate             " << format_double(r.q_hat_natural) << "\n";
    text << "  confidence bound     " << format_double(r.bound) << "\n";
  }
  text << "  p_star               " << format_double(r.p_star) << "\n";
  text << "  pivot min/q1/median/q3/max " << format_double(r.pivot_summary.min) << " "
       << format_double(r.pivot_summary.q1) << " " << format_double(r.pivot_summary.median) << " "
       << format_double(r.pivot_summary.q3) << " " << format_double(r.pivot_summary.max) << "\n";

  open_output(o.out_dir, "calibration.kv") << kv.str();
  open_output(o.out_dir, "calibration.txt") << text.str();
  out << text.str();
  return exit_ok;
}

int cmd_evaluate(const Options& o, const CLI::App& app, std::ostream& out, Stage& stage) {
  const ChartSpec chart = build_chart(o.chart, o.delta, o.scaling, o.two_sided);
  const PerfMeasure measure = build_measure(o, false);
  const BootstrapConfig boot = build_boot(o, 1000);
  const Phase1 p = load_phase1(o, chart, boot.scheme, stage);
  stage.name = "evaluating the measure";
  const double value = eval_measure(chart, p.model, p.params, measure, boot.eval);

  std::ostringstream kv;
  write_header(kv, "evaluate", o);
  write_chart_keys(kv, chart);
  kv << "measure_label=" << measure.describe() << "\n";
  kv << "engine=" << (chart.is_shewhart() ? "closed-form" : boot.eval.monte_carlo ? "monte-carlo" : "markov") << "\n";
  kv << "grid=" << boot.eval.markov.grid_points << "\n";
  kv << "n=" << p.n << "\n";
  kv << "family=" << family_name(p.family) << "\n";
  write_params(kv, p.params);
  kv << "value=" << format_double(value) << "\n";
  out << kv.str();
  if (app.get_option("--out")->count() > 0) open_output(o.out_dir, "evaluation.kv") << kv.str();
  return exit_ok;
}

int cmd_monitor(const Options& o, const CLI::App& app, std::istream& in, std::ostream& out, Stage& stage) {
  std::optional<ChartSpec> chart;
  ChartParams params;
  double threshold = o.threshold;
  const bool explicit_threshold = app.get_option("--threshold")->count() > 0;

  if (!o.calibration.empty()) {
    stage.name = "reading the calibration report";
    const KeyValues kv = read_key_values_file(o.calibration);
    const std::string& name = require_key(kv, "chart", o.calibration);
    const auto get = [&](const std::string& key, const std::string& fallback) {
      const auto it = kv.find(key);
      return it == kv.end() ? fallback : it->second;
    };
    chart = build_chart(name, name == "shewhart" ? 1.0 : require_double(kv, "delta", o.calibration),
                        get("scaling", "scaled"), get("two_sided", "false") == "true");
    params = read_params(kv, *chart, o.calibration);
    if (!explicit_threshold) threshold = require_double(kv, "threshold", o.calibration);
  } else {
    chart = build_chart(o.chart, o.delta, o.scaling, o.two_sided);
    if (!explicit_threshold) fail(ErrorCode::invalid_argument, "monitor needs --threshold or --calibration");
    if (chart->is_regression()) {
      if (o.coefficients.empty()) fail(ErrorCode::invalid_argument, "regression monitoring needs --coef");
      params = RegressionCoeffs{o.coefficients};
    } else if (std::holds_alternative<CusumExponentialLlr>(chart->family)) {
      params = Rate{o.rate};
    } else {
      params = MeanSd{o.mu, o.sigma};
    }
  }

  stage.name = "monitoring";
  ChartState state(*chart, params, threshold);
  std::ifstream file;
  std::istream* src = &in;
  const std::string source = o.data.empty() || o.data == "-" ? std::string("<stdin>") : o.data;
  if (source != "<stdin>") {
    file.open(o.data);
    if (!file) fail(ErrorCode::parse_error, "cannot open '" + o.data + "'");
    src = &file;
  }

  std::ofstream file_out;
  std::ostream* dst = &out;
  if (app.get_option("--out")->count() > 0) {
    file_out = open_output(o.out_dir, "monitor.csv");
    dst = &file_out;
  }
  write_header(*dst, "monitor", o);
  *dst << "# threshold: " << format_double(threshold) << "\n";
  *dst << "t,statistic,alarm\n";

  std::string raw;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t columns = 0;
  while (std::getline(*src, raw)) {
    ++line_no;
    std::string line = raw;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const std::string where = source + " line " + std::to_string(line_no);
    bool alarm = false;
    if (chart->is_regression()) {
      if (!header_seen) {
        if (line.rfind("y", 0) != 0) fail(ErrorCode::parse_error, where + ": expected header y,x1,...,xd");
        columns = 1 + static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
        header_seen = true;
        continue;
      }
      const std::vector<double> fields = parse_csv_numbers(line, where);
      if (fields.size() != columns)
        fail(ErrorCode::parse_error, where + ": expected " + std::to_string(columns) + " fields, got " +
                                         std::to_string(fields.size()));
      std::vector<double> x{1.0};
      x.insert(x.end(), fields.begin() + 1, fields.end());
      try {
        alarm = state.push(fields[0], x);
      } catch (const Error& e) {
        fail(e.code(), where + ": " + e.what());
      }
    } else {
      if (!header_seen && line == "x") {
        header_seen = true;
        continue;
      }
      header_seen = true;
      const std::vector<double> fields = parse_csv_numbers(line, where);
      if (fields.size() != 1) fail(ErrorCode::parse_error, where + ": expected one value per line");
      alarm = state.push(fields[0]);
    }
    *dst << state.time() << "," << format_double(state.statistic()) << "," << (alarm ? 1 : 0) << "\n";
    if (alarm && !o.keep_going) break;
  }
  return exit_ok;
}

void write_quantile_header(std::ostream& os) {
  for (double p : QuantileSummary::probes) os << ",q" << format_double(100.0 * p);
  os << ",mean,count";
}

void write_quantiles(std::ostream& os, const QuantileSummary& q) {
  for (double v : q.quantiles) os << "," << format_double(v);
  os << "," << format_double(q.mean) << "," << q.count;
}

void write_conditional_records(std::ostream& os, const ConditionalArlReport& r, const std::string& prefix) {
  for (const auto& rec : r.records) {
    os << prefix << rec.replication << "," << (rec.ok ? 1 : 0) << "," << format_double(rec.c_unadjusted) << ","
       << format_double(rec.c_adjusted) << "," << format_double(rec.p_star) << ","
       << format_double(rec.arl_in_unadjusted) << "," << format_double(rec.arl_out_unadjusted) << ","
       << format_double(rec.arl_in_adjusted) << "," << format_double(rec.arl_out_adjusted) << "\n";
  }
}

constexpr const char* record_columns =
    "replication,ok,c_unadjusted,c_adjusted,p_star,arl_in_unadjusted,arl_out_unadjusted,arl_in_adjusted,"
    "arl_out_adjusted";

int cmd_experiment(const Options& o, std::ostream& out, Stage& stage) {
  ExperimentSpec spec;
  spec.generator = parse_generator(o.generator);
  spec.n = o.n;
  spec.replications = o.replications;
  spec.boot = build_boot(o, 500);
  spec.seed = o.seed;
  spec.delta = o.delta;
  spec.scaling = parse_scaling(o.scaling);
  spec.threshold = o.threshold > 0.0 ? o.threshold : 3.0;
  spec.gamma = o.gamma;
  spec.beta = o.beta;
  spec.horizon = o.horizon;

  const std::string name = o.experiment;
  stage.name = "running the " + name + " experiment";
  std::ostringstream replicates;
  std::ostringstream summary;
  write_header(replicates, "experiment " + name, o);
  write_header(summary, "experiment " + name, o);

  if (name == "coverage") {
    const CoverageReport report = run_coverage_experiment(spec);
    summary << "measure,direction,coverage,covered,trials,failed\n";
    replicates << "measure,replication,outcome\n";
    for (const auto& row : report.rows) {
      summary << row.measure.describe() << "," << direction_name(row.direction) << ","
              << format_double(row.coverage()) << "," << row.covered << "," << row.trials << "," << row.failed << "\n";
      for (std::size_t r = 0; r < row.outcomes.size(); ++r)
        replicates << row.measure.describe() << "," << r << "," << static_cast<int>(row.outcomes[r]) << "\n";
      out << row.measure.describe() << " coverage " << format_double(row.coverage()) << "\n";
    }
  } else if (name == "conditional-arl") {
    const ConditionalArlReport report = run_conditional_arl_experiment(spec);
    replicates << record_columns << "\n";
    write_conditional_records(replicates, report, "");
    summary << "statistic,in_unadjusted,out_unadjusted,in_adjusted,out_adjusted\n";
    const QuantileSummary* cols[4] = {&report.in_unadjusted, &report.out_unadjusted, &report.in_adjusted,
                                      &report.out_adjusted};
    for (std::size_t i = 0; i < 7; ++i) {
      summary << "q" << format_double(100.0 * QuantileSummary::probes[i]);
      for (const auto* c : cols) summary << "," << format_double(c->quantiles[i]);
      summary << "\n";
    }
    summary << "mean";
    for (const auto* c : cols) summary << "," << format_double(c->mean);
    summary << "\ncount";
    for (const auto* c : cols) summary << "," << c->count;
    summary << "\n";
    summary << "# guarantee_fraction=" << format_double(report.guarantee_fraction()) << "\n";
    summary << "# unadjusted_below_half_gamma=" << format_double(report.unadjusted_fraction_below(spec.gamma / 2))
            << "\n";
    out << "guarantee fraction " << format_double(report.guarantee_fraction()) << " (failed " << report.failed
        << ")\n";
  } else if (name == "misspecification") {
    const auto blocks = run_misspecification_experiment(spec);
    replicates << "generator,scheme," << record_columns << "\n";
    summary << "generator,scheme,series";
    write_quantile_header(summary);
    summary << ",guarantee_fraction\n";
    for (const auto& b : blocks) {
      const std::string prefix = std::string(generator_name(b.generator)) + "," + scheme_name(b.scheme) + ",";
      write_conditional_records(replicates, b.report, prefix);
      const std::pair<const char*, const QuantileSummary*> series[4] = {
          {"in_unadjusted", &b.report.in_unadjusted},
          {"out_unadjusted", &b.report.out_unadjusted},
          {"in_adjusted", &b.report.in_adjusted},
          {"out_adjusted", &b.report.out_adjusted}};
      for (const auto& [label, q] : series) {
        summary << prefix << label;
        write_quantiles(summary, *q);
        summary << "," << format_double(b.report.guarantee_fraction()) << "\n";
      }
      out << prefix << "guarantee fraction " << format_double(b.report.guarantee_fraction()) << "\n";
    }
  } else {
    fail(ErrorCode::invalid_argument, "unknown experiment '" + name + "'");
  }

  stage.name = "writing experiment output";
  open_output(o.out_dir, name + "_replicates.csv") << replicates.str();
  open_output(o.out_dir, name + "_summary.csv") << summary.str();
  return exit_ok;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Bootstrap-calibrated control chart thresholds", "spcboot"};
  app.set_config("--config", "", "key=value configuration file; command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  app.add_option("--seed", o.seed, "Master random seed");
  app.add_option("--workers", o.workers, "Worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", o.out_dir, "Output directory");
  app.add_option("--scheme", o.scheme, "Bootstrap scheme")->check(CLI::IsMember({"parametric", "nonparametric"}));
  app.add_option("--alpha", o.alpha, "One minus the nominal coverage");
  app.add_option("--B", o.B, "Bootstrap replicates (default 1000, experiments 500)");
  app.add_option("--grid", o.grid, "Markov chain grid points");
  app.add_flag("--richardson", o.richardson, "Extrapolate over a doubled grid");
  app.add_option("--chart", o.chart, "Chart family")
      ->check(CLI::IsMember({"cusum", "shewhart", "cusum-exp", "linreg", "logistic"}));
  app.add_option("--delta", o.delta, "Shift the chart is tuned to detect");
  app.add_option("--scaling", o.scaling, "Mean-shift CUSUM scaling")
      ->check(CLI::IsMember({"scaled", "unscaled", "standardized"}));
  app.add_flag("--two-sided", o.two_sided, "Two-sided Shewhart statistic");
  app.add_option("--family", o.family, "Fitted model family")
      ->check(CLI::IsMember({"auto", "normal", "exponential", "empirical"}));
  app.add_option("--measure", o.measure, "Performance measure")->check(CLI::IsMember({"arl", "hit", "c-arl", "c-hit"}));
  app.add_option("--transform", o.transform, "Scale of the adjustment")
      ->check(CLI::IsMember({"auto", "identity", "log", "logit"}));
  app.add_option("--threshold", o.threshold, "Threshold c for arl/hit, or the monitoring threshold");
  app.add_option("--gamma", o.gamma, "Target in-control ARL for c-arl");
  app.add_option("--beta", o.beta, "Target false-alarm probability for c-hit");
  app.add_option("--T", o.horizon, "Horizon for hit and c-hit");
  app.add_option("--mc-runs", o.mc_runs, "Evaluate CUSUM measures by Monte Carlo with this many runs");
  app.add_option("--data", o.data, "Data file (CSV); '-' reads standard input for monitor");
  app.add_option("--calibration", o.calibration, "Calibration report (.kv) to monitor with");
  app.add_option("--mu", o.mu, "In-control mean for monitor");
  app.add_option("--sigma", o.sigma, "In-control standard deviation for monitor");
  app.add_option("--rate", o.rate, "In-control rate for monitor with cusum-exp");
  app.add_option("--coef", o.coefficients, "Regression coefficients (intercept first) for monitor")->delimiter(',');
  app.add_flag("--continue", o.keep_going, "Keep monitoring after the first alarm");
  app.add_option("--generator", o.generator, "Experiment data generator")
      ->check(CLI::IsMember({"normal", "exponential", "chi-square", "linear-model", "logistic-model"}));
  app.add_option("--n", o.n, "Phase-1 sample size for experiments");
  app.add_option("--R", o.replications, "Experiment replications");

  auto* calibrate = app.add_subcommand("calibrate", "Bootstrap-adjusted threshold or bound from phase-1 data");
  auto* evaluate = app.add_subcommand("evaluate", "Plug-in performance measure from phase-1 data");
  auto* monitor = app.add_subcommand("monitor", "Run a chart over phase-2 observations");
  auto* experiment = app.add_subcommand("experiment", "Run a simulation study");
  experiment->add_option("name", o.experiment, "coverage, conditional-arl or misspecification")
      ->required()
      ->check(CLI::IsMember({"coverage", "conditional-arl", "misspecification"}));
  for (auto* sub : {calibrate, evaluate, monitor, experiment}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return exit_ok;
    }
    err << "spcboot: configuration: " << e.what() << "\n";
    return exit_input_error;
  }

  Stage stage;
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "calibrate") return cmd_calibrate(o, out, stage);
    if (command == "evaluate") return cmd_evaluate(o, app, out, stage);
    if (command == "monitor") return cmd_monitor(o, app, in, out, stage);
    return cmd_experiment(o, out, stage);
  } catch (const Error& e) {
    err << "spcboot " << command << ": " << stage.name << ": " << e.what() << "\n";
    return is_input_error(e.code()) ? exit_input_error : exit_numerical_error;
  } catch (const std::exception& e) {
    err << "spcboot " << command << ": " << stage.name << ": " << e.what() << "\n";
    return exit_numerical_error;
  }
}

}  // namespace spcboot
